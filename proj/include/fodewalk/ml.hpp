#pragma once
// Mittag-Leffler evaluation E_{alpha,beta}(z) for alpha in (0,1], real z,
// with partial derivatives d/dalpha (beta held fixed) and d/dz, plus the
// logarithmic derivatives of the sojourn density / survival function that
// the walker consumes as Malliavin weights.

#include <stdexcept>
#include <string>

namespace fodewalk::ml {

struct MlQuery {
  double alpha;
  double beta;
  double z;
};

struct MlValue {
  double value = 0.0;
  double d_alpha = 0.0;  // partial derivative at fixed beta
  double d_z = 0.0;
};

enum class MlKind { Density, Survival };

// Thrown when a quadrature or series fails to converge / overflows.
class EvalError : public std::runtime_error {
public:
  explicit EvalError(const std::string& what) : std::runtime_error(what) {}
};

// E_{alpha,beta}(z); requires alpha in (0,1], beta > 0, z finite.
// Derivatives are only computed when want_derivs is set.
MlValue ml_eval(const MlQuery& q, bool want_derivs);

// d/da log f where f is the Mittag-Leffler sojourn density
// f(tau) = -a tau^{alpha-1} E_{alpha,alpha}(a tau^alpha)  (kind = Density)
// or the survival function E_{alpha}(a tau^alpha)         (kind = Survival).
// Only the E-factor depends on a, so both kinds reduce to
// tau^alpha * E'(a tau^alpha) / E(a tau^alpha).  Requires a < 0, tau > 0.
double ml_log_deriv_rate(double alpha, double a, double tau, MlKind kind);

// Total derivative d/dalpha log E_{alpha,beta(alpha)}(a tau^alpha) where
// beta(alpha) = alpha (Density) or 1 (Survival); includes the movement of
// the argument z = a tau^alpha and, for Density, of the second index.
// The tau^{alpha-1} prefactor of the density is handled by the caller.
double ml_log_deriv_alpha(double alpha, double a, double tau, MlKind kind);

namespace detail {
// Route predicate: the power series is used only when the largest term is
// small enough that double-precision cancellation stays below ~1e-11.
bool series_ok(double alpha, double beta, double z);
// Forced-route entry points for cross-validation in tests.
MlValue eval_series(const MlQuery& q, bool want_derivs);
double eval_quadrature_value(double alpha, double beta, double z);  // z < 0
double rgamma(double x);  // 1/Gamma(x), any real x
}  // namespace detail

}  // namespace fodewalk::ml

#include "fodewalk/ml.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <unordered_map>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/sin_pi.hpp>
#include <boost/math/special_functions/cos_pi.hpp>

#include "fodewalk/rng.hpp"  // mix_seed for the kernel cache hash

namespace fodewalk::ml {
namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;
constexpr double kLn10 = 2.30258509299404568401799145468436;

// Neumaier-compensated accumulator; the alternating series loses up to
// ~3 decimal digits at the route boundary and this keeps the rest.
struct Neum {
  double s = 0.0, c = 0.0;
  void add(double x) {
    double t = s + x;
    if (std::abs(s) >= std::abs(x))
      c += (s - t) + x;
    else
      c += (x - t) + s;
    s = t;
  }
  double get() const { return s + c; }
};

double lgamma_pos(double x) { return boost::math::lgamma(x); }

// ---- per-(alpha,beta) cached coefficient tables ---------------------------

struct Kernel {
  double alpha = 0, beta = 0;
  std::vector<double> lg;   // lgamma(alpha*k + beta)
  std::vector<double> psi;  // digamma(alpha*k + beta)
  void ensure_lg(std::size_t n) {
    while (lg.size() <= n) {
      double x = alpha * static_cast<double>(lg.size()) + beta;
      lg.push_back(lgamma_pos(x));
    }
  }
  void ensure_psi(std::size_t n) {
    while (psi.size() <= n) {
      double x = alpha * static_cast<double>(psi.size()) + beta;
      psi.push_back(boost::math::digamma(x));
    }
  }
};

struct KernelKey {
  std::uint64_t a, b;
  bool operator==(const KernelKey& o) const { return a == o.a && b == o.b; }
};
struct KernelKeyHash {
  std::size_t operator()(const KernelKey& k) const {
    return static_cast<std::size_t>(mix_seed(k.a, k.b));
  }
};

Kernel& kernel_for(double alpha, double beta) {
  thread_local std::unordered_map<KernelKey, Kernel, KernelKeyHash> cache;
  KernelKey key;
  std::memcpy(&key.a, &alpha, 8);
  std::memcpy(&key.b, &beta, 8);
  auto it = cache.find(key);
  if (it == cache.end()) {
    if (cache.size() > 4096) cache.clear();
    it = cache.emplace(key, Kernel{alpha, beta, {}, {}}).first;
  }
  return it->second;
}

enum class Force { Auto, NoSeries };

double value_routed(double alpha, double beta, double z, Force force);

// ---- Gauss-Kronrod 7-15 adaptive quadrature -------------------------------

constexpr double kXgk[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769,
    0.741531185599394, 0.586087235467691, 0.405845151377397,
    0.207784955007898, 0.0};
constexpr double kWgk[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728};
constexpr double kWg[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469};

template <class F>
void gk15(const F& f, double lo, double hi, double& val, double& err) {
  const double mid = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
  const double fc = f(mid);
  double resk = kWgk[7] * fc, resg = kWg[3] * fc;
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    const double f1 = f(mid - dx), f2 = f(mid + dx);
    resk += kWgk[j] * (f1 + f2);
    if (j & 1) resg += kWg[j / 2] * (f1 + f2);
  }
  val = resk * h;
  err = std::abs(resk - resg) * h;
}

template <class F>
double integrate_adaptive(const F& f, std::vector<double> pts, double rel_tol,
                          const char* what) {
  struct Seg {
    double lo, hi, val, err;
  };
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  std::vector<Seg> segs;
  double tot = 0.0, toterr = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    Seg s{pts[i], pts[i + 1], 0, 0};
    gk15(f, s.lo, s.hi, s.val, s.err);
    tot += s.val;
    toterr += s.err;
    segs.push_back(s);
  }
  bool converged = false;
  double best_err = toterr;
  int stale = 0;
  for (int iter = 0; iter < 4000; ++iter) {
    if (toterr <= std::max(rel_tol * std::abs(tot), 1e-290)) {
      converged = true;
      break;
    }
    std::size_t worst = 0;
    for (std::size_t i = 1; i < segs.size(); ++i)
      if (segs[i].err > segs[worst].err) worst = i;
    Seg old = segs[worst];
    if (old.hi - old.lo < 1e-15 * (std::abs(old.lo) + 1.0)) {
      converged = true;  // cannot refine further; accept current estimate
      break;
    }
    double m = 0.5 * (old.lo + old.hi);
    Seg a{old.lo, m, 0, 0}, b{m, old.hi, 0, 0};
    gk15(f, a.lo, a.hi, a.val, a.err);
    gk15(f, b.lo, b.hi, b.val, b.err);
    tot += a.val + b.val - old.val;
    toterr += a.err + b.err - old.err;
    segs[worst] = a;
    segs.push_back(b);
    if (toterr < 0.99 * best_err) {
      best_err = toterr;
      stale = 0;
    } else if (++stale >= 200) {
      converged = true;  // error estimate stuck at the roundoff floor
      break;
    }
  }
  if (!converged && toterr > std::max(rel_tol * std::abs(tot), 1e-290))
    throw EvalError(std::string("quadrature failed to converge: ") + what);
  // deterministic final pass
  double s1 = 0.0;
  for (const auto& s : segs) s1 += s.val;
  return s1;
}

// ---- real-axis integral representation for z < 0, beta in (0,1] -----------
//
// E_{alpha,beta}(z) = int_0^inf K(r) dr with
//   K(r) = g(r) / ((r-a)^2 + b^2),
//   g(r) = (1/(pi*alpha)) r^{(1-beta)/alpha} exp(-r^{1/alpha}) (A r - B),
//   A = sin(pi(1-beta)),  B = z sin(pi(1-beta+alpha)),
//   a = z cos(pi alpha),  b = -z sin(pi alpha).
// For alpha > 1/2 the pole pair sits at Re = a > 0 near the contour; the
// quadratic term g(a) + g'(a)(r-a) over the same denominator is subtracted
// and re-added in closed form (arctan / log antiderivatives).
double quad_base(double alpha, double beta, double z) {
  const double a = z * boost::math::cos_pi(alpha);
  const double b = -z * boost::math::sin_pi(alpha);
  const double s = (1.0 - beta) / alpha;
  const double A = boost::math::sin_pi(1.0 - beta);
  const double B = z * boost::math::sin_pi(1.0 - beta + alpha);
  const double c = 1.0 / (kPi * alpha);
  const double inv_alpha = 1.0 / alpha;

  auto g = [&](double r) {
    return c * std::pow(r, s) * std::exp(-std::pow(r, inv_alpha)) * (A * r - B);
  };

  const bool pole = (a > 0.0) && (std::pow(a, inv_alpha) < 700.0);
  double R = std::max(std::pow(42.0, alpha), 2.0);
  if (pole) R = std::max(R, a + 20.0 * b);

  std::vector<double> pts{0.0, R};
  for (double r = 0.5 * R; r > std::min(0.25, 1e-9 * R); r *= 0.5) {
    pts.push_back(r);
    if (pts.size() > 40) break;
  }
  if (pole) {
    for (double m : {-5.0, -2.0, -1.0, 1.0, 2.0, 5.0}) {
      double r = a + m * b;
      if (r > 0.0 && r < R) pts.push_back(r);
    }
  }

  double closed = 0.0;
  double result;
  if (pole) {
    const double ga = g(a);
    const double w1 = inv_alpha * std::pow(a, inv_alpha - 1.0);
    const double gpa = c * std::exp(-std::pow(a, inv_alpha)) *
                       ((s > 0.0 ? s * std::pow(a, s - 1.0) * (A * a - B) : 0.0) +
                        std::pow(a, s) * A - std::pow(a, s) * (A * a - B) * w1);
    closed = ga * (std::atan2(R - a, b) + std::atan2(a, b)) / b +
             gpa * 0.5 * std::log(((R - a) * (R - a) + b * b) / (a * a + b * b));
    auto f = [&](double r) {
      return (g(r) - ga - gpa * (r - a)) / ((r - a) * (r - a) + b * b);
    };
    // As alpha -> 1 the half-width b collapses and the subtracted numerator
    // is noise-limited near r = a; ask only for what cancellation allows.
    const double tol = std::max(1e-11, 2e-16 / std::min(1.0, b));
    result = integrate_adaptive(f, pts, tol, "ml kernel (pole-subtracted)");
  } else {
    auto f = [&](double r) { return g(r) / ((r - a) * (r - a) + b * b); };
    result = integrate_adaptive(f, pts, 1e-11, "ml kernel");
  }
  return result + closed;
}

// ---- series ---------------------------------------------------------------

// Largest-term estimate deciding whether the power series is safe in doubles.
bool series_ok_impl(double alpha, double beta, double z) {
  if (z >= 0.0) return true;  // single-signed terms, no cancellation
  const double az = -z;
  if (az > 5.0) return false;
  if (az <= 1.0) return true;
  const double p = std::pow(az, 1.0 / alpha);
  if (!(p < 1e15)) return false;
  const double k0 = (p - beta) / alpha;
  if (k0 <= 0.0) return true;
  const double lt = k0 * std::log(az) - lgamma_pos(std::max(alpha * k0 + beta, 1e-300));
  return lt <= 3.0 * kLn10;  // max term below ~1e3 keeps ~12 digits
}

struct SeriesSums {
  double value, kt, kpsi, psum;  // sum t_k, sum k t_k, sum k psi_k t_k, sum psi_k t_k
};

// Shared series engine.  Terms are formed as exp(k ln|z| - lgamma(alpha k + beta))
// so no intermediate power overflows.  Valid for either sign of z; for z > 0 it
// is the only route and may legitimately overflow for large arguments.
SeriesSums series_sums(double alpha, double beta, double z, bool want_kt,
                       bool want_psi) {
  Kernel& K = kernel_for(alpha, beta);
  const double L = (z == 0.0) ? -1e308 : std::log(std::abs(z));
  const bool neg = z < 0.0;
  Neum S, Skt, Skp, Sp;
  double prev = 1e308;
  int small_run = 0;
  const int kmax = neg ? 2000 : 200000;
  for (int k = 0; k < kmax; ++k) {
    K.ensure_lg(static_cast<std::size_t>(k));
    const double lt = static_cast<double>(k) * L - K.lg[static_cast<std::size_t>(k)];
    if (lt > 709.0) throw EvalError("ml series overflow (argument too large)");
    double t = std::exp(lt);
    const double at = t;
    if (neg && (k & 1)) t = -t;
    S.add(t);
    if (want_kt) Skt.add(static_cast<double>(k) * t);
    if (want_psi) {
      K.ensure_psi(static_cast<std::size_t>(k));
      const double pk = K.psi[static_cast<std::size_t>(k)];
      Skp.add(static_cast<double>(k) * pk * t);
      Sp.add(pk * t);
    }
    if (k > 0 && at <= prev && at <= 1e-17 * (std::abs(S.get()) + 1e-300)) {
      if (++small_run >= 2) return {S.get(), Skt.get(), Skp.get(), Sp.get()};
    } else {
      small_run = 0;
    }
    prev = at;
  }
  throw EvalError("ml series did not converge");
}

// ---- alpha == 1 -----------------------------------------------------------

// E_{1,b}(z) = (1/Gamma(b)) int_0^1 exp(z (1 - s^{1/(b-1)})) ds for b in (1,2].
double alpha1_base(double b, double z) {
  const double q = 1.0 / (b - 1.0);
  auto f = [&](double s) { return std::exp(z * (1.0 - std::pow(s, q))); };
  std::vector<double> pts{0.0, 1.0};
  for (double d = 0.5; d > 1e-12; d *= 0.1) pts.push_back(1.0 - d);
  double I = integrate_adaptive(f, pts, 1e-12, "ml exponential-weight kernel");
  return I * detail::rgamma(b);
}

double value_alpha1(double beta, double z, Force force) {
  if (beta == 1.0) return std::exp(z);
  if (z == 0.0) return detail::rgamma(beta);
  if (beta > 0.0 && (z > 0.0 || (force == Force::Auto && series_ok_impl(1.0, beta, z))))
    return series_sums(1.0, beta, z, false, false).value;
  if (beta > 2.0) {
    int m = static_cast<int>(std::ceil(beta - 2.0 - 1e-12));
    double b0 = beta - m;
    double v = value_alpha1(b0, z, force);
    for (int j = m - 1; j >= 0; --j) v = (v - detail::rgamma(beta - (j + 1))) / z;
    return v;
  }
  if (beta <= 1.0) {
    int m = static_cast<int>(std::floor(1.0 - beta)) + 1;  // beta + m in (1,2]
    double v = value_alpha1(beta + m, z, force);
    for (int j = m - 1; j >= 0; --j) v = z * v + detail::rgamma(beta + j);
    return v;
  }
  return alpha1_base(beta, z);
}

// ---- central value router (z < 0, 0 < alpha < 1, any real beta) -----------

double value_neg(double alpha, double beta, double z, Force force) {
  if (beta > 0.0 && force == Force::Auto && series_ok_impl(alpha, beta, z))
    return series_sums(alpha, beta, z, false, false).value;
  if (beta > 1.0) {
    int m = static_cast<int>(std::ceil((beta - 1.0) / alpha - 1e-12));
    double v = value_neg(alpha, beta - m * alpha, z, force);
    for (int j = m - 1; j >= 0; --j)
      v = (v - detail::rgamma(beta - (j + 1) * alpha)) / z;
    return v;
  }
  if (beta <= 0.0) {
    int m = static_cast<int>(std::floor(-beta / alpha)) + 1;  // beta+m*alpha in (0, alpha]
    double v = value_neg(alpha, beta + m * alpha, z, force);
    for (int j = m - 1; j >= 0; --j) v = z * v + detail::rgamma(beta + j * alpha);
    return v;
  }
  return quad_base(alpha, beta, z);
}

double value_routed(double alpha, double beta, double z, Force force) {
  if (z == 0.0) return detail::rgamma(beta);
  if (z > 0.0) return series_sums(alpha, beta, z, false, false).value;
  if (alpha == 1.0) return value_alpha1(beta, z, force);
  return value_neg(alpha, beta, z, force);
}

void check_query(double alpha, double beta, double z) {
  if (!(alpha > 0.0) || !(alpha <= 1.0))
    throw std::domain_error("ml_eval: alpha must lie in (0,1]");
  if (!(beta > 0.0)) throw std::domain_error("ml_eval: beta must be positive");
  if (!std::isfinite(z)) throw std::domain_error("ml_eval: z must be finite");
}

// d/dalpha at fixed beta by finite differences over a route-pinned value map;
// used where the series (term-wise) derivative is unavailable.
double d_alpha_fd(double alpha, double beta, double z) {
  const double h = 1e-6;
  auto f = [&](double ap) { return value_routed(ap, beta, z, Force::NoSeries); };
  if (alpha + h < 1.0) return (f(alpha + h) - f(alpha - h)) / (2.0 * h);
  return (3.0 * f(alpha) - 4.0 * f(alpha - h) + f(alpha - 2.0 * h)) / (2.0 * h);
}

}  // namespace

namespace detail {

double rgamma(double x) {
  if (x > 0.5) return std::exp(-lgamma_pos(x));
  const double s = boost::math::sin_pi(x);
  if (s == 0.0) return 0.0;  // poles of Gamma
  const double mag = lgamma_pos(1.0 - x) + std::log(std::abs(s) / kPi);
  if (mag > 709.0) throw EvalError("rgamma overflow");
  return std::copysign(std::exp(mag), s);
}

bool series_ok(double alpha, double beta, double z) {
  return series_ok_impl(alpha, beta, z);
}

MlValue eval_series(const MlQuery& q, bool want_derivs) {
  MlValue out;
  if (q.z == 0.0) {
    out.value = rgamma(q.beta);
    if (want_derivs) {
      out.d_z = rgamma(q.alpha + q.beta);
      out.d_alpha = 0.0;
    }
    return out;
  }
  SeriesSums s = series_sums(q.alpha, q.beta, q.z, want_derivs, want_derivs);
  out.value = s.value;
  if (want_derivs) {
    out.d_z = s.kt / q.z;
    out.d_alpha = -s.kpsi;
  }
  return out;
}

double eval_quadrature_value(double alpha, double beta, double z) {
  if (!(z < 0.0)) throw std::domain_error("eval_quadrature_value: z must be negative");
  if (alpha == 1.0) return value_alpha1(beta, z, Force::NoSeries);
  return value_neg(alpha, beta, z, Force::NoSeries);
}

}  // namespace detail

MlValue ml_eval(const MlQuery& q, bool want_derivs) {
  check_query(q.alpha, q.beta, q.z);
  MlValue out;
  if (q.alpha == 1.0 && q.beta == 1.0) {
    out.value = std::exp(q.z);
    if (want_derivs) {
      out.d_z = out.value;
      out.d_alpha = d_alpha_fd(q.alpha, q.beta, q.z);
    }
    return out;
  }
  if (q.z == 0.0 || q.z > 0.0 || series_ok_impl(q.alpha, q.beta, q.z)) {
    out = detail::eval_series(q, want_derivs);
    if (!std::isfinite(out.value)) throw EvalError("ml_eval: non-finite value");
    return out;
  }
  // z < 0, outside the series comfort zone
  if (q.alpha == 1.0) {
    out.value = value_alpha1(q.beta, q.z, Force::Auto);
    if (want_derivs) {
      // d/dz E_{1,b} = E_{1,b} + (1-b) E_{1,b+1}: stable (the beta-lowering
      // identity cancels exponentially here), and exact at b = 1.
      out.d_z = out.value +
                (1.0 - q.beta) * value_alpha1(q.beta + 1.0, q.z, Force::Auto);
      out.d_alpha = d_alpha_fd(q.alpha, q.beta, q.z);
    }
  } else {
    out.value = value_neg(q.alpha, q.beta, q.z, Force::Auto);
    if (want_derivs) {
      // d/dz E_{a,b} = (E_{a,b-1} - (b-1) E_{a,b}) / (a z)
      out.d_z = (value_neg(q.alpha, q.beta - 1.0, q.z, Force::Auto) -
                 (q.beta - 1.0) * out.value) /
                (q.alpha * q.z);
      out.d_alpha = d_alpha_fd(q.alpha, q.beta, q.z);
    }
  }
  if (!std::isfinite(out.value)) throw EvalError("ml_eval: non-finite value");
  return out;
}

double ml_log_deriv_rate(double alpha, double a, double tau, MlKind kind) {
  if (!(alpha > 0.0) || !(alpha <= 1.0))
    throw std::domain_error("ml_log_deriv_rate: alpha must lie in (0,1]");
  if (!(a < 0.0)) throw std::domain_error("ml_log_deriv_rate: a must be negative");
  if (!(tau > 0.0)) throw std::domain_error("ml_log_deriv_rate: tau must be positive");
  const double beta = (kind == MlKind::Density) ? alpha : 1.0;
  if (alpha == 1.0 && beta == 1.0) return tau;  // d/da log e^{a tau}
  const double ta = std::pow(tau, alpha);
  const double z = a * ta;
  // Value and d_z only; avoids ml_eval's d_alpha work (walker hot path).
  double value, dz;
  if (series_ok_impl(alpha, beta, z)) {
    SeriesSums s = series_sums(alpha, beta, z, true, false);
    value = s.value;
    dz = s.kt / z;
  } else if (alpha == 1.0) {
    value = value_alpha1(beta, z, Force::Auto);
    dz = value + (1.0 - beta) * value_alpha1(beta + 1.0, z, Force::Auto);
  } else {
    value = value_neg(alpha, beta, z, Force::Auto);
    dz = (value_neg(alpha, beta - 1.0, z, Force::Auto) - (beta - 1.0) * value) /
         (alpha * z);
  }
  return ta * dz / value;
}

double ml_log_deriv_alpha(double alpha, double a, double tau, MlKind kind) {
  if (!(alpha > 0.0) || !(alpha <= 1.0))
    throw std::domain_error("ml_log_deriv_alpha: alpha must lie in (0,1]");
  if (!(a < 0.0)) throw std::domain_error("ml_log_deriv_alpha: a must be negative");
  if (!(tau > 0.0)) throw std::domain_error("ml_log_deriv_alpha: tau must be positive");
  const double beta = (kind == MlKind::Density) ? alpha : 1.0;
  const double z = a * std::pow(tau, alpha);
  if (z == 0.0)
    return (kind == MlKind::Density) ? -boost::math::digamma(alpha) : 0.0;
  if (series_ok_impl(alpha, beta, z)) {
    // analytic: slot derivative plus chain term through z(alpha) = a tau^alpha.
    // Density moves both indices: arguments are alpha(k+1), weight -(k+1)psi.
    SeriesSums s = series_sums(alpha, beta, z, true, true);
    const double slot = (kind == MlKind::Density) ? -(s.kpsi + s.psum) : -s.kpsi;
    return (slot + s.kt * std::log(tau)) / s.value;
  }
  const double h = 1e-6;
  auto F = [&](double ap) {
    const double bp = (kind == MlKind::Density) ? ap : 1.0;
    return std::log(value_routed(ap, bp, a * std::pow(tau, ap), Force::NoSeries));
  };
  if (alpha + h < 1.0) return (F(alpha + h) - F(alpha - h)) / (2.0 * h);
  return (3.0 * F(alpha) - 4.0 * F(alpha - h) + F(alpha - 2.0 * h)) / (2.0 * h);
}

}  // namespace fodewalk::ml

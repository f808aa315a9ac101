#include "fodewalk/problem.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <boost/math/special_functions/sin_pi.hpp>

namespace fodewalk {
namespace {

[[noreturn]] void fail(ValidationError::Kind kind, int row, const std::string& msg) {
  throw ValidationError(kind, row, msg);
}

std::string rowtag(int row) { return "row " + std::to_string(row + 1); }

}  // namespace

EmbeddedChain validate_problem(const FodeProblem& p, Mode mode,
                               const ValidateOptions& opts) {
  using K = ValidationError::Kind;
  if (p.n < 1) fail(K::BadStructure, -1, "problem needs at least one node");
  if (static_cast<int>(p.a.size()) != p.n ||
      static_cast<int>(p.alpha.size()) != p.n ||
      static_cast<int>(p.u0.size()) != p.n)
    fail(K::BadStructure, -1, "A, alpha, u0 must all have n rows");
  if (!(p.T > 0.0) || !std::isfinite(p.T))
    fail(K::BadStructure, -1, "T must be positive and finite");
  if (p.start_node < 0 || p.start_node >= p.n)
    fail(K::BadStructure, -1, "start_node out of range");

  EmbeddedChain chain;
  chain.rows.resize(p.n);
  for (int i = 0; i < p.n; ++i) {
    const auto& in = p.a[i];
    if (!std::isfinite(in.diag))
      fail(K::BadStructure, i, rowtag(i) + ": non-finite diagonal");
    if (in.diag == 0.0)
      fail(K::ZeroDiagonal, i, rowtag(i) + ": zero diagonal entry");
    if (mode == Mode::Simplified && in.diag > 0.0)
      fail(K::PositiveDiagonalInSimplifiedMode, i,
           rowtag(i) + ": positive diagonal in simplified mode");
    if (!std::isfinite(p.alpha[i]) || !(p.alpha[i] > 0.0) || p.alpha[i] > 1.0 ||
        (p.alpha[i] == 1.0 && !opts.allow_unit_alpha))
      fail(K::AlphaOutOfRange, i, rowtag(i) + ": alpha outside (0,1)");
    if (!std::isfinite(p.u0[i]))
      fail(K::BadStructure, i, rowtag(i) + ": non-finite u0");

    auto& out = chain.rows[i];
    out.diag = in.diag;
    out.alpha = p.alpha[i];
    std::set<int> seen;
    for (const auto& [col, val] : in.off) {
      if (col < 0 || col >= p.n)
        fail(K::BadStructure, i, rowtag(i) + ": column index out of range");
      if (col == i)
        fail(K::BadStructure, i, rowtag(i) + ": off-diagonal list names the diagonal");
      if (!seen.insert(col).second)
        fail(K::BadStructure, i, rowtag(i) + ": duplicate column entry");
      if (!std::isfinite(val))
        fail(K::BadStructure, i, rowtag(i) + ": non-finite off-diagonal");
      if (val == 0.0) continue;  // non-edge
      out.cols.push_back(col);
      out.vals.push_back(val);
      out.off_sum += std::abs(val);
    }
    out.chi = -out.off_sum / out.diag;
    if (!out.cols.empty()) {
      out.cum.resize(out.cols.size());
      double acc = 0.0;
      for (std::size_t k = 0; k < out.vals.size(); ++k) {
        acc += std::abs(out.vals[k]);
        out.cum[k] = acc / out.off_sum;
      }
      out.cum.back() = 1.0;
    }
  }
  return chain;
}

FodeProblem gen_random_problem(int n, RngStream& rng) {
  if (n < 2) throw std::invalid_argument("gen_random_problem: n must be >= 2");
  FodeProblem p;
  p.n = n;
  p.a.resize(n);
  for (int i = 0; i < n; ++i) {
    auto& row = p.a[i];
    double off_sum = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double v = rng.normal();
      row.off.emplace_back(j, v);
      off_sum += std::abs(v);
    }
    row.diag = -(1.0 + rng.uniform_open01()) * off_sum;
  }
  p.alpha.resize(n);
  for (int i = 0; i < n; ++i) p.alpha[i] = 0.6 + 0.4 * rng.uniform_open01();
  p.u0.resize(n);
  for (int i = 0; i < n; ++i) p.u0[i] = rng.uniform_open01();
  p.T = rng.uniform_open01();
  p.start_node = 0;
  p.mode = Mode::Simplified;
  return p;
}

FodeProblem build_robin_problem(const RobinSpec& spec, double T) {
  if (spec.n_x < 3)
    throw std::invalid_argument("build_robin_problem: n_x must be >= 3");
  const int n = spec.n_x - 1;
  if (!spec.kappa.empty() && static_cast<int>(spec.kappa.size()) != n)
    throw std::invalid_argument(
        "build_robin_problem: kappa must be sampled at the interior nodes");
  const double dx = 1.0 / spec.n_x;
  const double den = spec.b1 * dx - spec.b2;
  if (den == 0.0)
    throw ValidationError(ValidationError::Kind::RobinDenominatorZero, 0,
                          "Robin corner denominator b1 dx - b2 vanishes");
  auto kap = [&](int i) { return spec.kappa.empty() ? 1.0 : spec.kappa[i]; };

  FodeProblem p;
  p.n = n;
  p.a.resize(n);
  p.alpha.resize(n);
  p.u0.resize(n);
  double umax = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = (i + 1) * dx;
    const double s = kap(i) / (dx * dx);  // row scale kappa(x_i)/dx^2
    auto& row = p.a[i];
    if (i == 0) {
      row.diag = -s * (spec.b2 / den + 2.0);
      row.off.emplace_back(1, s);
    } else if (i == n - 1) {
      row.off.emplace_back(n - 2, s);
      row.diag = -s;  // Neumann end row (-1, 1) of L
    } else {
      row.off.emplace_back(i - 1, s);
      row.diag = -2.0 * s;
      row.off.emplace_back(i + 1, s);
    }
    p.alpha[i] = spec.alpha_param * (boost::math::sin_pi(x) + 1.0) / 4.0 + 0.5;
    const double d = x - spec.mu;
    p.u0[i] = std::exp(-d * d / (2.0 * spec.sigma * spec.sigma));
    umax = std::max(umax, p.u0[i]);
  }
  for (double& v : p.u0) v /= umax;
  p.T = T;
  p.start_node = 0;
  p.mode = Mode::Simplified;
  return p;
}

RobinChainRule chain_rule_robin(double grad_a11,
                                std::span<const double> grad_alpha,
                                const RobinSpec& spec) {
  const int n = spec.n_x - 1;
  if (static_cast<int>(grad_alpha.size()) != n)
    throw std::invalid_argument("chain_rule_robin: grad_alpha size mismatch");
  const double dx = 1.0 / spec.n_x;
  const double den = spec.b1 * dx - spec.b2;
  if (den == 0.0)
    throw ValidationError(ValidationError::Kind::RobinDenominatorZero, 0,
                          "Robin corner denominator b1 dx - b2 vanishes");
  const double k1 = spec.kappa.empty() ? 1.0 : spec.kappa[0];
  RobinChainRule out;
  // a11 = -kappa_1/dx^2 (b2/(b1 dx - b2) + 2)
  out.d_b1 = grad_a11 * (k1 * spec.b2 / (dx * den * den));
  out.d_b2 = grad_a11 * (-k1 * spec.b1 / (dx * den * den));
  for (int i = 0; i < n; ++i)
    out.d_alpha +=
        grad_alpha[i] * (boost::math::sin_pi((i + 1) * dx) + 1.0) / 4.0;
  return out;
}

}  // namespace fodewalk

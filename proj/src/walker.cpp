#include "fodewalk/walker.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fodewalk/ml.hpp"
#include "fodewalk/sampling.hpp"

namespace fodewalk {

namespace {

inline double sgn(double v) { return v > 0.0 ? 1.0 : -1.0; }

void add_entry(std::vector<std::pair<std::pair<int, int>, double>>& w, int r,
               int c, double v) {
  for (auto& e : w)
    if (e.first.first == r && e.first.second == c) {
      e.second += v;
      return;
    }
  w.push_back({{r, c}, v});
}

void add_entry(std::vector<std::pair<int, double>>& w, int i, double v) {
  for (auto& e : w)
    if (e.first == i) {
      e.second += v;
      return;
    }
  w.push_back({i, v});
}

void walk_simplified(const FodeProblem& p, const EmbeddedChain& chain,
                     RngStream& rng, WalkOutcome& out, bool sens) {
  int node = p.start_node;
  double t = 0.0;
  double pi = 1.0;
  out.has_sensitivities = sens;
  for (;;) {
    const auto& row = chain.rows[node];
    const double tau = sample_sojourn({row.alpha, -row.diag}, rng);
    if (t + tau >= p.T) {
      // Final interval: the sojourn in progress covers [t, T].
      double tstar = p.T - t;
      if (row.alpha < 1.0) tstar = std::max(tstar, 1e-12 * p.T);
      out.final_node = node;
      out.u0_weight = pi;
      out.J = pi * p.u0[node];
      if (sens) {
        add_entry(out.w_a, node, node,
                  ml::ml_log_deriv_rate(row.alpha, row.diag, tstar,
                                        ml::MlKind::Survival));
        add_entry(out.w_alpha, node,
                  ml::ml_log_deriv_alpha(row.alpha, row.diag, tstar,
                                         ml::MlKind::Survival));
        // CMC time sensitivity: artificial extra jump at rate hazard(tau*).
        // It is appended after J is fixed and never enters the chi product.
        const double lam = hazard(row.alpha, row.diag, tstar);
        double jplus = 0.0;  // absorbing row: the extra jump annihilates
        if (!row.absorbing()) {
          const int k = sample_jump(row.cum, rng);
          jplus = sgn(row.vals[k]) * row.chi * p.u0[row.cols[k]];
        }
        out.dT_term = pi * lam * (jplus - p.u0[node]);
      }
      return;
    }
    t += tau;
    ++out.jumps;
    if (row.absorbing()) {
      // Annihilation: the walk leaves the state space before T, J = 0.
      out.final_node = node;
      out.u0_weight = 0.0;
      out.J = 0.0;
      return;
    }
    if (sens) {
      add_entry(out.w_a, node, node,
                ml::ml_log_deriv_rate(row.alpha, row.diag, tau,
                                      ml::MlKind::Density));
      // Total dalpha of log f_i: the tau^{alpha-1} density prefactor
      // contributes log(tau) on top of the E_{alpha,alpha} term.
      add_entry(out.w_alpha, node,
                std::log(tau) + ml::ml_log_deriv_alpha(row.alpha, row.diag,
                                                       tau,
                                                       ml::MlKind::Density));
    }
    const int k = sample_jump(row.cum, rng);
    const double val = row.vals[k];
    pi *= sgn(val) * row.chi;
    if (sens) add_entry(out.w_a, node, row.cols[k], 1.0 / val);
    node = row.cols[k];
  }
}

void walk_general(const FodeProblem& p, const EmbeddedChain& chain,
                  RngStream& rng, WalkOutcome& out,
                  const GeneralProposal& prop) {
  int node = p.start_node;
  double t = 0.0;
  double pi = 1.0;
  if (prop.kind == GeneralProposal::Kind::MatchedMl) {
    // Exact per-node ML proposal: all importance ratios are identically 1,
    // so the ratio multiplications are skipped rather than evaluated.
    for (;;) {
      const auto& row = chain.rows[node];
      const double tau = sample_sojourn({row.alpha, -row.diag}, rng);
      if (t + tau >= p.T) {
        out.final_node = node;
        out.u0_weight = pi;
        out.J = pi * p.u0[node];
        return;
      }
      t += tau;
      ++out.jumps;
      if (row.absorbing()) {
        out.final_node = node;
        return;
      }
      const int k = sample_jump(row.cum, rng);
      pi *= sgn(row.vals[k]) * row.chi;
      node = row.cols[k];
    }
  }
  double lam = prop.rate;
  if (lam == 0.0)
    for (const auto& r : chain.rows) lam = std::max(lam, std::abs(r.diag));
  if (!(lam > 0.0) || !std::isfinite(lam))
    throw std::domain_error("simulate_walk: proposal rate must be positive");
  for (;;) {
    const auto& row = chain.rows[node];
    const double tau = sample_sojourn({1.0, lam}, rng);
    if (t + tau >= p.T) {
      const double tstar = p.T - t;
      const double surv =
          ml::ml_eval({row.alpha, 1.0, row.diag * std::pow(tstar, row.alpha)},
                      false)
              .value;
      pi *= surv / std::exp(-lam * tstar);
      out.final_node = node;
      out.u0_weight = pi;
      out.J = pi * p.u0[node];
      return;
    }
    t += tau;
    ++out.jumps;
    if (row.absorbing()) {
      out.final_node = node;
      return;
    }
    const double dens =
        -row.diag * std::pow(tau, row.alpha - 1.0) *
        ml::ml_eval({row.alpha, row.alpha,
                     row.diag * std::pow(tau, row.alpha)},
                    false)
            .value;
    pi *= dens / (lam * std::exp(-lam * tau));
    const int k = sample_jump(row.cum, rng);
    pi *= sgn(row.vals[k]) * row.chi;
    node = row.cols[k];
  }
}

}  // namespace

double hazard(double alpha, double a, double tau_star) {
  if (!(alpha > 0.0) || !(alpha <= 1.0))
    throw std::domain_error("hazard: alpha must lie in (0,1]");
  if (!(a < 0.0)) throw std::domain_error("hazard: a must be negative");
  if (alpha == 1.0) return -a;  // memoryless: constant rate
  if (!(tau_star > 0.0))
    throw std::domain_error("hazard: tau_star must be positive for alpha < 1");
  const double z = a * std::pow(tau_star, alpha);
  const double num = ml::ml_eval({alpha, alpha, z}, false).value;
  const double den = ml::ml_eval({alpha, 1.0, z}, false).value;
  return -a * std::pow(tau_star, alpha - 1.0) * num / den;
}

void simulate_walk(const FodeProblem& p, const EmbeddedChain& chain,
                   RngStream& rng, WalkOutcome& out, const WalkConfig& cfg) {
  out.clear();
  const std::uint64_t draws0 = rng.draws();
  if (p.mode == Mode::Simplified)
    walk_simplified(p, chain, rng, out, cfg.want_sensitivities);
  else
    walk_general(p, chain, rng, out, cfg.proposal);
  out.rng_draws = rng.draws() - draws0;
}

WalkOutcome simulate_walk(const FodeProblem& p, const EmbeddedChain& chain,
                          RngStream& rng, const WalkConfig& cfg) {
  WalkOutcome out;
  simulate_walk(p, chain, rng, out, cfg);
  return out;
}

}  // namespace fodewalk

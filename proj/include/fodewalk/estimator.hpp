#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "fodewalk/problem.hpp"
#include "fodewalk/walker.hpp"

namespace fodewalk {

struct Estimate {
  double mean = 0.0;
  double variance = 0.0;  // unbiased sample variance
  double ci_lo = 0.0;     // CLT interval, half-width z_{1-p/2} sqrt(var/N_s)
  double ci_hi = 0.0;
};

struct EstimateReport {
  int n = 0;
  std::uint64_t n_s = 0;
  std::uint64_t master_seed = 0;
  Mode mode = Mode::Simplified;
  double level = 0.05;  // two-sided p; intervals cover 1-p
  Estimate value;
  // Sensitivity families (simplified mode with sensitivities enabled).
  // grad_a holds the entries touched by at least one walk, sorted row-major;
  // anything absent, and any untouched dense slot, is an exact 0 with
  // variance 0 (never-visited contract).
  std::vector<std::pair<std::pair<int, int>, Estimate>> grad_a;
  std::vector<Estimate> grad_alpha;
  std::vector<Estimate> grad_u0;
  Estimate grad_t;
  bool has_sensitivities = false;
  double jumps_mean = 0.0;
  std::uint64_t jumps_max = 0;
  std::vector<double> outcomes;  // per-walk J, kept when store_outcomes

  const Estimate* find_grad_a(int i, int k) const {
    for (const auto& e : grad_a)
      if (e.first.first == i && e.first.second == k) return &e.second;
    return nullptr;
  }
};

struct EstimateConfig {
  std::uint64_t n_s = 0;  // 0: use p.num_walks
  unsigned workers = 1;
  double level = 0.05;
  bool sensitivities = true;  // simplified mode only
  bool store_outcomes = false;
  GeneralProposal proposal{};
};

// Runs walks on streams 0..N_s-1 of p.seed, partitioned over workers in
// fixed blocks; block partials are folded in index order, so every numeric
// field is bit-identical for any worker count.
EstimateReport estimate(const FodeProblem& p, const EstimateConfig& cfg = {});

// Second-moment bound E(J^2) <= bound.  Simplified mode: max_k u0_k^2 *
// exp(lambda T (M_chi^2 - 1)) where lambda is the largest rate whose
// exponential sojourn is stochastically longer than every per-node ML
// sojourn on [0,T] (equals max_i |a_ii| when all alpha_i = 1).  General
// mode: max_k u0_k^2 * M_s^2 * exp(lambda T ((M_p M_chi)^2 - 1)) with
// lambda the proposal rate and M_p, M_s grid maxima of the density and
// survival ratios (for alpha < 1 the density ratio diverges as t -> 0+,
// so M_p is a grid estimate, not a supremum).
struct VarianceBound {
  double m_chi = 0.0;
  double m_p = 1.0;
  double m_s = 1.0;
  double lambda = 0.0;
  double bound = 0.0;
};

VarianceBound variance_bound(const FodeProblem& p, double proposal_rate = 0.0);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Paired bootstrap over aligned per-walk series.  Each of the b_resamples
// draws n indices with replacement -- the same indices for every series, so
// multi-series statistics are computed under common random numbers -- then
// applies `stat` to the vector of resampled means (default: the first one).
// Returns the [level/2, 1-level/2] empirical quantiles of the statistic.
Interval bootstrap_ci(
    const std::vector<std::vector<double>>& series, int b_resamples,
    double level, std::uint64_t seed,
    const std::function<double(std::span<const double>)>& stat = {});

Interval bootstrap_ci(std::span<const double> outcomes, int b_resamples,
                      double level, std::uint64_t seed);

// One resampling pass evaluated under several statistics at once; result j
// is the quantile interval of stats[j] (an empty function means the first
// resampled mean).  All statistics see the same shared index draws.
std::vector<Interval> bootstrap_ci_multi(
    const std::vector<std::vector<double>>& series, int b_resamples,
    double level, std::uint64_t seed,
    const std::vector<std::function<double(std::span<const double>)>>& stats);

struct TestResult {
  double stat = 0.0;
  double critical = 0.0;
  bool pass = false;
};

// Two-sided one-sample t-test of H0: E = reference.  Requires n_s >= 30.
TestResult t_test(double sample_mean, double sample_var, std::uint64_t n_s,
                  double reference, double level);

// Hotelling T^2 test against the scaled F critical value.  Components with
// sample variance < 1e-14 * max(1,|mean|,|ref|)^2 are dropped before the
// inversion; a dropped component must match the reference to 1e-10 absolute
// or the test fails outright.  Singular covariance after dropping throws.
TestResult hotelling_test(const Eigen::VectorXd& sample_mean,
                          const Eigen::MatrixXd& sample_cov,
                          std::uint64_t n_s, const Eigen::VectorXd& reference,
                          double level);

}  // namespace fodewalk

#include "fodewalk/estimator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "fodewalk/ml.hpp"
#include "fodewalk/rng.hpp"

namespace fodewalk {

namespace {

constexpr std::uint64_t kBlock = 256;

struct Sums {
  double s = 0.0, s2 = 0.0;
  void add(double x) {
    s += x;
    s2 += x * x;
  }
  void merge(const Sums& o) {
    s += o.s;
    s2 += o.s2;
  }
};

// Per-block partials.  Blocks are claimed by workers through an atomic
// counter but folded in block order afterwards, so the float addition order
// is a function of (seed, N_s) only, never of thread scheduling.
struct BlockAcc {
  Sums value, dt;
  std::vector<Sums> alpha, u0;
  std::map<std::pair<int, int>, Sums> a;
  std::uint64_t jumps_sum = 0;
  std::uint64_t jumps_max = 0;
};

Estimate finish(const Sums& sums, std::uint64_t n, double z) {
  Estimate e;
  const double nn = static_cast<double>(n);
  e.mean = sums.s / nn;
  e.variance = std::max(0.0, (sums.s2 - nn * e.mean * e.mean) / (nn - 1.0));
  const double half = z * std::sqrt(e.variance / nn);
  e.ci_lo = e.mean - half;
  e.ci_hi = e.mean + half;
  return e;
}

double ml_survival(double alpha, double a, double t) {
  return ml::ml_eval({alpha, 1.0, a * std::pow(t, alpha)}, false).value;
}

// Ternary search on [lo, hi]; assumes local unimodality on the bracketing
// grid cell.  Returns the extremal function value.
template <class F>
double refine_extremum(const F& f, double lo, double hi, bool maximize) {
  for (int it = 0; it < 100; ++it) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if ((f(m1) >= f(m2)) == maximize)
      hi = m2;
    else
      lo = m1;
  }
  return f(0.5 * (lo + hi));
}

// Grid extremum of f over (0, T] with local refinement around the best cell.
template <class F>
double grid_extremum(const F& f, double T, bool maximize) {
  constexpr int kGrid = 10000;
  double best = 0.0;
  int jbest = 1;
  bool first = true;
  for (int j = 1; j <= kGrid; ++j) {
    const double v = f(T * j / kGrid);
    if (first || (maximize ? v > best : v < best)) {
      best = v;
      jbest = j;
      first = false;
    }
  }
  const double lo = T * std::max(1, jbest - 1) / kGrid;
  const double hi = T * std::min(kGrid, jbest + 1) / kGrid;
  const double refined = refine_extremum(f, lo, hi, maximize);
  return maximize ? std::max(best, refined) : std::min(best, refined);
}

}  // namespace

EstimateReport estimate(const FodeProblem& p, const EstimateConfig& cfg) {
  const std::uint64_t n_s =
      cfg.n_s ? cfg.n_s : static_cast<std::uint64_t>(p.num_walks);
  if (n_s < 2) throw std::invalid_argument("estimate: N_s must be at least 2");
  ValidateOptions vopts;
  vopts.allow_unit_alpha = true;
  const EmbeddedChain chain = validate_problem(p, p.mode, vopts);
  const bool sens = cfg.sensitivities && p.mode == Mode::Simplified;

  WalkConfig wcfg;
  wcfg.proposal = cfg.proposal;
  wcfg.want_sensitivities = sens;

  const std::uint64_t n_blocks = (n_s + kBlock - 1) / kBlock;
  std::vector<BlockAcc> blocks(n_blocks);
  std::vector<double> outcomes;
  if (cfg.store_outcomes) outcomes.resize(n_s);

  std::atomic<std::uint64_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mu;

  auto run_blocks = [&]() {
    WalkOutcome out;
    for (;;) {
      const std::uint64_t b = next.fetch_add(1);
      if (b >= n_blocks || failed.load()) return;
      BlockAcc& acc = blocks[b];
      if (sens) {
        acc.alpha.resize(p.n);
        acc.u0.resize(p.n);
      }
      const std::uint64_t lo = b * kBlock;
      const std::uint64_t hi = std::min(n_s, lo + kBlock);
      for (std::uint64_t w = lo; w < hi; ++w) {
        try {
          RngStream rng(p.seed, w);
          simulate_walk(p, chain, rng, out, wcfg);
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> g(error_mu);
          if (!failed.exchange(true))
            error = std::make_exception_ptr(
                std::runtime_error("estimate: walk on stream " +
                                   std::to_string(w) + " failed: " + e.what()));
          return;
        }
        acc.value.add(out.J);
        acc.jumps_sum += out.jumps;
        acc.jumps_max = std::max(acc.jumps_max, out.jumps);
        if (cfg.store_outcomes) outcomes[w] = out.J;
        if (sens) {
          acc.dt.add(out.dT_term);
          for (const auto& e : out.w_a) acc.a[e.first].add(out.J * e.second);
          for (const auto& e : out.w_alpha)
            acc.alpha[e.first].add(out.J * e.second);
          acc.u0[out.final_node].add(out.u0_weight);
        }
      }
    }
  };

  const unsigned workers =
      static_cast<unsigned>(std::min<std::uint64_t>(
          std::max(1u, cfg.workers), n_blocks));
  if (workers == 1) {
    run_blocks();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(run_blocks);
    for (auto& th : pool) th.join();
  }
  if (failed.load()) std::rethrow_exception(error);

  Sums value, dt;
  std::vector<Sums> alpha(sens ? p.n : 0), u0(sens ? p.n : 0);
  std::map<std::pair<int, int>, Sums> a;
  std::uint64_t jumps_sum = 0, jumps_max = 0;
  for (const auto& b : blocks) {
    value.merge(b.value);
    jumps_sum += b.jumps_sum;
    jumps_max = std::max(jumps_max, b.jumps_max);
    if (sens) {
      dt.merge(b.dt);
      if (!b.alpha.empty())
        for (int i = 0; i < p.n; ++i) {
          alpha[i].merge(b.alpha[i]);
          u0[i].merge(b.u0[i]);
        }
      for (const auto& e : b.a) a[e.first].merge(e.second);
    }
  }

  EstimateReport r;
  r.n = p.n;
  r.n_s = n_s;
  r.master_seed = p.seed;
  r.mode = p.mode;
  r.level = cfg.level;
  const double z =
      boost::math::quantile(boost::math::normal_distribution<>(),
                            1.0 - cfg.level / 2.0);
  r.value = finish(value, n_s, z);
  r.jumps_mean = static_cast<double>(jumps_sum) / static_cast<double>(n_s);
  r.jumps_max = jumps_max;
  r.has_sensitivities = sens;
  if (sens) {
    r.grad_t = finish(dt, n_s, z);
    r.grad_alpha.resize(p.n);
    r.grad_u0.resize(p.n);
    for (int i = 0; i < p.n; ++i) {
      r.grad_alpha[i] = finish(alpha[i], n_s, z);
      r.grad_u0[i] = finish(u0[i], n_s, z);
    }
    r.grad_a.reserve(a.size());
    for (const auto& e : a) r.grad_a.push_back({e.first, finish(e.second, n_s, z)});
  }
  if (cfg.store_outcomes) r.outcomes = std::move(outcomes);
  return r;
}

VarianceBound variance_bound(const FodeProblem& p, double proposal_rate) {
  ValidateOptions vopts;
  vopts.allow_unit_alpha = true;
  const EmbeddedChain chain = validate_problem(p, p.mode, vopts);

  VarianceBound vb;
  for (const auto& row : chain.rows)
    vb.m_chi = std::max(vb.m_chi, std::abs(row.chi));
  double u0max2 = 0.0;
  for (double u : p.u0) u0max2 = std::max(u0max2, u * u);

  if (p.mode == Mode::Simplified) {
    vb.m_p = vb.m_s = 1.0;
    // Largest mu with E_alpha(a t^alpha) <= e^{-mu t} on (0,T] for every
    // node: mu = min_i inf_t -log(S_i(t))/t.  Then each ML sojourn is
    // stochastically shorter than Exp(mu), the jump count dominates a
    // Poisson(mu T), and the Poisson pgf bound applies.  Equals
    // min_i |a_ii| when all alpha_i = 1.
    double mu = std::numeric_limits<double>::infinity();
    for (const auto& row : chain.rows) {
      if (row.alpha == 1.0) {
        mu = std::min(mu, -row.diag);
        continue;
      }
      auto f = [&](double t) {
        return -std::log(ml_survival(row.alpha, row.diag, t)) / t;
      };
      mu = std::min(mu, grid_extremum(f, p.T, false));
    }
    vb.lambda = mu;
    vb.bound = u0max2 * std::exp(mu * p.T * (vb.m_chi * vb.m_chi - 1.0));
    return vb;
  }

  double lam = proposal_rate;
  if (lam == 0.0)
    for (const auto& row : chain.rows) lam = std::max(lam, std::abs(row.diag));
  if (!(lam > 0.0))
    throw std::domain_error("variance_bound: proposal rate must be positive");
  vb.lambda = lam;
  double mp = 0.0, ms = 0.0;
  for (const auto& row : chain.rows) {
    auto fp = [&](double t) {
      const double dens =
          -row.diag * std::pow(t, row.alpha - 1.0) *
          ml::ml_eval({row.alpha, row.alpha, row.diag * std::pow(t, row.alpha)},
                      false)
              .value;
      return std::abs(dens) / (lam * std::exp(-lam * t));
    };
    auto fs = [&](double t) {
      return std::abs(ml_survival(row.alpha, row.diag, t)) /
             std::exp(-lam * t);
    };
    mp = std::max(mp, grid_extremum(fp, p.T, true));
    ms = std::max(ms, grid_extremum(fs, p.T, true));
  }
  vb.m_p = mp;
  vb.m_s = ms;
  const double mc = mp * vb.m_chi;
  vb.bound = u0max2 * ms * ms * std::exp(lam * p.T * (mc * mc - 1.0));
  return vb;
}

std::vector<Interval> bootstrap_ci_multi(
    const std::vector<std::vector<double>>& series, int b_resamples,
    double level, std::uint64_t seed,
    const std::vector<std::function<double(std::span<const double>)>>& stats) {
  if (series.empty() || series.front().empty())
    throw std::invalid_argument("bootstrap_ci: outcomes must be nonempty");
  if (b_resamples < 100)
    throw std::invalid_argument("bootstrap_ci: need at least 100 resamples");
  if (stats.empty())
    throw std::invalid_argument("bootstrap_ci: need at least one statistic");
  const std::size_t n = series.front().size();
  for (const auto& s : series)
    if (s.size() != n)
      throw std::invalid_argument("bootstrap_ci: series lengths differ");
  const std::size_t k = series.size();
  const std::size_t q = stats.size();

  std::vector<std::vector<double>> samples(
      q, std::vector<double>(static_cast<std::size_t>(b_resamples)));
  std::vector<double> means(k);
  for (int r = 0; r < b_resamples; ++r) {
    RngStream rng(seed, static_cast<std::uint64_t>(r));
    std::fill(means.begin(), means.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t idx = static_cast<std::size_t>(rng.next_u64() % n);
      for (std::size_t s = 0; s < k; ++s) means[s] += series[s][idx];
    }
    for (auto& m : means) m /= static_cast<double>(n);
    for (std::size_t j = 0; j < q; ++j)
      samples[j][static_cast<std::size_t>(r)] =
          stats[j] ? stats[j](std::span<const double>(means)) : means[0];
  }
  std::vector<Interval> out(q);
  for (std::size_t j = 0; j < q; ++j) {
    auto& v = samples[j];
    std::sort(v.begin(), v.end());
    auto quantile_at = [&](double qq) {
      const double pos = qq * (b_resamples - 1);
      const std::size_t i0 = static_cast<std::size_t>(pos);
      const double frac = pos - static_cast<double>(i0);
      if (i0 + 1 >= v.size()) return v.back();
      return v[i0] * (1.0 - frac) + v[i0 + 1] * frac;
    };
    out[j] = {quantile_at(level / 2.0), quantile_at(1.0 - level / 2.0)};
  }
  return out;
}

Interval bootstrap_ci(
    const std::vector<std::vector<double>>& series, int b_resamples,
    double level, std::uint64_t seed,
    const std::function<double(std::span<const double>)>& stat) {
  return bootstrap_ci_multi(series, b_resamples, level, seed, {stat})[0];
}

Interval bootstrap_ci(std::span<const double> outcomes, int b_resamples,
                      double level, std::uint64_t seed) {
  return bootstrap_ci(
      std::vector<std::vector<double>>{
          std::vector<double>(outcomes.begin(), outcomes.end())},
      b_resamples, level, seed, {});
}

TestResult t_test(double sample_mean, double sample_var, std::uint64_t n_s,
                  double reference, double level) {
  if (n_s < 30) throw std::invalid_argument("t_test: need n_s >= 30");
  if (!(sample_var >= 0.0) || !std::isfinite(sample_mean))
    throw std::invalid_argument("t_test: bad sample moments");
  TestResult r;
  const double se = std::sqrt(sample_var / static_cast<double>(n_s));
  if (se > 0.0)
    r.stat = (sample_mean - reference) / se;
  else
    r.stat = sample_mean == reference
                 ? 0.0
                 : std::numeric_limits<double>::infinity();
  boost::math::students_t dist(static_cast<double>(n_s) - 1.0);
  r.critical = boost::math::quantile(dist, 1.0 - level / 2.0);
  r.pass = std::abs(r.stat) <= r.critical;
  return r;
}

TestResult hotelling_test(const Eigen::VectorXd& sample_mean,
                          const Eigen::MatrixXd& sample_cov,
                          std::uint64_t n_s, const Eigen::VectorXd& reference,
                          double level) {
  const int d0 = static_cast<int>(sample_mean.size());
  if (sample_cov.rows() != d0 || sample_cov.cols() != d0 ||
      reference.size() != d0)
    throw std::invalid_argument("hotelling_test: dimension mismatch");
  std::vector<int> keep;
  keep.reserve(d0);
  TestResult r;
  for (int i = 0; i < d0; ++i) {
    const double scale = std::max(
        {1.0, std::abs(sample_mean[i]), std::abs(reference[i])});
    if (sample_cov(i, i) < 1e-14 * scale * scale) {
      // Degenerate component: it carries no randomness, so it must agree
      // with the reference outright.
      if (std::abs(sample_mean[i] - reference[i]) > 1e-10) {
        r.stat = std::numeric_limits<double>::infinity();
        r.critical = 0.0;
        r.pass = false;
        return r;
      }
    } else {
      keep.push_back(i);
    }
  }
  const int d = static_cast<int>(keep.size());
  if (d == 0) {  // everything degenerate and matching
    r.pass = true;
    return r;
  }
  if (n_s <= static_cast<std::uint64_t>(d))
    throw std::invalid_argument(
        "hotelling_test: n_s must exceed the retained dimension");
  Eigen::MatrixXd S(d, d);
  Eigen::VectorXd diff(d);
  for (int i = 0; i < d; ++i) {
    diff[i] = sample_mean[keep[i]] - reference[keep[i]];
    for (int j = 0; j < d; ++j) S(i, j) = sample_cov(keep[i], keep[j]);
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
  if (!lu.isInvertible())
    throw std::runtime_error(
        "hotelling_test: singular covariance after dropping degenerate "
        "components");
  const double nn = static_cast<double>(n_s);
  r.stat = nn * diff.dot(lu.solve(diff));
  boost::math::fisher_f fdist(static_cast<double>(d), nn - d);
  r.critical =
      static_cast<double>(d) * (nn - 1.0) / (nn - d) *
      boost::math::quantile(fdist, 1.0 - level);
  r.pass = r.stat <= r.critical;
  return r;
}

}  // namespace fodewalk

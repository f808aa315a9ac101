#include "fodewalk/experiments.hpp"

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>

#include "fodewalk/reference.hpp"
#include "fodewalk/rng.hpp"
#include "fodewalk/walker.hpp"

namespace fodewalk {
namespace {

struct Acc {
  double s = 0.0, s2 = 0.0;
  void add(double v) {
    s += v;
    s2 += v * v;
  }
  double mean(double n) const { return s / n; }
  double var(double n) const {
    const double m = mean(n);
    return std::max(0.0, (s2 - n * m * m) / (n - 1.0));
  }
};

double l1_value(const FodeProblem& p, int n_t) {
  return l1_solve(p, {n_t})(n_t, p.start_node);
}

// Ordinary least squares of y on x; r2 is the squared correlation.
void fit_line(const std::vector<double>& x, const std::vector<double>& y,
              double& slope, double& r2) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  slope = sxy / sxx;
  r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
}

}  // namespace

ValidationTable run_validation(const ValidationConfig& cfg) {
  if (cfg.systems < 1 || cfg.n < 2 || cfg.n_s < 30)
    throw std::invalid_argument("run_validation: bad configuration");
  ValidationTable table;
  table.rows.resize(cfg.systems);
  const int d = cfg.n * cfg.n;
  const double ns = static_cast<double>(cfg.n_s);

  for (int k = 0; k < cfg.systems; ++k) {
    ValidationRow& row = table.rows[k];
    try {
      RngStream gen(cfg.seed, static_cast<std::uint64_t>(k));
      FodeProblem p = gen_random_problem(cfg.n, gen);
      p.seed = mix_seed(cfg.seed, 1000003 + static_cast<std::uint64_t>(k));
      const EmbeddedChain chain = validate_problem(p, Mode::Simplified);
      const int s = p.start_node;

      Acc val, alp, u0s, dts;
      Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
      Eigen::VectorXd ga_sum = Eigen::VectorXd::Zero(d);
      Eigen::MatrixXd ga_outer = Eigen::MatrixXd::Zero(d, d);
      WalkOutcome out;
      for (std::uint64_t w = 0; w < cfg.n_s; ++w) {
        RngStream rng(p.seed, w);
        simulate_walk(p, chain, rng, out);
        val.add(out.J);
        double wal = 0.0;
        for (const auto& [node, wgt] : out.w_alpha)
          if (node == s) wal = wgt;
        alp.add(out.J * wal);
        u0s.add(out.final_node == s ? out.u0_weight : 0.0);
        dts.add(out.dT_term);
        g.setZero();
        for (const auto& [rc, wgt] : out.w_a)
          g[rc.first * cfg.n + rc.second] = out.J * wgt;
        ga_sum += g;
        ga_outer.selfadjointView<Eigen::Lower>().rankUpdate(g);
      }

      const FdResult ref = fd_sensitivities(p, {cfg.n_t}, {}, cfg.workers);
      row.value = t_test(val.mean(ns), val.var(ns), cfg.n_s, ref.value,
                         cfg.level).pass;
      row.d_alpha = t_test(alp.mean(ns), alp.var(ns), cfg.n_s,
                           ref.d_alpha(s), cfg.level).pass;
      row.d_u0 = t_test(u0s.mean(ns), u0s.var(ns), cfg.n_s, ref.d_u0(s),
                        cfg.level).pass;
      row.d_t = t_test(dts.mean(ns), dts.var(ns), cfg.n_s, ref.d_t,
                       cfg.level).pass;

      const Eigen::VectorXd mean = ga_sum / ns;
      Eigen::MatrixXd cov =
          (Eigen::MatrixXd(ga_outer.selfadjointView<Eigen::Lower>()) -
           ns * mean * mean.transpose()) /
          (ns - 1.0);
      Eigen::VectorXd ref_flat(d);
      for (int i = 0; i < cfg.n; ++i)
        for (int j = 0; j < cfg.n; ++j) ref_flat[i * cfg.n + j] = ref.d_a(i, j);
      row.d_a = hotelling_test(mean, cov, cfg.n_s, ref_flat, cfg.level).pass;
    } catch (const std::exception& e) {
      row.note = e.what();
      ++table.errors;
      continue;
    }
    table.passed[0] += row.value;
    table.passed[1] += row.d_a;
    table.passed[2] += row.d_alpha;
    table.passed[3] += row.d_u0;
    table.passed[4] += row.d_t;
  }
  return table;
}

namespace {

// Per-walk series of one Robin run: the solution sample J, the a11 gradient
// sample J W_A(1,1), and the alpha_param gradient sample J sum_i W_alpha(i)
// dg_i (the chain rule of g(x; alpha) applied per walk).
struct RobinSeries {
  std::vector<double> j, ga, gal;
};

RobinSeries robin_run(const FodeProblem& p, const std::vector<double>& dg,
                      std::uint64_t n_s) {
  const EmbeddedChain chain = validate_problem(p, Mode::Simplified);
  RobinSeries s;
  s.j.reserve(n_s);
  s.ga.reserve(n_s);
  s.gal.reserve(n_s);
  WalkOutcome out;
  for (std::uint64_t w = 0; w < n_s; ++w) {
    RngStream rng(p.seed, w);
    simulate_walk(p, chain, rng, out);
    double wa00 = 0.0;
    for (const auto& [rc, wgt] : out.w_a)
      if (rc.first == 0 && rc.second == 0) {
        wa00 = wgt;
        break;
      }
    double wal = 0.0;
    for (const auto& [node, wgt] : out.w_alpha) wal += wgt * dg[node];
    s.j.push_back(out.J);
    s.ga.push_back(out.J * wa00);
    s.gal.push_back(out.J * wal);
  }
  return s;
}

}  // namespace

RobinTable run_robin(const RobinConfig& cfg) {
  if (cfg.n_x < 3 || cfg.n_s < 2 || !(cfg.T > 0.0))
    throw std::invalid_argument("run_robin: bad configuration");
  RobinTable table;
  RobinSpec spec0;
  spec0.n_x = cfg.n_x;
  spec0.alpha_param = cfg.alpha0;

  FodeProblem p0 = build_robin_problem(spec0, cfg.T);
  p0.seed = mix_seed(cfg.seed, 99);
  table.a11_0 = p0.a[0].diag;

  // dg_i = dalpha_i/dalpha_param = (sin(pi x_i)+1)/4 on the interior grid.
  std::vector<double> dg(p0.n);
  for (int i = 0; i < p0.n; ++i) {
    const double x = static_cast<double>(i + 1) / cfg.n_x;
    dg[i] = (std::sin(std::numbers::pi * x) + 1.0) / 4.0;
  }

  const double u_truth = l1_value(p0, cfg.n_t);
  const RobinSeries truth = robin_run(p0, dg, cfg.n_s);

  const double h_alpha = std::sqrt(2.220446049250313e-16);
  auto alpha_problem = [&](double av) {
    RobinSpec sp = spec0;
    sp.alpha_param = av;
    return build_robin_problem(sp, cfg.T);
  };
  auto a11_problem = [&](double a11) {
    FodeProblem p = p0;
    p.a[0].diag = a11;
    return p;
  };

  int pt_index = 0;
  auto add_point = [&](const char* param, double value, bool is_truth,
                       const FodeProblem& p, double det_u, double det_du,
                       bool alpha_grad) {
    const RobinSeries* run = nullptr;
    RobinSeries local;
    if (is_truth) {
      run = &truth;
    } else {
      local = robin_run(p, dg, cfg.n_s);
      run = &local;
    }
    const double diff = det_u - u_truth;
    const double det_loss = 0.5 * diff * diff;
    const double det_grad = det_du * diff;

    const std::vector<std::vector<double>> series = {
        run->j, alpha_grad ? run->gal : run->ga, truth.j};
    const std::vector<std::function<double(std::span<const double>)>> stats = {
        [](std::span<const double> m) {
          const double dd = m[0] - m[2];
          return 0.5 * dd * dd;
        },
        [](std::span<const double> m) { return m[1] * (m[0] - m[2]); }};
    const auto cis =
        bootstrap_ci_multi(series, cfg.b_resamples, cfg.level,
                           mix_seed(cfg.seed, 5000 + pt_index), stats);
    ++pt_index;

    RobinPoint lp{param, value, "loss", det_loss, cis[0], false};
    lp.overlap = cis[0].lo <= det_loss && det_loss <= cis[0].hi;
    RobinPoint gp{param, value, "grad", det_grad, cis[1], false};
    gp.overlap = cis[1].lo <= det_grad && det_grad <= cis[1].hi;
    table.points.push_back(lp);
    table.points.push_back(gp);
    table.overlaps += lp.overlap + gp.overlap;
  };

  for (int i = 0; i <= 5; ++i) {  // alpha in {0.4, ..., 0.9}; i = 3 is truth
    const double av = 0.4 + 0.1 * i;
    if (i == 3) {
      add_point("alpha", av, true, p0, u_truth, 0.0, true);
      continue;
    }
    FodeProblem p = alpha_problem(av);
    p.seed = mix_seed(cfg.seed, 100 + static_cast<std::uint64_t>(i));
    const double det_u = l1_value(p, cfg.n_t);
    const double det_du = (l1_value(alpha_problem(av + h_alpha), cfg.n_t) -
                           l1_value(alpha_problem(av - h_alpha), cfg.n_t)) /
                          (2.0 * h_alpha);
    add_point("alpha", av, false, p, det_u, det_du, true);
  }
  for (int i = -3; i <= 2; ++i) {  // a11 in {a11_0 + 5i}; i = 0 is truth
    const double a11 = table.a11_0 + 5.0 * i;
    if (i == 0) {
      add_point("a11", a11, true, p0, u_truth, 0.0, false);
      continue;
    }
    FodeProblem p = a11_problem(a11);
    p.seed = mix_seed(cfg.seed, 200 + static_cast<std::uint64_t>(i + 3));
    const double h = h_alpha * std::abs(a11);
    const double det_u = l1_value(p, cfg.n_t);
    const double det_du = (l1_value(a11_problem(a11 + h), cfg.n_t) -
                           l1_value(a11_problem(a11 - h), cfg.n_t)) /
                          (2.0 * h);
    add_point("a11", a11, false, p, det_u, det_du, false);
  }
  return table;
}

FodeProblem build_lattice_problem(int dim, int n_x, double alpha, double T) {
  if (dim < 1 || n_x < 3)
    throw std::invalid_argument("build_lattice_problem: need dim >= 1, n_x >= 3");
  int n = 1;
  for (int k = 0; k < dim; ++k) n *= n_x;
  const double scale = static_cast<double>(n_x) * n_x;  // 1/dx^2
  FodeProblem p;
  p.n = n;
  p.a.resize(n);
  p.alpha.assign(n, alpha);
  p.u0.assign(n, 1.0);
  p.T = T;
  p.start_node = 0;
  for (int idx = 0; idx < n; ++idx) {
    auto& row = p.a[idx];
    row.diag = -2.0 * dim * scale;
    int stride = 1;
    int rem = idx;
    for (int k = 0; k < dim; ++k) {
      const int c = rem % n_x;
      rem /= n_x;
      const int up = idx + ((c + 1) % n_x - c) * stride;
      const int dn = idx + ((c + n_x - 1) % n_x - c) * stride;
      row.off.push_back({up, scale});
      row.off.push_back({dn, scale});
      stride *= n_x;
    }
    std::sort(row.off.begin(), row.off.end());
  }
  return p;
}

namespace {

void bench_point(const FodeProblem& p, std::uint64_t n_s, std::uint64_t seed,
                 double x, BenchSweep& sweep) {
  ValidateOptions opts;
  opts.allow_unit_alpha = true;
  const EmbeddedChain chain = validate_problem(p, Mode::Simplified, opts);
  WalkConfig wc;
  wc.want_sensitivities = false;
  WalkOutcome out;
  std::uint64_t jumps = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::uint64_t w = 0; w < n_s; ++w) {
    RngStream rng(seed, w);
    simulate_walk(p, chain, rng, out, wc);
    jumps += out.jumps;
  }
  const auto t1 = std::chrono::steady_clock::now();
  sweep.x.push_back(x);
  sweep.mean_jumps.push_back(static_cast<double>(jumps) /
                             static_cast<double>(n_s));
  sweep.wall_us.push_back(
      std::chrono::duration<double, std::micro>(t1 - t0).count() /
      static_cast<double>(n_s));
}

void fit_loglog(BenchSweep& s) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    lx.push_back(std::log(s.x[i]));
    ly.push_back(std::log(s.mean_jumps[i]));
  }
  fit_line(lx, ly, s.slope, s.r2);
}

}  // namespace

BenchReport run_bench(const BenchConfig& cfg) {
  BenchReport rep;
  std::uint64_t tag = 0;
  for (double alpha : cfg.alpha_list) {
    BenchSweep s;
    s.name = "T";
    s.param = alpha;
    for (double t : cfg.t_list)
      bench_point(build_lattice_problem(1, cfg.n_x, alpha, t), cfg.n_s,
                  mix_seed(cfg.seed, 10000 + tag++), t, s);
    fit_loglog(s);
    rep.t_sweeps.push_back(std::move(s));
  }
  rep.nx_sweep.name = "n_x";
  rep.nx_sweep.param = 1.0;
  for (int nx : cfg.nx_list)
    bench_point(build_lattice_problem(1, nx, 1.0, cfg.t_nx), cfg.n_s,
                mix_seed(cfg.seed, 20000 + tag++), nx, rep.nx_sweep);
  fit_loglog(rep.nx_sweep);

  rep.d_sweep.name = "d";
  rep.d_sweep.param = cfg.alpha_d;
  for (int d : cfg.d_list)
    bench_point(build_lattice_problem(d, cfg.nx_d, cfg.alpha_d, cfg.t_d),
                cfg.n_s, mix_seed(cfg.seed, 30000 + tag++), d, rep.d_sweep);
  fit_line(rep.d_sweep.x, rep.d_sweep.mean_jumps, rep.d_sweep.slope,
           rep.d_sweep.r2);
  return rep;
}

}  // namespace fodewalk

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "fodewalk/ml.hpp"
#include "fodewalk/problem.hpp"
#include "fodewalk/reference.hpp"
#include "fodewalk/rng.hpp"
#include "fodewalk/sampling.hpp"
#include "fodewalk/walker.hpp"

using namespace fodewalk;

namespace {

struct Acc {
  double s = 0.0, s2 = 0.0;
  long n = 0;
  void add(double x) {
    s += x;
    s2 += x * x;
    ++n;
  }
  double mean() const { return s / n; }
  double se() const {
    const double m = mean();
    const double v = std::max(0.0, s2 / n - m * m);
    return std::sqrt(v / n);
  }
};

// 4-sigma CLT band with an absolute floor for zero-variance components.
bool within4(const Acc& a, double target) {
  return std::abs(a.mean() - target) <= 4.0 * a.se() + 1e-12 * (1.0 + std::abs(target));
}

FodeProblem two_node_eps_chain(double eps, double T) {
  FodeProblem p;
  p.n = 2;
  p.a = {{-1.0, {{1, 1.0}}}, {-eps, {{0, eps}}}};
  p.alpha = {1.0, 1.0};
  p.u0 = {0.0, 1.0};
  p.T = T;
  p.start_node = 0;
  return p;
}

}  // namespace

TEST_CASE("hazard: closed forms, continuity, and guards") {
  CHECK(hazard(1.0, -2.5, 0.3) == 2.5);
  CHECK(hazard(1.0, -2.5, 0.0) == 2.5);  // memoryless: tau* irrelevant
  // alpha = 1/2 closed form via erfc: E_{1/2}(-y) = e^{y^2} erfc(y) and
  // E_{1/2,1/2}(-y) = 1/sqrt(pi) - y e^{y^2} erfc(y).  At a = -1, tau* = 1:
  // hazard = (1/sqrt(pi) - ec)/ec with ec = e * erfc(1).  [DERIVED]
  const double ec = std::exp(1.0) * std::erfc(1.0);
  const double target = (1.0 / std::sqrt(std::numbers::pi) - ec) / ec;
  CHECK(hazard(0.5, -1.0, 1.0) == doctest::Approx(target).epsilon(1e-9));
  // continuity at the classical limit
  CHECK(hazard(1.0 - 1e-8, -1.5, 0.7) == doctest::Approx(1.5).epsilon(1e-4));
  CHECK(hazard(0.7, -1.0, 0.05) > hazard(0.7, -1.0, 0.5));  // decreasing rate
  CHECK_THROWS_AS(hazard(0.5, -1.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(hazard(0.5, 1.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(hazard(1.2, -1.0, 1.0), std::domain_error);
}

TEST_CASE("n=1: all four estimator families match ML closed forms") {
  FodeProblem p;
  p.n = 1;
  p.a = {{-1.0, {}}};
  p.alpha = {0.7};
  p.u0 = {2.0};
  p.T = 0.9;
  const EmbeddedChain chain = validate_problem(p, Mode::Simplified);

  const double ta = std::pow(p.T, p.alpha[0]);
  const double z = -ta;
  const ml::MlValue surv = ml::ml_eval({0.7, 1.0, z}, true);
  const ml::MlValue dens = ml::ml_eval({0.7, 0.7, z}, false);
  const double ref_j = surv.value * p.u0[0];
  const double ref_dt = -std::pow(p.T, p.alpha[0] - 1.0) * dens.value * p.u0[0];
  const double ref_da = ta * surv.d_z * p.u0[0];
  // total d/dalpha of E_alpha(a T^alpha): slot derivative plus chain rule
  // through z = a T^alpha.
  const double ref_dalpha = (surv.d_alpha + surv.d_z * z * std::log(p.T)) * p.u0[0];

  Acc j, dt, da, dal;
  WalkOutcome out;
  const int n_s = 1000000;
  for (int w = 0; w < n_s; ++w) {
    RngStream rng(2024, w);
    simulate_walk(p, chain, rng, out);
    CHECK(out.rng_draws == 2);  // absorbing row: sojourn only, no jump draws
    j.add(out.J);
    dt.add(out.dT_term);
    double wa = 0.0, wl = 0.0;
    for (const auto& e : out.w_a) {
      CHECK(e.first.first == 0);
      CHECK(e.first.second == 0);
      wa = e.second;
    }
    for (const auto& e : out.w_alpha) {
      CHECK(e.first == 0);
      wl = e.second;
    }
    da.add(out.J * wa);
    dal.add(out.J * wl);
    CHECK(out.J == out.u0_weight * p.u0[out.final_node]);
  }
  CHECK(within4(j, ref_j));
  CHECK(within4(dt, ref_dt));
  CHECK(within4(da, ref_da));
  CHECK(within4(dal, ref_dalpha));
}

TEST_CASE("draw accounting and annihilation on an absorbing chain") {
  FodeProblem p;
  p.n = 2;
  p.a = {{-2.0, {{1, 1.5}}}, {-3.0, {}}};
  p.alpha = {0.8, 0.6};
  p.u0 = {0.4, 1.0};
  p.T = 0.7;
  const EmbeddedChain chain = validate_problem(p, Mode::Simplified);

  bool saw_annihilation = false, saw_survive_at_1 = false, saw_die_at_0 = false;
  WalkOutcome out;
  for (int w = 0; w < 20000; ++w) {
    RngStream rng(5150, w);
    simulate_walk(p, chain, rng, out);
    if (out.J == 0.0 && out.u0_weight == 0.0) {
      saw_annihilation = true;
      // jumps counts the annihilation event; its expiry drew no jump target
      CHECK(out.rng_draws == 3 * out.jumps - 1);
    } else if (out.final_node == 1) {
      saw_survive_at_1 = true;
      // final row is absorbing: the artificial extra jump draws nothing
      CHECK(out.rng_draws == 3 * out.jumps + 2);
      CHECK(out.dT_term < 0.0);  // jplus = 0, u0[1] > 0, pi > 0
    } else {
      saw_die_at_0 = true;
      CHECK(out.final_node == 0);
      // final row 0 has one edge: extra jump consumed one draw after J
      CHECK(out.rng_draws == 3 * out.jumps + 3);
    }
    CHECK(out.J == out.u0_weight * (out.final_node >= 0 ? p.u0[out.final_node] : 0.0));
  }
  CHECK(saw_annihilation);
  CHECK(saw_survive_at_1);
  CHECK(saw_die_at_0);
}

TEST_CASE("sparsity stays on visited rows; unreachable nodes never appear") {
  FodeProblem p;
  p.n = 3;
  p.a = {{-1.5, {{1, 0.5}}}, {-2.0, {{0, -0.3}}}, {-1.0, {{0, 0.2}}}};
  p.alpha = {0.75, 0.9, 0.8};
  p.u0 = {1.0, -0.5, 7.0};
  p.T = 1.5;
  p.start_node = 0;
  const EmbeddedChain chain = validate_problem(p, Mode::Simplified);

  WalkOutcome out;
  for (int w = 0; w < 20000; ++w) {
    RngStream rng(31337, w);
    simulate_walk(p, chain, rng, out);
    CHECK(out.final_node != 2);
    for (const auto& e : out.w_a) {
      CHECK(e.first.first != 2);
      CHECK(e.first.second != 2);
    }
    for (const auto& e : out.w_alpha) CHECK(e.first != 2);
    // negative edge 1 -> 0 flips the chi product sign; the per-walk identity
    // must hold regardless.
    CHECK(out.J == out.u0_weight * p.u0[out.final_node]);
    CHECK(out.rng_draws == 3 * out.jumps + 3);  // no absorbing rows here
  }
}

TEST_CASE("classical two-node chain: grad_A and solution closed forms") {
  // A = [[-1, 1], [eps, -eps]], u0 = (0,1), T = 1, alpha = 1.  As eps -> 0,
  // u_1(T) = 1 - e^-T, du_1/da_11 = 1 - (1+T)e^-T, du_1/da_12 = 1 - e^-T.
  // [DERIVED] from u_1(T) = a_12 u0_2 (e^{a_11 T} - 1)/a_11.
  const double T = 1.0;
  FodeProblem p = two_node_eps_chain(1e-12, T);
  ValidateOptions opts;
  opts.allow_unit_alpha = true;
  const EmbeddedChain chain = validate_problem(p, Mode::Simplified, opts);

  Acc j, da00, da01;
  WalkOutcome out;
  for (int w = 0; w < 200000; ++w) {
    RngStream rng(777, w);
    simulate_walk(p, chain, rng, out);
    j.add(out.J);
    double w00 = 0.0, w01 = 0.0;
    for (const auto& e : out.w_a) {
      if (e.first.first == 0 && e.first.second == 0) w00 = e.second;
      if (e.first.first == 0 && e.first.second == 1) w01 = e.second;
    }
    da00.add(out.J * w00);
    da01.add(out.J * w01);
  }
  const double em1 = std::exp(-T);
  CHECK(within4(j, 1.0 - em1));
  CHECK(within4(da00, 1.0 - (1.0 + T) * em1));
  CHECK(within4(da01, 1.0 - em1));
}

TEST_CASE("classical limit: random 5x5 systems match expm_oracle") {
  for (int sys = 0; sys < 10; ++sys) {
    RngStream prng(4200 + sys, 0);
    FodeProblem p = gen_random_problem(5, prng);
    for (auto& a : p.alpha) a = 1.0;
    p.start_node = sys % 5;
    ValidateOptions opts;
    opts.allow_unit_alpha = true;
    const EmbeddedChain chain = validate_problem(p, Mode::Simplified, opts);
    const Eigen::VectorXd ref = expm_oracle(p);

    Acc j;
    WalkOutcome out;
    WalkConfig cfg;
    cfg.want_sensitivities = false;  // solution-only run
    for (int w = 0; w < 20000; ++w) {
      RngStream rng(9000 + sys, w);
      simulate_walk(p, chain, rng, out, cfg);
      j.add(out.J);
      CHECK(out.w_a.empty());
      CHECK(out.dT_term == 0.0);
    }
    CHECK_MESSAGE(within4(j, ref[p.start_node]),
                  "system ", sys, ": mean ", j.mean(), " vs expm ",
                  ref[p.start_node]);
  }
}

TEST_CASE("Malliavin/CMC sensitivities match the FD-L1 oracle") {
  L1Config cfg;
  cfg.n_t = 1024;
  for (int sys = 0; sys < 5; ++sys) {
    RngStream prng(101, sys);
    FodeProblem p = gen_random_problem(5, prng);
    p.start_node = sys % 5;
    const EmbeddedChain chain = validate_problem(p, Mode::Simplified);
    const FdResult fd = fd_sensitivities(p, cfg);

    const int n = p.n;
    Acc j, dt;
    std::vector<Acc> da(n * n), dal(n), du0(n);
    std::vector<double> wa(n * n), wl(n);
    WalkOutcome out;
    const int n_s = 60000;
    for (int w = 0; w < n_s; ++w) {
      RngStream rng(7100 + sys, w);
      simulate_walk(p, chain, rng, out);
      std::fill(wa.begin(), wa.end(), 0.0);
      std::fill(wl.begin(), wl.end(), 0.0);
      for (const auto& e : out.w_a)
        wa[e.first.first * n + e.first.second] = e.second;
      for (const auto& e : out.w_alpha) wl[e.first] = e.second;
      j.add(out.J);
      dt.add(out.dT_term);
      for (int i = 0; i < n * n; ++i) da[i].add(out.J * wa[i]);
      for (int i = 0; i < n; ++i) dal[i].add(out.J * wl[i]);
      for (int k = 0; k < n; ++k)
        du0[k].add(out.final_node == k ? out.u0_weight : 0.0);
    }
    CHECK_MESSAGE(within4(j, fd.value), "system ", sys, " value");
    CHECK_MESSAGE(within4(dt, fd.d_t), "system ", sys, " d_t: ", dt.mean(),
                  " vs ", fd.d_t);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k)
        CHECK_MESSAGE(within4(da[i * n + k], fd.d_a(i, k)), "system ", sys,
                      " d_a(", i, ",", k, "): ", da[i * n + k].mean(), " vs ",
                      fd.d_a(i, k));
    for (int i = 0; i < n; ++i)
      CHECK_MESSAGE(within4(dal[i], fd.d_alpha[i]), "system ", sys, " d_alpha[",
                    i, "]: ", dal[i].mean(), " vs ", fd.d_alpha[i]);
    for (int k = 0; k < n; ++k)
      CHECK_MESSAGE(within4(du0[k], fd.d_u0[k]), "system ", sys, " d_u0[", k,
                    "]: ", du0[k].mean(), " vs ", fd.d_u0[k]);
  }
}

TEST_CASE("general mode with MatchedMl proposal reproduces simplified bits") {
  RngStream prng(55, 0);
  FodeProblem ps = gen_random_problem(4, prng);
  FodeProblem pg = ps;
  pg.mode = Mode::General;
  const EmbeddedChain cs = validate_problem(ps, Mode::Simplified);
  const EmbeddedChain cg = validate_problem(pg, Mode::General);

  WalkConfig cfg_s;
  cfg_s.want_sensitivities = false;
  WalkConfig cfg_g;
  cfg_g.proposal.kind = GeneralProposal::Kind::MatchedMl;
  WalkOutcome a, b, c;
  for (int w = 0; w < 2000; ++w) {
    RngStream r1(99, w), r2(99, w), r3(99, w);
    simulate_walk(ps, cs, r1, a, cfg_s);
    simulate_walk(pg, cg, r2, b, cfg_g);
    simulate_walk(ps, cs, r3, c);  // sensitivities on: same path, same J
    CHECK(a.J == b.J);
    CHECK(a.u0_weight == b.u0_weight);
    CHECK(a.final_node == b.final_node);
    CHECK(a.jumps == b.jumps);
    CHECK(a.rng_draws == b.rng_draws);
    CHECK(c.J == a.J);
    CHECK_FALSE(b.has_sensitivities);
  }
}

TEST_CASE("general mode with exponential proposal: same mean, and it covers "
          "systems the simplified mode rejects") {
  // Part 1: diagonally dominant system, simplified vs general agree.
  RngStream prng(56, 0);
  FodeProblem ps = gen_random_problem(3, prng);
  ps.T = 0.6;
  FodeProblem pg = ps;
  pg.mode = Mode::General;
  const EmbeddedChain cs = validate_problem(ps, Mode::Simplified);
  const EmbeddedChain cg = validate_problem(pg, Mode::General);
  WalkConfig cfg_s;
  cfg_s.want_sensitivities = false;
  Acc m1, m2;
  WalkOutcome out;
  for (int w = 0; w < 200000; ++w) {
    RngStream r1(4096, w);
    simulate_walk(ps, cs, r1, out, cfg_s);
    m1.add(out.J);
    RngStream r2(8192, w);
    simulate_walk(pg, cg, r2, out);
    m2.add(out.J);
  }
  const double joint = std::sqrt(m1.se() * m1.se() + m2.se() * m2.se());
  CHECK(std::abs(m1.mean() - m2.mean()) <= 4.0 * joint);

  // Part 2: positive diagonal entry (not a generator); classical oracle.
  FodeProblem pp;
  pp.n = 2;
  pp.a = {{-2.0, {{1, 1.0}}}, {0.2, {{0, 0.3}}}};
  pp.alpha = {1.0, 1.0};
  pp.u0 = {1.0, 0.5};
  pp.T = 0.5;
  pp.mode = Mode::General;
  ValidateOptions opts;
  opts.allow_unit_alpha = true;
  CHECK_THROWS_AS(validate_problem(pp, Mode::Simplified, opts), ValidationError);
  const EmbeddedChain cp = validate_problem(pp, Mode::General, opts);
  const Eigen::VectorXd ref = expm_oracle(pp);
  Acc mp;
  for (int w = 0; w < 200000; ++w) {
    RngStream r(515, w);
    simulate_walk(pp, cp, r, out);
    mp.add(out.J);
  }
  CHECK_MESSAGE(within4(mp, ref[0]), mp.mean(), " vs ", ref[0]);

  // Part 3: fractional orders with a positive diagonal, against L1.
  FodeProblem pf = pp;
  pf.alpha = {0.7, 0.85};
  pf.a[1].diag = 0.25;
  const EmbeddedChain cf = validate_problem(pf, Mode::General);
  L1Config l1c;
  l1c.n_t = 4096;
  const Eigen::MatrixXd traj = l1_solve(pf, l1c);
  Acc mf;
  for (int w = 0; w < 200000; ++w) {
    RngStream r(517, w);
    simulate_walk(pf, cf, r, out);
    mf.add(out.J);
  }
  CHECK_MESSAGE(within4(mf, traj(l1c.n_t, 0)), mf.mean(), " vs ",
                traj(l1c.n_t, 0));
}

TEST_CASE("storage stays O(nnz) on long paths") {
  FodeProblem p;
  p.n = 2;
  p.a = {{-2.0, {{1, 2.0}}}, {-2.0, {{0, 2.0}}}};  // chi = 1 ping-pong
  p.alpha = {0.8, 0.8};
  p.u0 = {1.0, -1.0};
  p.T = 50.0;
  const EmbeddedChain chain = validate_problem(p, Mode::Simplified);

  std::uint64_t max_jumps = 0;
  WalkOutcome out;
  for (int w = 0; w < 200; ++w) {
    RngStream rng(606, w);
    simulate_walk(p, chain, rng, out);
    max_jumps = std::max(max_jumps, out.jumps);
    CHECK(out.w_a.size() <= 4);      // (0,0),(0,1),(1,0),(1,1) at most
    CHECK(out.w_alpha.size() <= 2);
    CHECK(std::abs(out.u0_weight) == 1.0);  // |chi| = 1 exactly
    CHECK(std::isfinite(out.dT_term));
  }
  CHECK(max_jumps > 40);  // paths are long; containers did not grow with them
}

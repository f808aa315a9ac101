#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "fodewalk/problem.hpp"
#include "fodewalk/rng.hpp"

using namespace fodewalk;

namespace {

FodeProblem two_node() {
  FodeProblem p;
  p.n = 2;
  p.a.resize(2);
  p.a[0].diag = -2.0;
  p.a[0].off = {{1, 1.0}};
  p.a[1].diag = -2.0;
  p.a[1].off = {{0, 1.0}};
  p.alpha = {0.7, 0.8};
  p.u0 = {1.0, 0.5};
  p.T = 0.5;
  return p;
}

}  // namespace

TEST_CASE("two-node chain: chi and jump table") {
  auto chain = validate_problem(two_node(), Mode::Simplified);
  REQUIRE(chain.rows.size() == 2);
  const auto& r = chain.rows[0];
  CHECK(r.off_sum == 1.0);
  CHECK(r.chi == 0.5);             // -off_sum/diag = -1/(-2)
  REQUIRE(r.cols.size() == 1);
  CHECK(r.cols[0] == 1);           // P(J_1 = 2) = 1
  CHECK(r.vals[0] == 1.0);
  CHECK(r.cum.back() == 1.0);
  CHECK(r.alpha == 0.7);
  CHECK_FALSE(r.absorbing());
}

TEST_CASE("zero diagonal is rejected") {
  auto p = two_node();
  p.a[0].diag = 0.0;
  try {
    validate_problem(p, Mode::Simplified);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.kind == ValidationError::Kind::ZeroDiagonal);
    CHECK(e.row == 0);
  }
}

TEST_CASE("single absorbing node is valid") {
  FodeProblem p;
  p.n = 1;
  p.a.resize(1);
  p.a[0].diag = -3.0;
  p.alpha = {0.5};
  p.u0 = {2.0};
  p.T = 1.0;
  auto chain = validate_problem(p, Mode::Simplified);
  CHECK(chain.rows[0].absorbing());
  CHECK(chain.rows[0].cum.empty());
  CHECK(chain.rows[0].off_sum == 0.0);
  CHECK(chain.rows[0].chi == 0.0);
}

TEST_CASE("positive diagonal: rejected in simplified, kept in general") {
  auto p = two_node();
  p.a[1].diag = 2.0;
  try {
    validate_problem(p, Mode::Simplified);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.kind == ValidationError::Kind::PositiveDiagonalInSimplifiedMode);
    CHECK(e.row == 1);
  }
  auto chain = validate_problem(p, Mode::General);
  CHECK(chain.rows[1].chi == -0.5);  // chi(2,1) = -sgn(1)*1/2
}

TEST_CASE("alpha range enforcement and the classical-limit flag") {
  auto p = two_node();
  p.alpha[1] = 1.0;
  CHECK_THROWS_AS(validate_problem(p, Mode::Simplified), ValidationError);
  ValidateOptions classical;
  classical.allow_unit_alpha = true;
  CHECK_NOTHROW(validate_problem(p, Mode::Simplified, classical));
  p.alpha[1] = 1.2;
  CHECK_THROWS_AS(validate_problem(p, Mode::Simplified, classical), ValidationError);
  p.alpha[1] = 0.0;
  CHECK_THROWS_AS(validate_problem(p, Mode::Simplified, classical), ValidationError);
}

TEST_CASE("structural rejections") {
  auto dup = two_node();
  dup.a[0].off = {{1, 1.0}, {1, 2.0}};
  CHECK_THROWS_AS(validate_problem(dup, Mode::Simplified), ValidationError);

  auto self = two_node();
  self.a[0].off = {{0, 1.0}};
  CHECK_THROWS_AS(validate_problem(self, Mode::Simplified), ValidationError);

  auto oob = two_node();
  oob.a[0].off = {{2, 1.0}};
  CHECK_THROWS_AS(validate_problem(oob, Mode::Simplified), ValidationError);

  auto badT = two_node();
  badT.T = 0.0;
  CHECK_THROWS_AS(validate_problem(badT, Mode::Simplified), ValidationError);

  auto badStart = two_node();
  badStart.start_node = 2;
  CHECK_THROWS_AS(validate_problem(badStart, Mode::Simplified), ValidationError);

  auto badSize = two_node();
  badSize.alpha.pop_back();
  CHECK_THROWS_AS(validate_problem(badSize, Mode::Simplified), ValidationError);
}

TEST_CASE("zero off-diagonals are non-edges") {
  auto p = two_node();
  p.a[0].off = {{1, 0.0}};
  auto chain = validate_problem(p, Mode::Simplified);
  CHECK(chain.rows[0].absorbing());
  CHECK(chain.rows[0].off_sum == 0.0);
}

TEST_CASE("validation is idempotent") {
  auto p = two_node();
  auto c1 = validate_problem(p, Mode::Simplified);
  auto c2 = validate_problem(p, Mode::Simplified);
  REQUIRE(c1.rows.size() == c2.rows.size());
  for (std::size_t i = 0; i < c1.rows.size(); ++i) {
    CHECK(c1.rows[i].diag == c2.rows[i].diag);
    CHECK(c1.rows[i].off_sum == c2.rows[i].off_sum);
    CHECK(c1.rows[i].chi == c2.rows[i].chi);
    CHECK(c1.rows[i].cols == c2.rows[i].cols);
    CHECK(c1.rows[i].vals == c2.rows[i].vals);
    CHECK(c1.rows[i].cum == c2.rows[i].cum);
  }
}

TEST_CASE("random problems: dominance, chi bound, reproducibility") {
  RngStream rng(42, 0);
  auto p = gen_random_problem(5, rng);
  auto chain = validate_problem(p, Mode::Simplified);
  for (int i = 0; i < 5; ++i) {
    const auto& r = chain.rows[i];
    CHECK(std::abs(r.diag) > r.off_sum);  // strict dominance
    CHECK(std::abs(r.chi) < 1.0);         // M_chi < 1 follows
    CHECK(r.cols.size() == 4);
    if (!r.cum.empty()) {
      CHECK(r.cum.back() == 1.0);
      for (std::size_t k = 1; k < r.cum.size(); ++k) CHECK(r.cum[k] >= r.cum[k - 1]);
    }
    CHECK(p.alpha[i] > 0.6);
    CHECK(p.alpha[i] < 1.0);
    CHECK(p.u0[i] > 0.0);
    CHECK(p.u0[i] < 1.0);
  }
  CHECK(p.T > 0.0);
  CHECK(p.T < 1.0);

  RngStream rng2(42, 0);
  auto q = gen_random_problem(5, rng2);
  for (int i = 0; i < 5; ++i) {
    CHECK(p.a[i].diag == q.a[i].diag);
    CHECK(p.a[i].off == q.a[i].off);
    CHECK(p.alpha[i] == q.alpha[i]);
    CHECK(p.u0[i] == q.u0[i]);
  }
  CHECK(p.T == q.T);

  RngStream rng3(42, 1);
  auto r3 = gen_random_problem(5, rng3);
  CHECK(r3.a[0].off[0].second != p.a[0].off[0].second);

  CHECK_THROWS_AS((void)gen_random_problem(1, rng), std::invalid_argument);
}

TEST_CASE("Robin corner entry against hand values") {
  RobinSpec spec;
  spec.n_x = 4;
  spec.b1 = 1.0;
  spec.b2 = 0.0;
  auto p = build_robin_problem(spec, 1.0);
  CHECK(p.n == 3);
  CHECK(p.a[0].diag == -32.0);  // -(0/(1*0.25-0) + 2) * 16

  spec.b1 = 0.0;
  spec.b2 = -1.0;
  auto q = build_robin_problem(spec, 1.0);
  CHECK(q.a[0].diag == doctest::Approx(-16.0).epsilon(1e-14));  // Neumann limit

  spec.b1 = 4.0;
  spec.b2 = 1.0;  // b1 dx == b2
  CHECK_THROWS_AS(build_robin_problem(spec, 1.0), ValidationError);
}

TEST_CASE("Robin stencil structure and row sums") {
  RobinSpec spec;  // defaults: n_x=20, b1=1, b2=-1
  auto p = build_robin_problem(spec, 0.02);
  const double dx = 1.0 / 20;
  const double s = 1.0 / (dx * dx);  // same expression as the builder
  REQUIRE(p.n == 19);
  for (int i = 1; i < p.n - 1; ++i) {
    CHECK(p.a[i].diag == -2.0 * s);
    REQUIRE(p.a[i].off.size() == 2);
    CHECK(p.a[i].off[0] == std::pair<int, double>{i - 1, s});
    CHECK(p.a[i].off[1] == std::pair<int, double>{i + 1, s});
    // interior rows of L sum to zero exactly
    CHECK(p.a[i].diag + p.a[i].off[0].second + p.a[i].off[1].second == 0.0);
  }
  CHECK(p.a[p.n - 1].diag == -s);
  CHECK(p.a[p.n - 1].off[0] == std::pair<int, double>{p.n - 2, s});
  // problem is admissible in simplified mode
  CHECK_NOTHROW(validate_problem(p, Mode::Simplified));
}

TEST_CASE("Robin alpha profile and pulse normalization") {
  RobinSpec spec;
  auto p = build_robin_problem(spec, 0.02);
  // x = 0.5 is node 9 (x_i = (i+1)/20): g = 0.7*(1+1)/4 + 0.5
  CHECK(p.alpha[9] == doctest::Approx(0.85).epsilon(1e-15));
  for (double a : p.alpha) {
    CHECK(a >= 0.5);
    CHECK(a <= 0.5 + spec.alpha_param / 2.0 + 1e-15);
  }
  // pulse peak sits at x = 0.1 = node 1 and is normalized to 1
  CHECK(p.u0[1] == 1.0);
  for (double v : p.u0) {
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("chain rule to Robin parameters") {
  RobinSpec spec;
  spec.n_x = 4;
  spec.b1 = 1.0;
  spec.b2 = 0.0;
  std::vector<double> galpha(3, 0.0);
  auto cr = chain_rule_robin(1.0, galpha, spec);
  CHECK(cr.d_b2 == doctest::Approx(-64.0).epsilon(1e-14));
  CHECK(cr.d_b1 == 0.0);  // proportional to b2
  CHECK(cr.d_alpha == 0.0);

  galpha = {0.0, 1.0, 0.0};  // x = 0.5
  cr = chain_rule_robin(0.0, galpha, spec);
  CHECK(cr.d_alpha == doctest::Approx(0.5).epsilon(1e-15));

  std::vector<double> wrong(2, 0.0);
  CHECK_THROWS_AS((void)chain_rule_robin(1.0, wrong, spec), std::invalid_argument);
}

TEST_CASE("chain rule matches finite differences of the builder") {
  RobinSpec spec;  // defaults with b2 = -1
  const double h = 1e-6;
  auto a11 = [&](double b1, double b2) {
    RobinSpec s = spec;
    s.b1 = b1;
    s.b2 = b2;
    return build_robin_problem(s, 0.02).a[0].diag;
  };
  std::vector<double> galpha(spec.n_x - 1, 0.0);
  auto cr = chain_rule_robin(1.0, galpha, spec);
  const double fd_b1 = (a11(spec.b1 + h, spec.b2) - a11(spec.b1 - h, spec.b2)) / (2 * h);
  const double fd_b2 = (a11(spec.b1, spec.b2 + h) - a11(spec.b1, spec.b2 - h)) / (2 * h);
  CHECK(cr.d_b1 == doctest::Approx(fd_b1).epsilon(1e-7));
  CHECK(cr.d_b2 == doctest::Approx(fd_b2).epsilon(1e-7));

  // alpha chain against FD across the whole profile
  auto alpha_at = [&](double ap) {
    RobinSpec s = spec;
    s.alpha_param = ap;
    return build_robin_problem(s, 0.02).alpha;
  };
  auto up = alpha_at(spec.alpha_param + h);
  auto dn = alpha_at(spec.alpha_param - h);
  std::vector<double> ga(spec.n_x - 1);
  double want = 0.0;
  for (int i = 0; i < spec.n_x - 1; ++i) {
    ga[i] = 1.0;  // sum over all nodes
    want += (up[i] - dn[i]) / (2 * h);
  }
  cr = chain_rule_robin(0.0, ga, spec);
  CHECK(cr.d_alpha == doctest::Approx(want).epsilon(1e-8));
}

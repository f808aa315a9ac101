#pragma once
// Experiment drivers shared by the CLI and the acceptance harness: the
// 100-system validation table, the Robin-boundary loss sweep with bootstrap
// intervals, and the jump-count scaling benchmarks.

#include <cstdint>
#include <string>
#include <vector>

#include "fodewalk/estimator.hpp"
#include "fodewalk/problem.hpp"

namespace fodewalk {

struct ValidationConfig {
  int systems = 100;
  int n = 5;
  std::uint64_t n_s = 100000;
  std::uint64_t seed = 1;
  unsigned workers = 1;  // FD perturbation solves only; walks are ordered
  double level = 0.05;
  int n_t = 2048;
};

// Pass flags for one random system, columns in table order: u_i(T),
// du/dA (Hotelling on the flattened matrix), du/dalpha_i, du/du0_i, du/dT,
// all at the observed node i = start_node.
struct ValidationRow {
  bool value = false, d_a = false, d_alpha = false, d_u0 = false, d_t = false;
  std::string note;  // nonempty when the system errored (counted as fails)
};

struct ValidationTable {
  std::vector<ValidationRow> rows;
  int passed[5] = {0, 0, 0, 0, 0};  // value, d_a, d_alpha, d_u0, d_t
  int errors = 0;
};

ValidationTable run_validation(const ValidationConfig& cfg);

struct RobinConfig {
  int n_x = 10;
  double T = 0.1;
  double alpha0 = 0.7;  // true alpha_param; the matrix truth a11_0 is built
  std::uint64_t n_s = 1000000;
  int b_resamples = 5000;
  double level = 0.05;
  std::uint64_t seed = 1;
  int n_t = 4096;
};

// One sweep point/quantity: quadratic loss L(theta) = (u(T;theta) -
// u(T;theta_0))^2 / 2 at the observed node, or its gradient dL/dtheta.
// The deterministic value comes from L1 (+ central FD for the gradient);
// the interval is a paired bootstrap of the per-walk series, with the truth
// run resampled under the same indices (so both vanish identically at the
// truth point).
struct RobinPoint {
  std::string param;     // "alpha" | "a11"
  double value = 0.0;    // swept parameter value
  std::string quantity;  // "loss" | "grad"
  double det = 0.0;
  Interval ci{};
  bool overlap = false;  // ci.lo <= det <= ci.hi
};

struct RobinTable {
  double a11_0 = 0.0;
  std::vector<RobinPoint> points;  // 24 entries: (6 alpha + 6 a11) x 2
  int overlaps = 0;
};

RobinTable run_robin(const RobinConfig& cfg);

struct BenchConfig {
  std::uint64_t n_s = 2000;
  std::uint64_t seed = 1;
  std::vector<double> t_list = {1, 2, 4, 8};
  std::vector<double> alpha_list = {0.5, 0.75, 1.0};
  int n_x = 8;  // grid of the T sweep
  std::vector<int> nx_list = {4, 8, 16, 32};
  double t_nx = 0.25;  // fixed T of the n_x sweep (alpha = 1)
  std::vector<int> d_list = {1, 2, 3, 4};
  int nx_d = 4;
  double t_d = 0.5;
  double alpha_d = 0.75;
};

// One scaling line: points (x, mean jump count, mean wall microseconds per
// walk) and a fitted slope/r2 -- log-log for the T and n_x sweeps, linear
// for the dimension sweep.  Wall time is informational only.
struct BenchSweep {
  std::string name;
  double param = 0.0;  // alpha of a T sweep; unused otherwise
  std::vector<double> x, mean_jumps, wall_us;
  double slope = 0.0;
  double r2 = 0.0;
};

struct BenchReport {
  std::vector<BenchSweep> t_sweeps;  // one per alpha; slope ~ alpha
  BenchSweep nx_sweep;               // slope ~ 2
  BenchSweep d_sweep;                // linear in d
};

BenchReport run_bench(const BenchConfig& cfg);

// Periodic d-dimensional lattice Laplacian A = -L on n_x^d nodes with unit
// diffusivity and dx = 1/n_x: diagonal -2 d n_x^2, each of the 2d wrapped
// neighbors n_x^2.  Uniform alpha, u0 = 1, start at node 0.  n_x >= 3.
FodeProblem build_lattice_problem(int dim, int n_x, double alpha, double T);

}  // namespace fodewalk

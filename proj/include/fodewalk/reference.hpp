#pragma once
// Deterministic oracles: L1 scheme for heterogeneous-alpha Caputo systems,
// centered finite-difference sensitivities, and a dense matrix exponential
// for the classical alpha = 1 limit.

#include <Eigen/Dense>

#include "fodewalk/problem.hpp"

namespace fodewalk {

struct L1Config {
  int n_t = 4096;
};

// L1 history weights w_m = (m+1)^{1-alpha} - m^{1-alpha}, m = 0..count-1.
std::vector<double> l1_weights(double alpha, int count);

// Implicit L1 time stepper; returns the (n_t+1) x n trajectory, row j at
// time j*dt.  Requires alpha_i in (0,1) strictly; use expm_oracle at 1.
Eigen::MatrixXd l1_solve(const FodeProblem& p, const L1Config& cfg);

struct FdTargets {
  bool d_a = true;
  bool d_alpha = true;
  bool d_u0 = true;
  bool d_t = true;
};

struct FdResult {
  double value = 0.0;       // u_obs(T) from the base solve
  Eigen::MatrixXd d_a;      // n x n, every a_jk
  Eigen::VectorXd d_alpha;  // n
  Eigen::VectorXd d_u0;     // n
  double d_t = 0.0;
  int solves = 0;           // l1_solve invocations (2n^2+4n+3 all-targets)
};

// Central differences with h = sqrt(eps) max(1,|theta|) per parameter; the
// T derivative instead steps by exactly one dt (n_t +- 1 at fixed dt), and
// alpha falls back to a one-sided second-order stencil when alpha + h >= 1.
// Perturbation solves run on `workers` threads; results are deterministic.
FdResult fd_sensitivities(const FodeProblem& p, const L1Config& cfg,
                          const FdTargets& targets = {}, unsigned workers = 1);

// exp(A T) u0 for the classical limit; alpha is ignored.  Dense, n <= 200.
Eigen::VectorXd expm_oracle(const FodeProblem& p);

}  // namespace fodewalk

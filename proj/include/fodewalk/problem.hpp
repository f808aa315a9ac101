#pragma once
// Problem definition, validation, and construction of the two experiment
// families: random diagonally dominant systems and the Robin-boundary
// fractional heat equation.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fodewalk/rng.hpp"

namespace fodewalk {

enum class Mode { Simplified, General };

// Linear system du_i^(alpha_i)/dt = sum_j a_ij u_j, u(0) = u0, observed at
// the start node at time T.  Indices are 0-based internally; the JSON
// interchange format is 1-based (see report_io).
struct FodeProblem {
  struct Row {
    double diag = 0.0;                       // a_ii
    std::vector<std::pair<int, double>> off; // (column, a_ij), j != i
  };
  int n = 0;
  std::vector<Row> a;          // n rows
  std::vector<double> alpha;   // n entries in (0,1); 1 only in classical mode
  std::vector<double> u0;      // n entries
  double T = 0.0;
  int start_node = 0;
  Mode mode = Mode::Simplified;
  std::uint64_t seed = 0;
  std::uint64_t num_walks = 0;
};

class ValidationError : public std::runtime_error {
public:
  enum class Kind {
    BadStructure,
    ZeroDiagonal,
    PositiveDiagonalInSimplifiedMode,
    AlphaOutOfRange,
    RobinDenominatorZero,
  };
  ValidationError(Kind kind, int row, const std::string& msg)
      : std::runtime_error(msg), kind(kind), row(row) {}
  Kind kind;
  int row;  // 0-based offending row, -1 when not row-specific
};

// Precomputed jump structure of the embedded chain, one row per node, shared
// read-only across workers.
struct EmbeddedChain {
  struct Row {
    double diag = 0.0;
    double alpha = 0.0;
    double off_sum = 0.0;      // sum_{j != i} |a_ij|
    double chi = 0.0;          // -off_sum/diag; chi(i,k) = sgn(a_ik) * chi
    std::vector<int> cols;     // jump targets for the stored edges
    std::vector<double> vals;  // a_ik for those edges
    std::vector<double> cum;   // cumulative |a_ik|/off_sum, back() == 1
    bool absorbing() const { return cols.empty(); }
  };
  std::vector<Row> rows;
};

struct ValidateOptions {
  // Classical-limit mode: accept alpha_i = 1 (exponential sojourns).
  bool allow_unit_alpha = false;
};

// Checks all structural invariants and returns the embedded chain.
// Zero-valued off-diagonal entries are dropped (they are non-edges);
// duplicate columns within a row are rejected.
EmbeddedChain validate_problem(const FodeProblem& p, Mode mode,
                               const ValidateOptions& opts = {});

// Random diagonally dominant test system.  Draw order per row i: off-diagonal
// N(0,1) values in ascending column order, then one uniform for the dominance
// factor a_ii = -(1+U) sum_l |a_il|; then alpha_i ~ U(0.6,1), u0_i ~ U(0,1)
// componentwise, and finally T ~ U(0,1).  Requires n >= 2.
FodeProblem gen_random_problem(int n, RngStream& rng);

struct RobinSpec {
  int n_x = 20;                // grid count; interior nodes are x_i = i/n_x
  std::vector<double> kappa;   // diffusivity at interior nodes; empty -> 1
  double b1 = 1.0;
  double b2 = -1.0;
  double alpha_param = 0.7;    // scalar alpha in g(x; alpha)
  double mu = 0.1;
  double sigma = 0.025;
};

// Discretized Robin-boundary fractional heat equation: A = -L on the
// interior grid, alpha_i = g(x_i; alpha_param) = alpha (sin(pi x)+1)/4 + 1/2,
// u0 a max-normalized Gaussian pulse.  Requires n_x >= 3.
FodeProblem build_robin_problem(const RobinSpec& spec, double T);

struct RobinChainRule {
  double d_b1 = 0.0;
  double d_b2 = 0.0;
  double d_alpha = 0.0;
};

// Chains grad wrt a_11 and the per-node alpha gradient back to the Robin
// parameters (b1, b2) and the scalar alpha_param.
RobinChainRule chain_rule_robin(double grad_a11,
                                std::span<const double> grad_alpha,
                                const RobinSpec& spec);

}  // namespace fodewalk

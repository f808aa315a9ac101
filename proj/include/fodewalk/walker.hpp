#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "fodewalk/problem.hpp"
#include "fodewalk/rng.hpp"

namespace fodewalk {

// One CTRW path and its per-walk estimator contributions. Sparse containers
// hold at most one entry per visited row (plus one per traversed edge for
// w_a), so storage is O(nnz) regardless of the number of jumps.
struct WalkOutcome {
  double J = 0.0;           // pi * u0[final_node]
  int final_node = -1;      // node occupied at time T (grad-u0 slot)
  double u0_weight = 0.0;   // pi: product of signed chi factors (and, in
                            // general mode, importance ratios)
  double dT_term = 0.0;     // per-walk CMC time-sensitivity contribution
  std::vector<std::pair<std::pair<int, int>, double>> w_a;  // Malliavin dA
  std::vector<std::pair<int, double>> w_alpha;              // Malliavin dalpha
  std::uint64_t jumps = 0;       // completed jumps by time T (chi factors)
  std::uint64_t rng_draws = 0;   // uniform words consumed by this walk
  bool has_sensitivities = false;

  void clear() {
    J = 0.0;
    final_node = -1;
    u0_weight = 0.0;
    dT_term = 0.0;
    w_a.clear();
    w_alpha.clear();
    jumps = 0;
    rng_draws = 0;
    has_sensitivities = false;
  }
};

// Proposal law for general mode. Exponential: rate lambda_star (0 picks
// max_i |a_ii|), every event carries a density ratio. MatchedMl: sample the
// exact per-node ML law so all ratios are identically 1; this reproduces the
// simplified-mode J bit for bit (test hook; requires negative diagonals).
struct GeneralProposal {
  enum class Kind { Exponential, MatchedMl };
  Kind kind = Kind::Exponential;
  double rate = 0.0;
};

struct WalkConfig {
  GeneralProposal proposal{};
  // Simplified mode only: when false, skip Malliavin/CMC weights and the
  // artificial extra jump; the walk produces J (and grad-u0) alone.
  bool want_sensitivities = true;
};

// Hazard (critical rate) of an in-progress ML sojourn at elapsed time
// tau_star: lambda(tau*) = -a tau*^{alpha-1} E_{alpha,alpha}(a tau*^alpha)
// / E_alpha(a tau*^alpha). Constant -a at alpha = 1; diverges as tau* -> 0
// for alpha < 1 (caller clamps tau* away from zero).
double hazard(double alpha, double a, double tau_star);

// Simulate one walk of the problem under its mode. The RNG stream is
// consumed only through sample_sojourn / sample_jump, so draw counts are
// reproducible functions of the path shape.
void simulate_walk(const FodeProblem& p, const EmbeddedChain& chain,
                   RngStream& rng, WalkOutcome& out,
                   const WalkConfig& cfg = {});

WalkOutcome simulate_walk(const FodeProblem& p, const EmbeddedChain& chain,
                          RngStream& rng, const WalkConfig& cfg = {});

}  // namespace fodewalk

#pragma once
// Sojourn-time and jump sampling for the embedded CTRW.

#include <span>

#include "fodewalk/rng.hpp"

namespace fodewalk {

struct SojournLaw {
  double alpha;  // in (0,1]
  double rate;   // lambda > 0; survival P(tau > t) = E_alpha(-rate t^alpha)
};

// Mittag-Leffler sojourn sample; consumes exactly two uniforms.  At alpha = 1
// the bracket factor degenerates to 1 and the law is Exp(rate), continuously.
double sample_sojourn(const SojournLaw& law, RngStream& rng);

// Inverse-CDF draw from a discrete law given cumulative probabilities whose
// last entry is 1; consumes one uniform.
int sample_jump(std::span<const double> cumprobs, RngStream& rng);

}  // namespace fodewalk

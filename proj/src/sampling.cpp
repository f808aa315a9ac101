#include "fodewalk/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fodewalk {

double sample_sojourn(const SojournLaw& law, RngStream& rng) {
  if (!(law.rate > 0.0) || !std::isfinite(law.rate))
    throw std::domain_error("sample_sojourn: rate must be positive and finite");
  if (!(law.alpha > 0.0 && law.alpha <= 1.0))
    throw std::domain_error("sample_sojourn: alpha must lie in (0,1]");
  const double u = rng.uniform_open01();
  const double v = rng.uniform_open01();
  const double e = -std::log(u);
  if (law.alpha == 1.0) return e / law.rate;
  const double api = law.alpha * std::numbers::pi;
  // Kanter bracket; equals sin(api (1-v)) / sin(api v) > 0 for v in (0,1).
  const double bracket = std::sin(api) / std::tan(api * v) - std::cos(api);
  return e * std::pow(bracket, 1.0 / law.alpha) /
         std::pow(law.rate, 1.0 / law.alpha);
}

int sample_jump(std::span<const double> cumprobs, RngStream& rng) {
  if (cumprobs.empty())
    throw std::logic_error("sample_jump: empty distribution");
  const double u = rng.uniform_open01();
  auto it = std::upper_bound(cumprobs.begin(), cumprobs.end(), u);
  if (it == cumprobs.end()) --it;  // u above the final cumulative (== 1)
  return static_cast<int>(it - cumprobs.begin());
}

}  // namespace fodewalk

#include "varsel/utility.hpp"

#include <cmath>

#include "varsel/complexity.hpp"
#include "varsel/errors.hpp"

namespace varsel {

void PenaltySpec::validate() const {
  if (!std::isfinite(alpha) || alpha <= 0.0)
    raise(Errc::RangeError, "penalty alpha must be positive");
  if (!std::isfinite(epsilon) || epsilon < 0.0)
    raise(Errc::RangeError, "penalty epsilon must be non-negative");
}

void UtilityConfig::validate() const {
  if (!std::isfinite(lambda) || lambda < 0.0 || lambda > 1.0)
    raise(Errc::RangeError, "lambda must lie in [0, 1]");
  penalty.validate();
}

double penalty_rho(const Dataset& generated, const Dataset& target, const Program& program,
                   const PenaltySpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case PenaltyKind::Quadratic:
      return spec.alpha * mse(generated, target);
    case PenaltyKind::Absolute:
      return spec.alpha * mad(generated, target);
    case PenaltyKind::Threshold:
      return max_abs_dev(generated, target) < spec.epsilon ? 0.0 : spec.alpha;
    case PenaltyKind::Complexity:
      return spec.alpha * static_cast<double>(canonical_text(program).size());
  }
  raise(Errc::RangeError, "unknown penalty kind");
}

double reward(double rho) {
  if (!std::isfinite(rho)) raise(Errc::NonFiniteInput, "penalty must be finite");
  if (rho < 0.0) raise(Errc::RangeError, "penalty must be non-negative");
  return std::exp(-rho);
}

double utility(double posterior_p, double reward_r, double lambda) {
  if (!std::isfinite(posterior_p) || posterior_p < 0.0 || posterior_p > 1.0)
    raise(Errc::RangeError, "posterior must lie in [0, 1]");
  if (!std::isfinite(reward_r) || reward_r <= 0.0 || reward_r > 1.0)
    raise(Errc::RangeError, "reward must lie in (0, 1]");
  if (!std::isfinite(lambda) || lambda < 0.0 || lambda > 1.0)
    raise(Errc::RangeError, "lambda must lie in [0, 1]");
  return lambda * posterior_p + (1.0 - lambda) * reward_r;
}

}  // namespace varsel

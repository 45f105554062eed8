#pragma once

#include "varsel/dataset.hpp"
#include "varsel/program.hpp"

namespace varsel {

enum class PenaltyKind { Quadratic, Absolute, Threshold, Complexity };

struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::Quadratic;
  double alpha = 1.0;    // scaling factor, > 0
  double epsilon = 0.0;  // threshold margin, >= 0

  void validate() const;
};

struct UtilityConfig {
  double lambda = 0.5;  // posterior weight in [0, 1]
  PenaltySpec penalty;

  void validate() const;
};

/// Deviation (or complexity) cost of a candidate's output against the target
/// table: quadratic = alpha * mse, absolute = alpha * mad, threshold = 0 when
/// max |dev| stays strictly inside epsilon else alpha, complexity = alpha *
/// canonical source bytes (only this kind looks at the program).
double penalty_rho(const Dataset& generated, const Dataset& target, const Program& program,
                   const PenaltySpec& spec);

/// Monotone map of the penalty into (0, 1]: e^-rho. A zero-penalty program
/// scores 1.
double reward(double rho);

/// lambda * posterior + (1 - lambda) * reward. lambda = 1 ranks purely by
/// posterior, lambda = 0 purely by reward.
double utility(double posterior_p, double reward_r, double lambda);

}  // namespace varsel

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace varsel {

/// The sigmoid likelihood comes in two directions. Increasing is the
/// original formulation 1/(1+e^-mse), which grows with error; Corrected
/// flips the sign so better fits score higher. Both are selectable so either
/// behavior can be reproduced.
enum class LikelihoodMode { Increasing, Corrected };

enum class PosteriorMode { PlainK, ConditionalK, MleWeighted };

/// Sigmoid over dataset error. 0.5 at zero error in both modes.
double likelihood(double mse_value, LikelihoodMode mode);

/// Numerically stable ln of likelihood(); exact where the plain value would
/// underflow.
double log_likelihood(double mse_value, LikelihoodMode mode);

/// Gaussian residual log-likelihood with the variance profiled out at its
/// maximizer, clamped below at 1e-12 so a perfect fit stays finite.
/// sample_count is the number of compared cells (rows x columns).
double mle_score(double residual_mse, std::size_t sample_count);

struct WeightInput {
  std::string id;
  bool ok = true;          // false: run failed; excluded from normalization
  double k_bits = 0.0;      // descriptive complexity
  double k_cond_bits = 0.0; // conditional complexity vs the base program
  double log_lik = 0.0;
  double mle_log = 0.0;
  std::string error;
};

struct PosteriorEntry {
  std::string id;
  bool ok = false;
  double probability = 0.0;
  double log_weight = 0.0;  // pre-normalization, natural log
  double tie_bits = 0.0;    // complexity used for deterministic tie-breaks
  std::string error;
};

struct PosteriorDistribution {
  PosteriorMode mode = PosteriorMode::ConditionalK;
  std::vector<PosteriorEntry> entries;

  const PosteriorEntry* find(const std::string& id) const;
};

/// Normalized program weights. PlainK weighs by 2^-K(p) * L, ConditionalK by
/// 2^-K(p|base) * L, MleWeighted by e^mle * L. All arithmetic happens in
/// natural-log space with a log-sum-exp normalization; the successful
/// entries sum to 1 within 1e-9 and failed programs carry probability 0 with
/// their error preserved. Throws EmptySupport when nothing ran.
PosteriorDistribution posterior(std::span<const WeightInput> inputs, PosteriorMode mode);

/// Posterior-weighted cellwise average of one output row per program.
/// Every positive-probability program must supply a row of the same width.
std::vector<double> predict_row(
    const PosteriorDistribution& post,
    const std::vector<std::pair<std::string, std::vector<double>>>& outputs);

/// Argmax of the posterior. Ties break toward lower complexity bits, then
/// the lexicographically smaller id, so the choice is deterministic.
std::string decide(const PosteriorDistribution& post);

}  // namespace varsel

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "varsel/complexity.hpp"
#include "varsel/dataset.hpp"
#include "varsel/generate.hpp"
#include "varsel/inference.hpp"
#include "varsel/program.hpp"
#include "varsel/runner.hpp"
#include "varsel/utility.hpp"

namespace varsel {

enum class LikelihoodTarget { Observed, Optimal };

struct SearchConfig {
  UtilityConfig utility;
  LikelihoodMode likelihood_mode = LikelihoodMode::Corrected;
  PosteriorMode posterior_mode = PosteriorMode::ConditionalK;
  LikelihoodTarget likelihood_target = LikelihoodTarget::Observed;
  std::size_t neighborhood_size = 5;
  std::size_t max_iterations = 100;
  std::string initial_program;  // empty = base
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// One scored row per candidate; the joint likelihood-and-utility table the
/// search runs on. Score fields are meaningful only when ok.
struct EvaluationRecord {
  std::string id;
  bool ok = false;
  std::string error;
  double mse_vs_observed = 0.0;
  double mse_vs_optimal = 0.0;
  double k_bits = 0.0;
  double k_cond_bits = 0.0;
  double likelihood = 0.0;
  double log_likelihood = 0.0;
  double mle_log = 0.0;
  double posterior = 0.0;
  double log_weight = 0.0;
  double tie_bits = 0.0;
  double rho = 0.0;
  double reward = 0.0;
  double utility = 0.0;
};

struct TraceStep {
  std::size_t iteration = 0;
  std::string current;
  std::vector<std::string> neighborhood;
  std::string chosen;
  double utility = 0.0;
};

enum class Termination { NoImprovement, MaxIterations };

struct SearchResult {
  std::string best_program;
  double best_utility = 0.0;
  std::vector<TraceStep> trace;
  Termination termination = Termination::NoImprovement;
};

/// Everything the optimization phase consumes: the candidate set, the input
/// table, the observed and target datasets, cached run outputs, and cached
/// complexities. Immutable once built.
class PreparedProblem {
 public:
  using Generator = std::function<VariantBatch(const Program& base)>;

  /// Preparation phase: run the base to obtain the observed table (unless
  /// one is supplied), check the target's shape against it, generate and
  /// validate variants, run every candidate, and cache complexities.
  /// Throws BaseRunFailed, TargetShapeMismatch, GeneratorFailed.
  static PreparedProblem build(const Program& base, InputSpace theta, Dataset d_star,
                               const Generator& generator, const RunLimits& limits,
                               int jobs = 0, std::optional<Dataset> observed = {});

  /// Reassembles a problem from already-materialized parts (bundle reload).
  static PreparedProblem from_parts(ProgramSet set, InputSpace theta, Dataset d_star,
                                    Dataset observed, std::vector<RunOutcome> outcomes);

  const ProgramSet& programs() const { return set_; }
  const InputSpace& theta() const { return theta_; }
  const Dataset& d_star() const { return d_star_; }
  const Dataset& observed() const { return observed_; }

  std::size_t size() const { return set_.size(); }
  std::size_t index_of(const std::string& id) const;
  const RunOutcome& outcome(std::size_t index) const { return outcomes_[index]; }
  double k_plain_bits(std::size_t index) const { return k_plain_bits_[index]; }
  double k_cond_base_bits(std::size_t index) const { return k_cond_base_bits_[index]; }

  /// Conditional complexity of candidate given current, memoized.
  double pair_bits(const std::string& candidate_id, const std::string& current_id) const;

 private:
  PreparedProblem() = default;
  void finalize();

  ProgramSet set_;
  InputSpace theta_{{"_"}, {0.0}};
  Dataset d_star_{{"_"}, {0.0}};
  Dataset observed_{{"_"}, {0.0}};
  std::vector<RunOutcome> outcomes_;
  std::vector<double> k_plain_bits_;
  std::vector<double> k_cond_base_bits_;
  mutable ConditionalCache pair_cache_;
};

/// Spec'd entry point mirroring the preparation phase.
PreparedProblem prepare(const Program& base, InputSpace theta, Dataset d_star,
                        const PreparedProblem::Generator& generator,
                        const RunLimits& limits, int jobs = 0,
                        std::optional<Dataset> observed = {});

/// Full joint scoring of every candidate: error metrics, complexities,
/// likelihood, MLE score, one posterior normalized over all successful
/// candidates, penalty, reward, utility. Deterministic for a given config;
/// candidates are scored in parallel, the normalization runs once.
std::vector<EvaluationRecord> evaluate_all(const PreparedProblem& prepared,
                                           const SearchConfig& config);

namespace serial {
/// Reference implementation without the candidate-parallel loop; must equal
/// evaluate_all exactly.
std::vector<EvaluationRecord> evaluate_all(const PreparedProblem& prepared,
                                           const SearchConfig& config);
}  // namespace serial

/// The `size` candidates nearest to `current` under conditional-complexity
/// distance (ties: lower descriptive complexity, then id). Excludes
/// `current`; returns fewer when the set is small.
std::vector<std::string> neighborhood(const PreparedProblem& prepared,
                                      const std::string& current, std::size_t size);

/// Hill climb over precomputed utilities: evaluate the neighborhood, move to
/// its best member only on strict improvement, stop on a plateau or after
/// max_iterations. Returns the best program seen anywhere in the trace.
SearchResult local_search(const PreparedProblem& prepared, const SearchConfig& config);
SearchResult local_search(const PreparedProblem& prepared, const SearchConfig& config,
                          const std::vector<EvaluationRecord>& records);

/// Brute-force argmax of utility over the whole set, with the same
/// deterministic tie-breaks the search uses.
std::string exhaustive(const PreparedProblem& prepared, const SearchConfig& config);
std::string exhaustive(const std::vector<EvaluationRecord>& records);

/// Ordering shared by exhaustive, local_search and result reporting:
/// utility desc, then complexity bits asc, then id asc. Records that failed
/// always lose.
bool record_preferred(const EvaluationRecord& a, const EvaluationRecord& b);

}  // namespace varsel

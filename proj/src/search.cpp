#include "varsel/search.hpp"

#include <algorithm>
#include <cmath>

#include "varsel/errors.hpp"

namespace varsel {

namespace {

EvaluationRecord score_candidate(const PreparedProblem& prep, const SearchConfig& cfg,
                                 std::size_t index) {
  const Program& program = prep.programs().programs[index];
  EvaluationRecord rec;
  rec.id = program.id;
  rec.k_bits = prep.k_plain_bits(index);
  rec.k_cond_bits = prep.k_cond_base_bits(index);

  const RunOutcome& outcome = prep.outcome(index);
  if (!outcome.ok) {
    rec.error = outcome.message;
    return rec;
  }
  try {
    const Dataset& out = outcome.value();
    rec.mse_vs_observed = mse(out, prep.observed());
    rec.mse_vs_optimal = mse(out, prep.d_star());
    const double target_mse = cfg.likelihood_target == LikelihoodTarget::Observed
                                  ? rec.mse_vs_observed
                                  : rec.mse_vs_optimal;
    rec.likelihood = likelihood(target_mse, cfg.likelihood_mode);
    rec.log_likelihood = log_likelihood(target_mse, cfg.likelihood_mode);
    // the MLE residual model scores the same reference the likelihood uses
    rec.mle_log = mle_score(target_mse, out.cell_count());
    rec.rho = penalty_rho(out, prep.d_star(), program, cfg.utility.penalty);
    rec.reward = reward(rec.rho);
    rec.ok = true;
  } catch (const Error& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  return rec;
}

std::vector<EvaluationRecord> evaluate_all_impl(const PreparedProblem& prep,
                                                const SearchConfig& cfg, bool parallel) {
  cfg.validate();
  const std::size_t n = prep.size();
  std::vector<EvaluationRecord> records(n);
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
      records[static_cast<std::size_t>(i)] =
          score_candidate(prep, cfg, static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < n; ++i) records[i] = score_candidate(prep, cfg, i);
  }

  std::vector<WeightInput> weights;
  weights.reserve(n);
  for (const EvaluationRecord& r : records) {
    weights.push_back({r.id, r.ok, r.k_bits, r.k_cond_bits, r.log_likelihood, r.mle_log,
                       r.error});
  }
  const PosteriorDistribution post = posterior(weights, cfg.posterior_mode);
  for (std::size_t i = 0; i < n; ++i) {
    if (!records[i].ok) continue;
    const PosteriorEntry& e = post.entries[i];
    records[i].posterior = e.probability;
    records[i].log_weight = e.log_weight;
    records[i].tie_bits = e.tie_bits;
    records[i].utility = utility(e.probability, records[i].reward, cfg.utility.lambda);
  }
  return records;
}

const EvaluationRecord* find_record(const std::vector<EvaluationRecord>& records,
                                    const std::string& id) {
  for (const EvaluationRecord& r : records) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

}  // namespace

void SearchConfig::validate() const {
  utility.validate();
  if (neighborhood_size < 1) raise(Errc::RangeError, "neighborhood_size must be >= 1");
  if (max_iterations < 1) raise(Errc::RangeError, "max_iterations must be >= 1");
}

PreparedProblem PreparedProblem::build(const Program& base, InputSpace theta,
                                       Dataset d_star, const Generator& generator,
                                       const RunLimits& limits, int jobs,
                                       std::optional<Dataset> observed) {
  RunOutcome base_outcome = try_run(base, theta, limits);
  if (!base_outcome.ok)
    raise(Errc::BaseRunFailed, "base program '" + base.id + "': " + base_outcome.message);

  const Dataset& base_output = base_outcome.value();
  if (!d_star.same_shape(base_output)) {
    raise(Errc::TargetShapeMismatch,
          "target dataset shape does not match the base program's output");
  }
  if (observed && !observed->same_shape(base_output)) {
    raise(Errc::TargetShapeMismatch,
          "observed dataset shape does not match the base program's output");
  }

  VariantBatch batch;
  try {
    batch = generator(base);
  } catch (const Error& e) {
    if (e.code() == Errc::GeneratorFailed) throw;
    raise(Errc::GeneratorFailed, e.what());
  }

  std::vector<Program> programs;
  programs.reserve(batch.programs.size() + 1);
  programs.push_back(base);
  for (Program& v : batch.programs) programs.push_back(std::move(v));

  PreparedProblem prep;
  prep.set_ = ProgramSet(std::move(programs), base.id);
  prep.theta_ = std::move(theta);
  prep.d_star_ = std::move(d_star);
  prep.observed_ = observed ? std::move(*observed) : base_output;

  prep.outcomes_.resize(prep.set_.size());
  prep.outcomes_[0] = std::move(base_outcome);
  std::vector<Program> rest(prep.set_.programs.begin() + 1, prep.set_.programs.end());
  std::vector<RunOutcome> rest_outcomes = run_all(rest, prep.theta_, limits, jobs);
  for (std::size_t i = 0; i < rest_outcomes.size(); ++i)
    prep.outcomes_[i + 1] = std::move(rest_outcomes[i]);

  prep.finalize();
  return prep;
}

PreparedProblem PreparedProblem::from_parts(ProgramSet set, InputSpace theta,
                                            Dataset d_star, Dataset observed,
                                            std::vector<RunOutcome> outcomes) {
  if (outcomes.size() != set.size())
    raise(Errc::RangeError, "outcome count does not match program count");
  PreparedProblem prep;
  prep.set_ = std::move(set);
  prep.theta_ = std::move(theta);
  prep.d_star_ = std::move(d_star);
  prep.observed_ = std::move(observed);
  prep.outcomes_ = std::move(outcomes);
  prep.finalize();
  return prep;
}

void PreparedProblem::finalize() {
  const std::size_t n = set_.size();
  const Program& base = set_.base();
  k_plain_bits_.resize(n);
  k_cond_base_bits_.resize(n);
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    const Program& p = set_.programs[static_cast<std::size_t>(i)];
    k_plain_bits_[static_cast<std::size_t>(i)] = k_plain(p).bits;
    k_cond_base_bits_[static_cast<std::size_t>(i)] = k_conditional(p, base).bits;
  }
}

std::size_t PreparedProblem::index_of(const std::string& id) const {
  const std::ptrdiff_t i = set_.index_of(id);
  if (i < 0) raise(Errc::RangeError, "program '" + id + "' is not in the candidate set");
  return static_cast<std::size_t>(i);
}

double PreparedProblem::pair_bits(const std::string& candidate_id,
                                  const std::string& current_id) const {
  const Program& candidate = set_.programs[index_of(candidate_id)];
  const Program& current = set_.programs[index_of(current_id)];
  return pair_cache_.bits(candidate, current);
}

PreparedProblem prepare(const Program& base, InputSpace theta, Dataset d_star,
                        const PreparedProblem::Generator& generator,
                        const RunLimits& limits, int jobs,
                        std::optional<Dataset> observed) {
  return PreparedProblem::build(base, std::move(theta), std::move(d_star), generator,
                                limits, jobs, std::move(observed));
}

std::vector<EvaluationRecord> evaluate_all(const PreparedProblem& prepared,
                                           const SearchConfig& config) {
  return evaluate_all_impl(prepared, config, true);
}

namespace serial {
std::vector<EvaluationRecord> evaluate_all(const PreparedProblem& prepared,
                                           const SearchConfig& config) {
  return evaluate_all_impl(prepared, config, false);
}
}  // namespace serial

std::vector<std::string> neighborhood(const PreparedProblem& prepared,
                                      const std::string& current, std::size_t size) {
  const std::size_t current_index = prepared.index_of(current);
  struct Entry {
    double distance;
    double k_bits;
    const std::string* id;
  };
  std::vector<Entry> entries;
  entries.reserve(prepared.size() - 1);
  for (std::size_t i = 0; i < prepared.size(); ++i) {
    if (i == current_index) continue;
    const std::string& id = prepared.programs().programs[i].id;
    entries.push_back({prepared.pair_bits(id, current), prepared.k_plain_bits(i), &id});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.k_bits != b.k_bits) return a.k_bits < b.k_bits;
    return *a.id < *b.id;
  });
  if (entries.size() > size) entries.resize(size);
  std::vector<std::string> ids;
  ids.reserve(entries.size());
  for (const Entry& e : entries) ids.push_back(*e.id);
  return ids;
}

bool record_preferred(const EvaluationRecord& a, const EvaluationRecord& b) {
  if (a.ok != b.ok) return a.ok;
  if (!a.ok) return a.id < b.id;
  if (a.utility != b.utility) return a.utility > b.utility;
  if (a.tie_bits != b.tie_bits) return a.tie_bits < b.tie_bits;
  return a.id < b.id;
}

SearchResult local_search(const PreparedProblem& prepared, const SearchConfig& config) {
  return local_search(prepared, config, evaluate_all(prepared, config));
}

SearchResult local_search(const PreparedProblem& prepared, const SearchConfig& config,
                          const std::vector<EvaluationRecord>& records) {
  config.validate();
  std::string current = config.initial_program.empty() ? prepared.programs().base_id
                                                       : config.initial_program;
  prepared.index_of(current);  // validates membership

  const EvaluationRecord* best = find_record(records, current);
  SearchResult result;
  result.termination = Termination::MaxIterations;

  for (std::size_t iteration = 1; iteration <= config.max_iterations; ++iteration) {
    const std::vector<std::string> nb =
        neighborhood(prepared, current, config.neighborhood_size);

    const EvaluationRecord* chosen = nullptr;
    for (const std::string& id : nb) {
      const EvaluationRecord* r = find_record(records, id);
      if (r && r->ok && (!chosen || record_preferred(*r, *chosen))) chosen = r;
      if (r && r->ok && (!best || record_preferred(*r, *best))) best = r;
    }

    const EvaluationRecord* current_rec = find_record(records, current);
    TraceStep step;
    step.iteration = iteration;
    step.current = current;
    step.neighborhood = nb;
    step.chosen = chosen ? chosen->id : current;
    step.utility = chosen ? chosen->utility : (current_rec && current_rec->ok ? current_rec->utility : 0.0);
    result.trace.push_back(std::move(step));

    // Strict improvement only; a plateau ends the walk.
    const bool improves =
        chosen && (!current_rec || !current_rec->ok || chosen->utility > current_rec->utility);
    if (!improves) {
      result.termination = Termination::NoImprovement;
      break;
    }
    current = chosen->id;
  }

  if (!best || !best->ok) raise(Errc::EmptySupport, "no candidate produced a utility");
  result.best_program = best->id;
  result.best_utility = best->utility;
  return result;
}

std::string exhaustive(const PreparedProblem& prepared, const SearchConfig& config) {
  return exhaustive(evaluate_all(prepared, config));
}

std::string exhaustive(const std::vector<EvaluationRecord>& records) {
  const EvaluationRecord* best = nullptr;
  for (const EvaluationRecord& r : records) {
    if (!r.ok) continue;
    if (!best || record_preferred(r, *best)) best = &r;
  }
  if (!best) raise(Errc::EmptySupport, "no candidate produced a utility");
  return best->id;
}

}  // namespace varsel

// varsel: discovers the best-scoring variant of a data-generation program.
//
// Pipeline: `prepare` builds a bundle (observed table, target table,
// candidate set, cached runs), `search` hill-climbs the candidates by
// utility, `evaluate` writes the full score table, `predict` averages
// candidate outputs under the posterior, `report` prints the ranked summary.

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>

#include <nlohmann/json.hpp>

#include "varsel/bundle.hpp"
#include "varsel/csv.hpp"
#include "varsel/diff.hpp"
#include "varsel/errors.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fs = std::filesystem;
using namespace varsel;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRun = 3;
constexpr int kExitGenerator = 4;
constexpr int kExitEmptySupport = 5;
constexpr int kExitIncompleteBundle = 6;

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::ConfigError:
    case Errc::RangeError:
      return kExitConfig;
    case Errc::GeneratorFailed:
    case Errc::BaseNotDsl:
    case Errc::ExhaustedAttempts:
    case Errc::EndpointUnavailable:
    case Errc::AllCandidatesRejected:
      return kExitGenerator;
    case Errc::EmptySupport:
      return kExitEmptySupport;
    case Errc::IncompleteBundle:
      return kExitIncompleteBundle;
    default:
      return kExitRun;
  }
}

struct FlagOverrides {
  std::optional<double> lambda, alpha, epsilon, wall_timeout;
  std::optional<std::string> penalty, likelihood, posterior, likelihood_target;
  std::optional<std::size_t> neighborhood, max_iters, count;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  bool force = false;
};

void apply_overrides(PipelineConfig& cfg, const FlagOverrides& flags) {
  if (flags.lambda) cfg.search.utility.lambda = *flags.lambda;
  if (flags.alpha) cfg.search.utility.penalty.alpha = *flags.alpha;
  if (flags.epsilon) cfg.search.utility.penalty.epsilon = *flags.epsilon;
  if (flags.penalty) cfg.search.utility.penalty.kind = parse_penalty_kind(*flags.penalty);
  if (flags.likelihood) cfg.search.likelihood_mode = parse_likelihood_mode(*flags.likelihood);
  if (flags.posterior) cfg.search.posterior_mode = parse_posterior_mode(*flags.posterior);
  if (flags.likelihood_target)
    cfg.search.likelihood_target = parse_likelihood_target(*flags.likelihood_target);
  if (flags.neighborhood) cfg.search.neighborhood_size = *flags.neighborhood;
  if (flags.max_iters) cfg.search.max_iterations = *flags.max_iters;
  if (flags.count) cfg.generator.count = *flags.count;
  if (flags.seed) {
    cfg.search.rng_seed = *flags.seed;
    cfg.generator.seed = *flags.seed;
  }
  if (flags.wall_timeout) cfg.limits.wall_timeout_s = *flags.wall_timeout;
  if (flags.jobs) cfg.jobs = *flags.jobs;
  if (flags.force) cfg.force = true;
  cfg.validate();
}

Program load_base_program(const PathsConfig& paths) {
  if (paths.base_program.empty())
    raise(Errc::ConfigError, "missing [paths] base_program");
  const std::string source = read_file(paths.base_program);
  if (fs::path(paths.base_program).extension() == ".pv") {
    return Program::dsl("base", source);
  }
  // Anything else is treated as an executable candidate.
  return Program::external("base", {paths.base_program}, source);
}

PipelineConfig resolve_config(const std::string& config_path, const FlagOverrides& flags) {
  PipelineConfig cfg;
  if (!config_path.empty()) {
    cfg = load_config(config_path);
  }
  apply_overrides(cfg, flags);
  if (cfg.jobs > 0) {
#ifdef _OPENMP
    omp_set_num_threads(cfg.jobs);
#endif
  }
  return cfg;
}

PreparedProblem prepare_from_config(const PipelineConfig& cfg) {
  if (cfg.paths.theta.empty()) raise(Errc::ConfigError, "missing [paths] theta");
  if (cfg.paths.d_star.empty()) raise(Errc::ConfigError, "missing [paths] d_star");

  const Program base = load_base_program(cfg.paths);
  InputSpace theta = load_csv(cfg.paths.theta);
  Dataset d_star = load_csv(cfg.paths.d_star);
  std::optional<Dataset> observed;
  if (!cfg.paths.observed.empty()) observed = load_csv(cfg.paths.observed);

  const auto generator = [&cfg, &theta, &d_star](const Program& b) {
    return generate_variants(b, d_star, cfg.generator, theta);
  };
  // the generator reads theta and d_star, so prepare gets copies
  return prepare(base, theta, d_star, generator, cfg.limits, cfg.jobs,
                 std::move(observed));
}

bool refuse_existing(const PipelineConfig& cfg, const std::string& path,
                     const std::string& command) {
  if (!fs::exists(path) || cfg.force) return false;
  std::cout << command << ": '" << path << "' already exists; use --force to overwrite\n";
  return true;
}

int cmd_prepare(const PipelineConfig& cfg) {
  BundlePaths paths{cfg.paths.output_dir};
  if (refuse_existing(cfg, paths.manifest(), "prepare")) return kExitOk;
  const PreparedProblem prepared = prepare_from_config(cfg);
  write_bundle(paths, prepared, cfg);
  std::cout << "prepared bundle with " << prepared.size() << " candidate programs at "
            << paths.dir << "\n";
  return kExitOk;
}

int cmd_generate(const PipelineConfig& cfg) {
  // Regenerates the candidate pool of an existing bundle; count may follow
  // the configured policy using the previous report's best utility.
  BundlePaths paths{cfg.paths.output_dir};
  if (!fs::exists(paths.manifest()))
    raise(Errc::IncompleteBundle, "no bundle to regenerate (run prepare first)");
  if (!cfg.force) {
    std::cout << "generate: bundle already has candidates; use --force to regenerate\n";
    return kExitOk;
  }

  PipelineConfig effective = cfg;
  bool first_invocation = true;
  double previous_best = 0.0;
  if (fs::exists(paths.report())) {
    const json report = json::parse(read_file(paths.report()));
    if (report.contains("best_utility")) {
      first_invocation = false;
      previous_best = report["best_utility"].get<double>();
    }
  }
  effective.generator.count = next_variant_count(cfg.generator_policy, cfg.generator.count,
                                                 first_invocation, previous_best);

  const PreparedProblem prepared = prepare_from_config(effective);
  fs::remove_all(paths.programs_dir());
  fs::remove_all(paths.outputs_dir());
  fs::remove(paths.evaluation());
  fs::remove(paths.weights());
  fs::remove(paths.report());
  write_bundle(paths, prepared, effective);
  std::cout << "regenerated bundle with " << prepared.size() << " candidate programs ("
            << "count policy " << cfg.generator_policy << ")\n";
  return kExitOk;
}

int cmd_evaluate(const PipelineConfig& cfg) {
  BundlePaths paths{cfg.paths.output_dir};
  if (refuse_existing(cfg, paths.evaluation(), "evaluate")) return kExitOk;
  const PreparedProblem prepared = read_bundle(paths);
  const std::vector<EvaluationRecord> records = evaluate_all(prepared, cfg.search);
  write_evaluation_csv(paths.evaluation(), records);
  write_weights_csv(paths.weights(), records, prepared, cfg.search.posterior_mode);
  std::cout << "evaluated " << records.size() << " candidates -> " << paths.evaluation()
            << "\n";
  return kExitOk;
}

int cmd_search(const PipelineConfig& cfg) {
  BundlePaths paths{cfg.paths.output_dir};
  if (refuse_existing(cfg, paths.report(), "search")) return kExitOk;
  const PreparedProblem prepared = read_bundle(paths);
  const std::vector<EvaluationRecord> records = evaluate_all(prepared, cfg.search);
  const SearchResult result = local_search(prepared, cfg.search, records);

  write_evaluation_csv(paths.evaluation(), records);
  write_weights_csv(paths.weights(), records, prepared, cfg.search.posterior_mode);
  write_report(paths.report(), result, records, prepared, cfg);

  std::cout << "selected " << result.best_program << " with utility "
            << format_double(result.best_utility) << " after " << result.trace.size()
            << " iterations ("
            << (result.termination == Termination::NoImprovement ? "no_improvement"
                                                                 : "max_iterations")
            << ")\n";
  return kExitOk;
}

int cmd_predict(const PipelineConfig& cfg, const std::string& input_path,
                const std::string& output_path) {
  BundlePaths paths{cfg.paths.output_dir};
  const PreparedProblem prepared = read_bundle(paths);
  const std::vector<EvaluationRecord> records = read_evaluation_csv(paths.evaluation());

  const InputSpace new_input = load_csv(input_path);
  PosteriorDistribution post;
  post.mode = cfg.search.posterior_mode;

  std::vector<std::pair<std::string, Dataset>> outputs;
  std::vector<std::string> names;
  for (const EvaluationRecord& r : records) {
    PosteriorEntry entry;
    entry.id = r.id;
    entry.ok = r.ok;
    entry.probability = r.posterior;
    entry.tie_bits = r.k_bits;
    post.entries.push_back(entry);
    if (!r.ok || r.posterior <= 0.0) continue;
    const Program* program = prepared.programs().find(r.id);
    if (!program) raise(Errc::IncompleteBundle, "program '" + r.id + "' missing from bundle");
    Dataset out = run(*program, new_input, cfg.limits);  // exit 3 on failure
    if (names.empty()) names = out.column_names();
    outputs.emplace_back(r.id, std::move(out));
  }
  if (outputs.empty()) raise(Errc::EmptySupport, "no program with positive posterior");

  std::vector<double> cells;
  cells.reserve(new_input.rows() * names.size());
  for (std::size_t r = 0; r < new_input.rows(); ++r) {
    std::vector<std::pair<std::string, std::vector<double>>> rows;
    rows.reserve(outputs.size());
    for (const auto& [id, data] : outputs) {
      rows.emplace_back(id, std::vector<double>(data.row(r).begin(), data.row(r).end()));
    }
    const std::vector<double> predicted = predict_row(post, rows);
    cells.insert(cells.end(), predicted.begin(), predicted.end());
  }
  const Dataset predicted(names, std::move(cells));
  if (output_path.empty() || output_path == "-") {
    std::cout << to_csv(predicted);
  } else {
    save_csv(predicted, output_path);
    std::cout << "wrote " << predicted.rows() << " predicted rows to " << output_path << "\n";
  }
  return kExitOk;
}

int cmd_report(const PipelineConfig& cfg) {
  BundlePaths paths{cfg.paths.output_dir};
  const PreparedProblem prepared = read_bundle(paths);
  const std::vector<EvaluationRecord> records = read_evaluation_csv(paths.evaluation());
  if (!fs::exists(paths.report()))
    raise(Errc::IncompleteBundle, "no report at '" + paths.report() + "' (run search first)");
  const json report = json::parse(read_file(paths.report()));
  const std::string best = report.value("best_program", "");
  const std::string diff_text = report.value("diff_base_to_best", "");
  const std::string summary = render_summary(records, best, diff_text);
  write_file(paths.summary(), summary);
  std::cout << summary;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"program-variant search over diff-complexity posteriors"};
  app.require_subcommand(1);

  std::string config_path;
  FlagOverrides flags;
  app.add_option("--config", config_path, "pipeline configuration file");
  app.add_option("--lambda", flags.lambda, "posterior weight in the utility, [0, 1]");
  app.add_option("--alpha", flags.alpha, "penalty scale factor");
  app.add_option("--epsilon", flags.epsilon, "threshold-penalty margin");
  app.add_option("--penalty", flags.penalty, "quadratic|absolute|threshold|complexity");
  app.add_option("--likelihood", flags.likelihood, "paper|corrected");
  app.add_option("--posterior", flags.posterior, "plain|conditional|mle");
  app.add_option("--likelihood-target", flags.likelihood_target, "observed|optimal");
  app.add_option("--neighborhood", flags.neighborhood, "neighbors examined per step");
  app.add_option("--max-iters", flags.max_iters, "search iteration cap");
  app.add_option("--count", flags.count, "variants to generate");
  app.add_option("--seed", flags.seed, "generator and search seed");
  app.add_option("--jobs", flags.jobs, "concurrent candidate runs");
  app.add_option("--wall-timeout", flags.wall_timeout, "per-run wall clock limit, seconds");
  app.add_flag("--force", flags.force, "overwrite existing outputs");

  auto* prepare_cmd = app.add_subcommand("prepare", "build the candidate bundle");
  auto* generate_cmd = app.add_subcommand("generate", "regenerate the candidate pool");
  auto* evaluate_cmd = app.add_subcommand("evaluate", "score every candidate");
  auto* search_cmd = app.add_subcommand("search", "run the utility hill climb");
  auto* predict_cmd = app.add_subcommand("predict", "posterior-weighted prediction");
  auto* report_cmd = app.add_subcommand("report", "print the ranked summary");

  std::string predict_input;
  std::string predict_output;
  predict_cmd->add_option("input", predict_input, "CSV of new input rows")->required();
  predict_cmd->add_option("--output", predict_output, "output CSV path (default stdout)");

  std::string bundle_override;
  for (auto* cmd : {generate_cmd, evaluate_cmd, search_cmd, predict_cmd, report_cmd}) {
    cmd->add_option("--bundle", bundle_override, "bundle directory (overrides config)");
  }

  CLI11_PARSE(app, argc, argv);

  try {
    PipelineConfig cfg = resolve_config(config_path, flags);
    if (!bundle_override.empty()) cfg.paths.output_dir = bundle_override;

    if (prepare_cmd->parsed()) return cmd_prepare(cfg);
    if (generate_cmd->parsed()) return cmd_generate(cfg);
    if (evaluate_cmd->parsed()) return cmd_evaluate(cfg);
    if (search_cmd->parsed()) return cmd_search(cfg);
    if (predict_cmd->parsed()) return cmd_predict(cfg, predict_input, predict_output);
    if (report_cmd->parsed()) return cmd_report(cfg);
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "varsel: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "varsel: " << e.what() << "\n";
    return 1;
  }
}

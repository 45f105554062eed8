#include "varsel/bundle.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "varsel/csv.hpp"
#include "varsel/diff.hpp"
#include "varsel/errors.hpp"

namespace varsel {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json config_echo(const PipelineConfig& cfg) {
  return json{
      {"search",
       {{"lambda", cfg.search.utility.lambda},
        {"alpha", cfg.search.utility.penalty.alpha},
        {"epsilon", cfg.search.utility.penalty.epsilon},
        {"penalty", to_token(cfg.search.utility.penalty.kind)},
        {"likelihood", to_token(cfg.search.likelihood_mode)},
        {"posterior", to_token(cfg.search.posterior_mode)},
        {"likelihood_target", to_token(cfg.search.likelihood_target)},
        {"neighborhood", cfg.search.neighborhood_size},
        {"max_iters", cfg.search.max_iterations},
        {"initial_program", cfg.search.initial_program},
        {"seed", cfg.search.rng_seed}}},
      {"generator",
       {{"kind", to_token(cfg.generator.kind)},
        {"count", cfg.generator.count},
        {"seed", cfg.generator.seed},
        {"policy", cfg.generator_policy}}},
      {"limits",
       {{"wall_timeout", cfg.limits.wall_timeout_s},
        {"max_output_bytes", cfg.limits.max_output_bytes}}},
  };
}

std::string csv_safe(std::string text) {
  for (char& c : text) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return text;
}

double parse_csv_field(const std::string& field) {
  if (field.empty()) return 0.0;
  return std::stod(field);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

void write_bundle(const BundlePaths& paths, const PreparedProblem& prepared,
                  const PipelineConfig& config) {
  fs::create_directories(paths.programs_dir());
  fs::create_directories(paths.datasets_dir());
  fs::create_directories(paths.outputs_dir());

  save_csv(prepared.theta(), paths.theta());
  save_csv(prepared.d_star(), paths.d_star());
  save_csv(prepared.observed(), paths.observed());

  json manifest;
  manifest["format"] = "varsel-bundle/1";
  manifest["base_id"] = prepared.programs().base_id;
  json ids = json::array();
  json runs = json::object();
  json programs = json::object();
  for (std::size_t i = 0; i < prepared.size(); ++i) {
    const Program& p = prepared.programs().programs[i];
    ids.push_back(p.id);
    write_file(paths.program(p.id), p.source_text);
    json entry;
    entry["kind"] = p.kind == ProgramKind::Dsl ? "dsl" : "external";
    if (p.kind == ProgramKind::External) {
      entry["argv"] = p.argv;
      entry["workdir"] = p.workdir;
    }
    programs[p.id] = entry;

    const RunOutcome& outcome = prepared.outcome(i);
    json run;
    run["ok"] = outcome.ok;
    if (outcome.ok) {
      save_csv(outcome.value(), paths.output(p.id));
    } else {
      run["error"] = outcome.message;
    }
    runs[p.id] = run;
  }
  manifest["program_ids"] = ids;
  manifest["programs"] = programs;
  manifest["runs"] = runs;
  manifest["config"] = config_echo(config);
  write_file(paths.manifest(), manifest.dump(2) + "\n");
}

PreparedProblem read_bundle(const BundlePaths& paths) {
  if (!fs::exists(paths.manifest()))
    raise(Errc::IncompleteBundle, "no manifest at '" + paths.manifest() + "' (run prepare first)");

  json manifest;
  try {
    manifest = json::parse(read_file(paths.manifest()));
  } catch (const json::exception& e) {
    raise(Errc::IncompleteBundle, std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!manifest.contains("program_ids") || !manifest.contains("base_id"))
    raise(Errc::IncompleteBundle, "manifest lacks program_ids or base_id");

  for (const char* p : {"theta", "d_star", "observed"}) {
    const std::string path = paths.datasets_dir() + "/" + p + ".csv";
    if (!fs::exists(path)) raise(Errc::IncompleteBundle, "missing dataset '" + path + "'");
  }

  InputSpace theta = load_csv(paths.theta());
  Dataset d_star = load_csv(paths.d_star());
  Dataset observed = load_csv(paths.observed());

  std::vector<Program> programs;
  std::vector<RunOutcome> outcomes;
  for (const json& id_json : manifest["program_ids"]) {
    const std::string id = id_json.get<std::string>();
    const json& entry = manifest["programs"].at(id);
    const std::string source_path = paths.program(id);
    if (!fs::exists(source_path))
      raise(Errc::IncompleteBundle, "missing program source '" + source_path + "'");
    const std::string source = read_file(source_path);
    if (entry.value("kind", "dsl") == "dsl") {
      programs.push_back(Program::dsl(id, source));
    } else {
      std::vector<std::string> argv;
      for (const json& a : entry.value("argv", json::array())) argv.push_back(a.get<std::string>());
      programs.push_back(Program::external(id, argv, source, entry.value("workdir", "")));
    }

    const json& run = manifest["runs"].at(id);
    RunOutcome outcome;
    outcome.ok = run.value("ok", false);
    if (outcome.ok) {
      const std::string out_path = paths.output(id);
      if (!fs::exists(out_path))
        raise(Errc::IncompleteBundle, "missing cached output '" + out_path + "'");
      outcome.data = load_csv(out_path);
    } else {
      outcome.message = run.value("error", "run failed");
      outcome.code = Errc::MalformedOutput;
    }
    outcomes.push_back(std::move(outcome));
  }

  return PreparedProblem::from_parts(
      ProgramSet(std::move(programs), manifest["base_id"].get<std::string>()),
      std::move(theta), std::move(d_star), std::move(observed), std::move(outcomes));
}

void write_evaluation_csv(const std::string& path,
                          const std::vector<EvaluationRecord>& records) {
  std::string out =
      "id,status,mse_vs_observed,mse_vs_optimal,k_bits,k_cond_bits,likelihood,"
      "mle_log,posterior,rho,reward,utility,error\n";
  for (const EvaluationRecord& r : records) {
    out += r.id;
    out += r.ok ? ",ok" : ",error";
    if (r.ok) {
      out += "," + format_double(r.mse_vs_observed);
      out += "," + format_double(r.mse_vs_optimal);
      out += "," + format_double(r.k_bits);
      out += "," + format_double(r.k_cond_bits);
      out += "," + format_double(r.likelihood);
      out += "," + format_double(r.mle_log);
      out += "," + format_double(r.posterior);
      out += "," + format_double(r.rho);
      out += "," + format_double(r.reward);
      out += "," + format_double(r.utility);
      out += ",";
    } else {
      // Complexities stay meaningful for failed runs; score fields are empty.
      out += ",,";
      out += "," + format_double(r.k_bits);
      out += "," + format_double(r.k_cond_bits);
      out += ",,,,,,";
      out += "," + csv_safe(r.error);
    }
    out += '\n';
  }
  write_file(path, out);
}

std::vector<EvaluationRecord> read_evaluation_csv(const std::string& path) {
  if (!fs::exists(path))
    raise(Errc::IncompleteBundle, "no evaluation table at '" + path + "' (run evaluate or search)");
  const std::string text = read_file(path);
  std::vector<EvaluationRecord> records;
  std::size_t start = 0;
  bool header = true;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string::npos) nl = text.size();
    const std::string line = text.substr(start, nl - start);
    start = nl + 1;
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    const std::vector<std::string> f = split_line(line);
    if (f.size() < 13)
      raise(Errc::MalformedOutput, "evaluation row has " + std::to_string(f.size()) + " fields");
    EvaluationRecord r;
    r.id = f[0];
    r.ok = f[1] == "ok";
    r.mse_vs_observed = parse_csv_field(f[2]);
    r.mse_vs_optimal = parse_csv_field(f[3]);
    r.k_bits = parse_csv_field(f[4]);
    r.k_cond_bits = parse_csv_field(f[5]);
    r.likelihood = parse_csv_field(f[6]);
    r.mle_log = parse_csv_field(f[7]);
    r.posterior = parse_csv_field(f[8]);
    r.rho = parse_csv_field(f[9]);
    r.reward = parse_csv_field(f[10]);
    r.utility = parse_csv_field(f[11]);
    r.error = f[12];
    records.push_back(std::move(r));
  }
  if (records.empty()) raise(Errc::IncompleteBundle, "evaluation table is empty");
  return records;
}

void write_weights_csv(const std::string& path, const std::vector<EvaluationRecord>& records,
                       const PreparedProblem& prepared, PosteriorMode mode) {
  std::string out = "id,k_bits_used,log_weight,likelihood,posterior,k_cond_reverse_bits\n";
  const std::string& base_id = prepared.programs().base_id;
  for (const EvaluationRecord& r : records) {
    out += r.id;
    if (r.ok) {
      out += "," + format_double(r.tie_bits);
      out += "," + format_double(r.log_weight);
      out += "," + format_double(r.likelihood);
      out += "," + format_double(r.posterior);
      // The reversed conditional direction is recorded for audit only; it
      // never enters the normalization.
      if (mode == PosteriorMode::ConditionalK) {
        out += "," + format_double(prepared.pair_bits(base_id, r.id));
      } else {
        out += ",";
      }
    } else {
      out += ",,,,,";
    }
    out += '\n';
  }
  write_file(path, out);
}

void write_report(const std::string& path, const SearchResult& result,
                  const std::vector<EvaluationRecord>& records,
                  const PreparedProblem& prepared, const PipelineConfig& config) {
  json report;
  report["format"] = "varsel-report/1";
  report["best_program"] = result.best_program;
  report["best_utility"] = result.best_utility;
  report["termination"] =
      result.termination == Termination::NoImprovement ? "no_improvement" : "max_iterations";
  json trace = json::array();
  for (const TraceStep& step : result.trace) {
    trace.push_back({{"iteration", step.iteration},
                     {"current", step.current},
                     {"neighborhood", step.neighborhood},
                     {"chosen", step.chosen},
                     {"utility", step.utility}});
  }
  report["trace"] = trace;
  report["config"] = config_echo(config);

  const Program& base = prepared.programs().base();
  const Program* best = prepared.programs().find(result.best_program);
  report["diff_base_to_best"] =
      best ? diff::unified(base.source_text, best->source_text, base.id, best->id) : "";
  for (const EvaluationRecord& r : records) {
    if (r.id == prepared.programs().base_id && r.ok)
      report["base_mse_vs_optimal"] = r.mse_vs_optimal;
    if (r.id == result.best_program && r.ok)
      report["best_mse_vs_optimal"] = r.mse_vs_optimal;
  }
  write_file(path, report.dump(2) + "\n");
}

std::string render_summary(const std::vector<EvaluationRecord>& records,
                           const std::string& best_id, const std::string& diff_text) {
  std::vector<const EvaluationRecord*> order;
  order.reserve(records.size());
  for (const EvaluationRecord& r : records) order.push_back(&r);
  std::sort(order.begin(), order.end(),
            [](const EvaluationRecord* a, const EvaluationRecord* b) {
              return record_preferred(*a, *b);
            });

  std::string out =
      "id            k_bits   k_cond   likelihood   posterior    rho          reward       utility\n";
  const auto cell = [](const std::string& s, std::size_t width) {
    std::string padded = s;
    if (padded.size() < width) padded.append(width - padded.size(), ' ');
    return padded + " ";
  };
  const auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return std::string(buf);
  };
  for (const EvaluationRecord* r : order) {
    out += cell(r->id, 13);
    if (r->ok) {
      out += cell(num(r->k_bits), 8);
      out += cell(num(r->k_cond_bits), 8);
      out += cell(num(r->likelihood), 12);
      out += cell(num(r->posterior), 12);
      out += cell(num(r->rho), 12);
      out += cell(num(r->reward), 12);
      out += num(r->utility);
    } else {
      out += "run failed: " + r->error;
    }
    out += '\n';
  }
  out += "\nselected: " + best_id + "\n";
  if (!diff_text.empty()) out += "\n" + diff_text;
  return out;
}

}  // namespace varsel

#pragma once

#include <string>
#include <vector>

#include "varsel/config.hpp"
#include "varsel/search.hpp"

namespace varsel {

// Bundle directory layout produced by the prepare step and consumed by every
// later one:
//
//   manifest.json        candidate ids, per-run status, config echo
//   programs/<id>.pv     candidate sources (canonical)
//   datasets/theta.csv   input table
//   datasets/d_star.csv  target table
//   datasets/observed.csv
//   outputs/<id>.csv     cached run outputs of successful candidates
//   evaluation.csv       one EvaluationRecord row per candidate
//   weights.csv          posterior audit table
//   report.json          search result
//
// Re-running a producing command is a no-op unless --force is given.

struct BundlePaths {
  std::string dir;

  std::string manifest() const { return dir + "/manifest.json"; }
  std::string programs_dir() const { return dir + "/programs"; }
  std::string datasets_dir() const { return dir + "/datasets"; }
  std::string outputs_dir() const { return dir + "/outputs"; }
  std::string program(const std::string& id) const { return programs_dir() + "/" + id + ".pv"; }
  std::string output(const std::string& id) const { return outputs_dir() + "/" + id + ".csv"; }
  std::string theta() const { return datasets_dir() + "/theta.csv"; }
  std::string d_star() const { return datasets_dir() + "/d_star.csv"; }
  std::string observed() const { return datasets_dir() + "/observed.csv"; }
  std::string evaluation() const { return dir + "/evaluation.csv"; }
  std::string weights() const { return dir + "/weights.csv"; }
  std::string report() const { return dir + "/report.json"; }
  std::string summary() const { return dir + "/summary.txt"; }
};

void write_bundle(const BundlePaths& paths, const PreparedProblem& prepared,
                  const PipelineConfig& config);

/// Throws IncompleteBundle when prepare has not produced the directory.
PreparedProblem read_bundle(const BundlePaths& paths);

void write_evaluation_csv(const std::string& path,
                          const std::vector<EvaluationRecord>& records);
std::vector<EvaluationRecord> read_evaluation_csv(const std::string& path);

void write_weights_csv(const std::string& path, const std::vector<EvaluationRecord>& records,
                       const PreparedProblem& prepared, PosteriorMode mode);

void write_report(const std::string& path, const SearchResult& result,
                  const std::vector<EvaluationRecord>& records,
                  const PreparedProblem& prepared, const PipelineConfig& config);

std::string render_summary(const std::vector<EvaluationRecord>& records,
                           const std::string& best_id, const std::string& diff_text);

}  // namespace varsel

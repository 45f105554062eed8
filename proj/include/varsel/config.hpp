#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "varsel/generate.hpp"
#include "varsel/search.hpp"

namespace varsel {

// Pipeline configuration: a TOML-syntax file with [paths], [search],
// [generator] and [limits] sections. Command-line flags override file
// values, which override defaults. Unknown sections or keys are rejected,
// ranges are validated, and any referenced input path must exist when the
// file is loaded.

struct PathsConfig {
  std::string base_program;
  std::string theta;
  std::string d_star;
  std::string observed;  // optional
  std::string output_dir = "bundle";
};

struct PipelineConfig {
  PathsConfig paths;
  SearchConfig search;
  GeneratorSpec generator;
  RunLimits limits;
  std::string generator_policy = "fixed";  // fixed | dynamic | hybrid
  int jobs = 0;
  bool force = false;

  void validate() const;
};

/// Minimal TOML-subset value: string, integer, float, bool, or a one-line
/// array of strings.
using ConfigValue =
    std::variant<std::string, std::int64_t, double, bool, std::vector<std::string>>;

/// Raw sections -> keys -> values. Throws ConfigError with line numbers.
std::map<std::string, std::map<std::string, ConfigValue>> parse_toml(
    std::string_view text);

/// Loads and binds a config file. Relative paths inside the file are
/// resolved against the file's directory.
PipelineConfig load_config(const std::string& path);

PipelineConfig config_from_text(std::string_view text, const std::string& base_dir);

// Enum spellings shared by the config file, the CLI flags, and reports.
LikelihoodMode parse_likelihood_mode(const std::string& token);
PosteriorMode parse_posterior_mode(const std::string& token);
LikelihoodTarget parse_likelihood_target(const std::string& token);
PenaltyKind parse_penalty_kind(const std::string& token);
GeneratorSpec::Kind parse_generator_kind(const std::string& token);
std::string to_token(LikelihoodMode mode);
std::string to_token(PosteriorMode mode);
std::string to_token(LikelihoodTarget target);
std::string to_token(PenaltyKind kind);
std::string to_token(GeneratorSpec::Kind kind);

}  // namespace varsel

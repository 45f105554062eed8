#include "varsel/config.hpp"

#include <charconv>
#include <filesystem>

#include "varsel/csv.hpp"
#include "varsel/errors.hpp"

namespace varsel {

namespace {

namespace fs = std::filesystem;

[[noreturn]] void config_fail(std::size_t line_no, const std::string& what) {
  raise(Errc::ConfigError, "line " + std::to_string(line_no) + ": " + what);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::string parse_quoted(std::string_view raw, std::size_t line_no) {
  if (raw.size() < 2 || raw.back() != '"') config_fail(line_no, "unterminated string");
  std::string out;
  for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
    if (raw[i] == '\\' && i + 2 < raw.size()) {
      ++i;
      switch (raw[i]) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default: config_fail(line_no, "unsupported escape in string");
      }
    } else {
      out += raw[i];
    }
  }
  return out;
}

ConfigValue parse_value(std::string_view raw, std::size_t line_no) {
  raw = trim(raw);
  if (raw.empty()) config_fail(line_no, "missing value");
  if (raw.front() == '"') return parse_quoted(raw, line_no);
  if (raw == "true") return true;
  if (raw == "false") return false;
  if (raw.front() == '[') {
    if (raw.back() != ']') config_fail(line_no, "unterminated array");
    std::vector<std::string> items;
    std::string_view body = raw.substr(1, raw.size() - 2);
    while (!trim(body).empty()) {
      body = trim(body);
      if (body.front() != '"') config_fail(line_no, "arrays may hold only strings");
      const std::size_t close = body.find('"', 1);
      if (close == std::string_view::npos) config_fail(line_no, "unterminated string");
      items.push_back(parse_quoted(body.substr(0, close + 1), line_no));
      body.remove_prefix(close + 1);
      body = trim(body);
      if (!body.empty()) {
        if (body.front() != ',') config_fail(line_no, "expected ',' in array");
        body.remove_prefix(1);
      }
    }
    return items;
  }
  // Bare scalar: integer when it parses completely as one, else float.
  {
    std::int64_t i = 0;
    const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), i);
    if (ec == std::errc() && ptr == raw.data() + raw.size()) return i;
  }
  {
    double d = 0.0;
    const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), d);
    if (ec == std::errc() && ptr == raw.data() + raw.size()) return d;
  }
  config_fail(line_no, "cannot parse value '" + std::string(raw) + "'");
}

// ---------------------------------------------------------------------------
// Binding raw values onto PipelineConfig

struct Binder {
  const std::string& section;
  const std::string& key;
  const ConfigValue& value;

  [[noreturn]] void fail(const std::string& what) const {
    raise(Errc::ConfigError, "[" + section + "] " + key + ": " + what);
  }

  std::string str() const {
    if (const auto* s = std::get_if<std::string>(&value)) return *s;
    fail("expected a string");
  }
  double number() const {
    if (const auto* d = std::get_if<double>(&value)) return *d;
    if (const auto* i = std::get_if<std::int64_t>(&value)) return static_cast<double>(*i);
    fail("expected a number");
  }
  std::int64_t integer() const {
    if (const auto* i = std::get_if<std::int64_t>(&value)) return *i;
    fail("expected an integer");
  }
  std::uint64_t unsigned_integer() const {
    const std::int64_t i = integer();
    if (i < 0) fail("expected a non-negative integer");
    return static_cast<std::uint64_t>(i);
  }
  bool boolean() const {
    if (const auto* b = std::get_if<bool>(&value)) return *b;
    fail("expected true or false");
  }
  std::vector<std::string> strings() const {
    if (const auto* v = std::get_if<std::vector<std::string>>(&value)) return *v;
    fail("expected an array of strings");
  }
};

std::string resolve_path(const std::string& base_dir, const std::string& path) {
  if (path.empty() || base_dir.empty()) return path;
  const fs::path p(path);
  if (p.is_absolute()) return path;
  return (fs::path(base_dir) / p).lexically_normal().string();
}

void bind_entry(PipelineConfig& cfg, const std::string& base_dir, const Binder& b) {
  const auto is = [&](std::string_view section, std::string_view key) {
    return b.section == section && b.key == key;
  };

  if (is("paths", "base_program")) cfg.paths.base_program = resolve_path(base_dir, b.str());
  else if (is("paths", "theta")) cfg.paths.theta = resolve_path(base_dir, b.str());
  else if (is("paths", "d_star")) cfg.paths.d_star = resolve_path(base_dir, b.str());
  else if (is("paths", "observed")) cfg.paths.observed = resolve_path(base_dir, b.str());
  else if (is("paths", "output_dir")) cfg.paths.output_dir = resolve_path(base_dir, b.str());
  else if (is("search", "lambda")) cfg.search.utility.lambda = b.number();
  else if (is("search", "alpha")) cfg.search.utility.penalty.alpha = b.number();
  else if (is("search", "epsilon")) cfg.search.utility.penalty.epsilon = b.number();
  else if (is("search", "penalty")) cfg.search.utility.penalty.kind = parse_penalty_kind(b.str());
  else if (is("search", "likelihood")) cfg.search.likelihood_mode = parse_likelihood_mode(b.str());
  else if (is("search", "posterior")) cfg.search.posterior_mode = parse_posterior_mode(b.str());
  else if (is("search", "likelihood_target"))
    cfg.search.likelihood_target = parse_likelihood_target(b.str());
  else if (is("search", "neighborhood"))
    cfg.search.neighborhood_size = static_cast<std::size_t>(b.unsigned_integer());
  else if (is("search", "max_iters"))
    cfg.search.max_iterations = static_cast<std::size_t>(b.unsigned_integer());
  else if (is("search", "initial_program")) cfg.search.initial_program = b.str();
  else if (is("search", "seed")) cfg.search.rng_seed = b.unsigned_integer();
  else if (is("generator", "kind")) cfg.generator.kind = parse_generator_kind(b.str());
  else if (is("generator", "count"))
    cfg.generator.count = static_cast<std::size_t>(b.unsigned_integer());
  else if (is("generator", "seed")) cfg.generator.seed = b.unsigned_integer();
  else if (is("generator", "policy")) cfg.generator_policy = b.str();
  else if (is("generator", "endpoint")) cfg.generator.llm.endpoint = b.str();
  else if (is("generator", "model")) cfg.generator.llm.model = b.str();
  else if (is("generator", "token_env")) cfg.generator.llm.token_env = b.str();
  else if (is("generator", "prompt_template")) {
    const std::string value = b.str();
    cfg.generator.llm.prompt_template =
        value == "default" ? value : resolve_path(base_dir, value);
  } else if (is("generator", "request_timeout"))
    cfg.generator.llm.request_timeout_s = b.number();
  else if (is("generator", "requests"))
    cfg.generator.llm.requests = static_cast<int>(b.unsigned_integer());
  else if (is("generator", "concurrency"))
    cfg.generator.llm.concurrency = static_cast<int>(b.unsigned_integer());
  else if (is("generator", "replay"))
    cfg.generator.llm.replay_path = resolve_path(base_dir, b.str());
  else if (is("generator", "fixed_paths")) {
    cfg.generator.fixed_paths.clear();
    for (const std::string& p : b.strings())
      cfg.generator.fixed_paths.push_back(resolve_path(base_dir, p));
  } else if (is("limits", "wall_timeout")) cfg.limits.wall_timeout_s = b.number();
  else if (is("limits", "max_output_bytes"))
    cfg.limits.max_output_bytes = static_cast<std::size_t>(b.unsigned_integer());
  else if (is("limits", "jobs")) cfg.jobs = static_cast<int>(b.unsigned_integer());
  else
    raise(Errc::ConfigError, "unknown key [" + b.section + "] " + b.key);
}

void check_path_exists(const std::string& label, const std::string& path) {
  if (path.empty()) return;
  if (!fs::exists(path))
    raise(Errc::ConfigError, label + " path '" + path + "' does not exist");
}

}  // namespace

std::map<std::string, std::map<std::string, ConfigValue>> parse_toml(std::string_view text) {
  std::map<std::string, std::map<std::string, ConfigValue>> sections;
  std::string current;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    std::string_view line = text.substr(
        start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    ++line_no;

    // Comments start with '#' outside of strings.
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
      if (line[i] == '#' && !in_string) {
        line = line.substr(0, i);
        break;
      }
    }
    line = trim(line);

    if (!line.empty()) {
      if (line.front() == '[') {
        if (line.back() != ']') config_fail(line_no, "unterminated section header");
        current = std::string(trim(line.substr(1, line.size() - 2)));
        if (current.empty()) config_fail(line_no, "empty section name");
        sections.try_emplace(current);
      } else {
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) config_fail(line_no, "expected key = value");
        const std::string key(trim(line.substr(0, eq)));
        if (key.empty()) config_fail(line_no, "empty key");
        if (current.empty()) config_fail(line_no, "key outside any [section]");
        if (!sections[current].emplace(key, parse_value(line.substr(eq + 1), line_no)).second)
          config_fail(line_no, "duplicate key '" + key + "'");
      }
    }
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return sections;
}

PipelineConfig config_from_text(std::string_view text, const std::string& base_dir) {
  PipelineConfig cfg;
  for (const auto& [section, entries] : parse_toml(text)) {
    for (const auto& [key, value] : entries) {
      bind_entry(cfg, base_dir, Binder{section, key, value});
    }
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    raise(Errc::ConfigError, e.what());
  }
  return config_from_text(text, fs::path(path).parent_path().string());
}

void PipelineConfig::validate() const {
  search.validate();
  generator.validate();
  if (limits.wall_timeout_s <= 0.0)
    raise(Errc::ConfigError, "[limits] wall_timeout must be positive");
  if (limits.max_output_bytes == 0)
    raise(Errc::ConfigError, "[limits] max_output_bytes must be positive");
  if (jobs < 0) raise(Errc::ConfigError, "[limits] jobs must be non-negative");
  if (generator_policy != "fixed" && generator_policy != "dynamic" &&
      generator_policy != "hybrid")
    raise(Errc::ConfigError, "[generator] policy must be fixed, dynamic, or hybrid");
  check_path_exists("base_program", paths.base_program);
  check_path_exists("theta", paths.theta);
  check_path_exists("d_star", paths.d_star);
  check_path_exists("observed", paths.observed);
  if (!generator.llm.replay_path.empty())
    check_path_exists("replay", generator.llm.replay_path);
  for (const std::string& p : generator.fixed_paths) check_path_exists("fixed_paths", p);
}

LikelihoodMode parse_likelihood_mode(const std::string& token) {
  if (token == "paper") return LikelihoodMode::Increasing;
  if (token == "corrected") return LikelihoodMode::Corrected;
  raise(Errc::ConfigError, "likelihood must be 'paper' or 'corrected', got '" + token + "'");
}

PosteriorMode parse_posterior_mode(const std::string& token) {
  if (token == "plain") return PosteriorMode::PlainK;
  if (token == "conditional") return PosteriorMode::ConditionalK;
  if (token == "mle") return PosteriorMode::MleWeighted;
  raise(Errc::ConfigError,
        "posterior must be 'plain', 'conditional', or 'mle', got '" + token + "'");
}

LikelihoodTarget parse_likelihood_target(const std::string& token) {
  if (token == "observed") return LikelihoodTarget::Observed;
  if (token == "optimal") return LikelihoodTarget::Optimal;
  raise(Errc::ConfigError,
        "likelihood_target must be 'observed' or 'optimal', got '" + token + "'");
}

PenaltyKind parse_penalty_kind(const std::string& token) {
  if (token == "quadratic") return PenaltyKind::Quadratic;
  if (token == "absolute") return PenaltyKind::Absolute;
  if (token == "threshold") return PenaltyKind::Threshold;
  if (token == "complexity") return PenaltyKind::Complexity;
  raise(Errc::ConfigError, "unknown penalty kind '" + token + "'");
}

GeneratorSpec::Kind parse_generator_kind(const std::string& token) {
  if (token == "mutate") return GeneratorSpec::Kind::Mutate;
  if (token == "llm") return GeneratorSpec::Kind::Llm;
  if (token == "fixed_list") return GeneratorSpec::Kind::FixedList;
  raise(Errc::ConfigError, "unknown generator kind '" + token + "'");
}

std::string to_token(LikelihoodMode mode) {
  return mode == LikelihoodMode::Increasing ? "paper" : "corrected";
}
std::string to_token(PosteriorMode mode) {
  switch (mode) {
    case PosteriorMode::PlainK: return "plain";
    case PosteriorMode::ConditionalK: return "conditional";
    case PosteriorMode::MleWeighted: return "mle";
  }
  return "?";
}
std::string to_token(LikelihoodTarget target) {
  return target == LikelihoodTarget::Observed ? "observed" : "optimal";
}
std::string to_token(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::Quadratic: return "quadratic";
    case PenaltyKind::Absolute: return "absolute";
    case PenaltyKind::Threshold: return "threshold";
    case PenaltyKind::Complexity: return "complexity";
  }
  return "?";
}
std::string to_token(GeneratorSpec::Kind kind) {
  switch (kind) {
    case GeneratorSpec::Kind::Mutate: return "mutate";
    case GeneratorSpec::Kind::Llm: return "llm";
    case GeneratorSpec::Kind::FixedList: return "fixed_list";
  }
  return "?";
}

}  // namespace varsel

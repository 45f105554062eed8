#include "varsel/generate.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "varsel/csv.hpp"
#include "varsel/errors.hpp"
#include "varsel/llm.hpp"
#include "varsel/toydsl.hpp"

namespace varsel {

namespace {

constexpr std::size_t kAttemptsPerVariant = 100;
constexpr std::size_t kMaxRecordedRejections = 64;
constexpr std::size_t kSummaryByteCap = 2048;

// One-row slice of theta used to smoke-test candidates before they join the
// candidate set.
InputSpace probe_slice(const InputSpace& theta) {
  std::vector<double> cells(theta.row(0).begin(), theta.row(0).end());
  return Dataset(theta.column_names(), std::move(cells));
}

void record_rejection(VariantBatch& batch, std::string text, std::string reason) {
  if (batch.rejected.size() >= kMaxRecordedRejections) return;
  if (text.size() > 512) text.resize(512);
  batch.rejected.push_back({std::move(text), std::move(reason)});
}

// --- mutation sites ---------------------------------------------------------

using dsl::BinOp;
using dsl::Expr;
using dsl::ExprPtr;

void collect_nodes(Expr* e, std::vector<Expr*>& literals, std::vector<Expr*>& swappable,
                   std::vector<Expr*>& additive) {
  switch (e->kind) {
    case Expr::Kind::Literal:
      literals.push_back(e);
      return;
    case Expr::Kind::Column:
      return;
    case Expr::Kind::Unary:
      collect_nodes(e->lhs.get(), literals, swappable, additive);
      return;
    case Expr::Kind::Binary: {
      const bool arithmetic = e->bin == BinOp::Add || e->bin == BinOp::Sub ||
                              e->bin == BinOp::Mul || e->bin == BinOp::Div;
      if (arithmetic) swappable.push_back(e);
      if (e->bin == BinOp::Add || e->bin == BinOp::Sub) additive.push_back(e);
      collect_nodes(e->lhs.get(), literals, swappable, additive);
      collect_nodes(e->rhs.get(), literals, swappable, additive);
      return;
    }
  }
}

enum class MutationKind { PerturbLiteral, SwapOperator, InsertBias, DeleteTerm };

// Applies one random edit to a cloned binding list and returns the mutated
// program's canonical source.
std::string mutate_once(const dsl::Program& base, std::mt19937_64& rng) {
  std::vector<dsl::Binding> bindings;
  bindings.reserve(base.bindings().size());
  for (const dsl::Binding& b : base.bindings())
    bindings.push_back({b.name, b.expr->clone()});

  std::vector<Expr*> literals, swappable, additive;
  for (const dsl::Binding& b : bindings)
    collect_nodes(b.expr.get(), literals, swappable, additive);

  std::vector<MutationKind> menu;
  if (!literals.empty()) menu.push_back(MutationKind::PerturbLiteral);
  if (!swappable.empty()) menu.push_back(MutationKind::SwapOperator);
  menu.push_back(MutationKind::InsertBias);  // always applicable at a root
  if (!additive.empty()) menu.push_back(MutationKind::DeleteTerm);

  const auto pick = [&rng](std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  };
  switch (menu[pick(menu.size())]) {
    case MutationKind::PerturbLiteral: {
      Expr* site = literals[pick(literals.size())];
      site->literal *= std::uniform_real_distribution<double>(0.5, 2.0)(rng);
      break;
    }
    case MutationKind::SwapOperator: {
      Expr* site = swappable[pick(swappable.size())];
      static constexpr BinOp kArith[] = {BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div};
      BinOp next = site->bin;
      while (next == site->bin) next = kArith[pick(4)];
      site->bin = next;
      break;
    }
    case MutationKind::InsertBias: {
      dsl::Binding& b = bindings[pick(bindings.size())];
      const double c = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
      b.expr = dsl::make_binary(BinOp::Add, std::move(b.expr), dsl::make_literal(c));
      break;
    }
    case MutationKind::DeleteTerm: {
      // Replace an additive node by one of its children. Sites are
      // re-collected by address, so find the owner slot.
      Expr* site = additive[pick(additive.size())];
      const bool keep_left = pick(2) == 0;
      ExprPtr replacement = keep_left ? std::move(site->lhs) : std::move(site->rhs);
      *site = std::move(*replacement);
      break;
    }
  }
  return dsl::Program::from_bindings(std::move(bindings)).source();
}

// Shared validation: parse and probe-run; returns the reason a candidate is
// unusable, or empty.
std::string validate_candidate(const std::string& source, const InputSpace& probe) {
  try {
    dsl::Program::parse(source).evaluate(probe);
    return {};
  } catch (const Error& e) {
    return e.what();
  }
}

std::string pad_id(std::size_t index) {
  std::string digits = std::to_string(index);
  while (digits.size() < 3) digits.insert(digits.begin(), '0');
  return "v" + digits;
}

}  // namespace

void GeneratorSpec::validate() const {
  if (count < 1) raise(Errc::RangeError, "generator count must be at least 1");
  if (kind == Kind::Llm) {
    if (llm.endpoint.empty() && llm.replay_path.empty())
      raise(Errc::ConfigError, "llm generator needs an endpoint or a replay file");
    if (llm.prompt_template.empty())
      raise(Errc::ConfigError, "llm generator needs a prompt template");
  }
  if (kind == Kind::FixedList && fixed_paths.empty())
    raise(Errc::ConfigError, "fixed_list generator needs at least one path");
}

VariantBatch mutate_variants(const Program& base, const GeneratorSpec& spec,
                             const InputSpace& theta) {
  spec.validate();
  if (base.kind != ProgramKind::Dsl)
    raise(Errc::BaseNotDsl, "mutation generator needs a DSL base program");

  const dsl::Program parsed = dsl::Program::parse(base.source_text);
  const InputSpace probe = probe_slice(theta);
  std::mt19937_64 rng(spec.seed);

  VariantBatch batch;
  std::set<std::string> seen;
  seen.insert(parsed.source());

  const std::size_t max_attempts = kAttemptsPerVariant * spec.count;
  for (std::size_t attempt = 0; attempt < max_attempts && batch.programs.size() < spec.count;
       ++attempt) {
    std::string source = mutate_once(parsed, rng);
    if (!seen.insert(source).second) continue;
    if (std::string reason = validate_candidate(source, probe); !reason.empty()) {
      record_rejection(batch, std::move(source), std::move(reason));
      continue;
    }
    batch.programs.push_back(Program::dsl(pad_id(batch.programs.size() + 1), source));
  }
  if (batch.programs.size() < spec.count) {
    raise(Errc::ExhaustedAttempts,
          "produced " + std::to_string(batch.programs.size()) + " of " +
              std::to_string(spec.count) + " requested variants in " +
              std::to_string(max_attempts) + " attempts");
  }
  return batch;
}

VariantBatch load_fixed_list(const std::vector<std::string>& paths, const InputSpace& theta) {
  if (paths.empty()) raise(Errc::ConfigError, "no candidate files given");
  const InputSpace probe = probe_slice(theta);
  VariantBatch batch;
  for (const std::string& path : paths) {
    std::string source;
    try {
      source = read_file(path);
    } catch (const Error& e) {
      record_rejection(batch, path, e.what());
      continue;
    }
    if (std::string reason = validate_candidate(source, probe); !reason.empty()) {
      record_rejection(batch, path, std::move(reason));
      continue;
    }
    batch.programs.push_back(Program::dsl(pad_id(batch.programs.size() + 1), source));
  }
  if (batch.programs.empty()) {
    std::string detail;
    for (const Rejection& r : batch.rejected) detail += "\n  " + r.text + ": " + r.reason;
    raise(Errc::AllCandidatesRejected, "every candidate file was rejected" + detail);
  }
  return batch;
}

std::string summarize_dataset(const Dataset& d) {
  std::string out = "columns: ";
  for (std::size_t c = 0; c < d.cols(); ++c) {
    if (c) out += ", ";
    out += d.column_names()[c];
  }
  out += "\nrows: " + std::to_string(d.rows()) + "\n";
  for (std::size_t c = 0; c < d.cols(); ++c) {
    double sum = 0.0, sq = 0.0;
    double lo = d.at(0, c), hi = d.at(0, c);
    for (std::size_t r = 0; r < d.rows(); ++r) {
      const double v = d.at(r, c);
      sum += v;
      sq += v * v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double mean = sum / static_cast<double>(d.rows());
    const double var = std::max(0.0, sq / static_cast<double>(d.rows()) - mean * mean);
    out += d.column_names()[c] + ": mean=" + format_double(mean) +
           " var=" + format_double(var) + " min=" + format_double(lo) +
           " max=" + format_double(hi) + "\n";
  }
  out += "sample rows:\n";
  const std::size_t samples = std::min<std::size_t>(5, d.rows());
  for (std::size_t r = 0; r < samples; ++r) {
    for (std::size_t c = 0; c < d.cols(); ++c) {
      if (c) out += ',';
      out += format_double(d.at(r, c));
    }
    out += '\n';
  }
  if (out.size() > kSummaryByteCap) out.resize(kSummaryByteCap);
  return out;
}

std::string render_prompt(const std::string& template_text, const std::string& base_source,
                          const std::string& d_star_summary, const std::string& contract) {
  std::string out = template_text;
  const auto substitute = [&out](std::string_view key, const std::string& value) {
    std::size_t pos = 0;
    while ((pos = out.find(key, pos)) != std::string::npos) {
      out.replace(pos, key.size(), value);
      pos += value.size();
    }
  };
  substitute("{BASE_SOURCE}", base_source);
  substitute("{DSTAR_SUMMARY}", d_star_summary);
  substitute("{CONTRACT}", contract);
  return out;
}

std::string dsl_contract(const Program& base, const InputSpace& theta) {
  std::string inputs;
  for (std::size_t c = 0; c < theta.cols(); ++c) {
    if (c) inputs += ", ";
    inputs += theta.column_names()[c];
  }
  std::string outputs;
  const dsl::Program parsed = dsl::Program::parse(base.source_text);
  for (const dsl::Binding& b : parsed.bindings()) {
    if (!outputs.empty()) outputs += ", ";
    outputs += b.name;
  }
  return "Each variant must be a complete program in a fenced code block: one "
         "`name = expression` line per output column. Expressions may use the "
         "operators + - * /, the functions min(a, b), max(a, b), pow(a, b), "
         "neg(x), abs(x), sin(x), cos(x), exp(x), log(x), sqrt(x), numeric "
         "literals, and the input columns: " +
         inputs + ". Required output columns, in order: " + outputs + ".";
}

std::vector<std::string> extract_code_blocks(const std::string& text) {
  std::vector<std::string> blocks;
  std::size_t pos = 0;
  while (true) {
    const std::size_t open = text.find("```", pos);
    if (open == std::string::npos) break;
    std::size_t body = text.find('\n', open);
    if (body == std::string::npos) break;
    ++body;  // skip the fence line (and any language tag on it)
    const std::size_t close = text.find("```", body);
    if (close == std::string::npos) break;  // unterminated fence: ignore
    blocks.push_back(text.substr(body, close - body));
    pos = close + 3;
  }
  return blocks;
}

VariantBatch llm_variants(const Program& base, const std::string& d_star_summary,
                          const GeneratorSpec& spec, const InputSpace& theta) {
  spec.validate();
  const InputSpace probe = probe_slice(theta);

  std::string template_text;
  if (spec.llm.prompt_template == "default") {
    template_text =
        "You maintain a small data-generation program and need candidate "
        "revisions that better match a corrected reference dataset.\n\n"
        "Current program:\n```\n{BASE_SOURCE}```\n\n"
        "Reference dataset summary:\n{DSTAR_SUMMARY}\n"
        "{CONTRACT}\n\n"
        "Propose several distinct variants, each in its own fenced code block.";
  } else {
    template_text = read_file(spec.llm.prompt_template);
  }
  const std::string prompt = render_prompt(template_text, base.source_text, d_star_summary,
                                           dsl_contract(base, theta));

  ChatClient client(spec.llm);
  const int requests = std::max(1, spec.llm.requests);
  std::vector<std::string> responses(static_cast<std::size_t>(requests));
  std::vector<std::string> request_errors(static_cast<std::size_t>(requests));
  // Responses are validated in request order below, so concurrent fetches
  // cannot perturb the output.
  const int workers = std::clamp(spec.llm.concurrency, 1, requests);
#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (int i = 0; i < requests; ++i) {
    try {
      responses[static_cast<std::size_t>(i)] = client.complete(prompt, i);
    } catch (const std::exception& e) {
      request_errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (const std::string& err : request_errors) {
    if (!err.empty()) raise(Errc::EndpointUnavailable, err);
  }

  VariantBatch batch;
  std::set<std::string> seen;
  if (base.kind == ProgramKind::Dsl) seen.insert(base.source_text);
  for (const std::string& response : responses) {
    for (const std::string& block : extract_code_blocks(response)) {
      if (batch.programs.size() >= spec.count) break;
      std::string reason = validate_candidate(block, probe);
      if (!reason.empty()) {
        record_rejection(batch, block, std::move(reason));
        continue;
      }
      const std::string canonical = dsl::Program::parse(block).source();
      if (!seen.insert(canonical).second) {
        record_rejection(batch, block, "duplicate of an earlier candidate");
        continue;
      }
      batch.programs.push_back(Program::dsl(pad_id(batch.programs.size() + 1), canonical));
    }
  }
  if (batch.programs.empty()) {
    raise(Errc::AllCandidatesRejected,
          "no response produced a valid candidate (" +
              std::to_string(batch.rejected.size()) + " rejected)");
  }
  return batch;
}

VariantBatch generate_variants(const Program& base, const Dataset& d_star,
                               const GeneratorSpec& spec, const InputSpace& theta) {
  switch (spec.kind) {
    case GeneratorSpec::Kind::Mutate:
      return mutate_variants(base, spec, theta);
    case GeneratorSpec::Kind::Llm:
      return llm_variants(base, summarize_dataset(d_star), spec, theta);
    case GeneratorSpec::Kind::FixedList:
      return load_fixed_list(spec.fixed_paths, theta);
  }
  raise(Errc::ConfigError, "unknown generator kind");
}

std::size_t next_variant_count(const std::string& policy, std::size_t configured,
                               bool first_invocation, double previous_best_utility) {
  if (policy == "fixed" || policy.empty()) return configured;
  if (policy == "hybrid" && first_invocation) return std::min<std::size_t>(configured * 4, 256);
  if (policy == "dynamic" || policy == "hybrid") {
    if (first_invocation) return configured;
    if (previous_best_utility < 0.5) return std::min<std::size_t>(configured * 2, 256);
    if (previous_best_utility > 0.9) return std::max<std::size_t>(configured / 2, 8);
    return configured;
  }
  raise(Errc::ConfigError, "unknown variant-count policy '" + policy + "'");
}

}  // namespace varsel

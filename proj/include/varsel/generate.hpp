#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "varsel/dataset.hpp"
#include "varsel/program.hpp"

namespace varsel {

struct LlmSettings {
  std::string endpoint;          // chat-completions style URL
  std::string model;
  std::string token_env;                     // env var holding the bearer token
  std::string prompt_template = "default";   // "default" or a template file path
  double request_timeout_s = 30.0;
  int requests = 1;              // independent completions to ask for
  int concurrency = 2;           // parallel request cap
  std::string replay_path;       // recorded transcript file; offline mode
};

struct GeneratorSpec {
  enum class Kind { Mutate, Llm, FixedList };

  Kind kind = Kind::Mutate;
  std::size_t count = 10;      // variants to produce
  std::uint64_t seed = 0;
  LlmSettings llm;
  std::vector<std::string> fixed_paths;

  void validate() const;
};

struct Rejection {
  std::string text;    // raw candidate text (possibly truncated)
  std::string reason;
};

/// Validated candidates plus everything that was turned away and why. Every
/// accepted program parses and survives a one-row probe run.
struct VariantBatch {
  std::vector<Program> programs;
  std::vector<Rejection> rejected;
};

/// Seeded random edits of a DSL base program: scale one literal by a factor
/// in [0.5, 2], swap one + - * / operator for another, append `+ c` with a
/// small constant to one binding, or drop one additive term. Emits exactly
/// spec.count distinct canonical variants; the draw sequence is a pure
/// function of (base, seed, count). Throws BaseNotDsl, or ExhaustedAttempts
/// after 100 x count tries.
VariantBatch mutate_variants(const Program& base, const GeneratorSpec& spec,
                             const InputSpace& theta);

/// Asks a chat-completion endpoint for variants, extracts fenced code
/// blocks, and validates each like any other candidate. Network responses
/// can be replayed from a transcript file so tests stay offline. Throws
/// EndpointUnavailable or AllCandidatesRejected.
VariantBatch llm_variants(const Program& base, const std::string& d_star_summary,
                          const GeneratorSpec& spec, const InputSpace& theta);

/// Loads externally authored `.pv` candidates; per-file failures are
/// collected and only an all-reject outcome is an error.
VariantBatch load_fixed_list(const std::vector<std::string>& paths,
                             const InputSpace& theta);

/// Runs whichever generator the settings select.
VariantBatch generate_variants(const Program& base, const Dataset& d_star,
                               const GeneratorSpec& spec, const InputSpace& theta);

/// Per-column mean/variance/min/max plus up to five sample rows, capped at
/// 2 KiB; the target-behavior context handed to the LLM prompt.
std::string summarize_dataset(const Dataset& d);

/// Fills {BASE_SOURCE}, {DSTAR_SUMMARY} and {CONTRACT} placeholders.
std::string render_prompt(const std::string& template_text, const std::string& base_source,
                          const std::string& d_star_summary, const std::string& contract);

/// Output-contract text for a base program evaluated over the given inputs.
std::string dsl_contract(const Program& base, const InputSpace& theta);

/// Fenced ``` blocks, in order of appearance.
std::vector<std::string> extract_code_blocks(const std::string& text);

/// Variant-count schedule between pipeline invocations. "fixed" keeps the
/// configured count; "dynamic" doubles it (cap 256) while the best utility
/// sits below 0.5 and halves it (floor 8) once it clears 0.9; "hybrid"
/// starts at four times the configured count, then follows dynamic.
std::size_t next_variant_count(const std::string& policy, std::size_t configured,
                               bool first_invocation, double previous_best_utility);

}  // namespace varsel

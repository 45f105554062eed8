#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace varsel {

enum class ProgramKind { Dsl, External };

/// One candidate: the unit the search ranks. Dsl programs carry canonical
/// source (parsed and re-rendered at construction); external programs carry
/// an argv template plus whatever script text the caller wants complexity
/// measured on.
struct Program {
  std::string id;
  ProgramKind kind = ProgramKind::Dsl;
  std::string source_text;
  std::vector<std::string> argv;  // external only
  std::string workdir;            // external only; empty = inherit

  /// Parses and canonicalizes; throws SyntaxError / DuplicateOutput.
  static Program dsl(std::string id, std::string_view source);

  static Program external(std::string id, std::vector<std::string> argv,
                          std::string source_text, std::string workdir = "");
};

/// The finite ordered candidate set, with a designated base program.
struct ProgramSet {
  std::vector<Program> programs;
  std::string base_id;

  ProgramSet() = default;
  ProgramSet(std::vector<Program> programs, std::string base_id);

  std::size_t size() const { return programs.size(); }
  const Program& base() const;
  const Program* find(const std::string& id) const;
  std::ptrdiff_t index_of(const std::string& id) const;
};

struct RunLimits {
  double wall_timeout_s = 10.0;
  std::size_t max_output_bytes = 64ull * 1024 * 1024;
};

}  // namespace varsel

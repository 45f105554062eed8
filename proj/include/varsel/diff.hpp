#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace varsel::diff {

/// Line canonicalization used by every diff entry point: split on LF, strip
/// trailing spaces/tabs/CR from each line, drop trailing blank lines.
std::vector<std::string> canonical_lines(std::string_view text);

struct EditOp {
  enum class Kind { Keep, Del, Ins };
  Kind kind = Kind::Keep;
  std::size_t a_index = 0;  // valid for Keep/Del
  std::size_t b_index = 0;  // valid for Keep/Ins
};

/// Myers O((N+M)D) shortest edit script: the returned op sequence has the
/// minimum possible number of Del+Ins entries and is deterministic.
std::vector<EditOp> shortest_edit_script(const std::vector<std::string>& a,
                                         const std::vector<std::string>& b);

/// Byte cost of the minimal script from `from_text` to `to_text`: the payload
/// of every inserted line plus one byte per deleted line. Zero iff the
/// canonical forms are identical.
std::size_t payload_bytes(std::string_view from_text, std::string_view to_text);

/// Unified diff with zero context lines, for audit reports.
std::string unified(std::string_view from_text, std::string_view to_text,
                    std::string_view from_label, std::string_view to_label);

}  // namespace varsel::diff

#include "varsel/diff.hpp"

#include <algorithm>
#include <unordered_map>

namespace varsel::diff {

namespace {

// Lines are interned to ints so the inner snake loop compares integers.
std::vector<int> intern(const std::vector<std::string>& lines,
                        std::unordered_map<std::string_view, int>& table) {
  std::vector<int> ids;
  ids.reserve(lines.size());
  for (const std::string& line : lines) {
    const auto [it, inserted] = table.try_emplace(line, static_cast<int>(table.size()));
    ids.push_back(it->second);
  }
  return ids;
}

// V arrays are stored per edit distance d for the backtrack pass. Offsets
// are shifted by `max` so diagonal k indexes as k + max.
struct Trace {
  std::vector<std::vector<int>> rounds;
};

}  // namespace

std::vector<std::string> canonical_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    std::string_view line = text.substr(
        start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r'))
      line.remove_suffix(1);
    lines.emplace_back(line);
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::vector<EditOp> shortest_edit_script(const std::vector<std::string>& a,
                                         const std::vector<std::string>& b) {
  std::unordered_map<std::string_view, int> table;
  const std::vector<int> xs = intern(a, table);
  const std::vector<int> ys = intern(b, table);
  const int n = static_cast<int>(xs.size());
  const int m = static_cast<int>(ys.size());
  const int max = n + m;

  std::vector<EditOp> ops;
  if (max == 0) return ops;

  Trace trace;
  std::vector<int> v(static_cast<std::size_t>(2 * max + 1), 0);
  int found_d = -1;

  for (int d = 0; d <= max && found_d < 0; ++d) {
    for (int k = -d; k <= d; k += 2) {
      int x;
      if (k == -d || (k != d && v[static_cast<std::size_t>(k - 1 + max)] <
                                    v[static_cast<std::size_t>(k + 1 + max)])) {
        x = v[static_cast<std::size_t>(k + 1 + max)];  // down: insertion
      } else {
        x = v[static_cast<std::size_t>(k - 1 + max)] + 1;  // right: deletion
      }
      int y = x - k;
      while (x < n && y < m && xs[static_cast<std::size_t>(x)] == ys[static_cast<std::size_t>(y)]) {
        ++x;
        ++y;
      }
      v[static_cast<std::size_t>(k + max)] = x;
      if (x >= n && y >= m) {
        found_d = d;
        break;
      }
    }
    trace.rounds.push_back(v);
  }

  // Backtrack from (n, m) through the stored rounds.
  int x = n;
  int y = m;
  for (int d = found_d; d > 0; --d) {
    const std::vector<int>& pv = trace.rounds[static_cast<std::size_t>(d - 1)];
    const int k = x - y;
    int prev_k;
    if (k == -d || (k != d && pv[static_cast<std::size_t>(k - 1 + max)] <
                                  pv[static_cast<std::size_t>(k + 1 + max)])) {
      prev_k = k + 1;
    } else {
      prev_k = k - 1;
    }
    const int prev_x = pv[static_cast<std::size_t>(prev_k + max)];
    const int prev_y = prev_x - prev_k;
    while (x > prev_x && y > prev_y) {
      ops.push_back({EditOp::Kind::Keep, static_cast<std::size_t>(x - 1),
                     static_cast<std::size_t>(y - 1)});
      --x;
      --y;
    }
    if (prev_k == k + 1) {
      // came down: b[prev_y] was inserted
      ops.push_back({EditOp::Kind::Ins, 0, static_cast<std::size_t>(prev_y)});
      y = prev_y;
      x = prev_x;
    } else {
      // came right: a[prev_x] was deleted
      ops.push_back({EditOp::Kind::Del, static_cast<std::size_t>(prev_x), 0});
      x = prev_x;
      y = prev_y;
    }
  }
  while (x > 0 && y > 0) {
    ops.push_back({EditOp::Kind::Keep, static_cast<std::size_t>(x - 1),
                   static_cast<std::size_t>(y - 1)});
    --x;
    --y;
  }
  std::reverse(ops.begin(), ops.end());
  return ops;
}

std::size_t payload_bytes(std::string_view from_text, std::string_view to_text) {
  const std::vector<std::string> a = canonical_lines(from_text);
  const std::vector<std::string> b = canonical_lines(to_text);
  std::size_t bytes = 0;
  for (const EditOp& op : shortest_edit_script(a, b)) {
    if (op.kind == EditOp::Kind::Ins) bytes += b[op.b_index].size();
    if (op.kind == EditOp::Kind::Del) bytes += 1;
  }
  return bytes;
}

std::string unified(std::string_view from_text, std::string_view to_text,
                    std::string_view from_label, std::string_view to_label) {
  const std::vector<std::string> a = canonical_lines(from_text);
  const std::vector<std::string> b = canonical_lines(to_text);
  const std::vector<EditOp> ops = shortest_edit_script(a, b);

  std::string out;
  out += "--- ";
  out += from_label;
  out += "\n+++ ";
  out += to_label;
  out += '\n';

  // GNU conventions: ranges are 1-based, a length of one is omitted, and an
  // empty range anchors at the line before the change site.
  const auto range = [](std::size_t consumed_before, std::size_t len) {
    if (len == 0) return std::to_string(consumed_before) + ",0";
    if (len == 1) return std::to_string(consumed_before + 1);
    return std::to_string(consumed_before + 1) + "," + std::to_string(len);
  };

  std::size_t a_pos = 0;  // lines of a consumed so far
  std::size_t b_pos = 0;
  std::size_t i = 0;
  while (i < ops.size()) {
    if (ops[i].kind == EditOp::Kind::Keep) {
      ++a_pos;
      ++b_pos;
      ++i;
      continue;
    }
    std::size_t j = i;
    std::size_t a_len = 0, b_len = 0;
    while (j < ops.size() && ops[j].kind != EditOp::Kind::Keep) {
      ops[j].kind == EditOp::Kind::Del ? ++a_len : ++b_len;
      ++j;
    }
    out += "@@ -" + range(a_pos, a_len) + " +" + range(b_pos, b_len) + " @@\n";
    for (std::size_t t = i; t < j; ++t) {
      if (ops[t].kind == EditOp::Kind::Del) {
        out += '-';
        out += a[ops[t].a_index];
        out += '\n';
      }
    }
    for (std::size_t t = i; t < j; ++t) {
      if (ops[t].kind == EditOp::Kind::Ins) {
        out += '+';
        out += b[ops[t].b_index];
        out += '\n';
      }
    }
    a_pos += a_len;
    b_pos += b_len;
    i = j;
  }
  return out;
}

}  // namespace varsel::diff

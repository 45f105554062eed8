#include "varsel/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "varsel/errors.hpp"

namespace varsel {

namespace {

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(text.substr(start));
      return out;
    }
    out.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_cell(std::string_view field, std::size_t line_no, bool permissive) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    raise(Errc::MalformedOutput, "line " + std::to_string(line_no) +
                                     ": field '" + std::string(field) +
                                     "' is not a number");
  }
  if (!permissive && !std::isfinite(value)) {
    raise(Errc::MalformedOutput, "line " + std::to_string(line_no) +
                                     ": non-finite value '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace

Dataset parse_csv(std::string_view text, bool permissive) {
  std::vector<std::string_view> lines = split(text, '\n');
  // Tolerate CRLF input and a trailing newline.
  for (auto& line : lines) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) raise(Errc::MalformedOutput, "empty CSV");

  std::vector<std::string> names;
  for (std::string_view field : split(lines[0], ',')) names.emplace_back(field);
  const std::size_t k = names.size();

  std::vector<double> cells;
  cells.reserve((lines.size() - 1) * k);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split(lines[i], ',');
    if (fields.size() != k) {
      raise(Errc::MalformedOutput, "line " + std::to_string(i + 1) + ": expected " +
                                       std::to_string(k) + " fields, got " +
                                       std::to_string(fields.size()));
    }
    for (std::string_view field : fields) cells.push_back(parse_cell(field, i + 1, permissive));
  }
  if (cells.empty()) raise(Errc::MalformedOutput, "CSV has a header but no rows");
  return Dataset(std::move(names), std::move(cells), permissive);
}

Dataset load_csv(const std::string& path, bool permissive) {
  return parse_csv(read_file(path), permissive);
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string to_csv(const Dataset& d) {
  std::string out;
  out.reserve(d.cell_count() * 8);
  for (std::size_t c = 0; c < d.cols(); ++c) {
    if (c) out += ',';
    out += d.column_names()[c];
  }
  out += '\n';
  for (std::size_t r = 0; r < d.rows(); ++r) {
    for (std::size_t c = 0; c < d.cols(); ++c) {
      if (c) out += ',';
      out += format_double(d.at(r, c));
    }
    out += '\n';
  }
  return out;
}

void save_csv(const Dataset& d, const std::string& path) {
  write_file(path, to_csv(d));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::IoError, "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) raise(Errc::IoError, "read failed for '" + path + "'");
  return std::move(ss).str();
}

void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Errc::IoError, "cannot open '" + path + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) raise(Errc::IoError, "write failed for '" + path + "'");
}

}  // namespace varsel

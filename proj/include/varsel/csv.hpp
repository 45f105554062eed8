#pragma once

#include <string>
#include <string_view>

#include "varsel/dataset.hpp"

namespace varsel {

// CSV wire format: first line is the comma-separated header, one record per
// line, UTF-8, '.' decimal separator, LF line endings. Values are printed
// with the shortest representation that parses back to the identical double,
// so load/save round-trips are value-exact.

Dataset parse_csv(std::string_view text, bool permissive = false);
Dataset load_csv(const std::string& path, bool permissive = false);

std::string to_csv(const Dataset& d);
void save_csv(const Dataset& d, const std::string& path);

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double value);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace varsel

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace varsel {

/// Rectangular numeric table, row-major, immutable after construction.
/// Cells are 64-bit floats; at least one row and one column. Non-finite
/// cells are rejected at construction unless `allow_non_finite` is set, in
/// which case the metrics below reject them instead.
class Dataset {
 public:
  Dataset(std::vector<std::string> column_names, std::vector<double> cells,
          bool allow_non_finite = false);

  static Dataset from_rows(std::vector<std::string> column_names,
                           const std::vector<std::vector<double>>& rows,
                           bool allow_non_finite = false);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return names_.size(); }
  std::size_t cell_count() const { return cells_.size(); }
  const std::vector<std::string>& column_names() const { return names_; }

  double at(std::size_t r, std::size_t c) const {
    return cells_[r * names_.size() + c];
  }
  std::span<const double> row(std::size_t r) const {
    return {cells_.data() + r * names_.size(), names_.size()};
  }
  std::span<const double> cells() const { return cells_; }

  /// Index of a named column, or -1.
  std::ptrdiff_t column_index(std::string_view name) const;

  /// Same ordered column names and same row count.
  bool same_shape(const Dataset& other) const;

  bool operator==(const Dataset&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<double> cells_;
  std::size_t rows_ = 0;
};

/// The fixed input table candidate programs are run on. Identical shape and
/// validity rules; kept as a distinct name for call-site clarity.
using InputSpace = Dataset;

// Cell-aligned error metrics over two tables with identical column names
// (same order) and row count. ShapeMismatch otherwise; NonFiniteCell if
// either table holds a non-finite value. The default implementations run the
// OpenMP blocked kernels; the serial namespace keeps the plain loops they
// are tested and benchmarked against.

double mse(const Dataset& a, const Dataset& b);
double mad(const Dataset& a, const Dataset& b);
double max_abs_dev(const Dataset& a, const Dataset& b);

namespace serial {
double mse(const Dataset& a, const Dataset& b);
double mad(const Dataset& a, const Dataset& b);
double max_abs_dev(const Dataset& a, const Dataset& b);
}  // namespace serial

}  // namespace varsel

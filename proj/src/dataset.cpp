#include "varsel/dataset.hpp"

#include <cmath>
#include <unordered_set>

#include "varsel/errors.hpp"
#include "varsel/parallel.hpp"

namespace varsel {

namespace {

void validate_names(const std::vector<std::string>& names) {
  if (names.empty()) raise(Errc::ShapeMismatch, "dataset needs at least one column");
  std::unordered_set<std::string_view> seen;
  for (const auto& n : names) {
    if (n.empty()) raise(Errc::ShapeMismatch, "empty column name");
    if (n.find_first_of(",\n\r\"") != std::string::npos)
      raise(Errc::ShapeMismatch, "column name '" + n + "' contains a reserved character");
    if (!seen.insert(n).second)
      raise(Errc::ShapeMismatch, "duplicate column name '" + n + "'");
  }
}

std::size_t first_non_finite(std::span<const double> cells) {
  return par::blocked_first(cells.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      if (!std::isfinite(cells[i])) return i;
    }
    return par::npos;
  });
}

void check_metric_operands(const Dataset& a, const Dataset& b) {
  if (a.column_names() != b.column_names())
    raise(Errc::ShapeMismatch, "column names differ");
  if (a.rows() != b.rows())
    raise(Errc::ShapeMismatch, "row counts differ (" + std::to_string(a.rows()) +
                                   " vs " + std::to_string(b.rows()) + ")");
  for (const Dataset* d : {&a, &b}) {
    const std::size_t bad = first_non_finite(d->cells());
    if (bad != par::npos) {
      raise(Errc::NonFiniteCell,
            "cell at row " + std::to_string(bad / d->cols()) + ", column '" +
                d->column_names()[bad % d->cols()] + "' is not finite");
    }
  }
}

}  // namespace

Dataset::Dataset(std::vector<std::string> column_names, std::vector<double> cells,
                 bool allow_non_finite)
    : names_(std::move(column_names)), cells_(std::move(cells)) {
  validate_names(names_);
  if (cells_.empty() || cells_.size() % names_.size() != 0)
    raise(Errc::ShapeMismatch, "cell count " + std::to_string(cells_.size()) +
                                   " is not a positive multiple of " +
                                   std::to_string(names_.size()) + " columns");
  rows_ = cells_.size() / names_.size();
  if (!allow_non_finite) {
    const std::size_t bad = first_non_finite(cells_);
    if (bad != par::npos)
      raise(Errc::NonFiniteCell, "cell at row " + std::to_string(bad / cols()) +
                                     ", column '" + names_[bad % cols()] +
                                     "' is not finite");
  }
}

Dataset Dataset::from_rows(std::vector<std::string> column_names,
                           const std::vector<std::vector<double>>& rows,
                           bool allow_non_finite) {
  const std::size_t k = column_names.size();
  std::vector<double> cells;
  cells.reserve(rows.size() * k);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != k)
      raise(Errc::ShapeMismatch, "row " + std::to_string(r) + " has " +
                                     std::to_string(rows[r].size()) +
                                     " cells, expected " + std::to_string(k));
    cells.insert(cells.end(), rows[r].begin(), rows[r].end());
  }
  return Dataset(std::move(column_names), std::move(cells), allow_non_finite);
}

std::ptrdiff_t Dataset::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<std::ptrdiff_t>(i);
  }
  return -1;
}

bool Dataset::same_shape(const Dataset& other) const {
  return names_ == other.names_ && rows_ == other.rows_;
}

double mse(const Dataset& a, const Dataset& b) {
  check_metric_operands(a, b);
  const auto xs = a.cells();
  const auto ys = b.cells();
  const double sum = par::blocked_sum(xs.size(), [&](std::size_t lo, std::size_t hi) {
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const double d = xs[i] - ys[i];
      s += d * d;
    }
    return s;
  });
  return sum / static_cast<double>(xs.size());
}

double mad(const Dataset& a, const Dataset& b) {
  check_metric_operands(a, b);
  const auto xs = a.cells();
  const auto ys = b.cells();
  const double sum = par::blocked_sum(xs.size(), [&](std::size_t lo, std::size_t hi) {
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += std::abs(xs[i] - ys[i]);
    return s;
  });
  return sum / static_cast<double>(xs.size());
}

double max_abs_dev(const Dataset& a, const Dataset& b) {
  check_metric_operands(a, b);
  const auto xs = a.cells();
  const auto ys = b.cells();
  return par::blocked_max(xs.size(), [&](std::size_t lo, std::size_t hi) {
    double m = 0.0;
    for (std::size_t i = lo; i < hi; ++i) m = std::max(m, std::abs(xs[i] - ys[i]));
    return m;
  });
}

namespace serial {

double mse(const Dataset& a, const Dataset& b) {
  check_metric_operands(a, b);
  const auto xs = a.cells();
  const auto ys = b.cells();
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = xs[i] - ys[i];
    s += d * d;
  }
  return s / static_cast<double>(xs.size());
}

double mad(const Dataset& a, const Dataset& b) {
  check_metric_operands(a, b);
  const auto xs = a.cells();
  const auto ys = b.cells();
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) s += std::abs(xs[i] - ys[i]);
  return s / static_cast<double>(xs.size());
}

double max_abs_dev(const Dataset& a, const Dataset& b) {
  check_metric_operands(a, b);
  const auto xs = a.cells();
  const auto ys = b.cells();
  double m = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) m = std::max(m, std::abs(xs[i] - ys[i]));
  return m;
}

}  // namespace serial

}  // namespace varsel

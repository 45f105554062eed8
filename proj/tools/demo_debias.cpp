// Test-fixture tool: builds a corrected target table by subtracting a known
// injected bias from one column of an observed table. Stands in for whatever
// upstream analysis normally supplies the target dataset; demos and tests
// only.

#include <CLI11.hpp>

#include <iostream>

#include "varsel/csv.hpp"
#include "varsel/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"subtract a known bias from one column of a CSV table"};
  std::string input, output, column;
  double bias = 0.0;
  app.add_option("--input", input, "observed CSV")->required();
  app.add_option("--output", output, "corrected CSV to write")->required();
  app.add_option("--column", column, "column carrying the bias")->required();
  app.add_option("--bias", bias, "amount to subtract")->required();
  CLI11_PARSE(app, argc, argv);

  try {
    const varsel::Dataset observed = varsel::load_csv(input);
    const std::ptrdiff_t col = observed.column_index(column);
    if (col < 0) {
      std::cerr << "no column named '" << column << "'\n";
      return 2;
    }
    std::vector<double> cells(observed.cells().begin(), observed.cells().end());
    for (std::size_t r = 0; r < observed.rows(); ++r) {
      cells[r * observed.cols() + static_cast<std::size_t>(col)] -= bias;
    }
    varsel::save_csv(varsel::Dataset(observed.column_names(), std::move(cells)), output);
    return 0;
  } catch (const varsel::Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
}

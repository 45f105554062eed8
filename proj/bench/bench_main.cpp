// Compares the OpenMP kernels against their serial reference
// implementations: table metrics, DSL row evaluation, and the full
// candidate-scoring pass. Run with --quick for a sanity-sized pass.

#include <chrono>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "varsel/dataset.hpp"
#include "varsel/generate.hpp"
#include "varsel/search.hpp"
#include "varsel/toydsl.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace varsel;

namespace {

using Clock = std::chrono::steady_clock;

template <typename Fn>
double measure_ms(Fn&& fn, int reps) {
  fn();  // warm up
  const auto start = Clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto elapsed = Clock::now() - start;
  return std::chrono::duration<double, std::milli>(elapsed).count() / reps;
}

Dataset random_table(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-10.0, 10.0);
  std::vector<double> cells(rows * cols);
  for (double& c : cells) c = dist(rng);
  std::vector<std::string> names;
  for (std::size_t c = 0; c < cols; ++c) names.push_back("c" + std::to_string(c));
  return Dataset(std::move(names), std::move(cells));
}

void row(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-28s %10.3f ms %10.3f ms %8.2fx\n", name, serial_ms, parallel_ms,
              parallel_ms > 0 ? serial_ms / parallel_ms : 0.0);
}

}  // namespace

int main(int argc, char** argv) {
  const bool quick = argc > 1 && std::string(argv[1]) == "--quick";
  const std::size_t metric_rows = quick ? 20'000 : 2'000'000;
  const std::size_t eval_rows = quick ? 5'000 : 200'000;
  const std::size_t pool = quick ? 16 : 128;
  const int reps = quick ? 3 : 7;

#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#endif
  std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

  {
    const Dataset a = random_table(metric_rows, 8, 1);
    const Dataset b = random_table(metric_rows, 8, 2);
    row("mse", measure_ms([&] { (void)serial::mse(a, b); }, reps),
        measure_ms([&] { (void)mse(a, b); }, reps));
    row("mad", measure_ms([&] { (void)serial::mad(a, b); }, reps),
        measure_ms([&] { (void)mad(a, b); }, reps));
    row("max_abs_dev", measure_ms([&] { (void)serial::max_abs_dev(a, b); }, reps),
        measure_ms([&] { (void)max_abs_dev(a, b); }, reps));
  }

  {
    const Dataset theta = random_table(eval_rows, 2, 3);
    const dsl::Program program = dsl::Program::parse(
        "y = sin(c0) * 0.5 + cos(c1) * abs(c0 - c1)\nz = max(c0, c1) + 0.25");
    row("dsl evaluate",
        measure_ms([&] { (void)dsl::serial::evaluate(program, theta); }, reps),
        measure_ms([&] { (void)program.evaluate(theta); }, reps));
  }

  {
    InputSpace theta = random_table(quick ? 500 : 2'000, 1, 4);
    std::vector<std::string> names = {"x"};
    std::vector<double> cells(theta.cells().begin(), theta.cells().end());
    theta = Dataset(names, std::move(cells));
    const Program base = Program::dsl("base", "y = x + 0.5");
    GeneratorSpec spec;
    spec.count = pool - 1;
    spec.seed = 42;
    const Dataset d_star = dsl::Program::parse("y = x").evaluate(theta);
    const PreparedProblem prepared = prepare(
        base, theta, d_star,
        [&](const Program& b) { return mutate_variants(b, spec, theta); }, RunLimits{});
    SearchConfig config;
    row("evaluate_all",
        measure_ms([&] { (void)serial::evaluate_all(prepared, config); }, reps),
        measure_ms([&] { (void)evaluate_all(prepared, config); }, reps));
  }
  return 0;
}

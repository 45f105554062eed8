#include <doctest.h>

#include <cmath>
#include <map>

#include "testutil.hpp"
#include "varsel/errors.hpp"
#include "varsel/generate.hpp"
#include "varsel/search.hpp"
#include "varsel/toydsl.hpp"

using namespace varsel;

namespace {

InputSpace ramp_theta(std::size_t rows) {
  std::vector<double> xs(rows);
  for (std::size_t i = 0; i < rows; ++i) xs[i] = static_cast<double>(i) / 10.0;
  return Dataset({"x"}, std::move(xs));
}

PreparedProblem::Generator fixed_variants(std::vector<std::string> sources) {
  return [sources = std::move(sources)](const Program&) {
    VariantBatch batch;
    for (std::size_t i = 0; i < sources.size(); ++i)
      batch.programs.push_back(Program::dsl("v" + std::to_string(i + 1), sources[i]));
    return batch;
  };
}

PreparedProblem::Generator no_variants() {
  return [](const Program&) { return VariantBatch{}; };
}

const EvaluationRecord& record_of(const std::vector<EvaluationRecord>& records,
                                  const std::string& id) {
  for (const EvaluationRecord& r : records)
    if (r.id == id) return r;
  REQUIRE(false);
  return records.front();
}

}  // namespace

TEST_CASE("prepare: empty generator leaves just the base") {
  const InputSpace theta = ramp_theta(10);
  const Program base = Program::dsl("base", "y = x");
  const Dataset d_star = dsl::Program::parse("y = x").evaluate(theta);
  const PreparedProblem prep = prepare(base, theta, d_star, no_variants(), RunLimits{});
  CHECK(prep.size() == 1);
  CHECK(prep.programs().base_id == "base");
  CHECK(prep.outcome(0).ok);
}

TEST_CASE("prepare: seeded mutation generator is deterministic") {
  const InputSpace theta = ramp_theta(20);
  const Program base = Program::dsl("base", "y = x + 0.5");
  const Dataset d_star = dsl::Program::parse("y = x").evaluate(theta);
  GeneratorSpec spec;
  spec.count = 10;
  spec.seed = 2024;
  const auto gen = [&](const Program& b) { return mutate_variants(b, spec, theta); };

  const PreparedProblem first = prepare(base, theta, d_star, gen, RunLimits{});
  const PreparedProblem second = prepare(base, theta, d_star, gen, RunLimits{});
  REQUIRE(first.size() == 11);
  REQUIRE(second.size() == 11);
  for (std::size_t i = 0; i < first.size(); ++i) {
    CHECK(first.programs().programs[i].id == second.programs().programs[i].id);
    CHECK(first.programs().programs[i].source_text ==
          second.programs().programs[i].source_text);
  }
}

TEST_CASE("prepare: shape and run failures") {
  const InputSpace theta = ramp_theta(5);
  const Program base = Program::dsl("base", "y = x");

  // wrong column count in the target
  const Dataset bad_star = Dataset::from_rows({"y", "z"}, {{1, 2}, {3, 4}, {5, 6}, {7, 8}, {9, 0}});
  try {
    prepare(base, theta, bad_star, no_variants(), RunLimits{});
    FAIL("expected TargetShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::TargetShapeMismatch);
  }

  // base that cannot run
  const Program broken = Program::dsl("base", "y = 1 / (x - x)");
  const Dataset d_star = dsl::Program::parse("y = x").evaluate(theta);
  try {
    prepare(broken, theta, d_star, no_variants(), RunLimits{});
    FAIL("expected BaseRunFailed");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::BaseRunFailed);
  }

  // generator failures are wrapped
  const auto exploding = [](const Program&) -> VariantBatch {
    raise(Errc::ExhaustedAttempts, "nothing valid");
  };
  try {
    prepare(base, theta, d_star, exploding, RunLimits{});
    FAIL("expected GeneratorFailed");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::GeneratorFailed);
  }
}

TEST_CASE("evaluate_all: single candidate takes the whole posterior") {
  const InputSpace theta = ramp_theta(10);
  const Program base = Program::dsl("base", "y = x + 0.5");
  const Dataset d_star = dsl::Program::parse("y = x").evaluate(theta);
  const PreparedProblem prep = prepare(base, theta, d_star, no_variants(), RunLimits{});

  SearchConfig config;
  const std::vector<EvaluationRecord> records = evaluate_all(prep, config);
  REQUIRE(records.size() == 1);
  const EvaluationRecord& r = records[0];
  CHECK(r.ok);
  CHECK(r.posterior == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.mse_vs_observed == 0.0);
  CHECK(r.mse_vs_optimal == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(r.utility ==
        doctest::Approx(0.5 * 1.0 + 0.5 * std::exp(-0.25)).epsilon(1e-9));
}

TEST_CASE("evaluate_all: identical programs share the posterior evenly") {
  const InputSpace theta = ramp_theta(10);
  const Program base = Program::dsl("base", "y = x");
  const Dataset d_star = dsl::Program::parse("y = x").evaluate(theta);
  // the twin differs only in id
  const PreparedProblem prep =
      prepare(base, theta, d_star, fixed_variants({"y = x"}), RunLimits{});

  SearchConfig config;
  const std::vector<EvaluationRecord> records = evaluate_all(prep, config);
  REQUIRE(records.size() == 2);
  CHECK(records[0].posterior == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(records[1].posterior == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(records[0].utility == doctest::Approx(records[1].utility).epsilon(1e-15));
}

TEST_CASE("evaluate_all: full table against an independent column-by-column oracle") {
  const InputSpace theta = ramp_theta(8);
  const Program base = Program::dsl("base", "y = x + 0.5");
  const Dataset d_star = dsl::Program::parse("y = x").evaluate(theta);
  const PreparedProblem prep = prepare(
      base, theta, d_star, fixed_variants({"y = x", "y = x + 0.25"}), RunLimits{});

  SearchConfig config;
  config.likelihood_mode = LikelihoodMode::Corrected;
  config.posterior_mode = PosteriorMode::ConditionalK;
  config.utility.lambda = 0.5;
  config.utility.penalty.alpha = 1.0;

  const std::vector<EvaluationRecord> records = evaluate_all(prep, config);
  REQUIRE(records.size() == 3);

  // oracle: recompute every column with plain formulas
  std::map<std::string, double> expected_weight;
  double weight_sum = 0.0;
  for (const EvaluationRecord& r : records) {
    const Dataset out = dsl::Program::parse(
                            prep.programs().find(r.id)->source_text)
                            .evaluate(theta);
    const double mse_obs = serial::mse(out, prep.observed());
    const double mse_opt = serial::mse(out, prep.d_star());
    CHECK(r.mse_vs_observed == doctest::Approx(mse_obs).epsilon(1e-12));
    CHECK(r.mse_vs_optimal == doctest::Approx(mse_opt).epsilon(1e-12));

    const double lik = 1.0 / (1.0 + std::exp(mse_obs));
    CHECK(r.likelihood == doctest::Approx(lik).epsilon(1e-12));

    const double rho = 1.0 * mse_opt;
    CHECK(r.rho == doctest::Approx(rho).epsilon(1e-12));
    CHECK(r.reward == doctest::Approx(std::exp(-rho)).epsilon(1e-12));

    const double w = std::pow(2.0, -r.k_cond_bits) * lik;
    expected_weight[r.id] = w;
    weight_sum += w;
  }
  for (const EvaluationRecord& r : records) {
    const double posterior = expected_weight[r.id] / weight_sum;
    CHECK(r.posterior == doctest::Approx(posterior).epsilon(1e-9));
    CHECK(r.utility ==
          doctest::Approx(0.5 * posterior + 0.5 * r.reward).epsilon(1e-9));
  }
}

TEST_CASE("evaluate_all: failed candidates stay in the table with errors") {
  const InputSpace theta = ramp_theta(6);
  const Program base = Program::dsl("base", "y = x");
  const Dataset d_star = dsl::Program::parse("y = x").evaluate(theta);
  // division by zero at x = 0 (first row)
  const PreparedProblem prep =
      prepare(base, theta, d_star, fixed_variants({"y = 1 / x"}), RunLimits{});

  const std::vector<EvaluationRecord> records = evaluate_all(prep, SearchConfig{});
  REQUIRE(records.size() == 2);
  CHECK(records[0].ok);
  CHECK(records[0].posterior == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_FALSE(records[1].ok);
  CHECK(records[1].posterior == 0.0);
  CHECK(!records[1].error.empty());
}

TEST_CASE("evaluate_all parallel equals the serial reference exactly") {
  const InputSpace theta = ramp_theta(64);
  const Program base = Program::dsl("base", "y = x + 0.5");
  const Dataset d_star = dsl::Program::parse("y = x").evaluate(theta);
  GeneratorSpec spec;
  spec.count = 24;
  spec.seed = 9;
  const PreparedProblem prep = prepare(
      base, theta, d_star,
      [&](const Program& b) { return mutate_variants(b, spec, theta); }, RunLimits{});

  for (const PosteriorMode mode :
       {PosteriorMode::PlainK, PosteriorMode::ConditionalK, PosteriorMode::MleWeighted}) {
    SearchConfig config;
    config.posterior_mode = mode;
    const auto parallel = evaluate_all(prep, config);
    const auto reference = serial::evaluate_all(prep, config);
    REQUIRE(parallel.size() == reference.size());
    for (std::size_t i = 0; i < parallel.size(); ++i) {
      CHECK(parallel[i].id == reference[i].id);
      CHECK(parallel[i].posterior == reference[i].posterior);
      CHECK(parallel[i].utility == reference[i].utility);
      CHECK(parallel[i].mse_vs_observed == reference[i].mse_vs_observed);
    }
  }
}

TEST_CASE("neighborhood: two programs, saturation, and diff-distance ordering") {
  const InputSpace theta = ramp_theta(5);
  const Program base = Program::dsl("base", "y = x");
  const Dataset d_star = dsl::Program::parse("y = x").evaluate(theta);

  {
    const PreparedProblem prep =
        prepare(base, theta, d_star, fixed_variants({"y = x + 1"}), RunLimits{});
    CHECK(neighborhood(prep, "base", 1) == std::vector<std::string>{"v1"});
    CHECK(neighborhood(prep, "v1", 1) == std::vector<std::string>{"base"});
    CHECK(neighborhood(prep, "base", 10) == std::vector<std::string>{"v1"});
  }

  {
    // payload distances from base grow with the edited line count
    const PreparedProblem prep = prepare(
        base, theta, d_star,
        fixed_variants({
            "y = x + 0.125",                 // replace 1 line
            "y = x + 0.125\nz2 = x",         // replace 1 + insert 1
            "y = x + 0.125\nz2 = x\nz3 = x", // replace 1 + insert 2
            "y = x + 0.125\nz2 = x\nz3 = x\nz4 = x",
        }),
        RunLimits{});
    CHECK(neighborhood(prep, "base", 2) == std::vector<std::string>{"v1", "v2"});
    CHECK(neighborhood(prep, "base", 4) ==
          std::vector<std::string>{"v1", "v2", "v3", "v4"});
  }
}

TEST_CASE("neighborhood ties break toward lower descriptive complexity, then id") {
  const InputSpace theta = ramp_theta(5);
  const Program base = Program::dsl("base", "y = x");
  const Dataset d_star = dsl::Program::parse("y = x").evaluate(theta);
  // both variants are 14 payload bytes from the base; the repetitive source
  // compresses smaller (144 vs 176 bits), so it ranks first
  const PreparedProblem prep = prepare(
      base, theta, d_star, fixed_variants({"y = x * 3 + 1", "y = x + x + x"}), RunLimits{});
  CHECK(prep.pair_bits("v1", "base") == prep.pair_bits("v2", "base"));
  CHECK(neighborhood(prep, "base", 2) == std::vector<std::string>{"v2", "v1"});

  // equal distance and equal compressed size: lexicographically smaller id
  const PreparedProblem twins = prepare(
      base, theta, d_star, fixed_variants({"y = x + x + x", "y = x + x + x"}), RunLimits{});
  CHECK(neighborhood(twins, "base", 2) == std::vector<std::string>{"v1", "v2"});
}

TEST_CASE("local_search: single program terminates immediately") {
  const InputSpace theta = ramp_theta(10);
  const Program base = Program::dsl("base", "y = x");
  const Dataset d_star = dsl::Program::parse("y = x").evaluate(theta);
  const PreparedProblem prep = prepare(base, theta, d_star, no_variants(), RunLimits{});

  const SearchResult result = local_search(prep, SearchConfig{});
  CHECK(result.best_program == "base");
  CHECK(result.termination == Termination::NoImprovement);
  REQUIRE(result.trace.size() == 1);
  CHECK(result.trace[0].iteration == 1);
  CHECK(result.trace[0].neighborhood.empty());
}

TEST_CASE("local_search walks a monotone chain to its end") {
  // Five programs correcting one line at a time. Each correction replaces a
  // long wrong line with a short right one, so the next chain member is
  // strictly nearer (6 payload bytes) than the previous one (12 bytes), and
  // lambda 0 makes utility a pure reward ranking that rises along the chain.
  const InputSpace theta = ramp_theta(12);
  const std::string base_src = "a = x + 0.9\nb = x + 0.9\nc = x + 0.9\nd = x + 0.9";
  const std::vector<std::string> chain = {
      "a = x\nb = x + 0.9\nc = x + 0.9\nd = x + 0.9",
      "a = x\nb = x\nc = x + 0.9\nd = x + 0.9",
      "a = x\nb = x\nc = x\nd = x + 0.9",
      "a = x\nb = x\nc = x\nd = x",
  };
  const Program base = Program::dsl("base", base_src);
  const Dataset d_star = dsl::Program::parse(chain.back()).evaluate(theta);

  const PreparedProblem prep = prepare(base, theta, d_star, fixed_variants(chain), RunLimits{});

  SearchConfig config;
  config.utility.lambda = 0.0;  // reward ranking only
  config.neighborhood_size = 1;
  config.max_iterations = 50;

  const SearchResult result = local_search(prep, config);
  CHECK(result.best_program == "v4");
  CHECK(result.termination == Termination::NoImprovement);

  // the oracle is the chain order: each accepted move steps one further
  std::vector<std::string> visited;
  for (const TraceStep& step : result.trace) visited.push_back(step.current);
  CHECK(visited == std::vector<std::string>{"base", "v1", "v2", "v3", "v4"});

  // accepted utilities strictly increase
  const std::vector<EvaluationRecord> records = evaluate_all(prep, config);
  for (std::size_t i = 1; i < visited.size(); ++i) {
    CHECK(record_of(records, visited[i]).utility >
          record_of(records, visited[i - 1]).utility);
  }
}

TEST_CASE("exhaustive: argmax over the whole table") {
  const InputSpace theta = ramp_theta(10);
  const Program base = Program::dsl("base", "y = x + 0.5");
  const Dataset d_star = dsl::Program::parse("y = x").evaluate(theta);

  {
    const PreparedProblem prep = prepare(base, theta, d_star, no_variants(), RunLimits{});
    CHECK(exhaustive(prep, SearchConfig{}) == "base");
  }

  GeneratorSpec spec;
  spec.count = 20;
  spec.seed = 77;
  const PreparedProblem prep = prepare(
      base, theta, d_star,
      [&](const Program& b) { return mutate_variants(b, spec, theta); }, RunLimits{});
  SearchConfig config;
  const std::vector<EvaluationRecord> records = evaluate_all(prep, config);
  const std::string winner = exhaustive(records);

  // table-scan oracle
  const EvaluationRecord* best = nullptr;
  for (const EvaluationRecord& r : records) {
    if (!r.ok) continue;
    if (!best || r.utility > best->utility) best = &r;
  }
  CHECK(winner == best->id);
}

TEST_CASE("global neighborhood makes local_search equal exhaustive") {
  std::mt19937_64 rng(31337);
  const InputSpace theta = ramp_theta(16);
  for (int trial = 0; trial < 10; ++trial) {
    const Program base =
        Program::dsl("base", testutil::random_program(rng, {"x"}, 1).source());
    const Dataset base_out = dsl::Program::parse(base.source_text).evaluate(theta);
    const Dataset d_star = dsl::Program::parse("y = x").evaluate(theta);

    GeneratorSpec spec;
    spec.count = 8;
    spec.seed = rng();
    PreparedProblem prep = [&] {
      try {
        return prepare(base, theta, Dataset({"out0"}, std::vector<double>(
                                                base_out.cells().begin(),
                                                base_out.cells().end())),
                       [&](const Program& b) { return mutate_variants(b, spec, theta); },
                       RunLimits{});
      } catch (const Error&) {
        // some random bases exhaust the mutation budget; skip those
        return prepare(base, theta,
                       Dataset({"out0"}, std::vector<double>(base_out.cells().begin(),
                                                             base_out.cells().end())),
                       no_variants(), RunLimits{});
      }
    }();

    SearchConfig config;
    config.neighborhood_size = prep.size() > 1 ? prep.size() - 1 : 1;
    config.max_iterations = 64;
    const std::vector<EvaluationRecord> records = evaluate_all(prep, config);
    CHECK(local_search(prep, config, records).best_program == exhaustive(records));
  }
}

TEST_CASE("whole pipeline is deterministic for a fixed seed and config") {
  const InputSpace theta = ramp_theta(32);
  const Program base = Program::dsl("base", "y = x + 0.5");
  const Dataset d_star = dsl::Program::parse("y = x").evaluate(theta);
  GeneratorSpec spec;
  spec.count = 12;
  spec.seed = 5150;
  const auto gen = [&](const Program& b) { return mutate_variants(b, spec, theta); };

  SearchConfig config;
  config.neighborhood_size = 3;

  const SearchResult a = local_search(prepare(base, theta, d_star, gen, RunLimits{}), config);
  const SearchResult b = local_search(prepare(base, theta, d_star, gen, RunLimits{}), config);
  CHECK(a.best_program == b.best_program);
  CHECK(a.best_utility == b.best_utility);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].current == b.trace[i].current);
    CHECK(a.trace[i].chosen == b.trace[i].chosen);
    CHECK(a.trace[i].neighborhood == b.trace[i].neighborhood);
  }
}

TEST_CASE("search config validation") {
  const InputSpace theta = ramp_theta(5);
  const Program base = Program::dsl("base", "y = x");
  const Dataset d_star = dsl::Program::parse("y = x").evaluate(theta);
  const PreparedProblem prep = prepare(base, theta, d_star, no_variants(), RunLimits{});

  SearchConfig bad;
  bad.neighborhood_size = 0;
  CHECK_THROWS_AS(local_search(prep, bad), Error);
  bad = SearchConfig{};
  bad.max_iterations = 0;
  CHECK_THROWS_AS(local_search(prep, bad), Error);
  bad = SearchConfig{};
  bad.initial_program = "ghost";
  CHECK_THROWS_AS(local_search(prep, bad), Error);
}

TEST_CASE("local_search stays inside the candidate set and respects caps") {
  const InputSpace theta = ramp_theta(16);
  const Program base = Program::dsl("base", "y = x + 0.5");
  const Dataset d_star = dsl::Program::parse("y = x").evaluate(theta);
  GeneratorSpec spec;
  spec.count = 15;
  spec.seed = 3;
  const PreparedProblem prep = prepare(
      base, theta, d_star,
      [&](const Program& b) { return mutate_variants(b, spec, theta); }, RunLimits{});

  SearchConfig config;
  config.neighborhood_size = 4;
  config.max_iterations = 2;
  const SearchResult result = local_search(prep, config);
  CHECK(result.trace.size() <= 2);
  for (const TraceStep& step : result.trace) {
    CHECK(prep.programs().find(step.current) != nullptr);
    CHECK(prep.programs().find(step.chosen) != nullptr);
    for (const std::string& id : step.neighborhood)
      CHECK(prep.programs().find(id) != nullptr);
  }
}

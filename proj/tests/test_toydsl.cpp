#include <doctest.h>

#include <cmath>

#include "testutil.hpp"
#include "varsel/errors.hpp"
#include "varsel/toydsl.hpp"

using namespace varsel;
using dsl::Program;

namespace {

Dataset column(const std::string& name, std::vector<double> values) {
  return Dataset({name}, std::move(values));
}

}  // namespace

TEST_CASE("parse: identity, add, and multi-binding programs") {
  const Program identity = Program::parse("y = x");
  REQUIRE(identity.bindings().size() == 1);
  CHECK(identity.bindings()[0].name == "y");
  CHECK(identity.bindings()[0].expr->kind == dsl::Expr::Kind::Column);
  CHECK(identity.source() == "y = x\n");

  const Program add = Program::parse("y = x + 0.5");
  CHECK(add.bindings()[0].expr->kind == dsl::Expr::Kind::Binary);
  CHECK(add.bindings()[0].expr->bin == dsl::BinOp::Add);
  CHECK(add.source() == "y = x + 0.5\n");

  const Program two = Program::parse("y = pow(x, 2.0)\nz = min(x, 0.0)");
  REQUIRE(two.bindings().size() == 2);
  // printer oracle for the AST shape
  CHECK(dsl::render(*two.bindings()[0].expr) == "pow(x, 2)");
  CHECK(dsl::render(*two.bindings()[1].expr) == "min(x, 0)");
}

TEST_CASE("parse: comments, blank lines, whitespace insensitivity") {
  const Program p = Program::parse("# comment\n\n  y   =x+ 0.5   # trailing\n");
  CHECK(p.source() == "y = x + 0.5\n");
}

TEST_CASE("parse failures carry line and column") {
  try {
    Program::parse("y = x\nz = )");
    FAIL("expected SyntaxError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::SyntaxError);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(Program::parse("y = x +"), Error);
  CHECK_THROWS_AS(Program::parse("y = foo(x)"), Error);
  CHECK_THROWS_AS(Program::parse("y = min(x)"), Error);
  CHECK_THROWS_AS(Program::parse(""), Error);

  try {
    Program::parse("y = x\ny = x + 1");
    FAIL("expected DuplicateOutput");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DuplicateOutput);
  }
}

TEST_CASE("render/parse is a fixpoint on random source text") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    // random ASTs are only a source-text generator here; the property is
    // parse(render(parse(s))) == parse(s) for any source s
    const std::string source = testutil::random_program(rng, {"x", "w"}, 2, false).source();
    const Program once = Program::parse(source);
    const Program twice = Program::parse(once.source());
    CHECK(twice.equals(once));
    CHECK(twice.source() == once.source());
  }
}

TEST_CASE("rendering keeps tree shape through precedence and associativity") {
  // hand-built right-leaning sum must keep its parentheses
  auto rhs = dsl::make_binary(dsl::BinOp::Add, dsl::make_column("b"), dsl::make_column("c"));
  auto sum = dsl::make_binary(dsl::BinOp::Add, dsl::make_column("a"), std::move(rhs));
  CHECK(dsl::render(*sum) == "a + (b + c)");

  const Program p = Program::parse("y = a - (b - c)\nz = a - b - c");
  CHECK(p.source() == "y = a - (b - c)\nz = a - b - c\n");

  const Program q = Program::parse("y = -x * 2\nz = -(x * 2)");
  CHECK(q.source() == "y = -x * 2\nz = -(x * 2)\n");
}

TEST_CASE("evaluate: identity, constant, shifted") {
  const Dataset theta = column("x", {1, 2, 3});
  CHECK(Program::parse("y = x").evaluate(theta) == column("y", {1, 2, 3}));

  const Dataset theta4 = column("x", {5, 6, 7, 8});
  CHECK(Program::parse("y = 0.0").evaluate(theta4) == column("y", {0, 0, 0, 0}));

  const Dataset theta2 = column("x", {1, 2});
  const Dataset shifted = Program::parse("y = x + 0.5").evaluate(theta2);
  // row-loop oracle
  for (std::size_t r = 0; r < theta2.rows(); ++r)
    CHECK(shifted.at(r, 0) == theta2.at(r, 0) + 0.5);
}

TEST_CASE("evaluate reproduces referenced input columns exactly") {
  const Dataset theta = testutil::random_table(257, 2, 99);
  const Dataset out = Program::parse("a = c1\nb = c0").evaluate(theta);
  for (std::size_t r = 0; r < theta.rows(); ++r) {
    CHECK(out.at(r, 0) == theta.at(r, 1));
    CHECK(out.at(r, 1) == theta.at(r, 0));
  }
}

TEST_CASE("evaluate: unknown column fails before any work") {
  const Dataset theta = column("x", {1});
  try {
    Program::parse("y = x + q").evaluate(theta);
    FAIL("expected UnknownColumn");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnknownColumn);
  }
}

TEST_CASE("evaluate: numeric failures abort and report the first row") {
  const Dataset theta = column("x", {4.0, 1.0, 0.0, -1.0});

  try {
    Program::parse("y = 1 / x").evaluate(theta);
    FAIL("expected NumericError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NumericError);
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    CHECK(std::string(e.what()).find("division by zero") != std::string::npos);
  }

  try {
    Program::parse("y = log(x)").evaluate(theta);
    FAIL("expected NumericError");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);  // log(0)
  }

  try {
    Program::parse("y = pow(x, 0.5)").evaluate(theta);  // pow(-1, .5) -> nan
    FAIL("expected NumericError");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
    CHECK(std::string(e.what()).find("pow") != std::string::npos);
  }

  CHECK_THROWS_AS(Program::parse("y = sqrt(0 - x)").evaluate(column("x", {1.0})), Error);
  CHECK_THROWS_AS(Program::parse("y = exp(x)").evaluate(column("x", {1e9})), Error);
}

TEST_CASE("evaluate is pure and matches the serial reference bit for bit") {
  std::mt19937_64 rng(31);
  const Dataset theta = testutil::random_table(4097, 3, 17);
  for (int trial = 0; trial < 20; ++trial) {
    const Program p = testutil::random_program(rng, theta.column_names(), 2);
    const Dataset parallel_a = p.evaluate(theta);
    const Dataset parallel_b = p.evaluate(theta);
    const Dataset reference = dsl::serial::evaluate(p, theta);
    CHECK(parallel_a == parallel_b);
    CHECK(parallel_a == reference);
  }
}

TEST_CASE("binary and unary operator semantics") {
  const Dataset theta = column("x", {2.0});
  const auto eval1 = [&theta](const std::string& src) {
    return Program::parse(src).evaluate(theta).at(0, 0);
  };
  CHECK(eval1("y = x * 3") == 6.0);
  CHECK(eval1("y = x / 4") == 0.5);
  CHECK(eval1("y = min(x, 1.5)") == 1.5);
  CHECK(eval1("y = max(x, 1.5)") == 2.0);
  CHECK(eval1("y = pow(x, 3)") == 8.0);
  CHECK(eval1("y = neg(x)") == -2.0);
  CHECK(eval1("y = -x") == -2.0);
  CHECK(eval1("y = abs(0 - x)") == 2.0);
  CHECK(eval1("y = sin(x)") == std::sin(2.0));
  CHECK(eval1("y = cos(x)") == std::cos(2.0));
  CHECK(eval1("y = exp(x)") == std::exp(2.0));
  CHECK(eval1("y = log(x)") == std::log(2.0));
  CHECK(eval1("y = sqrt(x)") == std::sqrt(2.0));
}

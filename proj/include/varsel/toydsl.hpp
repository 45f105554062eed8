#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "varsel/dataset.hpp"

namespace varsel::dsl {

// Minimal deterministic expression language for candidate programs.
// One `name = expression` binding per line, `#` starts a comment, whitespace
// within a line is insignificant. Expressions are built from 64-bit float
// literals, input-column references, the binary operators + - * / min max
// pow and the unary operators neg abs sin cos exp log sqrt. Source files
// use the `.pv` extension, UTF-8, LF.

enum class BinOp { Add, Sub, Mul, Div, Min, Max, Pow };
enum class UnOp { Neg, Abs, Sin, Cos, Exp, Log, Sqrt };

struct Expr {
  enum class Kind { Literal, Column, Unary, Binary };

  Kind kind = Kind::Literal;
  double literal = 0.0;
  std::string column;
  UnOp un = UnOp::Neg;
  BinOp bin = BinOp::Add;
  std::unique_ptr<Expr> lhs;  // unary operand lives here too
  std::unique_ptr<Expr> rhs;

  std::unique_ptr<Expr> clone() const;
  bool equals(const Expr& other) const;
};

using ExprPtr = std::unique_ptr<Expr>;

ExprPtr make_literal(double value);
ExprPtr make_column(std::string name);
ExprPtr make_unary(UnOp op, ExprPtr operand);
ExprPtr make_binary(BinOp op, ExprPtr lhs, ExprPtr rhs);

struct Binding {
  std::string name;
  ExprPtr expr;
};

/// Canonical rendering of one expression: single spaces around infix
/// operators, parentheses only where the tree shape requires them, literals
/// printed in their shortest round-trip form.
std::string render(const Expr& e);

class Program {
 public:
  /// Throws SyntaxError (with line and column) or DuplicateOutput.
  static Program parse(std::string_view source);

  static Program from_bindings(std::vector<Binding> bindings);

  const std::vector<Binding>& bindings() const { return bindings_; }

  /// Canonical source: one rendered binding per line, LF-terminated.
  /// parse(source()) reproduces this program exactly.
  const std::string& source() const { return source_; }

  /// Runs every binding over every row of theta. Output column order is the
  /// binding order. Throws UnknownColumn before evaluating anything and
  /// NumericError (naming the first offending row) when an operation
  /// produces a non-finite value. Pure: identical inputs give bit-identical
  /// output for any thread count.
  Dataset evaluate(const InputSpace& theta) const;

  bool equals(const Program& other) const;

 private:
  Program() = default;
  std::vector<Binding> bindings_;
  std::string source_;
};

namespace serial {
/// Reference single-threaded evaluator; evaluate() must match it bit for bit.
Dataset evaluate(const Program& program, const InputSpace& theta);
}  // namespace serial

}  // namespace varsel::dsl

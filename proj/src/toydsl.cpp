#include "varsel/toydsl.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <unordered_set>

#include "varsel/csv.hpp"
#include "varsel/errors.hpp"

namespace varsel::dsl {

namespace {

// ---------------------------------------------------------------------------
// AST helpers

int precedence(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Binary:
      switch (e.bin) {
        case BinOp::Add:
        case BinOp::Sub: return 1;
        case BinOp::Mul:
        case BinOp::Div: return 2;
        default: return 4;  // min/max/pow render as calls
      }
    case Expr::Kind::Unary:
      return e.un == UnOp::Neg ? 3 : 4;  // named unaries render as calls
    default:
      return 4;
  }
}

const char* bin_symbol(BinOp op) {
  switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Div: return "/";
    case BinOp::Min: return "min";
    case BinOp::Max: return "max";
    case BinOp::Pow: return "pow";
  }
  return "?";
}

const char* un_name(UnOp op) {
  switch (op) {
    case UnOp::Neg: return "neg";
    case UnOp::Abs: return "abs";
    case UnOp::Sin: return "sin";
    case UnOp::Cos: return "cos";
    case UnOp::Exp: return "exp";
    case UnOp::Log: return "log";
    case UnOp::Sqrt: return "sqrt";
  }
  return "?";
}

bool is_infix(BinOp op) {
  return op == BinOp::Add || op == BinOp::Sub || op == BinOp::Mul || op == BinOp::Div;
}

void render_into(const Expr& e, std::string& out) {
  switch (e.kind) {
    case Expr::Kind::Literal:
      out += format_double(e.literal);
      return;
    case Expr::Kind::Column:
      out += e.column;
      return;
    case Expr::Kind::Unary:
      if (e.un == UnOp::Neg) {
        out += '-';
        const bool parens = precedence(*e.lhs) < 3;
        if (parens) out += '(';
        render_into(*e.lhs, out);
        if (parens) out += ')';
      } else {
        out += un_name(e.un);
        out += '(';
        render_into(*e.lhs, out);
        out += ')';
      }
      return;
    case Expr::Kind::Binary:
      if (is_infix(e.bin)) {
        const int prec = precedence(e);
        // Left-associative grammar: an equal-precedence right child needs
        // parentheses to keep the tree shape through a reparse.
        const bool lp = precedence(*e.lhs) < prec;
        const bool rp = precedence(*e.rhs) <= prec;
        if (lp) out += '(';
        render_into(*e.lhs, out);
        if (lp) out += ')';
        out += ' ';
        out += bin_symbol(e.bin);
        out += ' ';
        if (rp) out += '(';
        render_into(*e.rhs, out);
        if (rp) out += ')';
      } else {
        out += bin_symbol(e.bin);
        out += '(';
        render_into(*e.lhs, out);
        out += ", ";
        render_into(*e.rhs, out);
        out += ')';
      }
      return;
  }
}

// ---------------------------------------------------------------------------
// Tokenizer

struct Token {
  enum class Kind { Ident, Number, Plus, Minus, Star, Slash, LParen, RParen, Comma, Equals, End };
  Kind kind = Kind::End;
  std::string text;
  double number = 0.0;
  std::size_t column = 0;  // 1-based within the line
};

class Lexer {
 public:
  Lexer(std::string_view line, std::size_t line_no) : line_(line), line_no_(line_no) {}

  Token next() {
    while (pos_ < line_.size() && (line_[pos_] == ' ' || line_[pos_] == '\t')) ++pos_;
    Token t;
    t.column = pos_ + 1;
    if (pos_ >= line_.size() || line_[pos_] == '#') {
      t.kind = Token::Kind::End;
      return t;
    }
    const char c = line_[pos_];
    switch (c) {
      case '+': ++pos_; t.kind = Token::Kind::Plus; return t;
      case '-': ++pos_; t.kind = Token::Kind::Minus; return t;
      case '*': ++pos_; t.kind = Token::Kind::Star; return t;
      case '/': ++pos_; t.kind = Token::Kind::Slash; return t;
      case '(': ++pos_; t.kind = Token::Kind::LParen; return t;
      case ')': ++pos_; t.kind = Token::Kind::RParen; return t;
      case ',': ++pos_; t.kind = Token::Kind::Comma; return t;
      case '=': ++pos_; t.kind = Token::Kind::Equals; return t;
      default: break;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* first = line_.data() + pos_;
      const char* last = line_.data() + line_.size();
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(first, last, value);
      if (ec != std::errc()) fail(t.column, "malformed number");
      pos_ += static_cast<std::size_t>(ptr - first);
      t.kind = Token::Kind::Number;
      t.number = value;
      return t;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t end = pos_;
      while (end < line_.size() &&
             (std::isalnum(static_cast<unsigned char>(line_[end])) || line_[end] == '_'))
        ++end;
      t.kind = Token::Kind::Ident;
      t.text = std::string(line_.substr(pos_, end - pos_));
      pos_ = end;
      return t;
    }
    fail(t.column, std::string("unexpected character '") + c + "'");
  }

  [[noreturn]] void fail(std::size_t column, const std::string& what) const {
    raise(Errc::SyntaxError, "line " + std::to_string(line_no_) + ", col " +
                                 std::to_string(column) + ": " + what);
  }

 private:
  std::string_view line_;
  std::size_t line_no_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Recursive-descent parser for one line

class LineParser {
 public:
  LineParser(std::string_view line, std::size_t line_no)
      : lexer_(line, line_no), line_no_(line_no) {
    advance();
  }

  std::optional<Binding> binding() {
    if (cur_.kind == Token::Kind::End) return std::nullopt;  // blank or comment line
    if (cur_.kind != Token::Kind::Ident) fail("expected output name");
    Binding b;
    b.name = cur_.text;
    advance();
    if (cur_.kind != Token::Kind::Equals) fail("expected '=' after output name");
    advance();
    b.expr = expression();
    if (cur_.kind != Token::Kind::End) fail("unexpected trailing input");
    return b;
  }

 private:
  ExprPtr expression() {
    ExprPtr lhs = term();
    while (cur_.kind == Token::Kind::Plus || cur_.kind == Token::Kind::Minus) {
      const BinOp op = cur_.kind == Token::Kind::Plus ? BinOp::Add : BinOp::Sub;
      advance();
      lhs = make_binary(op, std::move(lhs), term());
    }
    return lhs;
  }

  ExprPtr term() {
    ExprPtr lhs = factor();
    while (cur_.kind == Token::Kind::Star || cur_.kind == Token::Kind::Slash) {
      const BinOp op = cur_.kind == Token::Kind::Star ? BinOp::Mul : BinOp::Div;
      advance();
      lhs = make_binary(op, std::move(lhs), factor());
    }
    return lhs;
  }

  ExprPtr factor() {
    if (cur_.kind == Token::Kind::Minus) {
      advance();
      return make_unary(UnOp::Neg, factor());
    }
    return primary();
  }

  ExprPtr primary() {
    if (cur_.kind == Token::Kind::Number) {
      ExprPtr e = make_literal(cur_.number);
      advance();
      return e;
    }
    if (cur_.kind == Token::Kind::LParen) {
      advance();
      ExprPtr e = expression();
      expect(Token::Kind::RParen, "expected ')'");
      return e;
    }
    if (cur_.kind == Token::Kind::Ident) {
      const std::string name = cur_.text;
      advance();
      if (cur_.kind != Token::Kind::LParen) return make_column(name);
      advance();
      return call(name);
    }
    fail("expected expression");
  }

  ExprPtr call(const std::string& name) {
    static const std::map<std::string, BinOp> binary_fns = {
        {"min", BinOp::Min}, {"max", BinOp::Max}, {"pow", BinOp::Pow}};
    static const std::map<std::string, UnOp> unary_fns = {
        {"neg", UnOp::Neg}, {"abs", UnOp::Abs}, {"sin", UnOp::Sin}, {"cos", UnOp::Cos},
        {"exp", UnOp::Exp}, {"log", UnOp::Log}, {"sqrt", UnOp::Sqrt}};
    if (auto it = binary_fns.find(name); it != binary_fns.end()) {
      ExprPtr a = expression();
      expect(Token::Kind::Comma, "expected ','");
      ExprPtr b = expression();
      expect(Token::Kind::RParen, "expected ')'");
      return make_binary(it->second, std::move(a), std::move(b));
    }
    if (auto it = unary_fns.find(name); it != unary_fns.end()) {
      ExprPtr a = expression();
      expect(Token::Kind::RParen, "expected ')'");
      return make_unary(it->second, std::move(a));
    }
    fail("unknown function '" + name + "'");
  }

  void expect(Token::Kind kind, const std::string& what) {
    if (cur_.kind != kind) fail(what);
    advance();
  }

  [[noreturn]] void fail(const std::string& what) { lexer_.fail(cur_.column, what); }

  void advance() { cur_ = lexer_.next(); }

  Lexer lexer_;
  std::size_t line_no_;
  Token cur_;
};

// ---------------------------------------------------------------------------
// Evaluation

struct EvalContext {
  const Dataset* theta;
  std::size_t row;
};

[[noreturn]] void numeric_error(const EvalContext& ctx, const std::string& what) {
  raise(Errc::NumericError, "row " + std::to_string(ctx.row) + ": " + what);
}

double eval_expr(const Expr& e, const EvalContext& ctx,
                 const std::vector<std::size_t>& column_slots, std::size_t& slot_cursor);

// Column references are resolved to indices once per program (in binding
// order) before any row is touched; eval walks them with a cursor in the
// same order.
void collect_columns(const Expr& e, std::vector<const std::string*>& out) {
  switch (e.kind) {
    case Expr::Kind::Column: out.push_back(&e.column); return;
    case Expr::Kind::Unary: collect_columns(*e.lhs, out); return;
    case Expr::Kind::Binary:
      collect_columns(*e.lhs, out);
      collect_columns(*e.rhs, out);
      return;
    default: return;
  }
}

double eval_expr(const Expr& e, const EvalContext& ctx,
                 const std::vector<std::size_t>& column_slots, std::size_t& slot_cursor) {
  switch (e.kind) {
    case Expr::Kind::Literal:
      return e.literal;
    case Expr::Kind::Column:
      return ctx.theta->at(ctx.row, column_slots[slot_cursor++]);
    case Expr::Kind::Unary: {
      const double a = eval_expr(*e.lhs, ctx, column_slots, slot_cursor);
      double v = 0.0;
      switch (e.un) {
        case UnOp::Neg: v = -a; break;
        case UnOp::Abs: v = std::abs(a); break;
        case UnOp::Sin: v = std::sin(a); break;
        case UnOp::Cos: v = std::cos(a); break;
        case UnOp::Exp: v = std::exp(a); break;
        case UnOp::Log:
          if (a <= 0.0) numeric_error(ctx, "log of non-positive value");
          v = std::log(a);
          break;
        case UnOp::Sqrt:
          if (a < 0.0) numeric_error(ctx, "sqrt of negative value");
          v = std::sqrt(a);
          break;
      }
      if (!std::isfinite(v))
        numeric_error(ctx, std::string(un_name(e.un)) + " produced a non-finite value");
      return v;
    }
    case Expr::Kind::Binary: {
      const double a = eval_expr(*e.lhs, ctx, column_slots, slot_cursor);
      const double b = eval_expr(*e.rhs, ctx, column_slots, slot_cursor);
      double v = 0.0;
      switch (e.bin) {
        case BinOp::Add: v = a + b; break;
        case BinOp::Sub: v = a - b; break;
        case BinOp::Mul: v = a * b; break;
        case BinOp::Div:
          if (b == 0.0) numeric_error(ctx, "division by zero");
          v = a / b;
          break;
        case BinOp::Min: v = std::min(a, b); break;
        case BinOp::Max: v = std::max(a, b); break;
        case BinOp::Pow: v = std::pow(a, b); break;
      }
      if (!std::isfinite(v)) {
        numeric_error(ctx, e.bin == BinOp::Pow ? "pow produced a non-finite value"
                                               : std::string(bin_symbol(e.bin)) +
                                                     " produced a non-finite value");
      }
      return v;
    }
  }
  numeric_error(ctx, "unreachable expression kind");
}

struct ResolvedProgram {
  std::vector<std::string> output_names;
  std::vector<const Expr*> roots;
  // Flattened column indices per binding, in reference order.
  std::vector<std::vector<std::size_t>> column_slots;
};

ResolvedProgram resolve(const Program& program, const InputSpace& theta) {
  ResolvedProgram rp;
  for (const Binding& b : program.bindings()) {
    rp.output_names.push_back(b.name);
    rp.roots.push_back(b.expr.get());
    std::vector<const std::string*> refs;
    collect_columns(*b.expr, refs);
    std::vector<std::size_t> slots;
    slots.reserve(refs.size());
    for (const std::string* name : refs) {
      const std::ptrdiff_t idx = theta.column_index(*name);
      if (idx < 0) raise(Errc::UnknownColumn, "input has no column '" + *name + "'");
      slots.push_back(static_cast<std::size_t>(idx));
    }
    rp.column_slots.push_back(std::move(slots));
  }
  return rp;
}

void eval_row(const ResolvedProgram& rp, const Dataset& theta, std::size_t row,
              double* out) {
  EvalContext ctx{&theta, row};
  for (std::size_t b = 0; b < rp.roots.size(); ++b) {
    std::size_t cursor = 0;
    out[b] = eval_expr(*rp.roots[b], ctx, rp.column_slots[b], cursor);
  }
}

Dataset evaluate_impl(const Program& program, const InputSpace& theta, bool parallel) {
  const ResolvedProgram rp = resolve(program, theta);
  const std::size_t m = theta.rows();
  const std::size_t k = rp.roots.size();
  std::vector<double> cells(m * k);

  if (!parallel) {
    for (std::size_t r = 0; r < m; ++r) eval_row(rp, theta, r, cells.data() + r * k);
    return Dataset(rp.output_names, std::move(cells));
  }

  // Rows are independent; the first failing row (smallest index) wins so the
  // reported error does not depend on scheduling.
  std::size_t error_row = static_cast<std::size_t>(-1);
  std::string error_message;
#pragma omp parallel
  {
    std::size_t local_row = static_cast<std::size_t>(-1);
    std::string local_message;
#pragma omp for schedule(static)
    for (long long r = 0; r < static_cast<long long>(m); ++r) {
      if (local_row != static_cast<std::size_t>(-1)) continue;
      try {
        eval_row(rp, theta, static_cast<std::size_t>(r), cells.data() + r * k);
      } catch (const Error& e) {
        local_row = static_cast<std::size_t>(r);
        local_message = e.what();
      }
    }
#pragma omp critical
    {
      if (local_row < error_row) {
        error_row = local_row;
        error_message = local_message;
      }
    }
  }
  if (error_row != static_cast<std::size_t>(-1)) throw Error(Errc::NumericError, error_message);
  return Dataset(rp.output_names, std::move(cells));
}

}  // namespace

// ---------------------------------------------------------------------------

ExprPtr make_literal(double value) {
  auto e = std::make_unique<Expr>();
  e->kind = Expr::Kind::Literal;
  e->literal = value;
  return e;
}

ExprPtr make_column(std::string name) {
  auto e = std::make_unique<Expr>();
  e->kind = Expr::Kind::Column;
  e->column = std::move(name);
  return e;
}

ExprPtr make_unary(UnOp op, ExprPtr operand) {
  auto e = std::make_unique<Expr>();
  e->kind = Expr::Kind::Unary;
  e->un = op;
  e->lhs = std::move(operand);
  return e;
}

ExprPtr make_binary(BinOp op, ExprPtr lhs, ExprPtr rhs) {
  auto e = std::make_unique<Expr>();
  e->kind = Expr::Kind::Binary;
  e->bin = op;
  e->lhs = std::move(lhs);
  e->rhs = std::move(rhs);
  return e;
}

ExprPtr Expr::clone() const {
  auto e = std::make_unique<Expr>();
  e->kind = kind;
  e->literal = literal;
  e->column = column;
  e->un = un;
  e->bin = bin;
  if (lhs) e->lhs = lhs->clone();
  if (rhs) e->rhs = rhs->clone();
  return e;
}

bool Expr::equals(const Expr& other) const {
  if (kind != other.kind) return false;
  switch (kind) {
    case Kind::Literal: return literal == other.literal;
    case Kind::Column: return column == other.column;
    case Kind::Unary: return un == other.un && lhs->equals(*other.lhs);
    case Kind::Binary:
      return bin == other.bin && lhs->equals(*other.lhs) && rhs->equals(*other.rhs);
  }
  return false;
}

std::string render(const Expr& e) {
  std::string out;
  render_into(e, out);
  return out;
}

Program Program::parse(std::string_view source) {
  std::vector<Binding> bindings;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= source.size()) {
    const std::size_t nl = source.find('\n', start);
    std::string_view line = source.substr(
        start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    if (auto b = LineParser(line, line_no).binding()) bindings.push_back(std::move(*b));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return from_bindings(std::move(bindings));
}

Program Program::from_bindings(std::vector<Binding> bindings) {
  if (bindings.empty()) raise(Errc::SyntaxError, "program has no output bindings");
  std::unordered_set<std::string_view> seen;
  for (const Binding& b : bindings) {
    if (!seen.insert(b.name).second)
      raise(Errc::DuplicateOutput, "output '" + b.name + "' is bound twice");
  }
  Program p;
  p.bindings_ = std::move(bindings);
  for (const Binding& b : p.bindings_) {
    p.source_ += b.name;
    p.source_ += " = ";
    p.source_ += render(*b.expr);
    p.source_ += '\n';
  }
  return p;
}

Dataset Program::evaluate(const InputSpace& theta) const {
  return evaluate_impl(*this, theta, true);
}

bool Program::equals(const Program& other) const {
  if (bindings_.size() != other.bindings_.size()) return false;
  for (std::size_t i = 0; i < bindings_.size(); ++i) {
    if (bindings_[i].name != other.bindings_[i].name) return false;
    if (!bindings_[i].expr->equals(*other.bindings_[i].expr)) return false;
  }
  return true;
}

namespace serial {

Dataset evaluate(const Program& program, const InputSpace& theta) {
  return evaluate_impl(program, theta, false);
}

}  // namespace serial

}  // namespace varsel::dsl

#pragma once

// Arithmetic expressions over t, x1..xn, u1..un, xa1..xan, xb1..xbn with exact
// symbolic differentiation. Trees are immutable and shared.

#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "fracvar/errors.hpp"

namespace fracvar {

enum class VarKind { T, X, U, XA, XB };

struct Variable {
  VarKind kind = VarKind::T;
  std::size_t index = 0;  // 0-based; unused for T

  static Variable t() { return {VarKind::T, 0}; }
  static Variable x(std::size_t i) { return {VarKind::X, i}; }
  static Variable u(std::size_t i) { return {VarKind::U, i}; }
  static Variable xa(std::size_t i) { return {VarKind::XA, i}; }
  static Variable xb(std::size_t i) { return {VarKind::XB, i}; }

  std::string name() const {
    switch (kind) {
      case VarKind::T: return "t";
      case VarKind::X: return "x" + std::to_string(index + 1);
      case VarKind::U: return "u" + std::to_string(index + 1);
      case VarKind::XA: return "xa" + std::to_string(index + 1);
      case VarKind::XB: return "xb" + std::to_string(index + 1);
    }
    return "?";
  }

  friend bool operator==(const Variable& l, const Variable& r) noexcept {
    return l.kind == r.kind && (l.kind == VarKind::T || l.index == r.index);
  }
  friend bool operator<(const Variable& l, const Variable& r) noexcept {
    return std::tie(l.kind, l.index) < std::tie(r.kind, r.index);
  }
};

/// Parses "t", "x3", "xb2", ...; returns nullopt for anything else. Indices
/// are not checked against a dimension here.
inline std::optional<Variable> variable_from_name(std::string_view name) {
  if (name == "t") return Variable::t();
  VarKind kind;
  std::string_view digits;
  if (name.starts_with("xa")) {
    kind = VarKind::XA;
    digits = name.substr(2);
  } else if (name.starts_with("xb")) {
    kind = VarKind::XB;
    digits = name.substr(2);
  } else if (name.starts_with("x")) {
    kind = VarKind::X;
    digits = name.substr(1);
  } else if (name.starts_with("u")) {
    kind = VarKind::U;
    digits = name.substr(1);
  } else {
    return std::nullopt;
  }
  if (digits.empty() || digits.size() > 6 || digits.front() == '0') return std::nullopt;
  std::size_t idx = 0;
  for (char c : digits) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    idx = idx * 10 + static_cast<std::size_t>(c - '0');
  }
  return Variable{kind, idx - 1};
}

enum class Func { Sin, Cos, Exp, Log, Sqrt, Cosh, Sinh, Abs, Sign };

inline const char* func_name(Func f) {
  switch (f) {
    case Func::Sin: return "sin";
    case Func::Cos: return "cos";
    case Func::Exp: return "exp";
    case Func::Log: return "log";
    case Func::Sqrt: return "sqrt";
    case Func::Cosh: return "cosh";
    case Func::Sinh: return "sinh";
    case Func::Abs: return "abs";
    case Func::Sign: return "sign";
  }
  return "?";
}

inline std::optional<Func> func_from_name(std::string_view name) {
  for (Func f : {Func::Sin, Func::Cos, Func::Exp, Func::Log, Func::Sqrt, Func::Cosh, Func::Sinh, Func::Abs,
                 Func::Sign}) {
    if (name == func_name(f)) return f;
  }
  return std::nullopt;
}

/// Variable bindings for evaluation. Empty spans mean "unbound".
struct Env {
  std::optional<double> t;
  std::span<const double> x;
  std::span<const double> u;
  std::span<const double> xa;
  std::span<const double> xb;

  double lookup(const Variable& v) const {
    auto pick = [&](std::span<const double> s) -> double {
      if (v.index >= s.size()) throw EvalError("unbound variable " + v.name());
      return s[v.index];
    };
    switch (v.kind) {
      case VarKind::T:
        if (!t) throw EvalError("unbound variable t");
        return *t;
      case VarKind::X: return pick(x);
      case VarKind::U: return pick(u);
      case VarKind::XA: return pick(xa);
      case VarKind::XB: return pick(xb);
    }
    throw EvalError("unbound variable");
  }
};

class Expr {
 public:
  enum class Op { Const, Var, Neg, Add, Sub, Mul, Div, Pow, Call };

  struct Node {
    Op op = Op::Const;
    double value = 0.0;
    Variable var{};
    Func fn = Func::Sin;
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
  };

  Expr() : Expr(constant(0.0)) {}

  static Expr constant(double c) {
    auto n = std::make_shared<Node>();
    n->op = Op::Const;
    n->value = c;
    return Expr(std::move(n));
  }

  // Folding keeps non-finite results as nodes so evaluation reports them.
  static bool foldable(const Expr& l, const Expr& r, double v) {
    return l.is_constant() && r.is_constant() && std::isfinite(v);
  }

  static Expr variable(const Variable& v) {
    auto n = std::make_shared<Node>();
    n->op = Op::Var;
    n->var = v;
    return Expr(std::move(n));
  }

  static Expr call(Func f, const Expr& arg) {
    if (arg.is_constant() && std::isfinite(apply(f, arg.constant_value()))) return constant(apply(f, arg.constant_value()));
    auto n = std::make_shared<Node>();
    n->op = Op::Call;
    n->fn = f;
    n->lhs = arg.node_;
    return Expr(std::move(n));
  }

  static Expr pow(const Expr& base, const Expr& exponent) {
    if (base.is_constant() && exponent.is_constant() &&
        std::isfinite(std::pow(base.constant_value(), exponent.constant_value()))) {
      return constant(std::pow(base.constant_value(), exponent.constant_value()));
    }
    if (exponent.is_constant(1.0)) return base;
    if (exponent.is_constant(0.0)) return constant(1.0);
    return binary(Op::Pow, base, exponent);
  }

  friend Expr operator-(const Expr& e) {
    if (e.is_constant()) return constant(-e.constant_value());
    auto n = std::make_shared<Node>();
    n->op = Op::Neg;
    n->lhs = e.node_;
    return Expr(std::move(n));
  }

  friend Expr operator+(const Expr& l, const Expr& r) {
    if (foldable(l, r, l.constant_value() + r.constant_value())) return constant(l.constant_value() + r.constant_value());
    if (l.is_constant(0.0)) return r;
    if (r.is_constant(0.0)) return l;
    return binary(Op::Add, l, r);
  }

  friend Expr operator-(const Expr& l, const Expr& r) {
    if (foldable(l, r, l.constant_value() - r.constant_value())) return constant(l.constant_value() - r.constant_value());
    if (r.is_constant(0.0)) return l;
    if (l.is_constant(0.0)) return -r;
    return binary(Op::Sub, l, r);
  }

  friend Expr operator*(const Expr& l, const Expr& r) {
    if (foldable(l, r, l.constant_value() * r.constant_value())) return constant(l.constant_value() * r.constant_value());
    if (l.is_constant(0.0) || r.is_constant(0.0)) return constant(0.0);
    if (l.is_constant(1.0)) return r;
    if (r.is_constant(1.0)) return l;
    return binary(Op::Mul, l, r);
  }

  friend Expr operator/(const Expr& l, const Expr& r) {
    if (r.constant_value() != 0.0 && foldable(l, r, l.constant_value() / r.constant_value())) {
      return constant(l.constant_value() / r.constant_value());
    }
    if (r.is_constant(1.0)) return l;
    if (l.is_constant(0.0) && !r.is_constant(0.0)) return constant(0.0);
    return binary(Op::Div, l, r);
  }

  bool is_constant() const noexcept { return node_->op == Op::Const; }
  bool is_constant(double c) const noexcept { return is_constant() && node_->value == c; }
  double constant_value() const noexcept { return node_->value; }
  const Node& node() const noexcept { return *node_; }

  /// IEEE double evaluation; throws EvalError on a non-finite result,
  /// division by zero, log/sqrt of a negative argument or an unbound variable.
  double evaluate(const Env& env) const { return eval(*node_, env); }

  /// Exact partial derivative with respect to `v`.
  Expr differentiate(const Variable& v) const { return diff(node_, v); }

  /// Fully parenthesised text that parses back to an equivalent tree.
  std::string to_string() const {
    std::string out;
    print(*node_, out);
    return out;
  }

  /// Distinct variables that appear in the tree.
  std::set<Variable> variables() const {
    std::set<Variable> out;
    collect(*node_, out);
    return out;
  }

 private:
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  static Expr binary(Op op, const Expr& l, const Expr& r) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->lhs = l.node_;
    n->rhs = r.node_;
    return Expr(std::move(n));
  }

  static Expr wrap(const std::shared_ptr<const Node>& n) { return Expr(n); }

  static double apply(Func f, double a) {
    switch (f) {
      case Func::Sin: return std::sin(a);
      case Func::Cos: return std::cos(a);
      case Func::Exp: return std::exp(a);
      case Func::Log: return std::log(a);
      case Func::Sqrt: return std::sqrt(a);
      case Func::Cosh: return std::cosh(a);
      case Func::Sinh: return std::sinh(a);
      case Func::Abs: return std::abs(a);
      case Func::Sign: return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0);
    }
    return a;
  }

  static double finite(double v, const char* what) {
    if (!std::isfinite(v)) throw EvalError(std::string("non-finite result in ") + what);
    return v;
  }

  static double eval(const Node& n, const Env& env) {
    switch (n.op) {
      case Op::Const: return n.value;
      case Op::Var: return env.lookup(n.var);
      case Op::Neg: return -eval(*n.lhs, env);
      case Op::Add: return finite(eval(*n.lhs, env) + eval(*n.rhs, env), "+");
      case Op::Sub: return finite(eval(*n.lhs, env) - eval(*n.rhs, env), "-");
      case Op::Mul: return finite(eval(*n.lhs, env) * eval(*n.rhs, env), "*");
      case Op::Div: {
        const double num = eval(*n.lhs, env);
        const double den = eval(*n.rhs, env);
        if (den == 0.0) throw EvalError("division by zero");
        return finite(num / den, "/");
      }
      case Op::Pow: {
        const double base = eval(*n.lhs, env);
        const double ex = eval(*n.rhs, env);
        if (base < 0.0 && ex != std::floor(ex)) throw EvalError("negative base with non-integer exponent");
        if (base == 0.0 && ex < 0.0) throw EvalError("division by zero in ^");
        return finite(std::pow(base, ex), "^");
      }
      case Op::Call: {
        const double a = eval(*n.lhs, env);
        if (n.fn == Func::Log && a <= 0.0) throw EvalError("log of non-positive argument");
        if (n.fn == Func::Sqrt && a < 0.0) throw EvalError("sqrt of negative argument");
        return finite(apply(n.fn, a), func_name(n.fn));
      }
    }
    throw EvalError("corrupt expression node");
  }

  static Expr diff(const std::shared_ptr<const Node>& np, const Variable& v) {
    const Node& n = *np;
    switch (n.op) {
      case Op::Const: return constant(0.0);
      case Op::Var: return constant(n.var == v ? 1.0 : 0.0);
      case Op::Neg: return -diff(n.lhs, v);
      case Op::Add: return diff(n.lhs, v) + diff(n.rhs, v);
      case Op::Sub: return diff(n.lhs, v) - diff(n.rhs, v);
      case Op::Mul: {
        const Expr f = wrap(n.lhs), g = wrap(n.rhs);
        return diff(n.lhs, v) * g + f * diff(n.rhs, v);
      }
      case Op::Div: {
        const Expr f = wrap(n.lhs), g = wrap(n.rhs);
        return (diff(n.lhs, v) * g - f * diff(n.rhs, v)) / pow(g, constant(2.0));
      }
      case Op::Pow: {
        const Expr f = wrap(n.lhs), g = wrap(n.rhs);
        const Expr dg = diff(n.rhs, v);
        if (dg.is_constant(0.0)) return g * pow(f, g - constant(1.0)) * diff(n.lhs, v);
        // d(f^g) = f^g (g' log f + g f' / f)
        return pow(f, g) * (dg * call(Func::Log, f) + g * diff(n.lhs, v) / f);
      }
      case Op::Call: {
        const Expr a = wrap(n.lhs);
        const Expr da = diff(n.lhs, v);
        if (da.is_constant(0.0)) return constant(0.0);
        switch (n.fn) {
          case Func::Sin: return call(Func::Cos, a) * da;
          case Func::Cos: return -call(Func::Sin, a) * da;
          case Func::Exp: return call(Func::Exp, a) * da;
          case Func::Log: return da / a;
          case Func::Sqrt: return da / (constant(2.0) * call(Func::Sqrt, a));
          case Func::Cosh: return call(Func::Sinh, a) * da;
          case Func::Sinh: return call(Func::Cosh, a) * da;
          case Func::Abs: return call(Func::Sign, a) * da;
          case Func::Sign: return constant(0.0);
        }
      }
    }
    throw EvalError("corrupt expression node");
  }

  static void print(const Node& n, std::string& out) {
    switch (n.op) {
      case Op::Const: {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", n.value);
        if (n.value < 0.0) {
          out += '(';
          out += buf;
          out += ')';
        } else {
          out += buf;
        }
        return;
      }
      case Op::Var: out += n.var.name(); return;
      case Op::Neg:
        out += "(-";
        print(*n.lhs, out);
        out += ')';
        return;
      case Op::Call:
        out += func_name(n.fn);
        out += '(';
        print(*n.lhs, out);
        out += ')';
        return;
      default: break;
    }
    const char* sym = n.op == Op::Add ? " + " : n.op == Op::Sub ? " - " : n.op == Op::Mul ? " * " : n.op == Op::Div ? " / " : " ^ ";
    out += '(';
    print(*n.lhs, out);
    out += sym;
    print(*n.rhs, out);
    out += ')';
  }

  static void collect(const Node& n, std::set<Variable>& out) {
    if (n.op == Op::Var) out.insert(n.var);
    if (n.lhs) collect(*n.lhs, out);
    if (n.rhs) collect(*n.rhs, out);
  }

  std::shared_ptr<const Node> node_;
};

inline Expr pow(const Expr& b, const Expr& e) { return Expr::pow(b, e); }

namespace detail {

class ExprParser {
 public:
  ExprParser(std::string_view src, std::size_t dim) : src_(src), dim_(dim) {}

  Expr run() {
    skip_ws();
    if (pos_ >= src_.size()) throw ParseError("empty expression", pos_);
    Expr e = parse_sum();
    skip_ws();
    if (pos_ < src_.size()) throw ParseError(std::string("unexpected '") + src_[pos_] + "'", pos_);
    return e;
  }

 private:
  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr parse_sum() {
    Expr lhs = parse_product();
    for (;;) {
      if (accept('+')) {
        lhs = lhs + parse_product();
      } else if (accept('-')) {
        lhs = lhs - parse_product();
      } else {
        return lhs;
      }
    }
  }

  Expr parse_product() {
    Expr lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = lhs * parse_unary();
      } else if (accept('/')) {
        lhs = lhs / parse_unary();
      } else {
        return lhs;
      }
    }
  }

  Expr parse_unary() {
    if (accept('-')) return -parse_unary();
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  // ^ binds tighter than unary minus and is right-associative.
  Expr parse_power() {
    Expr base = parse_primary();
    if (accept('^')) return pow(base, parse_unary());
    return base;
  }

  Expr parse_primary() {
    skip_ws();
    if (pos_ >= src_.size()) throw ParseError("unexpected end of expression", pos_);
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      Expr inner = parse_sum();
      if (!accept(')')) throw ParseError("expected ')'", pos_);
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    throw ParseError(std::string("unexpected '") + c + "'", pos_);
  }

  Expr parse_number() {
    const std::size_t start = pos_;
    const std::string rest(src_.substr(pos_));
    char* end = nullptr;
    const double v = std::strtod(rest.c_str(), &end);
    if (end == rest.c_str()) throw ParseError("malformed number", start);
    pos_ += static_cast<std::size_t>(end - rest.c_str());
    if (!std::isfinite(v)) throw ParseError("number out of range", start);
    return Expr::constant(v);
  }

  Expr parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
      ++pos_;
    }
    const std::string_view name = src_.substr(start, pos_ - start);
    if (auto f = func_from_name(name)) {
      if (!accept('(')) throw ParseError("expected '(' after " + std::string(name), pos_);
      Expr arg = parse_sum();
      if (!accept(')')) throw ParseError("expected ')'", pos_);
      return Expr::call(*f, arg);
    }
    if (auto v = variable_from_name(name)) {
      if (v->kind != VarKind::T && v->index >= dim_) {
        throw ParseError("variable " + std::string(name) + " exceeds dimension " + std::to_string(dim_), start);
      }
      return Expr::variable(*v);
    }
    throw ParseError("unknown identifier '" + std::string(name) + "'", start);
  }

  std::string_view src_;
  std::size_t dim_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses `source` with precedence ^ > unary minus > * / > + -.
inline Expr parse_expr(std::string_view source, std::size_t dim) {
  return detail::ExprParser(source, dim).run();
}

}  // namespace fracvar

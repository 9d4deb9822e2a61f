#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ibend/error.hpp"

namespace ibend {

enum class Op : std::uint8_t { Var, Const, Add, Sub, Mul, Div, Neg, Pow, Sin, Cos, Exp, Log, Sqrt };

struct ExprNode {
  Op op = Op::Const;
  double value = 0.0;  // Const
  int var = -1;        // Var, 0-based
  long num = 1;        // Pow exponent num/den, den > 0
  long den = 1;
  std::vector<std::shared_ptr<const ExprNode>> args;
};

using NodePtr = std::shared_ptr<const ExprNode>;

/// Immutable expression tree over chart variables x1..xn (stored 0-based).
class Expr {
 public:
  Expr() : Expr(constant(0.0)) {}

  static Expr constant(double c, int dim = 0) {
    auto node = std::make_shared<ExprNode>();
    node->op = Op::Const;
    node->value = c;
    return Expr(std::move(node), dim);
  }

  static Expr variable(int index, int dim) {
    if (index < 0 || index >= dim) throw PreconditionError("variable index out of range");
    auto node = std::make_shared<ExprNode>();
    node->op = Op::Var;
    node->var = index;
    return Expr(std::move(node), dim);
  }

  static Expr make(Op op, std::vector<Expr> children, long num = 1, long den = 1) {
    auto node = std::make_shared<ExprNode>();
    node->op = op;
    node->num = num;
    node->den = den;
    int dim = 0;
    for (auto& c : children) {
      dim = std::max(dim, c.dim());
      node->args.push_back(c.node());
    }
    return Expr(std::move(node), dim);
  }

  Expr(NodePtr node, int dim) : node_(std::move(node)), dim_(dim) {}

  const NodePtr& node() const { return node_; }
  const ExprNode& root() const { return *node_; }
  int dim() const { return dim_; }

  bool is_constant() const { return node_->op == Op::Const; }
  bool is_zero() const { return is_constant() && node_->value == 0.0; }

  std::string to_string() const;
  double eval(std::span<const double> x) const;

  friend Expr operator+(const Expr& a, const Expr& b) { return make(Op::Add, {a, b}); }
  friend Expr operator-(const Expr& a, const Expr& b) { return make(Op::Sub, {a, b}); }
  friend Expr operator*(const Expr& a, const Expr& b) { return make(Op::Mul, {a, b}); }
  friend Expr operator/(const Expr& a, const Expr& b) { return make(Op::Div, {a, b}); }
  friend Expr operator-(const Expr& a) { return make(Op::Neg, {a}); }
  friend Expr operator*(double c, const Expr& b) { return constant(c) * b; }
  friend Expr operator+(const Expr& a, double c) { return a + constant(c); }

 private:
  NodePtr node_;
  int dim_ = 0;
};

inline Expr sin(const Expr& a) { return Expr::make(Op::Sin, {a}); }
inline Expr cos(const Expr& a) { return Expr::make(Op::Cos, {a}); }
inline Expr exp(const Expr& a) { return Expr::make(Op::Exp, {a}); }
inline Expr log(const Expr& a) { return Expr::make(Op::Log, {a}); }
inline Expr sqrt(const Expr& a) { return Expr::make(Op::Sqrt, {a}); }
inline Expr pow(const Expr& a, long num, long den = 1) {
  if (den == 0) throw PreconditionError("pow exponent with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  long g = std::gcd(num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  return Expr::make(Op::Pow, {a}, num, den);
}

/// Sum that skips literal zeros; returns the constant 0 for an empty list.
inline Expr sum_of(const std::vector<Expr>& terms, int dim = 0) {
  std::vector<Expr> kept;
  for (const auto& t : terms)
    if (!t.is_zero()) kept.push_back(t);
  if (kept.empty()) return Expr::constant(0.0, dim);
  if (kept.size() == 1) return kept.front();
  Expr e = Expr::make(Op::Add, kept);
  return Expr(e.node(), std::max(e.dim(), dim));
}

/// Product c*e that folds c == 0 and c == 1.
inline Expr scaled(double c, const Expr& e) {
  if (c == 0.0 || e.is_zero()) return Expr::constant(0.0, e.dim());
  if (c == 1.0) return e;
  return Expr(Expr::make(Op::Mul, {Expr::constant(c), e}).node(), e.dim());
}

namespace detail {

inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline const char* op_name(Op op) {
  switch (op) {
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Div: return "/";
    case Op::Neg: return "neg";
    case Op::Pow: return "pow";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sqrt: return "sqrt";
    default: return "?";
  }
}

inline void write_node(const ExprNode& n, std::string& out) {
  if (n.op == Op::Const) {
    out += format_number(n.value);
    return;
  }
  if (n.op == Op::Var) {
    out += 'x';
    out += std::to_string(n.var + 1);
    return;
  }
  out += '(';
  out += op_name(n.op);
  for (const auto& a : n.args) {
    out += ' ';
    write_node(*a, out);
  }
  if (n.op == Op::Pow) {
    out += ' ';
    out += std::to_string(n.num);
    out += ' ';
    out += std::to_string(n.den);
  }
  out += ')';
}

inline std::string node_string(const ExprNode& n) {
  std::string s;
  write_node(n, s);
  return s;
}

inline std::string short_node_string(const ExprNode& n) {
  std::string s = node_string(n);
  if (s.size() > 120) s = s.substr(0, 117) + "...";
  return s;
}

inline std::string point_string(std::span<const double> x) {
  std::string s = "(";
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i) s += ", ";
    s += format_number(x[i]);
  }
  return s + ")";
}

[[noreturn]] inline void domain_fail(const ExprNode& n, std::span<const double> x, const char* why) {
  throw DomainError(std::string(why) + " in " + short_node_string(n) + " at " + point_string(x));
}

inline double eval_node(const ExprNode& n, std::span<const double> x) {
  switch (n.op) {
    case Op::Const: return n.value;
    case Op::Var: return x[static_cast<std::size_t>(n.var)];
    case Op::Add: {
      double s = 0.0;
      for (const auto& a : n.args) s += eval_node(*a, x);
      return s;
    }
    case Op::Sub: {
      double s = eval_node(*n.args[0], x);
      if (n.args.size() == 1) return -s;
      for (std::size_t i = 1; i < n.args.size(); ++i) s -= eval_node(*n.args[i], x);
      return s;
    }
    case Op::Mul: {
      double s = 1.0;
      for (const auto& a : n.args) s *= eval_node(*a, x);
      return s;
    }
    case Op::Div: {
      double d = eval_node(*n.args[1], x);
      if (d == 0.0) domain_fail(n, x, "division by zero");
      return eval_node(*n.args[0], x) / d;
    }
    case Op::Neg: return -eval_node(*n.args[0], x);
    case Op::Pow: {
      double b = eval_node(*n.args[0], x);
      if (!(b > 0.0)) domain_fail(n, x, "nonpositive base");
      return std::pow(b, static_cast<double>(n.num) / static_cast<double>(n.den));
    }
    case Op::Sin: return std::sin(eval_node(*n.args[0], x));
    case Op::Cos: return std::cos(eval_node(*n.args[0], x));
    case Op::Exp: return std::exp(eval_node(*n.args[0], x));
    case Op::Log: {
      double u = eval_node(*n.args[0], x);
      if (!(u > 0.0)) domain_fail(n, x, "log of nonpositive value");
      return std::log(u);
    }
    case Op::Sqrt: {
      double u = eval_node(*n.args[0], x);
      if (!(u >= 0.0)) domain_fail(n, x, "sqrt of negative value");
      return std::sqrt(u);
    }
  }
  return 0.0;
}

}  // namespace detail

inline std::string Expr::to_string() const { return detail::node_string(*node_); }

inline double Expr::eval(std::span<const double> x) const {
  if (static_cast<int>(x.size()) < dim_) throw PreconditionError("point has fewer coordinates than the expression");
  return detail::eval_node(*node_, x);
}

// ---------------------------------------------------------------- parsing

namespace detail {

class Parser {
 public:
  Parser(std::string_view text, int dim) : s_(text), dim_(dim) {}

  Expr parse_all() {
    Expr e = parse();
    skip_ws();
    if (pos_ != s_.size()) throw ParseError("unexpected trailing input", pos_);
    return e;
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
  int dim_;

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  static bool is_delim(char c) { return c == '(' || c == ')' || std::isspace(static_cast<unsigned char>(c)); }

  std::string_view atom(std::size_t& start) {
    skip_ws();
    start = pos_;
    while (pos_ < s_.size() && !is_delim(s_[pos_])) ++pos_;
    return s_.substr(start, pos_ - start);
  }

  static bool looks_numeric(std::string_view a) {
    if (a.empty()) return false;
    std::size_t i = (a[0] == '-' || a[0] == '+') ? 1 : 0;
    if (i >= a.size()) return false;
    return std::isdigit(static_cast<unsigned char>(a[i])) || a[i] == '.';
  }

  long parse_integer(std::string_view a, std::size_t at) {
    long v = 0;
    std::string_view t = (!a.empty() && a[0] == '+') ? a.substr(1) : a;
    auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size()) throw ParseError("expected integer exponent", at);
    return v;
  }

  Expr parse() {
    skip_ws();
    if (pos_ >= s_.size()) throw ParseError("unexpected end of input", pos_);
    char c = s_[pos_];
    if (c == ')') throw ParseError("unexpected ')'", pos_);
    if (c != '(') {
      std::size_t start = 0;
      std::string_view a = atom(start);
      return parse_atom(a, start);
    }
    std::size_t open = pos_++;
    std::size_t op_at = 0;
    std::string_view op = atom(op_at);
    if (op.empty()) throw ParseError("missing operator", op_at);

    if (op == "pow") {
      Expr base = parse();
      std::size_t p_at = 0, q_at = 0;
      long p = parse_integer(atom(p_at), p_at);
      long q = parse_integer(atom(q_at), q_at);
      if (q == 0) throw ParseError("zero denominator in pow exponent", q_at);
      close(open);
      return with_dim(ibend::pow(base, p, q));
    }

    Op kind;
    std::size_t min_args = 1, max_args = 1;
    if (op == "+") {
      kind = Op::Add, max_args = SIZE_MAX;
    } else if (op == "*") {
      kind = Op::Mul, max_args = SIZE_MAX;
    } else if (op == "-") {
      kind = Op::Sub, max_args = SIZE_MAX;
    } else if (op == "/") {
      kind = Op::Div, min_args = max_args = 2;
    } else if (op == "neg") {
      kind = Op::Neg;
    } else if (op == "sin") {
      kind = Op::Sin;
    } else if (op == "cos") {
      kind = Op::Cos;
    } else if (op == "exp") {
      kind = Op::Exp;
    } else if (op == "log") {
      kind = Op::Log;
    } else if (op == "sqrt") {
      kind = Op::Sqrt;
    } else {
      throw ParseError("unknown operator '" + std::string(op) + "'", op_at);
    }

    std::vector<Expr> args;
    for (;;) {
      skip_ws();
      if (pos_ >= s_.size()) throw ParseError("unbalanced '('", open);
      if (s_[pos_] == ')') break;
      args.push_back(parse());
    }
    if (args.size() < min_args || args.size() > max_args)
      throw ParseError("wrong number of arguments for '" + std::string(op) + "'", op_at);
    ++pos_;
    return with_dim(Expr::make(kind, std::move(args)));
  }

  void close(std::size_t open) {
    skip_ws();
    if (pos_ >= s_.size()) throw ParseError("unbalanced '('", open);
    if (s_[pos_] != ')') throw ParseError("expected ')'", pos_);
    ++pos_;
  }

  Expr with_dim(const Expr& e) const { return Expr(e.node(), dim_); }

  Expr parse_atom(std::string_view a, std::size_t at) {
    if (a.empty()) throw ParseError("empty token", at);
    if (looks_numeric(a)) {
      double v = 0.0;
      std::string_view t = a[0] == '+' ? a.substr(1) : a;
      auto res = std::from_chars(t.data(), t.data() + t.size(), v);
      if (res.ec != std::errc() || res.ptr != t.data() + t.size()) throw ParseError("malformed number", at);
      return Expr::constant(v, dim_);
    }
    if (a[0] == 'x' && a.size() > 1) {
      int k = 0;
      auto res = std::from_chars(a.data() + 1, a.data() + a.size(), k);
      if (res.ec == std::errc() && res.ptr == a.data() + a.size()) {
        if (k < 1 || k > dim_)
          throw ParseError("variable " + std::string(a) + " out of range for chart dimension " + std::to_string(dim_), at);
        return Expr::variable(k - 1, dim_);
      }
    }
    throw ParseError("unknown symbol '" + std::string(a) + "'", at);
  }
};

}  // namespace detail

/// Parse `expr := number | xK | (op expr...)` with ops + - * / neg pow sin cos exp log sqrt.
inline Expr parse_expression(std::string_view text, int dim) {
  return detail::Parser(text, dim).parse_all();
}

}  // namespace ibend

#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "ibend/error.hpp"
#include "ibend/expression.hpp"

namespace ibend {

/// Value and partial derivatives up to order 3 of a scalar function of n variables.
/// hess and third are stored in full and kept exactly symmetric.
struct Jet3 {
  int n = 0;
  int order = 0;
  double value = 0.0;
  std::vector<double> grad, hess, third;

  Jet3() = default;
  Jet3(int dim, int ord) : n(dim), order(ord) {
    if (ord >= 1) grad.assign(static_cast<std::size_t>(n), 0.0);
    if (ord >= 2) hess.assign(static_cast<std::size_t>(n * n), 0.0);
    if (ord >= 3) third.assign(static_cast<std::size_t>(n * n * n), 0.0);
  }

  double d(int i) const { return grad[static_cast<std::size_t>(i)]; }
  double d(int i, int j) const { return hess[static_cast<std::size_t>(i * n + j)]; }
  double d(int i, int j, int k) const { return third[static_cast<std::size_t>((i * n + j) * n + k)]; }

  void set2(int i, int j, double v) {
    hess[static_cast<std::size_t>(i * n + j)] = v;
    hess[static_cast<std::size_t>(j * n + i)] = v;
  }
  void set3(int i, int j, int k, double v) {
    auto at = [&](int a, int b, int c) -> double& { return third[static_cast<std::size_t>((a * n + b) * n + c)]; };
    at(i, j, k) = at(i, k, j) = at(j, i, k) = at(j, k, i) = at(k, i, j) = at(k, j, i) = v;
  }
};

namespace detail {

inline Jet3 jet_add(const Jet3& a, const Jet3& b, double sign) {
  Jet3 r = a;
  r.value += sign * b.value;
  for (std::size_t i = 0; i < r.grad.size(); ++i) r.grad[i] += sign * b.grad[i];
  for (std::size_t i = 0; i < r.hess.size(); ++i) r.hess[i] += sign * b.hess[i];
  for (std::size_t i = 0; i < r.third.size(); ++i) r.third[i] += sign * b.third[i];
  return r;
}

inline Jet3 jet_scale(const Jet3& a, double c) {
  Jet3 r = a;
  r.value *= c;
  for (auto& v : r.grad) v *= c;
  for (auto& v : r.hess) v *= c;
  for (auto& v : r.third) v *= c;
  return r;
}

inline Jet3 jet_mul(const Jet3& a, const Jet3& b) {
  const int n = a.n, ord = a.order;
  Jet3 r(n, ord);
  r.value = a.value * b.value;
  if (ord >= 1)
    for (int i = 0; i < n; ++i) r.grad[i] = a.d(i) * b.value + a.value * b.d(i);
  if (ord >= 2)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j)
        r.set2(i, j, a.d(i, j) * b.value + a.d(i) * b.d(j) + a.d(j) * b.d(i) + a.value * b.d(i, j));
  if (ord >= 3)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j)
        for (int k = j; k < n; ++k)
          r.set3(i, j, k,
                 a.d(i, j, k) * b.value + a.d(i, j) * b.d(k) + a.d(i, k) * b.d(j) + a.d(j, k) * b.d(i) +
                     a.d(i) * b.d(j, k) + a.d(j) * b.d(i, k) + a.d(k) * b.d(i, j) + a.value * b.d(i, j, k));
  return r;
}

/// phi(u) given phi and its first three derivatives at u.value.
inline Jet3 jet_compose(const Jet3& u, double p0, double p1, double p2, double p3) {
  const int n = u.n, ord = u.order;
  Jet3 r(n, ord);
  r.value = p0;
  if (ord >= 1)
    for (int i = 0; i < n; ++i) r.grad[i] = p1 * u.d(i);
  if (ord >= 2)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) r.set2(i, j, p2 * u.d(i) * u.d(j) + p1 * u.d(i, j));
  if (ord >= 3)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j)
        for (int k = j; k < n; ++k)
          r.set3(i, j, k,
                 p3 * u.d(i) * u.d(j) * u.d(k) +
                     p2 * (u.d(i, j) * u.d(k) + u.d(i, k) * u.d(j) + u.d(j, k) * u.d(i)) + p1 * u.d(i, j, k));
  return r;
}

inline Jet3 eval_jet_node(const ExprNode& node, std::span<const double> x, int n, int ord) {
  switch (node.op) {
    case Op::Const: {
      Jet3 r(n, ord);
      r.value = node.value;
      return r;
    }
    case Op::Var: {
      Jet3 r(n, ord);
      r.value = x[static_cast<std::size_t>(node.var)];
      if (ord >= 1) r.grad[static_cast<std::size_t>(node.var)] = 1.0;
      return r;
    }
    case Op::Add: {
      Jet3 r = eval_jet_node(*node.args[0], x, n, ord);
      for (std::size_t i = 1; i < node.args.size(); ++i) r = jet_add(r, eval_jet_node(*node.args[i], x, n, ord), 1.0);
      return r;
    }
    case Op::Sub: {
      Jet3 r = eval_jet_node(*node.args[0], x, n, ord);
      if (node.args.size() == 1) return jet_scale(r, -1.0);
      for (std::size_t i = 1; i < node.args.size(); ++i) r = jet_add(r, eval_jet_node(*node.args[i], x, n, ord), -1.0);
      return r;
    }
    case Op::Mul: {
      Jet3 r = eval_jet_node(*node.args[0], x, n, ord);
      for (std::size_t i = 1; i < node.args.size(); ++i) r = jet_mul(r, eval_jet_node(*node.args[i], x, n, ord));
      return r;
    }
    case Op::Div: {
      Jet3 a = eval_jet_node(*node.args[0], x, n, ord);
      Jet3 b = eval_jet_node(*node.args[1], x, n, ord);
      double v = b.value;
      if (v == 0.0) domain_fail(node, x, "division by zero");
      double i1 = 1.0 / v;
      return jet_mul(a, jet_compose(b, i1, -i1 * i1, 2.0 * i1 * i1 * i1, -6.0 * i1 * i1 * i1 * i1));
    }
    case Op::Neg: return jet_scale(eval_jet_node(*node.args[0], x, n, ord), -1.0);
    case Op::Pow: {
      Jet3 u = eval_jet_node(*node.args[0], x, n, ord);
      double b = u.value;
      if (!(b > 0.0)) domain_fail(node, x, "nonpositive base");
      double e = static_cast<double>(node.num) / static_cast<double>(node.den);
      double p0 = std::pow(b, e);
      return jet_compose(u, p0, e * p0 / b, e * (e - 1.0) * p0 / (b * b), e * (e - 1.0) * (e - 2.0) * p0 / (b * b * b));
    }
    case Op::Sin: {
      Jet3 u = eval_jet_node(*node.args[0], x, n, ord);
      double s = std::sin(u.value), c = std::cos(u.value);
      return jet_compose(u, s, c, -s, -c);
    }
    case Op::Cos: {
      Jet3 u = eval_jet_node(*node.args[0], x, n, ord);
      double s = std::sin(u.value), c = std::cos(u.value);
      return jet_compose(u, c, -s, -c, s);
    }
    case Op::Exp: {
      Jet3 u = eval_jet_node(*node.args[0], x, n, ord);
      double e = std::exp(u.value);
      return jet_compose(u, e, e, e, e);
    }
    case Op::Log: {
      Jet3 u = eval_jet_node(*node.args[0], x, n, ord);
      double v = u.value;
      if (!(v > 0.0)) domain_fail(node, x, "log of nonpositive value");
      return jet_compose(u, std::log(v), 1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v));
    }
    case Op::Sqrt: {
      Jet3 u = eval_jet_node(*node.args[0], x, n, ord);
      double v = u.value;
      if (ord == 0) {
        if (!(v >= 0.0)) domain_fail(node, x, "sqrt of negative value");
        Jet3 r(n, 0);
        r.value = std::sqrt(v);
        return r;
      }
      if (!(v > 0.0)) domain_fail(node, x, "sqrt not differentiable at nonpositive value");
      double s = std::sqrt(v);
      return jet_compose(u, s, 0.5 / s, -0.25 / (s * v), 0.375 / (s * v * v));
    }
  }
  return Jet3(n, ord);
}

}  // namespace detail

/// Value and partials up to `order` (0..3) of expr at the point. Derivatives are exact up to rounding.
inline Jet3 eval_jet(const Expr& expr, std::span<const double> at, int order) {
  if (order < 0 || order > 3) throw PreconditionError("jet order must be 0..3");
  if (static_cast<int>(at.size()) < expr.dim()) throw PreconditionError("point has fewer coordinates than the expression");
  return detail::eval_jet_node(expr.root(), at, static_cast<int>(at.size()), order);
}

}  // namespace ibend

#pragma once

#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace ibend {

inline constexpr int kMaxVars = 8;

/// A value together with its first partials in up to kMaxVars chart directions.
struct Dual {
  double v = 0.0;
  std::array<double, kMaxVars> d{};

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT(google-explicit-constructor)

  Dual& operator+=(const Dual& o) {
    v += o.v;
    for (int k = 0; k < kMaxVars; ++k) d[k] += o.d[k];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    for (int k = 0; k < kMaxVars; ++k) d[k] -= o.d[k];
    return *this;
  }
  Dual& operator*=(double c) {
    v *= c;
    for (auto& x : d) x *= c;
    return *this;
  }
};

inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator-(Dual a) { return a *= -1.0; }
inline Dual operator*(Dual a, double c) { return a *= c; }
inline Dual operator*(double c, Dual a) { return a *= c; }
inline Dual operator*(const Dual& a, const Dual& b) {
  Dual r(a.v * b.v);
  for (int k = 0; k < kMaxVars; ++k) r.d[k] = a.d[k] * b.v + a.v * b.d[k];
  return r;
}
inline Dual operator/(const Dual& a, const Dual& b) {
  Dual r(a.v / b.v);
  double ib2 = 1.0 / (b.v * b.v);
  for (int k = 0; k < kMaxVars; ++k) r.d[k] = (a.d[k] * b.v - a.v * b.d[k]) * ib2;
  return r;
}
inline Dual sqrt(const Dual& a) {
  Dual r(std::sqrt(a.v));
  double c = 0.5 / r.v;
  for (int k = 0; k < kMaxVars; ++k) r.d[k] = c * a.d[k];
  return r;
}

using DVec = std::vector<Dual>;

inline DVec dvec_zero(int m) { return DVec(static_cast<std::size_t>(m)); }

inline Dual dot(const DVec& a, const DVec& b, const std::vector<double>& eps) {
  Dual s;
  for (std::size_t i = 0; i < a.size(); ++i) s += eps[i] * (a[i] * b[i]);
  return s;
}

inline void axpy(DVec& y, const Dual& c, const DVec& x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += c * x[i];
}

inline DVec operator+(DVec a, const DVec& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}
inline DVec operator-(DVec a, const DVec& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
  return a;
}
inline DVec operator*(const Dual& c, const DVec& a) {
  DVec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = c * a[i];
  return r;
}

inline Eigen::VectorXd value(const DVec& a) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) r[static_cast<Eigen::Index>(i)] = a[i].v;
  return r;
}

/// Partial derivative of a Dual vector in direction k.
inline Eigen::VectorXd partial(const DVec& a, int k) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) r[static_cast<Eigen::Index>(i)] = a[i].d[k];
  return r;
}

inline DVec constant_dvec(const Eigen::VectorXd& v) {
  DVec r(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) r[static_cast<std::size_t>(i)] = Dual(v[i]);
  return r;
}

}  // namespace ibend

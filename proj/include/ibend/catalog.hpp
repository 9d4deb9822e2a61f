#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ibend/bending.hpp"
#include "ibend/extension.hpp"
#include "ibend/geometry.hpp"
#include "ibend/scene.hpp"

namespace ibend::catalog {

inline const std::vector<std::string>& frame_checks() {
  static const std::vector<std::string> v = {"frame_regularity", "gauss_equation", "codazzi_equation"};
  return v;
}

inline const std::vector<std::string>& bending_checks() {
  static const std::vector<std::string> v = {"bending",         "first_order_isometry",  "b_t_derivative",    "identity_parte",
                                             "identity_der_gauss", "identity_casi_codazzi", "identity_segder_l", "flatness_theta",
                                             "moore_theta"};
  return v;
}

inline const std::vector<std::string>& star_checks() {
  static const std::vector<std::string> v = {"condition_star",        "l_bar_skew",      "flatness_varphi", "varphi_kernel_bound",
                                             "varphi_kernel_alpha_r", "impext_identity", "requisito",       "singular_extension"};
  return v;
}

namespace detail {

inline Expr var(int i, int n) { return Expr::variable(i - 1, n); }
inline Expr num(double c) { return Expr::constant(c); }

inline std::vector<Interval> cube(int n, double lo, double hi) { return std::vector<Interval>(static_cast<std::size_t>(n), {lo, hi}); }

/// (cos x1, sin x1, x2, ..., xn) followed by `pad` zero coordinates.
inline ImmersionChart cylinder_chart(int n, int pad) {
  ImmersionChart c;
  c.n = n;
  c.ambient_dim = n + 1 + pad;
  c.components = {cos(var(1, n)), sin(var(1, n))};
  for (int i = 2; i <= n; ++i) c.components.push_back(var(i, n));
  for (int k = 0; k < pad; ++k) c.components.push_back(Expr::constant(0.0, n));
  c.box = cube(n, -1.0, 1.0);
  return c;
}

/// Planar curve bending a T + h n of the unit circle with h = cos 2x1, a = -sin(2x1)/2.
inline std::vector<Expr> circle_bending(int n, int total) {
  Expr x1 = var(1, n);
  Expr h = cos(num(2.0) * x1);
  Expr a = num(-0.5) * sin(num(2.0) * x1);
  std::vector<Expr> t = {-(a * sin(x1)) + h * cos(x1), a * cos(x1) + h * sin(x1)};
  while (static_cast<int>(t.size()) < total) t.push_back(Expr::constant(0.0, n));
  for (auto& e : t) e = Expr(e.node(), n);
  return t;
}

inline MatrixXd skew(int m, const std::vector<std::tuple<int, int, double>>& entries) {
  MatrixXd d = MatrixXd::Zero(m, m);
  for (auto [i, j, v] : entries) {
    d(i - 1, j - 1) += v;
    d(j - 1, i - 1) -= v;
  }
  return d;
}

inline LambdaSpec normal_lambda(int n) {
  LambdaSpec l;
  for (int i = 0; i < n; ++i) l.z.push_back(Expr::constant(0.0, n));
  l.phi = Expr::constant(1.0, n);
  return l;
}

}  // namespace detail

/// f linear, τ constant.
inline Scene flat_plane(int n = 5, int p = 2) {
  using namespace detail;
  if (n < 1 || p < 1) throw PreconditionError("flat plane needs n >= 1 and p >= 1");
  Scene s;
  s.name = "flat_plane";
  s.description = "Linear n-plane in R^{n+p} with a constant bending field";
  s.chart.n = n;
  s.chart.ambient_dim = n + p;
  for (int i = 1; i <= n; ++i) s.chart.components.push_back(var(i, n));
  for (int k = 0; k < p; ++k) s.chart.components.push_back(Expr::constant(0.0, n));
  s.chart.box = cube(n, -1.0, 1.0);
  const double w[] = {1.0, -2.0, 0.5, 0.25, -1.5, 3.0, 1.0, -0.75};
  for (int a = 0; a < n + p; ++a) s.tau.components.push_back(Expr::constant(w[a % 8], n));
  s.tags = {"trivial"};
  s.expect_pass(frame_checks());
  s.expect_pass(bending_checks());
  s.expect_value("nullity", n);
  s.expect_value("delta_star", n);
  s.expect_value("regular_rank_theta", 0);
  s.expect_value("ruling_nullity", n);
  s.expected["ruling_nullity"].status = "pass";
  if (p >= 2) {
    s.lambda = normal_lambda(n);
    s.expect_flag("isotropic_pair", true);
    s.expect_pass(star_checks());
    s.tags.push_back("condition-star");
  }
  return s;
}

/// Unit-circle cylinder in R^{n+1} with a non-trivial planar curve bending.
inline Scene cylinder_bending(int n = 5) {
  using namespace detail;
  if (n < 3) throw PreconditionError("cylinder scene needs n >= 3");
  Scene s;
  s.name = "cylinder_bending";
  s.description = "Cylinder over the unit circle, bending by a planar curve variation";
  s.chart = cylinder_chart(n, 0);
  s.tau.components = circle_bending(n, n + 1);
  s.splitting = SplittingSpec{VectorXd::Zero(n), VectorXd::Unit(n, 1), 0.5, 1e-3};
  s.tags = {"genuine-candidate"};
  s.expect_pass(frame_checks());
  s.expect_pass(bending_checks());
  s.expect_value("nullity", n - 1);
  s.expect_flag("triviality", false);
  s.expect_value("regular_rank_theta", 1);
  s.expect_value("delta_star", n - 1);
  s.expect_value("ruling_nullity", n - 1);
  s.expected["ruling_nullity"].status = "pass";
  s.expect_value("ruling_delta_star", n - 1);
  s.expected["ruling_delta_star"].status = "pass";
  s.expect_pass({"splitting_riccati"});
  return s;
}

/// The cylinder bending placed in R^{n+2}; condition (*) holds with η the extra direction.
inline Scene cylinder_padded(int n = 5) {
  using namespace detail;
  Scene s;
  s.name = "cylinder_padded";
  s.description = "Cylinder in R^{n+1} inside R^{n+2}, bending tangent to R^{n+1}";
  s.chart = cylinder_chart(n, 1);
  s.tau.components = circle_bending(n, n + 2);
  s.lambda = normal_lambda(n);
  s.tags = {"condition-star"};
  s.expect_pass(frame_checks());
  s.expect_pass(bending_checks());
  s.expect_value("nullity", n - 1);
  s.expect_value("delta_star", n - 1);
  s.expect_flag("isotropic_pair", true);
  s.expect_pass(star_checks());
  s.expect_pass({"condition_star_n1_perp"});
  return s;
}

/// τ = D f + w on a chart; wraps make_trivial_bending.
inline Scene trivial(const std::string& name, const ImmersionChart& chart, const MatrixXd& d, const VectorXd& w) {
  Scene s;
  s.name = name;
  s.chart = chart;
  s.tau = make_trivial_bending(d, w, chart);
  s.trivial = TrivialSpec{d, w};
  s.tags = {"trivial"};
  return s;
}

/// Rotation field restricted to the cylinder in R^{n+1}.
inline Scene cylinder_rotation(int n = 5) {
  using namespace detail;
  ImmersionChart c = cylinder_chart(n, 0);
  MatrixXd d = skew(n + 1, {{1, 3, 1.0}, {2, 4, 0.5}, {1, 2, 0.3}});
  VectorXd w = VectorXd::Zero(n + 1);
  w[0] = 0.1;
  w[3] = 0.2;
  Scene s = trivial("cylinder_rotation", c, d, w);
  s.description = "Restriction of an ambient Killing field to the cylinder";
  s.lambda = normal_lambda(n);
  s.expect_pass(frame_checks());
  s.expect_pass(bending_checks());
  s.expect_flag("triviality", true);
  s.expect_pass({"condition_star", "l_bar_skew", "impext_identity", "requisito", "singular_extension", "trivial_extension"});
  return s;
}

/// Patch of the unit 3-sphere in R^4 with a Killing field; a declared line field is a negative control for rulings.
inline Scene sphere_rotation() {
  using namespace detail;
  const int n = 3;
  ImmersionChart c;
  c.n = n;
  c.ambient_dim = 4;
  Expr x1 = var(1, n), x2 = var(2, n), x3 = var(3, n);
  c.components = {cos(x1) * cos(x2) * cos(x3), cos(x1) * cos(x2) * sin(x3), cos(x1) * sin(x2), sin(x1)};
  c.box = cube(n, -0.6, 0.6);
  MatrixXd d = skew(4, {{1, 2, 0.7}, {1, 4, -0.4}, {2, 3, 0.9}, {3, 4, 0.2}});
  VectorXd w(4);
  w << 0.3, -0.1, 0.0, 0.5;
  Scene s = trivial("sphere_rotation", c, d, w);
  s.description = "Unit 3-sphere patch with the restriction of a rotation field";
  s.distribution = {{Expr::constant(0.0, n), Expr::constant(0.0, n), Expr::constant(1.0, n)}};
  s.expect_pass(frame_checks());
  s.expect_pass(bending_checks());
  s.expect_value("nullity", 0);
  s.expect_flag("triviality", true);
  s.expect_fail({"ruling_declared"});
  return s;
}

/// Padded cylinder with τ = f_*Z + φ(x1) e, Z = x2 ∂1 - x1 ∂2 a rotation Killing field and e the
/// extra ambient direction. Condition (*) has the unique solution η = ±e, ξ = ∓φ'' N.
inline Scene killing_normal(int n = 5) {
  using namespace detail;
  Scene s;
  s.name = "killing_normal";
  s.description = "Killing tangent field plus a normal field orthogonal to the first normal space";
  s.chart = cylinder_chart(n, 1);
  s.chart.box[0] = {0.2, 1.3};
  Expr x1 = var(1, n), x2 = var(2, n);
  KillingSpec k;
  k.z.assign(static_cast<std::size_t>(n), Expr::constant(0.0, n));
  k.z[0] = x2;
  k.z[1] = -x1;
  k.delta.assign(static_cast<std::size_t>(n + 2), Expr::constant(0.0, n));
  k.delta[n + 1] = Expr(exp(num(0.5) * x1).node(), n);
  // f_*Z + δ, with f_1 = (-sin x1, cos x1, 0, ..) and f_i = e_{i+1}
  s.tau.components.assign(static_cast<std::size_t>(n + 2), Expr::constant(0.0, n));
  s.tau.components[0] = Expr((-(x2 * sin(x1))).node(), n);
  s.tau.components[1] = Expr((x2 * cos(x1)).node(), n);
  s.tau.components[2] = Expr((-x1).node(), n);
  s.tau.components[n + 1] = k.delta[n + 1];
  s.killing = k;
  s.lambda = normal_lambda(n);
  s.tags = {"condition-star", "genuine-candidate"};
  s.expect_pass(frame_checks());
  s.expect_pass(bending_checks());
  s.expect_pass({"killing_normal"});
  s.expect_value("nullity", n - 1);
  s.expect_flag("isotropic_pair", true);
  s.expect_pass(star_checks());
  s.expect_pass({"condition_star_n1_perp"});
  return s;
}

/// Graph of two quadratic forms in R^8 (n = 6, p = 2) with a trivial bending.
inline Scene quadric_graph() {
  using namespace detail;
  const int n = 6;
  ImmersionChart c;
  c.n = n;
  c.ambient_dim = n + 2;
  for (int i = 1; i <= n; ++i) c.components.push_back(var(i, n));
  const double a[] = {1.0, 0.8, -0.6, 1.2, 0.5, -0.9};
  const double b[] = {0.4, -1.1, 0.9, 0.3, -0.7, 1.0};
  std::vector<Expr> qa, qb;
  for (int i = 1; i <= n; ++i) {
    qa.push_back(scaled(0.5 * a[i - 1], var(i, n) * var(i, n)));
    qb.push_back(scaled(0.5 * b[i - 1], var(i, n) * var(i, n)));
  }
  qa.push_back(scaled(0.3, var(1, n) * var(2, n)));
  qb.push_back(scaled(0.2, var(3, n) * var(4, n)));
  c.components.push_back(sum_of(qa, n));
  c.components.push_back(sum_of(qb, n));
  c.box = cube(n, -0.4, 0.4);
  MatrixXd d = skew(8, {{1, 7, 1.0}, {2, 8, 0.5}, {1, 2, 0.3}, {7, 8, 0.2}, {3, 5, -0.4}});
  VectorXd w = VectorXd::Zero(8);
  w[6] = 0.5;
  Scene s = trivial("quadric_graph", c, d, w);
  s.description = "Codimension-2 quadric graph with a trivial bending; exercises the theta-hat decomposition";
  s.lambda = normal_lambda(n);
  s.tags.push_back("condition-star");
  s.expect_pass(frame_checks());
  s.expect_pass(bending_checks());
  s.expect_value("nullity", 0);
  s.expect_pass({"flatness_theta_hat", "main_decomposition_theta_hat"});
  s.expect_flag("isotropic_pair", true);
  s.expect_pass(star_checks());
  s.expect_pass({"trivial_extension"});
  return s;
}

/// Cone over a surface in S^3 or H^3 with bending s τ.
inline Scene cone(const std::string& name, const ImmersionChart& base, const BendingField& tau, ConeKind kind, Interval s_range) {
  std::vector<std::vector<double>> pts = {base.center()};
  for (int k = 0; k < (1 << base.n); ++k) {
    std::vector<double> x;
    for (int i = 0; i < base.n; ++i) x.push_back((k >> i) & 1 ? base.box[i].hi : base.box[i].lo);
    pts.push_back(x);
  }
  ConeLift cl = cone_lift(base, tau, kind, s_range, pts);
  Scene s;
  s.name = name;
  s.chart = cl.chart;
  s.tau = cl.tau;
  s.cone = ConeSpec{kind, base.n};
  s.tags = {"cone"};
  if (kind == ConeKind::Hyperbolic) s.tags.push_back("lorentzian");
  return s;
}

/// Cone over the Clifford torus with the lift of a rotation field of S^3.
inline Scene cone_sphere() {
  using namespace detail;
  const int n = 2;
  ImmersionChart base;
  base.n = n;
  base.ambient_dim = 4;
  const double r = 1.0 / std::sqrt(2.0);
  Expr x1 = var(1, n), x2 = var(2, n);
  base.components = {scaled(r, cos(x1)), scaled(r, sin(x1)), scaled(r, cos(x2)), scaled(r, sin(x2))};
  base.box = cube(n, -0.5, 0.5);
  MatrixXd d = skew(4, {{1, 3, 1.0}, {2, 4, 0.5}, {1, 4, 0.25}});
  BendingField tau = make_trivial_bending(d, VectorXd::Zero(4), base);
  Scene s = cone("cone_sphere", base, tau, ConeKind::Spherical, {0.5, 2.5});
  s.description = "Cone over the Clifford torus in S^3 with a lifted Killing field";
  s.trivial = TrivialSpec{d, VectorXd::Zero(4)};
  VectorXd start(3), dir(3);
  start << 0.0, 0.0, 1.0;
  dir << 0.0, 0.0, 1.0;
  s.splitting = SplittingSpec{start, dir, 1.0, 1e-3};
  s.tags.push_back("trivial");
  s.expect_pass(frame_checks());
  s.expect_pass(bending_checks());
  s.expect_value("nullity", 1);
  s.expect_value("delta_star", 1);
  s.expect_flag("triviality", true);
  s.expect_pass({"splitting_riccati", "cone_consistency"});
  return s;
}

/// Cone over an equidistant surface of H^3 in Lorentz space with a Lorentz-skew field.
inline Scene cone_hyperbolic() {
  using namespace detail;
  const int n = 2;
  const double a = 1.25, b = 0.75;
  ImmersionChart base;
  base.n = n;
  base.ambient_dim = 4;
  base.ambient_signature = 1;
  Expr x1 = var(1, n), x2 = var(2, n);
  Expr sh = num(0.5) * (exp(x1) - exp(-x1));
  Expr ch = num(0.5) * (exp(x1) + exp(-x1));
  base.components = {scaled(a, sh * cos(x2)), scaled(a, sh * sin(x2)), Expr::constant(b, n), scaled(a, ch)};
  for (auto& e : base.components) e = Expr(e.node(), n);
  base.box = {{0.3, 1.2}, {-0.8, 0.8}};
  MatrixXd d = MatrixXd::Zero(4, 4);
  d(0, 1) = 0.7, d(1, 0) = -0.7;
  d(1, 2) = 0.3, d(2, 1) = -0.3;
  d(0, 3) = 0.4, d(3, 0) = 0.4;  // boost
  BendingField tau = make_trivial_bending(d, VectorXd::Zero(4), base);
  Scene s = cone("cone_hyperbolic", base, tau, ConeKind::Hyperbolic, {0.6, 2.0});
  s.description = "Cone over a surface in hyperbolic space; Lorentzian ambient and induced metric";
  s.trivial = TrivialSpec{d, VectorXd::Zero(4)};
  s.tags.push_back("trivial");
  s.expect_pass(frame_checks());
  s.expect_pass(bending_checks());
  s.expect_value("nullity", 1);
  s.expect_value("delta_star", 1);
  s.expect_flag("triviality", true);
  s.expect_pass({"cone_consistency"});
  return s;
}

/// Adds amplitude * (x2 e3 + x2^2/2 e1) to the bending field; not a bending for amplitude > 0.
inline Scene negative_control(const Scene& base, double amplitude) {
  using namespace detail;
  if (amplitude < 0.0) throw PreconditionError("corruption amplitude must be nonnegative");
  const int n = base.chart.n;
  if (n < 2 || base.chart.ambient_dim < 3) throw PreconditionError("negative control needs n >= 2 and ambient dimension >= 3");
  Scene s = base;
  s.name = base.name + "_corrupted";
  s.description = "Non-bending perturbation of " + base.name;
  if (amplitude == 0.0) return s;
  Expr x2 = var(2, n);
  s.tau.components[2] = Expr((s.tau.components[2] + scaled(amplitude, x2)).node(), n);
  s.tau.components[0] = Expr((s.tau.components[0] + scaled(0.5 * amplitude, x2 * x2)).node(), n);
  s.trivial.reset();
  s.killing.reset();
  s.lambda.reset();
  s.splitting.reset();
  s.checks.clear();
  s.expected.clear();
  s.tags = {"negative-control"};
  s.expect_pass(frame_checks());
  s.expect_fail({"bending", "first_order_isometry", "identity_parte", "identity_der_gauss", "flatness_theta"});
  s.expect_pass({"identity_segder_l"});
  return s;
}

inline Scene cylinder_negative() { return negative_control(cylinder_bending(), 1e-2); }

struct Entry {
  std::string name;
  std::function<Scene()> build;
};

inline const std::vector<Entry>& entries() {
  static const std::vector<Entry> list = {
      {"flat_plane", [] { return flat_plane(); }},
      {"cylinder_bending", [] { return cylinder_bending(); }},
      {"cylinder_padded", [] { return cylinder_padded(); }},
      {"cylinder_rotation", [] { return cylinder_rotation(); }},
      {"sphere_rotation", [] { return sphere_rotation(); }},
      {"killing_normal", [] { return killing_normal(); }},
      {"quadric_graph", [] { return quadric_graph(); }},
      {"cone_sphere", [] { return cone_sphere(); }},
      {"cone_hyperbolic", [] { return cone_hyperbolic(); }},
      {"cylinder_bending_corrupted", [] { return cylinder_negative(); }},
  };
  return list;
}

inline std::vector<Scene> all() {
  std::vector<Scene> out;
  for (const auto& e : entries()) out.push_back(e.build());
  return out;
}

inline Scene by_name(const std::string& name) {
  for (const auto& e : entries())
    if (e.name == name) return e.build();
  throw PreconditionError("unknown catalog scene '" + name + "'");
}

}  // namespace ibend::catalog

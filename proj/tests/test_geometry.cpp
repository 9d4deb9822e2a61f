#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ibend/catalog.hpp"
#include "ibend/geometry.hpp"
#include "oracles.hpp"

using namespace ibend;
using catalog::detail::var;

namespace {

ImmersionChart sphere_chart(double r) {
  ImmersionChart c;
  c.n = 2;
  c.ambient_dim = 3;
  Expr u = var(1, 2), v = var(2, 2), rr = Expr::constant(r, 2);
  c.components = {rr * cos(u) * cos(v), rr * cos(u) * sin(v), rr * sin(u)};
  c.box = {{-1.0, 1.0}, {-1.0, 1.0}};
  return c;
}

ImmersionChart graph_chart() {
  ImmersionChart c;
  c.n = 3;
  c.ambient_dim = 5;
  Expr x1 = var(1, 3), x2 = var(2, 3), x3 = var(3, 3);
  c.components = {x1, x2, x3, x1 * x1 + x2 * x3, sin(x1 * x2) + exp(Expr::constant(0.5, 3) * x3)};
  c.box = {{-0.8, 0.8}, {-0.8, 0.8}, {-0.8, 0.8}};
  return c;
}

double gaussian_curvature(const PointFrame& fr) {
  double num = 0.0;
  for (int q = 0; q < 2; ++q) num += fr.metric(0, q).v * fr.riem(q, 1, 0, 1);
  return num / fr.metric_value().determinant();
}

}  // namespace

TEST_CASE("flat plane has Euclidean metric and no curvature", "[geometry]") {
  Scene s = catalog::flat_plane(4, 2);
  std::vector<double> x = {0.1, -0.2, 0.3, 0.4};
  PointFrame fr = frame_at(s.chart, x);
  CHECK((fr.metric_value() - MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() == 0.0);
  for (const auto& a : fr.alpha) CHECK(value(a).norm() == 0.0);
  for (double r : fr.riemann) CHECK(r == 0.0);
  CHECK(nullity_at(fr).nu == 4);
  CHECK(nullity_at(fr).n1_dim == 0);
}

TEST_CASE("cylinder second fundamental form matches the closed form", "[geometry]") {
  ImmersionChart c = catalog::detail::cylinder_chart(3, 0);
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> x = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    PointFrame fr = frame_at(c, x);
    VectorXd expect = VectorXd::Zero(4);
    expect[0] = -std::cos(x[0]);
    expect[1] = -std::sin(x[0]);
    CHECK((value(fr.sff(0, 0)) - expect).norm() < 1e-14);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (i + j > 0) CHECK(value(fr.sff(i, j)).norm() < 1e-14);
  }
}

TEST_CASE("metric agrees with finite differences of the chart", "[geometry]") {
  ImmersionChart c = graph_chart();
  std::vector<double> x = {0.2, -0.3, 0.5};
  PointFrame fr = frame_at(c, x);
  std::vector<VectorXd> fi(3, VectorXd(5));
  for (int a = 0; a < 5; ++a) {
    oracle::Fn f = [&](const std::vector<double>& y) { return c.components[a].eval(y); };
    for (int i = 0; i < 3; ++i) fi[i][a] = oracle::fd(f, x, i);
  }
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(oracle::close(fr.metric(i, j).v, fi[i].dot(fi[j]), 1e-9));
}

TEST_CASE("round sphere has curvature one over r squared", "[geometry]") {
  for (double r : {1.0, 2.5}) {
    ImmersionChart c = sphere_chart(r);
    Rng rng(5);
    for (int t = 0; t < 10; ++t) {
      std::vector<double> x = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
      PointFrame fr = frame_at(c, x);
      CHECK(gaussian_curvature(fr) == Catch::Approx(1.0 / (r * r)).epsilon(1e-10));
      CHECK(gauss_residual(fr) < 1e-10);
      CHECK(codazzi_residual(fr) < 1e-10);
    }
  }
}

TEST_CASE("shape operators of cylinder and sphere", "[geometry]") {
  ImmersionChart cyl = catalog::detail::cylinder_chart(4, 0);
  std::vector<double> x = {0.4, 0.1, -0.2, 0.3};
  PointFrame fr = frame_at(cyl, x);
  VectorXd xi = VectorXd::Zero(5);
  xi[0] = -std::cos(x[0]);
  xi[1] = -std::sin(x[0]);
  MatrixXd expect = MatrixXd::Zero(4, 4);
  expect(0, 0) = 1.0;
  CHECK((shape_operator(fr, xi) - expect).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(shape_operator(fr, VectorXd::Zero(5)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((shape_operator(fr, 3.0 * xi) - 3.0 * shape_operator(fr, xi)).cwiseAbs().maxCoeff() < 1e-14);
  VectorXd bad = xi;
  bad[2] = 0.5;
  CHECK_THROWS_AS(shape_operator(fr, bad), PreconditionError);
  CHECK_THROWS_AS(shape_operator(fr, VectorXd::Zero(3)), PreconditionError);

  const double r = 2.0;
  ImmersionChart sph = sphere_chart(r);
  std::vector<double> y = {0.3, -0.5};
  PointFrame fs = frame_at(sph, y);
  VectorXd inward(3);
  for (int a = 0; a < 3; ++a) inward[a] = -sph.components[a].eval(y) / r;
  CHECK((shape_operator(fs, inward) - MatrixXd::Identity(2, 2) / r).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("relative nullity of standard examples", "[geometry]") {
  ImmersionChart cyl = catalog::detail::cylinder_chart(5, 0);
  Rng rng(9);
  int bad = 0;
  for (int t = 0; t < 50; ++t) {
    std::vector<double> x(5);
    for (auto& v : x) v = rng.uniform(-1, 1);
    NullityData nd = nullity_at(frame_at(cyl, x));
    if (nd.nu != 4 || nd.n1_dim != 1) ++bad;
    // Δ is spanned by ∂2..∂5
    if (nd.delta.row(0).norm() > 1e-12) ++bad;
  }
  CHECK(bad == 0);
  CHECK(nullity_at(frame_at(sphere_chart(1.0), std::vector<double>{0.1, 0.2})).nu == 0);
  CHECK(nullity_at(frame_at(graph_chart(), std::vector<double>{0.1, 0.2, 0.3})).nu == 0);
}

TEST_CASE("Gauss and Codazzi hold on a generic graph", "[geometry][property]") {
  ImmersionChart c = graph_chart();
  Rng rng(21);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> x = {rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)};
    PointFrame fr = frame_at(c, x);
    CHECK(gauss_residual(fr) < 1e-9);
    CHECK(codazzi_residual(fr) < 1e-9);
    // normal frame is orthonormal and normal
    MatrixXd nb = fr.normal_basis();
    CHECK((nb.transpose() * nb - MatrixXd::Identity(fr.p, fr.p)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((fr.jacobian.transpose() * nb).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("Lorentzian ambient with a spacelike surface", "[geometry]") {
  ImmersionChart c;
  c.n = 2;
  c.ambient_dim = 3;
  c.ambient_signature = 1;
  Expr u = var(1, 2), v = var(2, 2);
  // hyperbolic plane patch: (sinh u cos v, sinh u sin v, cosh u) via exp
  Expr half = Expr::constant(0.5, 2);
  Expr sh = half * (exp(u) - exp(-u)), ch = half * (exp(u) + exp(-u));
  c.components = {sh * cos(v), sh * sin(v), ch};
  c.box = {{0.5, 1.5}, {-1.0, 1.0}};
  PointFrame fr = frame_at(c, std::vector<double>{1.0, 0.2});
  CHECK(fr.normal_eps[0] == -1.0);
  CHECK(gaussian_curvature(fr) == Catch::Approx(-1.0).epsilon(1e-10));
  CHECK(gauss_residual(fr) < 1e-10);
  c.metric_index = 1;
  CHECK_THROWS_AS(frame_at(c, std::vector<double>{1.0, 0.2}), PreconditionError);
}

TEST_CASE("rank-deficient differentials are rejected", "[geometry]") {
  ImmersionChart c;
  c.n = 2;
  c.ambient_dim = 3;
  Expr x1 = var(1, 2);
  c.components = {x1, x1 * x1, Expr::constant(0.0, 2)};
  c.box = {{-1.0, 1.0}, {-1.0, 1.0}};
  CHECK_THROWS_AS(frame_at(c, std::vector<double>{0.1, 0.1}), PreconditionError);
  try {
    frame_at(c, std::vector<double>{0.1, 0.1});
  } catch (const PreconditionError& e) {
    CHECK(std::string(e.what()).find("rank") != std::string::npos);
  }
  CHECK_THROWS_AS(frame_at(c, std::vector<double>{0.1}), PreconditionError);
  c.ambient_dim = 2;
  CHECK_THROWS_AS(c.validate(), PreconditionError);
}

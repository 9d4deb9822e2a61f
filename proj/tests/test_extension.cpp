#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ibend/catalog.hpp"
#include "ibend/extension.hpp"
#include "ibend/flat_forms.hpp"

using namespace ibend;
using catalog::detail::var;

namespace {

std::vector<double> random_point(const ImmersionChart& c, Rng& rng) {
  std::vector<double> x;
  for (const auto& iv : c.box) x.push_back(iv.lo + (iv.hi - iv.lo) * (0.02 + 0.96 * rng.uniform()));
  return x;
}

struct Pipeline {
  PointFrame fr;
  BendingJet bj;
  StarPoint sp;
  std::optional<LBar> lb;
  std::optional<LambdaJet> lj;
};

Pipeline run(const Scene& s, const std::vector<double>& x) {
  Pipeline p;
  p.fr = frame_at(s.chart, x);
  p.bj = bending_jet_at(p.fr, s.tau);
  p.sp = solve_condition_star_at(p.fr, p.bj);
  if (p.sp.found) {
    p.lb = extend_l_bar(p.fr, p.bj, star_field_at(p.fr, p.bj, p.sp));
    if (s.lambda) p.lj = lambda_at(p.fr, p.bj, *p.lb, s.lambda->z, s.lambda->phi);
  }
  return p;
}

}  // namespace

TEST_CASE("condition (*) solutions", "[extension]") {
  Rng rng(71);
  for (const Scene& s : {catalog::cylinder_padded(5), catalog::killing_normal(5), catalog::flat_plane(4, 2)}) {
    for (int t = 0; t < 5; ++t) {
      Pipeline p = run(s, random_point(s.chart, rng));
      INFO(s.name);
      REQUIRE(p.sp.found);
      CHECK(p.sp.residual < 1e-10);
      CHECK(p.sp.orthogonality < 1e-10);
      CHECK(std::abs(p.sp.mu.norm() - 1.0) < 1e-12);
    }
  }
  // killing_normal: η is the extra ambient direction
  Scene k = catalog::killing_normal(4);
  Pipeline p = run(k, k.chart.center());
  VectorXd eta = value(p.lb->star.eta);
  CHECK(std::abs(std::abs(eta[5]) - 1.0) < 1e-10);

  // a genuine hypersurface bending has β ≠ 0, so there is no unit η with ξ ⟂ η
  Scene cyl = catalog::cylinder_bending(4);
  CHECK_FALSE(run(cyl, cyl.chart.center()).sp.found);
  PointFrame fr = frame_at(cyl.chart, cyl.chart.center());
  BendingJet bj = bending_jet_at(fr, cyl.tau);
  CHECK_THROWS_AS(star_field_at(fr, bj, StarPoint{}), PreconditionError);
}

TEST_CASE("condition (*) requires a Euclidean normal bundle", "[extension]") {
  ImmersionChart c;
  c.n = 2;
  c.ambient_dim = 3;
  c.ambient_signature = 1;
  Expr u = var(1, 2), v = var(2, 2);
  c.components = {u, v, Expr::constant(0.3, 2) * u * v};
  c.box = {{-0.5, 0.5}, {-0.5, 0.5}};
  PointFrame fr = frame_at(c, std::vector<double>{0.1, 0.2});
  BendingField tau{{Expr::constant(1.0, 2), Expr::constant(0.0, 2), Expr::constant(0.0, 2)}};
  CHECK_THROWS_AS(solve_condition_star_at(fr, bending_jet_at(fr, tau)), PreconditionError);
}

TEST_CASE("extended tensor is skew and phi is flat", "[extension]") {
  Rng rng(73);
  for (const Scene& s : {catalog::cylinder_padded(5), catalog::killing_normal(5)}) {
    for (int t = 0; t < 5; ++t) {
      Pipeline p = run(s, random_point(s.chart, rng));
      INFO(s.name);
      REQUIRE(p.lb);
      CHECK(p.lb->skew < 1e-10);
      FormTable phi = build_varphi(p.fr, p.bj, *p.lb);
      CHECK(flatness_residual(phi) < 1e-7);
      RegularElement re = regular_element_search(phi);
      CHECK(re.kernel.cols() >= 5 - 1);
      MatrixXd ker = varphi_tangent_nullity(phi);
      CHECK(varphi_kernel_alpha_r(p.fr, *p.lb, ker) < 1e-7);
      CHECK(ker.row(5).norm() == 0.0);
    }
  }
}

TEST_CASE("impext identity with a normal lambda", "[extension]") {
  Rng rng(79);
  for (const Scene& s : {catalog::cylinder_padded(5), catalog::killing_normal(5), catalog::cylinder_rotation(4)}) {
    for (int t = 0; t < 5; ++t) {
      Pipeline p = run(s, random_point(s.chart, rng));
      INFO(s.name);
      REQUIRE(p.lj);
      ImpextResult r = impext_identity_check(p.fr, p.bj, *p.lb, *p.lj);
      CHECK(r.impext < 1e-7);
      CHECK(r.requisito < 1e-7);
    }
  }
}

TEST_CASE("singular extension is an infinitesimal bending", "[extension]") {
  Rng rng(83);
  Scene s = catalog::killing_normal(5);
  for (int t = 0; t < 5; ++t) {
    Pipeline p = run(s, random_point(s.chart, rng));
    for (double tt : {-0.2, -0.1, 0.0, 0.1, 0.2}) {
      ExtensionSample e = singular_extension_sample(p.fr, p.bj, *p.lj, tt);
      CHECK(e.immersion);
      CHECK(e.tt < 1e-9);
      CHECK(e.mixed < 1e-9);
      CHECK(e.xx < 1e-7);
    }
  }
}

TEST_CASE("trivial extension of a rotation field", "[extension]") {
  Scene s = catalog::cylinder_rotation(4);
  Rng rng(89);
  for (int t = 0; t < 5; ++t) {
    PointFrame fr = frame_at(s.chart, random_point(s.chart, rng));
    BendingJet bj = bending_jet_at(fr, s.tau);
    for (double tt : {-0.2, 0.0, 0.2}) {
      ExtensionSample e = trivial_extension_sample(fr, bj, s.trivial->d, fr.normals[0], tt);
      CHECK(e.tt < 1e-12);
      CHECK(e.mixed < 1e-12);
      CHECK(e.xx < 1e-12);
    }
  }
}

TEST_CASE("relative nullity of the cylinder is ruled", "[extension]") {
  Scene s = catalog::cylinder_bending(5);
  Rng rng(97);
  for (int t = 0; t < 5; ++t) {
    PointFrame fr = frame_at(s.chart, random_point(s.chart, rng));
    BendingJet bj = bending_jet_at(fr, s.tau);
    RulingResult rd = ruling_residuals(fr, kernel_sections(nullity_rows(fr, nullptr), 5));
    RulingResult rs = ruling_residuals(fr, kernel_sections(nullity_rows(fr, &bj), 5));
    CHECK(rd.r == 4);
    CHECK(rs.r == 4);
    CHECK(rd.totally_geodesic < 1e-10);
    CHECK(rd.affine < 1e-10);
    CHECK(rs.totally_geodesic < 1e-10);
  }
  CHECK(ruling_bound(5, 1, false) == 3);
  CHECK(ruling_bound(5, 2, true) == 4);
}

TEST_CASE("a non-ruled line field on the sphere is detected", "[extension]") {
  Scene s = catalog::sphere_rotation();
  PointFrame fr = frame_at(s.chart, std::vector<double>{0.1, 0.2, 0.3});
  std::vector<Dual> sec(3);
  sec[2].v = 1.0;
  RulingResult r = ruling_residuals(fr, {sec});
  CHECK(r.affine > 0.1);
}

TEST_CASE("splitting tensor along a geodesic in the nullity", "[extension]") {
  Scene s = catalog::cylinder_bending(4);
  VectorXd x0 = VectorXd::Zero(4), v = VectorXd::Unit(4, 1);
  SplittingData sd = splitting_tensor_check(s.chart, s.tau, x0, v, 0.5, 1e-3);
  CHECK(sd.nu_star == 3);
  CHECK(sd.riccati < 1e-4);
  CHECK(sd.drift < 1e-8);
  CHECK(sd.principal_angle < 1e-6);

  CHECK_THROWS_AS(splitting_tensor_check(s.chart, s.tau, x0, v, 5.0, 1e-2), PreconditionError);  // leaves the box
  CHECK_THROWS_AS(splitting_tensor_check(s.chart, s.tau, x0, VectorXd::Unit(4, 0), 0.5), PreconditionError);
  VectorXd outside = VectorXd::Constant(4, 2.0);
  CHECK_THROWS_AS(splitting_tensor_check(s.chart, s.tau, outside, v, 0.5), PreconditionError);
  CHECK_THROWS_AS(splitting_tensor_check(s.chart, s.tau, x0, v, 0.0), PreconditionError);
  try {
    splitting_tensor_check(s.chart, s.tau, x0, v, 5.0, 1e-2);
  } catch (const PreconditionError& e) {
    CHECK(std::string(e.what()).find("exits chart") != std::string::npos);
  }
}

TEST_CASE("cone splitting tensor is minus identity over s", "[extension]") {
  for (const Scene& s : {catalog::cone_sphere(), catalog::cone_hyperbolic()}) {
    INFO(s.name);
    Rng rng(101);
    for (int t = 0; t < 5; ++t) {
      auto x = random_point(s.chart, rng);
      PointFrame fr = frame_at(s.chart, x);
      BendingJet bj = bending_jet_at(fr, s.tau);
      MatrixXd pe, kb;
      MatrixXd c = splitting_matrix(fr, bj, VectorXd::Unit(3, 2), &pe, &kb);
      CHECK(kb.cols() == 1);
      double sv = x[2];
      CHECK((c + pe / sv).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("cone lift rejects inconsistent data", "[extension]") {
  ImmersionChart base;
  base.n = 1;
  base.ambient_dim = 2;
  Expr u = var(1, 1);
  base.components = {cos(u), sin(u)};
  base.box = {{-1.0, 1.0}};
  BendingField tau{{-sin(u), cos(u)}};
  std::vector<std::vector<double>> pts = {{0.0}, {0.5}};
  CHECK_NOTHROW(cone_lift(base, tau, ConeKind::Spherical, {0.5, 2.0}, pts));
  CHECK_THROWS_AS(cone_lift(base, tau, ConeKind::Hyperbolic, {0.5, 2.0}, pts), PreconditionError);
  CHECK_THROWS_AS(cone_lift(base, tau, ConeKind::Spherical, {0.0, 2.0}, pts), PreconditionError);

  ImmersionChart big = base;
  big.components = {Expr::constant(2.0, 1) * cos(u), Expr::constant(2.0, 1) * sin(u)};
  CHECK_THROWS_AS(cone_lift(big, tau, ConeKind::Spherical, {0.5, 2.0}, pts), PreconditionError);

  BendingField radial{{cos(u), sin(u)}};
  CHECK_THROWS_AS(cone_lift(base, radial, ConeKind::Spherical, {0.5, 2.0}, pts), PreconditionError);

  ImmersionChart lor = base;
  lor.ambient_signature = 1;
  CHECK_THROWS_AS(cone_lift(lor, tau, ConeKind::Spherical, {0.5, 2.0}, pts), PreconditionError);
}

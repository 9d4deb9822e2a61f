#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ibend/catalog.hpp"
#include "ibend/flat_forms.hpp"
#include "oracles.hpp"

using namespace ibend;

namespace {

FormTable inner_product_form(int n, const VectorXd& direction, const IndefiniteSpace& w) {
  FormTable b = FormTable::zero(n, n, w);
  b.symmetric = true;
  for (int i = 0; i < n; ++i) b.at(i, i) = direction;
  return b;
}

FormTable random_form(int n, int m, const IndefiniteSpace& w, Rng& rng) {
  FormTable b = FormTable::zero(n, m, w);
  for (auto& v : b.values) v = rng.normal_vector(w.dim());
  return b;
}

}  // namespace

TEST_CASE("flatness of elementary forms", "[flat]") {
  IndefiniteSpace e1 = IndefiniteSpace::split(1, 0);
  VectorXd one = VectorXd::Ones(1);
  CHECK(flatness_residual(inner_product_form(2, one, e1)) == 1.0);

  IndefiniteSpace lor = IndefiniteSpace::split(1, 1);
  VectorXd null(2);
  null << 1.0, 1.0;
  CHECK(flatness_residual(inner_product_form(3, null, lor)) == 0.0);

  FormTable rank_one = FormTable::zero(3, 3, IndefiniteSpace::split(2, 0));
  VectorXd a(3), w(2);
  a << 1.0, -2.0, 0.5;
  w << 0.6, 0.8;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) rank_one.at(i, j) = a[i] * a[j] * w;
  CHECK(flatness_residual(rank_one) < 1e-15);
  CHECK(form_nullity(rank_one).cols() == 2);
  CHECK(form_image(rank_one).cols() == 1);
}

TEST_CASE("flatness residual matches the brute-force expansion", "[flat][property]") {
  Rng rng(41);
  for (int t = 0; t < 30; ++t) {
    int n = rng.integer(1, 5), m = rng.integer(1, 5), p = rng.integer(0, 3), q = rng.integer(0, 3);
    if (p + q == 0) p = 1;
    FormTable b = random_form(n, m, IndefiniteSpace::split(p, q), rng);
    CHECK(flatness_residual(b) == Catch::Approx(oracle::brute_flatness(b)).epsilon(1e-14));
  }
}

TEST_CASE("random flat forms are flat and satisfy the Moore containment", "[flat][property]") {
  Rng rng(43);
  int bad = 0;
  for (int t = 0; t < 60; ++t) {
    int p = rng.integer(0, 3), q = rng.integer(0, 3);
    if (p + q == 0) q = 1;
    int n = rng.integer(2, 6), m = rng.integer(2, 6);
    bool sym = t % 2 == 0;
    if (sym) m = n;
    auto rec = oracle::random_flat_form(n, m, p, q, sym, rng);
    if (flatness_residual(rec.form) > 1e-10 || oracle::brute_flatness(rec.form) > 1e-10) ++bad;
    RegularElement re = regular_element_search(rec.form, 32, static_cast<std::uint64_t>(t));
    if (moore_containment_check(rec.form, re) > 1e-8) ++bad;
  }
  CHECK(bad == 0);
}

TEST_CASE("regular element attains the maximal rank", "[flat][property]") {
  Rng rng(47);
  for (int t = 0; t < 20; ++t) {
    FormTable b = random_form(4, 5, IndefiniteSpace::split(2, 1), rng);
    RegularElement re = regular_element_search(b, 16, 3);
    for (int k = 0; k < 20; ++k) CHECK(matrix_rank(b.left_map(rng.normal_vector(4))) <= re.rank);
    CHECK(re.kernel.cols() + re.rank == 5);
    CHECK(re.image.cols() == re.rank);
  }
  FormTable z = FormTable::zero(3, 3, IndefiniteSpace::split(1, 0));
  CHECK(regular_element_search(z).rank == 0);
  CHECK_THROWS_AS(regular_element_search(z, 0), PreconditionError);
}

TEST_CASE("Moore check rejects non-flat forms", "[flat]") {
  FormTable b = inner_product_form(2, VectorXd::Ones(1), IndefiniteSpace::split(1, 0));
  RegularElement re = regular_element_search(b);
  CHECK_THROWS_AS(moore_containment_check(b, re), PreconditionError);
}

TEST_CASE("main decomposition of symmetric flat forms", "[flat][property]") {
  Rng rng(53);
  for (int t = 0; t < 40; ++t) {
    int p = rng.integer(1, 4), q = rng.integer(1, 3);
    int n = p + q + rng.integer(1, 3);
    auto rec = oracle::random_flat_form(n, n, p, q, true, rng, rng.integer(1, std::min(p, q)));
    MainDecomposition md = main_decomposition(rec.form, kDefaultRankTol, 7);
    INFO("p=" << p << " q=" << q << " n=" << n << " ell=" << rec.ell << " reassembly=" << md.reassembly << " iso=" << md.b1_isotropy
              << " flat=" << md.b2_flatness << " nullity=" << md.b2_nullity << "/" << md.nullity_bound);
    REQUIRE_FALSE(md.structure_check_failed);
    CHECK(md.invariants_hold());
    CHECK(md.ell == rec.ell);
    // W1 and W2 are orthogonal and span W
    MatrixXd cross = md.w1.transpose() * rec.form.w.eps.asDiagonal() * md.w2;
    if (cross.size() > 0) CHECK(cross.cwiseAbs().maxCoeff() < 1e-10);
    CHECK(md.w1.cols() + md.w2.cols() == p + q);
  }
}

TEST_CASE("main decomposition preconditions", "[flat]") {
  Rng rng(59);
  auto rec = oracle::random_flat_form(4, 4, 2, 2, true, rng, 1);
  CHECK_THROWS_AS(main_decomposition(rec.form), PreconditionError);  // p + q = n

  FormTable nonflat = inner_product_form(4, VectorXd::Ones(1), IndefiniteSpace::split(1, 0));
  CHECK_THROWS_AS(main_decomposition(nonflat), PreconditionError);

  FormTable zero = FormTable::zero(5, 5, IndefiniteSpace::split(1, 1));
  zero.symmetric = true;
  CHECK_THROWS_AS(main_decomposition(zero), PreconditionError);  // nullity too large

  FormTable asym = random_form(5, 5, IndefiniteSpace::split(1, 1), rng);
  CHECK_THROWS_AS(main_decomposition(asym), PreconditionError);
}

TEST_CASE("theta of a bending is flat and its nullity contains the relative nullity", "[flat]") {
  Scene s = catalog::cylinder_bending(5);
  Rng rng(61);
  for (int t = 0; t < 10; ++t) {
    std::vector<double> x;
    for (const auto& iv : s.chart.box) x.push_back(rng.uniform(iv.lo, iv.hi));
    PointFrame fr = frame_at(s.chart, x);
    BendingJet bj = bending_jet_at(fr, s.tau);
    ThetaData td = build_theta(fr, bj);
    CHECK(flatness_residual(td.theta) < 1e-12);
    CHECK(td.nu_star == 4);
    CHECK(td.delta_star_residual < 1e-12);
    RegularElement re = regular_element_search(td.theta);
    CHECK(re.rank == 1);
    CHECK(moore_containment_check(td.theta, re) < 1e-10);
  }
  Scene neg = catalog::cylinder_negative();
  PointFrame fr = frame_at(neg.chart, neg.chart.center());
  CHECK(flatness_residual(build_theta(fr, bending_jet_at(fr, neg.tau)).theta) > 1e-4);
}

TEST_CASE("theta-hat on the quadric graph decomposes", "[flat]") {
  Scene s = catalog::quadric_graph();
  PointFrame fr = frame_at(s.chart, s.chart.center());
  BendingJet bj = bending_jet_at(fr, s.tau);
  ThetaData th = build_theta_hat(fr, bj, 2);
  CHECK(flatness_residual(th.theta) < 1e-12);
  MainDecomposition md = main_decomposition(th.theta);
  CHECK(md.invariants_hold());
  CHECK(md.ell >= 1);
  CHECK_THROWS_AS(build_theta_hat(fr, bj, 1), PreconditionError);
}

TEST_CASE("isotropic normal pair", "[flat]") {
  Scene s = catalog::cylinder_padded(4);
  PointFrame fr = frame_at(s.chart, s.chart.center());
  ThetaData td = build_theta(fr, bending_jet_at(fr, s.tau));
  auto pr = isotropic_normal_pair(td);
  REQUIRE(pr.has_value());
  CHECK(std::abs(pr->zeta1.norm() - 1.0) < 1e-12);
  CHECK(std::abs(pr->zeta2.norm() - 1.0) < 1e-12);
  CHECK(isotropic_pair_residual(td, *pr) < 1e-10);

  // hypersurface with a non-trivial bending: S(θ)^⊥ has no admissible vector
  Scene cyl = catalog::cylinder_bending(4);
  PointFrame fc = frame_at(cyl.chart, cyl.chart.center());
  CHECK_FALSE(isotropic_normal_pair(build_theta(fc, bending_jet_at(fc, cyl.tau))).has_value());
}

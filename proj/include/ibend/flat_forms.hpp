#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ibend/bending.hpp"
#include "ibend/error.hpp"
#include "ibend/geometry.hpp"
#include "ibend/linalg.hpp"

namespace ibend {

/// R^{p+q} with a diagonal inner product of ±1 entries (order is arbitrary).
struct IndefiniteSpace {
  VectorXd eps;

  static IndefiniteSpace split(int p, int q) {
    IndefiniteSpace w;
    w.eps = VectorXd::Ones(p + q);
    w.eps.tail(q).setConstant(-1.0);
    return w;
  }

  int dim() const { return static_cast<int>(eps.size()); }
  int positive() const { return static_cast<int>((eps.array() > 0.0).count()); }
  int negative() const { return static_cast<int>((eps.array() < 0.0).count()); }
  double inner(const VectorXd& a, const VectorXd& b) const { return (a.array() * eps.array() * b.array()).sum(); }
};

/// Bilinear form V x U -> W given by its values on basis pairs.
struct FormTable {
  int n = 0;  // dim V
  int m = 0;  // dim U
  IndefiniteSpace w;
  std::vector<VectorXd> values;  // [i*m+j]
  bool symmetric = false;

  static FormTable zero(int n, int m, IndefiniteSpace w) {
    FormTable f;
    f.n = n;
    f.m = m;
    f.w = std::move(w);
    f.values.assign(static_cast<std::size_t>(n * m), VectorXd::Zero(f.w.dim()));
    return f;
  }

  const VectorXd& at(int i, int j) const { return values[static_cast<std::size_t>(i * m + j)]; }
  VectorXd& at(int i, int j) { return values[static_cast<std::size_t>(i * m + j)]; }

  VectorXd apply(const VectorXd& x, const VectorXd& y) const {
    VectorXd r = VectorXd::Zero(w.dim());
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) r += x[i] * y[j] * at(i, j);
    return r;
  }

  /// Matrix of B_Y = B(Y, ·): U -> W.
  MatrixXd left_map(const VectorXd& y) const {
    MatrixXd r = MatrixXd::Zero(w.dim(), m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) r.col(j) += y[i] * at(i, j);
    return r;
  }

  /// All values as columns.
  MatrixXd value_matrix() const {
    MatrixXd r(w.dim(), n * m);
    for (int k = 0; k < n * m; ++k) r.col(k) = values[static_cast<std::size_t>(k)];
    return r;
  }

  void check_symmetric(double tol = 0.0) const {
    if (n != m) throw PreconditionError("symmetric form requires V = U");
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if ((at(i, j) - at(j, i)).cwiseAbs().maxCoeff() > tol) throw PreconditionError("form is not symmetric");
  }
};

/// max |<B(X,Z),B(Y,W)> - <B(X,W),B(Y,Z)>| over basis quadruples X,Y in V and Z,W in U.
inline double flatness_residual(const FormTable& b) {
  double worst = 0.0;
  for (int x = 0; x < b.n; ++x)
    for (int y = x + 1; y < b.n; ++y)
      for (int z = 0; z < b.m; ++z)
        for (int w = z + 1; w < b.m; ++w)
          worst = std::max(worst, std::abs(b.w.inner(b.at(x, z), b.at(y, w)) - b.w.inner(b.at(x, w), b.at(y, z))));
  return worst;
}

/// Left nullity {X : B(X,Y) = 0 for all Y} as orthonormal columns.
inline MatrixXd form_nullity(const FormTable& b, double tol = kDefaultRankTol) {
  const int d = b.w.dim();
  MatrixXd s(b.m * d, b.n);
  for (int i = 0; i < b.n; ++i)
    for (int j = 0; j < b.m; ++j) s.block(j * d, i, d, 1) = b.at(i, j);
  return kernel_basis(s, tol);
}

/// Orthonormal basis of S(B) = span of all values.
inline MatrixXd form_image(const FormTable& b, double tol = kDefaultRankTol) { return range_basis(b.value_matrix(), tol); }

struct RegularElement {
  VectorXd y;
  int rank = 0;
  MatrixXd kernel;  // ker B_Y in U, orthonormal columns
  MatrixXd image;   // B_Y(U), orthonormal columns
};

/// Y maximizing rank B_Y over the basis vectors and `trials` random unit vectors; ties go to
/// the candidate whose smallest retained singular value is largest.
inline RegularElement regular_element_search(const FormTable& b, int trials = 64, std::uint64_t seed = 0,
                                             double tol = kDefaultRankTol) {
  if (trials < 1) throw PreconditionError("regular element search needs at least one trial");
  std::vector<VectorXd> cand;
  for (int i = 0; i < b.n; ++i) cand.push_back(VectorXd::Unit(b.n, i));
  Rng rng(seed);
  for (int t = 0; t < trials; ++t) cand.push_back(rng.unit_vector(b.n));

  RegularElement best;
  double best_margin = -1.0;
  for (const auto& y : cand) {
    SvdSplit s = svd_split(b.left_map(y), tol);
    double margin = s.rank > 0 ? s.sigma[s.rank - 1] : 0.0;
    if (s.rank > best.rank || (s.rank == best.rank && margin > best_margin)) {
      best.y = y;
      best.rank = s.rank;
      best.kernel = s.kernel;
      best.image = s.range;
      best_margin = margin;
    }
  }
  return best;
}

/// max distance of B(e_i, k), k in ker B_Y, to B_Y(U) ∩ B_Y(U)^⊥.
inline double moore_containment_check(const FormTable& b, const RegularElement& re, double flat_tol = 1e-8,
                                      double tol = kDefaultRankTol) {
  double flat = flatness_residual(b);
  if (flat > flat_tol) throw PreconditionError("form is not flat (residual " + detail::format_number(flat) + ")");
  MatrixXd rad = radical_of_span(re.image, b.w.eps, tol);
  double worst = 0.0;
  for (int i = 0; i < b.n; ++i)
    for (Eigen::Index c = 0; c < re.kernel.cols(); ++c) {
      VectorXd v = b.apply(VectorXd::Unit(b.n, i), re.kernel.col(c));
      worst = std::max(worst, distance_to_span(v, rad));
    }
  return worst;
}

struct MainDecomposition {
  int ell = 0;
  int p = 0, q = 0;
  MatrixXd isotropic;  // s_1..s_ell (columns)
  MatrixXd partners;   // u_1..u_ell with <u_i,s_j> = δ_ij, <u_i,u_j> = 0
  MatrixXd w1, w2;     // bases of W1 = span(s,u) and W2 = W1^⊥
  FormTable b1, b2;
  bool outside_guarantee = false;  // p >= 6
  bool structure_check_failed = false;
  std::string message;
  int restarts = 0;
  // invariant checks
  double reassembly = 0.0;
  double b1_isotropy = 0.0;
  double b2_flatness = 0.0;
  int b2_nullity = 0;
  int nullity_bound = 0;
  bool b1_nonzero = false;
  double scale = 1.0;  // max(1, max |B(e_i,e_j)|^2); tolerances are relative to it

  bool invariants_hold(double iso_tol = 1e-8, double flat_tol = 1e-7) const {
    return !structure_check_failed && reassembly <= 1e-12 * std::sqrt(scale) && b1_isotropy <= iso_tol * scale &&
           b2_flatness <= flat_tol * scale && b2_nullity >= nullity_bound && b1_nonzero;
  }
};

/// Orthogonal decomposition W = W1 ⊕ W2 adapted to S(B) ∩ S(B)^⊥ for a symmetric flat form.
inline MainDecomposition main_decomposition(const FormTable& b, double tol = kDefaultRankTol, std::uint64_t seed = 0,
                                            int max_restarts = 20) {
  b.check_symmetric();
  MainDecomposition out;
  out.p = b.w.positive();
  out.q = b.w.negative();
  const int n = b.n, p = out.p, q = out.q, d = b.w.dim();
  if (p + q >= n) throw PreconditionError("main decomposition requires p + q < n");
  double flat = flatness_residual(b);
  if (flat > 1e-8) throw PreconditionError("form is not flat (residual " + detail::format_number(flat) + ")");
  int nul = static_cast<int>(form_nullity(b, tol).cols());
  if (nul > n - p - q - 1) throw PreconditionError("nullity " + std::to_string(nul) + " exceeds n - p - q - 1");
  out.outside_guarantee = p >= 6;

  MatrixXd s = radical_of_span(form_image(b, tol), b.w.eps, tol);
  out.ell = static_cast<int>(s.cols());
  out.isotropic = s;
  if (out.ell == 0) {
    out.structure_check_failed = true;
    out.message = "S(B) is nondegenerate although the hypotheses imply this cannot occur";
    return out;
  }
  const int ell = out.ell;
  const VectorXd& eps = b.w.eps;
  MatrixXd a = s.transpose() * eps.asDiagonal();  // rows: <s_j, ·>
  MatrixXd w0 = pseudo_inverse(a, tol);           // d x ell, <w_i, s_j> = δ_ij
  MatrixXd free_dirs = kernel_basis(a, tol);
  Rng rng(seed);
  bool ok = false;
  MatrixXd u;
  for (int attempt = 0; attempt <= max_restarts && !ok; ++attempt) {
    MatrixXd w = w0;
    if (attempt > 0 && free_dirs.cols() > 0)
      for (int i = 0; i < ell; ++i) w.col(i) += free_dirs * rng.normal_vector(free_dirs.cols());
    u = w - 0.5 * s * (w.transpose() * eps.asDiagonal() * w);
    MatrixXd us = u.transpose() * eps.asDiagonal() * s;
    MatrixXd uu = u.transpose() * eps.asDiagonal() * u;
    ok = (us - MatrixXd::Identity(ell, ell)).cwiseAbs().maxCoeff() <= 1e-10 && uu.cwiseAbs().maxCoeff() <= 1e-10;
    out.restarts = attempt;
  }
  if (!ok) throw NumericFailure("could not construct dual isotropic partners");
  out.partners = u;
  out.w1.resize(d, 2 * ell);
  out.w1 << s, u;
  out.w2 = signed_complement(out.w1, eps, tol);

  out.b1 = FormTable::zero(n, n, b.w);
  out.b2 = FormTable::zero(n, n, b.w);
  out.b1.symmetric = out.b2.symmetric = true;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const VectorXd& v = b.at(i, j);
      VectorXd v1 = VectorXd::Zero(d);
      for (int k = 0; k < ell; ++k) v1 += b.w.inner(v, u.col(k)) * s.col(k) + b.w.inner(v, s.col(k)) * u.col(k);
      out.b1.at(i, j) = v1;
      out.b2.at(i, j) = v - v1;
    }

  for (int k = 0; k < n * n; ++k)
    out.reassembly = std::max(out.reassembly, (out.b1.values[k] + out.b2.values[k] - b.values[k]).cwiseAbs().maxCoeff());
  for (int x = 0; x < n * n; ++x)
    for (int y = 0; y < n * n; ++y)
      out.b1_isotropy = std::max(out.b1_isotropy, std::abs(b.w.inner(out.b1.values[x], out.b1.values[y])));
  for (const auto& v : b.values) out.scale = std::max(out.scale, v.squaredNorm());
  out.b2_flatness = flatness_residual(out.b2);
  out.b2_nullity = static_cast<int>(form_nullity(out.b2, tol).cols());
  out.nullity_bound = n - p - q + 2 * ell;
  for (const auto& v : out.b1.values)
    if (v.norm() > tol) out.b1_nonzero = true;
  return out;
}

/// θ or θ̂ at a point with its nullity data.
struct ThetaData {
  FormTable theta;
  MatrixXd delta_star;  // N(θ), orthonormal in chart coordinates
  int nu_star = 0;
  MatrixXd span;  // S(θ) basis
  int radical_dim = 0;
  double delta_star_residual = 0.0;  // max |α(X,·)|, |β(X,·)| over Δ* vectors
};

inline ThetaData finish_theta(FormTable theta, const PointFrame& fr, const BendingJet& bj, double tol) {
  ThetaData out;
  out.theta = std::move(theta);
  out.delta_star = form_nullity(out.theta, tol);
  out.nu_star = static_cast<int>(out.delta_star.cols());
  out.span = form_image(out.theta, tol);
  out.radical_dim = static_cast<int>(radical_of_span(out.span, out.theta.w.eps, tol).cols());
  const int n = fr.n;
  for (Eigen::Index c = 0; c < out.delta_star.cols(); ++c)
    for (int j = 0; j < n; ++j) {
      VectorXd a = VectorXd::Zero(fr.m), bb = VectorXd::Zero(fr.m);
      for (int i = 0; i < n; ++i) {
        a += out.delta_star(i, c) * value(fr.sff(i, j));
        bb += out.delta_star(i, c) * value(bj.bt(i, j));
      }
      out.delta_star_residual = std::max({out.delta_star_residual, a.norm(), bb.norm()});
    }
  return out;
}

/// θ(X,Y) = (α+β, α-β) in N ⊕ N with product <,>_N - <,>_N, in normal-frame coordinates.
inline ThetaData build_theta(const PointFrame& fr, const BendingJet& bj, double tol = kDefaultRankTol) {
  const int n = fr.n, p = fr.p;
  IndefiniteSpace w;
  w.eps.resize(2 * p);
  w.eps << fr.normal_signature(), -fr.normal_signature();
  FormTable t = FormTable::zero(n, n, w);
  t.symmetric = true;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      VectorXd a = fr.normal_coords(value(fr.sff(i, j)));
      VectorXd b = fr.normal_coords(value(bj.bt(i, j)));
      VectorXd v(2 * p);
      v << a + b, a - b;
      t.at(i, j) = v;
    }
  return finish_theta(std::move(t), fr, bj, tol);
}

/// Orthonormal basis of N1 in normal-frame coordinates (requires a Euclidean normal bundle).
inline MatrixXd first_normal_coords(const PointFrame& fr, double tol = kDefaultRankTol) {
  MatrixXd cols(fr.p, fr.n * fr.n);
  for (int k = 0; k < fr.n * fr.n; ++k) cols.col(k) = fr.normal_coords(value(fr.alpha[k]));
  return range_basis(cols, tol);
}

/// θ̂ = (α + β1, α - β1) in N1 ⊕ N1, β1 the N1-component of β.
inline ThetaData build_theta_hat(const PointFrame& fr, const BendingJet& bj, int expected_n1_dim, double tol = kDefaultRankTol) {
  if ((fr.normal_signature().array() < 0.0).any()) throw PreconditionError("theta-hat requires a Euclidean normal bundle");
  MatrixXd n1 = first_normal_coords(fr, tol);
  const int k = static_cast<int>(n1.cols());
  if (k != expected_n1_dim)
    throw PreconditionError("1-regularity violated: dim N1 = " + std::to_string(k) + ", expected " + std::to_string(expected_n1_dim));
  const int n = fr.n;
  FormTable t = FormTable::zero(n, n, IndefiniteSpace::split(k, k));
  t.symmetric = true;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      VectorXd a = n1.transpose() * fr.normal_coords(value(fr.sff(i, j)));
      VectorXd b = n1.transpose() * fr.normal_coords(value(bj.bt(i, j)));
      VectorXd v(2 * k);
      v << a + b, a - b;
      t.at(i, j) = v;
    }
  return finish_theta(std::move(t), fr, bj, tol);
}

struct IsotropicPair {
  VectorXd zeta1, zeta2;  // normal-frame coordinates, unit length
  bool sum_nonzero = false;
};

/// Unit ζ1, ζ2 with (ζ1,ζ2) ⊥ S(θ) under the split product; none when every such vector has a zero component.
inline std::optional<IsotropicPair> isotropic_normal_pair(const ThetaData& td, double tol = kDefaultRankTol) {
  const int d = td.theta.w.dim(), p = d / 2;
  if (td.theta.w.eps.head(p).minCoeff() < 0.0) throw PreconditionError("isotropic pair search requires a Euclidean normal bundle");
  MatrixXd perp = signed_complement(td.span, td.theta.w.eps, tol);
  if (perp.cols() == 0) return std::nullopt;
  MatrixXd gram = signed_gram(perp, td.theta.w.eps);
  auto accept = [&](const VectorXd& v) -> std::optional<IsotropicPair> {
    VectorXd z1 = v.head(p), z2 = v.tail(p);
    double n1 = z1.norm(), n2 = z2.norm();
    if (n1 <= 1e-8 || n2 <= 1e-8 || std::abs(n1 - n2) > 1e-8 * std::max(n1, n2)) return std::nullopt;
    IsotropicPair out{z1 / n1, z2 / n2, false};
    out.sum_nonzero = (out.zeta1 + out.zeta2).norm() > 1e-8;
    return out;
  };
  // every vector of a totally isotropic complement qualifies; prefer a basis vector of it
  MatrixXd null_part = kernel_basis(gram, tol);
  for (Eigen::Index c = 0; c < null_part.cols(); ++c)
    if (auto r = accept(perp * null_part.col(c))) return r;
  if (auto c = isotropic_vector(gram, tol))
    if (auto r = accept(perp * *c)) return r;
  return std::nullopt;
}

/// max |<<θ(X,Y), (ζ1,ζ2)>>| for a candidate pair.
inline double isotropic_pair_residual(const ThetaData& td, const IsotropicPair& pr) {
  VectorXd z(pr.zeta1.size() + pr.zeta2.size());
  z << pr.zeta1, pr.zeta2;
  double worst = 0.0;
  for (const auto& v : td.theta.values) worst = std::max(worst, std::abs(td.theta.w.inner(v, z)));
  return worst;
}

}  // namespace ibend

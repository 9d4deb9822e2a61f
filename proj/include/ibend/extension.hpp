#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ibend/bending.hpp"
#include "ibend/flat_forms.hpp"
#include "ibend/geometry.hpp"
#include "ibend/linalg.hpp"

namespace ibend {

// ------------------------------------------------------------------ condition (*)

/// Pointwise solution of <β(X,Y),η> + <α(X,Y),ξ> = 0 with |η| = 1, <ξ,η> = 0.
/// mu and zeta are normal-frame coordinates of η and ξ.
struct StarPoint {
  bool found = false;
  VectorXd mu, zeta;
  MatrixXd kernel;  // all generators (μ; ζ) of the linear kernel, 2p x k
  double residual = 0.0;
  double orthogonality = 0.0;
};

/// Rows indexed by i <= j, columns (μ_1..μ_p, ζ_1..ζ_p).
inline MatrixXd star_matrix(const std::vector<VectorXd>& alpha_c, const std::vector<VectorXd>& beta_c, int n, int p) {
  MatrixXd k(n * (n + 1) / 2, 2 * p);
  int row = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j, ++row) {
      k.block(row, 0, 1, p) = beta_c[i * n + j].transpose();
      k.block(row, p, 1, p) = alpha_c[i * n + j].transpose();
    }
  return k;
}

/// Solves the joint kernel problem and selects a solution with μ ≠ 0. Selection order:
/// generalized eigenvectors of (ζ-Gram, μ-Gram) in ascending ratio, coordinate axes, then an
/// isotropic direction of the <μ,ζ> form. The <ζ,η> defect is absorbed through the μ = 0 part.
inline StarPoint solve_condition_star_tables(const std::vector<VectorXd>& alpha_c, const std::vector<VectorXd>& beta_c, int n,
                                             int p, const MatrixXd* mu_space = nullptr, double tol = kDefaultRankTol) {
  StarPoint out;
  MatrixXd k = star_matrix(alpha_c, beta_c, n, p);
  MatrixXd cmu = mu_space ? *mu_space : MatrixXd(MatrixXd::Identity(p, p));
  const int r = static_cast<int>(cmu.cols());
  MatrixXd kr(k.rows(), r + p);
  kr << k.leftCols(p) * cmu, k.rightCols(p);
  MatrixXd ker = kernel_basis(kr, tol);
  const int kd = static_cast<int>(ker.cols());
  out.kernel.resize(2 * p, kd);
  if (kd == 0) return out;
  MatrixXd mmu = cmu * ker.topRows(r);
  MatrixXd zz = ker.bottomRows(p);
  out.kernel << mmu, zz;

  Eigen::JacobiSVD<MatrixXd> svd(mmu, Eigen::ComputeFullV);
  const int rank = numerical_rank(svd.singularValues(), tol);
  if (rank == 0) return out;
  MatrixXd cc = svd.matrixV().leftCols(rank);
  MatrixXd zc = svd.matrixV().rightCols(kd - rank);
  MatrixXd mc = mmu * cc, zcc = zz * cc, zzz = zz * zc;

  std::vector<VectorXd> cands;
  MatrixXd gm = mc.transpose() * mc, gz = zcc.transpose() * zcc;
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> ges(gz, gm);
  if (ges.info() == Eigen::Success)
    for (int c = 0; c < rank; ++c) cands.push_back(ges.eigenvectors().col(c));
  for (int c = 0; c < rank; ++c) cands.push_back(VectorXd::Unit(rank, c));
  MatrixXd qc = mc.transpose() * zcc;
  if (auto iso = isotropic_vector(0.5 * (qc + qc.transpose()), tol)) cands.push_back(*iso);

  for (VectorXd c : cands) {
    VectorXd mu = mc * c;
    double nm = mu.norm();
    if (nm < 1e-10) continue;
    c /= nm;
    mu /= nm;
    VectorXd zeta = zcc * c;
    double q = mu.dot(zeta);
    if (std::abs(q) > 1e-13) {
      if (zzz.cols() == 0) continue;
      VectorXd hv = zzz.transpose() * mu;
      double hn = hv.squaredNorm();
      if (hn < 1e-20) continue;
      zeta -= zzz * (q * hv / hn);
    }
    VectorXd v(2 * p);
    v << mu, zeta;
    double res = (k * v).cwiseAbs().maxCoeff();
    double orth = std::abs(mu.dot(zeta));
    if (res <= 1e-9 && orth <= 1e-10) {
      out.found = true;
      out.mu = mu;
      out.zeta = zeta;
      out.residual = res;
      out.orthogonality = orth;
      return out;
    }
  }
  return out;
}

inline void require_euclidean_normal(const PointFrame& fr) {
  if ((fr.normal_signature().array() < 0.0).any()) throw PreconditionError("condition (*) requires a Euclidean normal bundle");
}

inline StarPoint solve_condition_star_at(const PointFrame& fr, const BendingJet& bj, const MatrixXd* mu_space = nullptr,
                                         double tol = kDefaultRankTol) {
  require_euclidean_normal(fr);
  std::vector<VectorXd> ac, bc;
  for (int k = 0; k < fr.n * fr.n; ++k) {
    ac.push_back(fr.normal_coords(value(fr.alpha[k])));
    bc.push_back(fr.normal_coords(value(bj.beta[k])));
  }
  return solve_condition_star_tables(ac, bc, fr.n, fr.p, mu_space, tol);
}

/// η, ξ as first-order fields around the point, from implicit differentiation of the solution.
struct StarField {
  StarPoint point;
  DVec eta, xi;
  double consistency = 0.0;  // |J dv + G_x| of the linearized system
};

inline StarField star_field_at(const PointFrame& fr, const BendingJet& bj, const StarPoint& sp, double tol = kDefaultRankTol) {
  if (!sp.found) throw PreconditionError("condition (*) has no solution at this point");
  const int n = fr.n, p = fr.p, m = fr.m;
  const int rows = n * (n + 1) / 2;
  std::vector<std::vector<Dual>> kd(static_cast<std::size_t>(rows), std::vector<Dual>(static_cast<std::size_t>(2 * p)));
  int row = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j, ++row)
      for (int a = 0; a < p; ++a) {
        kd[row][a] = fr.inner(bj.bt(i, j), fr.normals[a]);
        kd[row][p + a] = fr.inner(fr.sff(i, j), fr.normals[a]);
      }
  VectorXd v(2 * p);
  v << sp.mu, sp.zeta;
  MatrixXd j(rows + 2, 2 * p);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < 2 * p; ++c) j(r, c) = kd[r][c].v;
  j.row(rows) << sp.zeta.transpose(), sp.mu.transpose();
  j.row(rows + 1) << sp.mu.transpose(), VectorXd::Zero(p).transpose();
  MatrixXd jp = pseudo_inverse(j, tol);

  StarField out;
  out.point = sp;
  std::vector<VectorXd> dv(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    VectorXd gx = VectorXd::Zero(rows + 2);
    for (int r = 0; r < rows; ++r) {
      double s = 0.0;
      for (int c = 0; c < 2 * p; ++c) s += kd[r][c].d[k] * v[c];
      gx[r] = s;
    }
    dv[k] = -jp * gx;
    out.consistency = std::max(out.consistency, (j * dv[k] + gx).cwiseAbs().maxCoeff());
  }
  out.eta = dvec_zero(m);
  out.xi = dvec_zero(m);
  for (int a = 0; a < p; ++a) {
    for (int c = 0; c < m; ++c) {
      Dual& e = out.eta[c];
      Dual& x = out.xi[c];
      e.v += sp.mu[a] * fr.normals[a][c].v;
      x.v += sp.zeta[a] * fr.normals[a][c].v;
      for (int k = 0; k < n; ++k) {
        e.d[k] += dv[k][a] * fr.normals[a][c].v + sp.mu[a] * fr.normals[a][c].d[k];
        x.d[k] += dv[k][p + a] * fr.normals[a][c].v + sp.zeta[a] * fr.normals[a][c].d[k];
      }
    }
  }
  return out;
}

// ------------------------------------------------------------------ extended tensor L̄

struct LBar {
  StarField star;
  std::vector<Dual> y;  // Y^i
  DVec lbar_eta;        // L̄η = f_*Y + ξ
  MatrixXd r_basis;     // orthonormal basis of R = η^⊥ in N, ambient columns
  double skew = 0.0;    // max |<L̄X,η> + <f_*X, L̄η>|, |<L̄η,η>|
};

inline LBar extend_l_bar(const PointFrame& fr, const BendingJet& bj, const StarField& sf) {
  const int n = fr.n;
  LBar out;
  out.star = sf;
  out.y.assign(static_cast<std::size_t>(n), Dual());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out.y[i] -= fr.inv_metric(i, j) * fr.inner(bj.L[j], sf.eta);
  out.lbar_eta = sf.xi;
  for (int i = 0; i < n; ++i) axpy(out.lbar_eta, out.y[i], fr.f(i));
  for (int i = 0; i < n; ++i)
    out.skew = std::max(out.skew, std::abs(fr.inner(bj.L[i], sf.eta).v + fr.inner(fr.f(i), out.lbar_eta).v));
  out.skew = std::max(out.skew, std::abs(fr.inner(out.lbar_eta, sf.eta).v));
  MatrixXd comp = kernel_basis(sf.point.mu.transpose());
  out.r_basis = fr.normal_basis() * comp;
  return out;
}

/// (∇~_i L̄)λ = ∂_i(L̄λ) - L̄(∇'_i λ), ∇' the TM ⊕ P part of ∂_i λ.
inline VectorXd lbar_derivative(const PointFrame& fr, const BendingJet& bj, const LBar& lb, const DVec& lam, const DVec& lbar_lam,
                                int i) {
  VectorXd dl = partial(lam, i);
  VectorXd c = fr.tangent_coords(dl);
  double pc = fr.inner(dl, value(lb.star.eta));
  VectorXd r = partial(lbar_lam, i) - pc * value(lb.lbar_eta);
  for (int l = 0; l < fr.n; ++l) r -= c[l] * value(bj.L[l]);
  return r;
}

inline VectorXd r_coords(const PointFrame& fr, const LBar& lb, const VectorXd& v) {
  VectorXd c(lb.r_basis.cols());
  for (Eigen::Index b = 0; b < c.size(); ++b) c[b] = fr.inner(v, lb.r_basis.col(b));
  return c;
}

/// φ(X,λ) over TM x (TM ⊕ P) with basis (∂1..∂n, η), values in R ⊕ R.
inline FormTable build_varphi(const PointFrame& fr, const BendingJet& bj, const LBar& lb) {
  const int n = fr.n, p = fr.p;
  FormTable phi = FormTable::zero(n, n + 1, IndefiniteSpace::split(p - 1, p - 1));
  for (int j = 0; j <= n; ++j) {
    const DVec& lam = j < n ? fr.f(j) : lb.star.eta;
    const DVec& lbl = j < n ? bj.L[j] : lb.lbar_eta;
    for (int i = 0; i < n; ++i) {
      VectorXd a = r_coords(fr, lb, partial(lam, i));
      VectorXd b = r_coords(fr, lb, lbar_derivative(fr, bj, lb, lam, lbl, i));
      VectorXd v(2 * (p - 1));
      v << a + b, a - b;
      phi.at(i, j) = v;
    }
  }
  return phi;
}

/// Tangent vectors Z with φ(X, f_*Z) = 0 for every X, as (n+1)-columns with zero η entry.
inline MatrixXd varphi_tangent_nullity(const FormTable& phi, double tol = kDefaultRankTol) {
  const int n = phi.n, d = phi.w.dim();
  MatrixXd s(n * d, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s.block(i * d, j, d, 1) = phi.at(i, j);
  MatrixXd k = d == 0 ? MatrixXd(MatrixXd::Identity(n, n)) : kernel_basis(s, tol);
  MatrixXd out = MatrixXd::Zero(n + 1, k.cols());
  out.topRows(n) = k;
  return out;
}

/// max over kernel vectors (Z, c) and coordinate X of |α(X,Z)_R|; only the tangent part Z is used.
inline double varphi_kernel_alpha_r(const PointFrame& fr, const LBar& lb, const MatrixXd& kernel) {
  double worst = 0.0;
  const int n = fr.n;
  for (Eigen::Index c = 0; c < kernel.cols(); ++c)
    for (int i = 0; i < n; ++i) {
      VectorXd a = VectorXd::Zero(fr.m);
      for (int j = 0; j < n; ++j) a += kernel(j, c) * value(fr.sff(i, j));
      worst = std::max(worst, r_coords(fr, lb, a).norm());
    }
  return worst;
}

/// λ = f_*Z + φη and L̄λ as first-order fields.
struct LambdaJet {
  DVec lam, lbar_lam;
};

inline LambdaJet lambda_at(const PointFrame& fr, const BendingJet& bj, const LBar& lb, const std::vector<Expr>& z, const Expr& phi) {
  const int n = fr.n;
  if (static_cast<int>(z.size()) != n) throw PreconditionError("lambda needs one Z component per chart variable");
  DVec zd = dual_values(jets_of(z, fr.point, 1));
  Dual ph = dual_values(jets_of({phi}, fr.point, 1))[0];
  LambdaJet out;
  out.lam = ph * lb.star.eta;
  out.lbar_lam = ph * lb.lbar_eta;
  for (int j = 0; j < n; ++j) {
    axpy(out.lam, zd[j], fr.f(j));
    axpy(out.lbar_lam, zd[j], bj.L[j]);
  }
  return out;
}

struct ImpextResult {
  double impext = 0.0;     // max |LHS - RHS| on symmetrized pairs
  double requisito = 0.0;  // max |RHS|
};

inline ImpextResult impext_identity_check(const PointFrame& fr, const BendingJet& bj, const LBar& lb, const LambdaJet& lj) {
  const int n = fr.n;
  std::vector<VectorXd> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n)), ra(static_cast<std::size_t>(n)),
      rb(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    VectorXd dl = partial(lj.lam, i);
    a[i] = value(fr.f(i)) + dl;
    b[i] = value(bj.L[i]) + partial(lj.lbar_lam, i);
    ra[i] = r_coords(fr, lb, dl);
    rb[i] = r_coords(fr, lb, lbar_derivative(fr, bj, lb, lj.lam, lj.lbar_lam, i));
  }
  ImpextResult out;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      double lhs = 0.5 * (fr.inner(a[i], b[j]) + fr.inner(a[j], b[i]));
      double rhs = 0.5 * (ra[i].dot(rb[j]) + ra[j].dot(rb[i]));
      out.impext = std::max(out.impext, std::abs(lhs - rhs));
      out.requisito = std::max(out.requisito, std::abs(rhs));
    }
  return out;
}

// ------------------------------------------------------------------ singular extension

struct ExtensionSample {
  double t = 0.0;
  bool immersion = false;
  double sigma_ratio = 0.0;
  double tt = 0.0, mixed = 0.0, xx = 0.0;
};

/// Bending identities of (F, τ~) at (x, t) from the columns of F_* and of ∇~τ~ over (∂1..∂n, ∂t).
inline ExtensionSample extension_identities(const PointFrame& fr, const std::vector<VectorXd>& fcols,
                                            const std::vector<VectorXd>& tcols, double t, double rank_tol = kDefaultRankTol) {
  const int n = fr.n;
  ExtensionSample s;
  s.t = t;
  MatrixXd jac(fr.m, n + 1);
  for (int a = 0; a <= n; ++a) jac.col(a) = fcols[a];
  Eigen::JacobiSVD<MatrixXd> svd(jac);
  const VectorXd& sv = svd.singularValues();
  s.sigma_ratio = sv[0] > 0.0 ? sv[sv.size() - 1] / sv[0] : 0.0;
  s.immersion = sv.size() == n + 1 && sv[n] > rank_tol * sv[0];
  auto sym = [&](int a, int b) { return fr.inner(fcols[a], tcols[b]) + fr.inner(fcols[b], tcols[a]); };
  s.tt = std::abs(0.5 * sym(n, n));
  for (int i = 0; i < n; ++i) {
    s.mixed = std::max(s.mixed, std::abs(sym(i, n)));
    for (int j = i; j < n; ++j) s.xx = std::max(s.xx, std::abs(sym(i, j)));
  }
  return s;
}

/// F = f + tλ, τ~ = τ + t L̄λ.
inline ExtensionSample singular_extension_sample(const PointFrame& fr, const BendingJet& bj, const LambdaJet& lj, double t,
                                                 double rank_tol = kDefaultRankTol) {
  const int n = fr.n;
  std::vector<VectorXd> fc, tc;
  for (int i = 0; i < n; ++i) {
    fc.push_back(value(fr.f(i)) + t * partial(lj.lam, i));
    tc.push_back(value(bj.L[i]) + t * partial(lj.lbar_lam, i));
  }
  fc.push_back(value(lj.lam));
  tc.push_back(value(lj.lbar_lam));
  return extension_identities(fr, fc, tc, t, rank_tol);
}

/// F = f + tλ, τ~ = τ + t Dλ for a trivial bending τ = D f + w.
inline ExtensionSample trivial_extension_sample(const PointFrame& fr, const BendingJet& bj, const MatrixXd& d, const DVec& lam,
                                                double t, double rank_tol = kDefaultRankTol) {
  const int n = fr.n;
  std::vector<VectorXd> fc, tc;
  for (int i = 0; i < n; ++i) {
    VectorXd dl = partial(lam, i);
    fc.push_back(value(fr.f(i)) + t * dl);
    tc.push_back(value(bj.L[i]) + t * (d * dl));
  }
  fc.push_back(value(lam));
  tc.push_back(d * value(lam));
  return extension_identities(fr, fc, tc, t, rank_tol);
}

// ------------------------------------------------------------------ rulings

struct RulingResult {
  int r = 0;
  double totally_geodesic = 0.0;
  double affine = 0.0;
};

/// Residuals for a distribution spanned by sections S_a (chart coordinates, first-order fields).
inline RulingResult ruling_residuals(const PointFrame& fr, const std::vector<std::vector<Dual>>& sections) {
  const int n = fr.n;
  RulingResult out;
  out.r = static_cast<int>(sections.size());
  if (out.r == 0) return out;
  MatrixXd kv(n, out.r);
  for (int a = 0; a < out.r; ++a)
    for (int i = 0; i < n; ++i) kv(i, a) = sections[a][i].v;
  MatrixXd g = fr.metric_value();
  MatrixXd proj_d = kv * (kv.transpose() * g * kv).inverse() * kv.transpose() * g;
  MatrixXd perp = MatrixXd::Identity(n, n) - proj_d;
  for (int a = 0; a < out.r; ++a)
    for (int b = 0; b < out.r; ++b) {
      VectorXd w = VectorXd::Zero(n);
      for (int l = 0; l < n; ++l)
        for (int i = 0; i < n; ++i) {
          w[l] += kv(i, a) * sections[b][l].d[i];
          for (int j = 0; j < n; ++j) w[l] += fr.christoffel(l, i, j).v * kv(i, a) * kv(j, b);
        }
      double scale = kv.col(a).norm() * kv.col(b).norm();
      out.totally_geodesic = std::max(out.totally_geodesic, (perp * w).norm() / scale);
      VectorXd al = VectorXd::Zero(fr.m);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) al += kv(i, a) * kv(j, b) * value(fr.sff(i, j));
      out.affine = std::max(out.affine, al.norm() / scale);
    }
  return out;
}

/// Sections P(x) b_j spanning the kernel of a Dual matrix with columns indexed by chart directions.
inline std::vector<std::vector<Dual>> kernel_sections(const std::vector<std::vector<Dual>>& rows, int n, double tol = kDefaultRankTol) {
  KernelProjector kp = kernel_projector(rows, n, n, tol);
  std::vector<std::vector<Dual>> out;
  for (Eigen::Index c = 0; c < kp.kernel.cols(); ++c) {
    std::vector<Dual> s(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      s[i].v = kp.kernel(i, c);
      for (int k = 0; k < n; ++k) s[i].d[k] = (kp.dp[k] * kp.kernel.col(c))[i];
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Rows (j, c): α(∂i,∂j)_c, optionally followed by β(∂i,∂j)_c; kernel is Δ (resp. Δ*).
inline std::vector<std::vector<Dual>> nullity_rows(const PointFrame& fr, const BendingJet* bj) {
  const int n = fr.n, m = fr.m;
  std::vector<std::vector<Dual>> rows;
  auto add = [&](const std::vector<DVec>& t) {
    for (int j = 0; j < n; ++j)
      for (int c = 0; c < m; ++c) {
        std::vector<Dual> row(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) row[i] = t[i * n + j][c];
        rows.push_back(std::move(row));
      }
  };
  add(fr.alpha);
  if (bj) add(bj->beta);
  return rows;
}

/// Lower bound on the ruling dimension: n - 2p (bendings), n - 2p + 3 (condition (*) route).
inline int ruling_bound(int n, int p, bool star_route) { return star_route ? n - 2 * p + 3 : n - 2 * p; }

// ------------------------------------------------------------------ splitting tensor

struct MetricData {
  MatrixXd g;
  std::vector<double> gamma;  // Γ^l_ij, [(l*n+i)*n+j]
};

/// Metric and Christoffel symbols from second-order jets.
inline MetricData metric_data_at(const ImmersionChart& chart, std::span<const double> x) {
  const int n = chart.n;
  auto jets = jets_of(chart.components, x, 2);
  auto eps = chart.eps();
  std::vector<VectorXd> fi, fij;
  for (int i = 0; i < n; ++i) {
    VectorXd v(chart.ambient_dim);
    for (int a = 0; a < chart.ambient_dim; ++a) v[a] = jets[a].d(i);
    fi.push_back(v);
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      VectorXd v(chart.ambient_dim);
      for (int a = 0; a < chart.ambient_dim; ++a) v[a] = jets[a].d(i, j);
      fij.push_back(v);
    }
  auto inner = [&](const VectorXd& a, const VectorXd& b) {
    double s = 0.0;
    for (int c = 0; c < chart.ambient_dim; ++c) s += eps[c] * a[c] * b[c];
    return s;
  };
  MetricData md;
  md.g.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) md.g(i, j) = inner(fi[i], fi[j]);
  MatrixXd gi = md.g.inverse();
  md.gamma.assign(static_cast<std::size_t>(n * n * n), 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      VectorXd b(n);
      for (int k = 0; k < n; ++k) b[k] = inner(fij[i * n + j], fi[k]);
      VectorXd gam = gi * b;
      for (int l = 0; l < n; ++l) md.gamma[(l * n + i) * n + j] = gam[l];
    }
  return md;
}

struct SplittingData {
  std::vector<double> t;
  std::vector<VectorXd> gamma;  // geodesic points
  std::vector<MatrixXd> c;      // C_γ' as n x n matrices (zero on Δ*)
  std::vector<MatrixXd> e_proj; // projector onto E along Δ*
  double riccati = 0.0;         // max |DC/dt - C^2| at interior steps
  double principal_angle = 0.0; // max angle between transported Δ*(0) and Δ*(γ(t))
  double drift = 0.0;           // max distance of γ' from Δ*
  int nu_star = 0;
};

/// C_S X = -(∇_X S)_E with S the section P(x) v of Δ*, as a matrix on T_xM.
inline MatrixXd splitting_matrix(const PointFrame& fr, const BendingJet& bj, const VectorXd& v, MatrixXd* e_proj = nullptr,
                                 MatrixXd* kernel = nullptr, double tol = kDefaultRankTol) {
  const int n = fr.n;
  KernelProjector kp = kernel_projector(nullity_rows(fr, &bj), n, n, tol);
  VectorXd s = kp.p * v;
  MatrixXd nabla(n, n);  // column i: ∇_{∂i} S
  for (int i = 0; i < n; ++i) {
    VectorXd col = kp.dp[i] * v;
    for (int l = 0; l < n; ++l)
      for (int k = 0; k < n; ++k) col[l] += fr.christoffel(l, i, k).v * s[k];
    nabla.col(i) = col;
  }
  MatrixXd g = fr.metric_value();
  const MatrixXd& kb = kp.kernel;
  MatrixXd pd = kb.cols() ? MatrixXd(kb * (kb.transpose() * g * kb).inverse() * kb.transpose() * g) : MatrixXd::Zero(n, n);
  MatrixXd pe = MatrixXd::Identity(n, n) - pd;
  if (e_proj) *e_proj = pe;
  if (kernel) *kernel = kb;
  return -pe * nabla * pe;
}

inline SplittingData splitting_tensor_check(const ImmersionChart& chart, const BendingField& tau, const VectorXd& x0,
                                            const VectorXd& v0, double t_max, double h = 1e-3, double tol = kDefaultRankTol) {
  const int n = chart.n;
  if (!(t_max > 0.0)) throw PreconditionError("t_max must be positive");
  std::vector<double> xs(x0.data(), x0.data() + n);
  if (!chart.contains(xs)) throw PreconditionError("geodesic start lies outside the chart");

  auto frame_and_jet = [&](const VectorXd& x) {
    std::vector<double> p(x.data(), x.data() + n);
    PointFrame fr = frame_at(chart, p, tol);
    BendingJet bj = bending_jet_at(fr, tau);
    return std::make_pair(std::move(fr), std::move(bj));
  };

  SplittingData out;
  auto [fr0, bj0] = frame_and_jet(x0);
  MatrixXd k0;
  {
    KernelProjector kp = kernel_projector(nullity_rows(fr0, &bj0), n, n, tol);
    k0 = kp.kernel;
  }
  out.nu_star = static_cast<int>(k0.cols());
  if (out.nu_star == 0) throw PreconditionError("nullity of theta is zero at the start point");
  if (distance_to_span(v0, k0) > 1e-6 * v0.norm()) throw PreconditionError("initial direction is not in the nullity of theta");
  double speed2 = v0.dot(fr0.metric_value() * v0);
  if (std::abs(speed2) < 1e-14) throw PreconditionError("initial direction is null");
  VectorXd v = v0 / std::sqrt(std::abs(speed2));

  const int r = out.nu_star;
  // state: x (n), x' (n), transported basis (n*r)
  const int dim = 2 * n + n * r;
  VectorXd state(dim);
  state << x0, v, Eigen::Map<const VectorXd>(k0.data(), n * r);
  auto rhs = [&](const VectorXd& s) {
    std::vector<double> p(s.data(), s.data() + n);
    if (!chart.contains(p)) throw PreconditionError("geodesic exits chart at " + detail::point_string(p));
    MetricData md = metric_data_at(chart, p);
    VectorXd d = VectorXd::Zero(dim);
    d.head(n) = s.segment(n, n);
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double gm = md.gamma[(l * n + i) * n + j];
          d[n + l] -= gm * s[n + i] * s[n + j];
          for (int a = 0; a < r; ++a) d[2 * n + a * n + l] -= gm * s[n + i] * s[2 * n + a * n + j];
        }
    return d;
  };

  const int steps = static_cast<int>(std::llround(t_max / h));
  for (int k = 0; k <= steps; ++k) {
    VectorXd x = state.head(n), xd = state.segment(n, n);
    auto [fr, bj] = frame_and_jet(x);
    MatrixXd pe, kb;
    MatrixXd c = splitting_matrix(fr, bj, xd, &pe, &kb, tol);
    if (kb.cols() != r) throw PreconditionError("nullity of theta changes along the geodesic");
    out.drift = std::max(out.drift, distance_to_span(xd, kb) / xd.norm());
    MatrixXd tr = Eigen::Map<const MatrixXd>(state.data() + 2 * n, n, r);
    MatrixXd q = orthonormalize(tr, tol);
    out.principal_angle = std::max(out.principal_angle, std::asin(std::min(1.0, ((MatrixXd::Identity(n, n) - kb * kb.transpose()) * q).norm())));
    out.t.push_back(k * h);
    out.gamma.push_back(x);
    out.c.push_back(c);
    out.e_proj.push_back(pe);
    if (k == steps) break;
    VectorXd k1 = rhs(state);
    VectorXd k2 = rhs(state + 0.5 * h * k1);
    VectorXd k3 = rhs(state + 0.5 * h * k2);
    VectorXd k4 = rhs(state + h * k3);
    state += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  // DC/dt = dC/dt + [Γ(γ'), C], central differences in t
  for (std::size_t k = 1; k + 1 < out.c.size(); ++k) {
    std::vector<double> p(out.gamma[k].data(), out.gamma[k].data() + n);
    MetricData md = metric_data_at(chart, p);
    VectorXd xd = (out.gamma[k + 1] - out.gamma[k - 1]) / (2.0 * h);
    MatrixXd gg = MatrixXd::Zero(n, n);
    for (int l = 0; l < n; ++l)
      for (int kk = 0; kk < n; ++kk)
        for (int i = 0; i < n; ++i) gg(l, kk) += md.gamma[(l * n + i) * n + kk] * xd[i];
    MatrixXd dc = (out.c[k + 1] - out.c[k - 1]) / (2.0 * h) + gg * out.c[k] - out.c[k] * gg;
    out.riccati = std::max(out.riccati, (dc - out.c[k] * out.c[k]).norm());
  }
  return out;
}

// ------------------------------------------------------------------ cones

enum class ConeKind { Spherical, Hyperbolic };

struct ConeLift {
  ImmersionChart chart;
  BendingField tau;
};

/// f^(x,s) = s g(x), τ^ = s τ; s becomes the last chart variable.
inline ConeLift cone_lift(const ImmersionChart& base, const BendingField& tau, ConeKind kind, Interval s_range,
                          const std::vector<std::vector<double>>& check_points) {
  if (kind == ConeKind::Hyperbolic && base.ambient_signature != 1)
    throw PreconditionError("hyperbolic cone requires an ambient signature of 1");
  if (kind == ConeKind::Spherical && base.ambient_signature != 0)
    throw PreconditionError("spherical cone requires a Euclidean ambient space");
  if (!(s_range.lo > 0.0)) throw PreconditionError("cone parameter must be positive");
  const double target = kind == ConeKind::Spherical ? 1.0 : -1.0;
  auto eps = base.eps();
  for (const auto& x : check_points) {
    auto gj = jets_of(base.components, x, 0);
    auto tj = jets_of(tau.components, x, 0);
    double gg = 0.0, gt = 0.0;
    for (int a = 0; a < base.ambient_dim; ++a) {
      gg += eps[a] * gj[a].value * gj[a].value;
      gt += eps[a] * gj[a].value * tj[a].value;
    }
    if (std::abs(gg - target) > 1e-10) throw PreconditionError("normalization violated at " + detail::point_string(x));
    if (std::abs(gt) > 1e-10) throw PreconditionError("bending is not tangent to the quadric at " + detail::point_string(x));
  }
  ConeLift out;
  out.chart = base;
  out.chart.n = base.n + 1;
  out.chart.box.push_back(s_range);
  if (kind == ConeKind::Hyperbolic) out.chart.metric_index = 1;
  Expr s = Expr::variable(base.n, base.n + 1);
  out.chart.components.clear();
  for (const auto& c : base.components) out.chart.components.push_back(Expr(Expr::make(Op::Mul, {s, c}).node(), base.n + 1));
  for (const auto& c : tau.components) out.tau.components.push_back(Expr(Expr::make(Op::Mul, {s, c}).node(), base.n + 1));
  return out;
}

}  // namespace ibend

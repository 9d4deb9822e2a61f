#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "ibend/geometry.hpp"

namespace ibend {

/// Variational vector field along the immersion, one expression per ambient coordinate.
struct BendingField {
  std::vector<Expr> components;
};

/// L, B and the split B = f_*Y + β at one point. Entries are Dual so that one more
/// derivative is available for the identities that need it.
struct BendingJet {
  int n = 0, m = 0;
  std::vector<Jet3> tau_jets;
  DVec tau;                // τ
  std::vector<DVec> L;     // L∂i = τ_i
  std::vector<DVec> B;     // B(∂i,∂j), [i*n+j]
  std::vector<Dual> Y;     // Y^l_ij, [(l*n+i)*n+j]
  std::vector<DVec> beta;  // β(∂i,∂j), [i*n+j]

  const DVec& b(int i, int j) const { return B[static_cast<std::size_t>(i * n + j)]; }
  const DVec& bt(int i, int j) const { return beta[static_cast<std::size_t>(i * n + j)]; }
  const Dual& y(int l, int i, int j) const { return Y[static_cast<std::size_t>((l * n + i) * n + j)]; }
};

inline BendingJet bending_jet_from(const PointFrame& fr, std::vector<Jet3> tau_jets) {
  const int n = fr.n;
  if (static_cast<int>(tau_jets.size()) != fr.m) throw PreconditionError("bending field has wrong number of components");
  BendingJet bj;
  bj.n = n;
  bj.m = fr.m;
  bj.tau_jets = std::move(tau_jets);
  bj.tau = dual_values(bj.tau_jets);
  for (int i = 0; i < n; ++i) bj.L.push_back(dual_partial(bj.tau_jets, i));
  bj.B.resize(static_cast<std::size_t>(n * n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      DVec b = dual_second(bj.tau_jets, i, j);
      for (int l = 0; l < n; ++l) axpy(b, -fr.christoffel(l, i, j), bj.L[l]);
      bj.B[i * n + j] = std::move(b);
    }
  bj.Y.resize(static_cast<std::size_t>(n * n * n));
  bj.beta.resize(static_cast<std::size_t>(n * n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      auto c = fr.tangent_coords(bj.b(i, j));
      DVec beta = bj.b(i, j);
      for (int l = 0; l < n; ++l) {
        bj.Y[(l * n + i) * n + j] = c[l];
        axpy(beta, -c[l], fr.f(l));
      }
      bj.beta[i * n + j] = std::move(beta);
    }
  return bj;
}

inline BendingJet bending_jet_at(const PointFrame& fr, const BendingField& tau) {
  return bending_jet_from(fr, jets_of(tau.components, fr.point, 3));
}

/// max |<L∂i, f_j> + <L∂j, f_i>|.
inline double bending_residual(const PointFrame& fr, const BendingJet& bj) {
  double worst = 0.0;
  for (int i = 0; i < fr.n; ++i)
    for (int j = i; j < fr.n; ++j)
      worst = std::max(worst, std::abs(fr.inner(bj.L[i], fr.f(j)).v + fr.inner(bj.L[j], fr.f(i)).v));
  return worst;
}

/// max | |(f+tτ)_* X|^2 - |f_* X|^2 - t^2 |τ_* X|^2 | over coordinate X.
inline double first_order_isometry_residual(const PointFrame& fr, const BendingJet& bj, double t) {
  double worst = 0.0;
  for (int i = 0; i < fr.n; ++i) {
    VectorXd fi = value(fr.f(i)), li = value(bj.L[i]);
    VectorXd ft = fi + t * li;
    worst = std::max(worst, std::abs(fr.inner(ft, ft) - fr.inner(fi, fi) - t * t * fr.inner(li, li)));
  }
  return worst;
}

/// (∇~_i B)(j,k): ambient derivative of B with tangent covariant corrections.
inline VectorXd covariant_derivative_b(const PointFrame& fr, const BendingJet& bj, int i, int j, int k) {
  const int n = fr.n;
  VectorXd r = partial(bj.b(j, k), i);
  for (int l = 0; l < n; ++l) {
    r -= fr.christoffel(l, i, j).v * value(bj.b(l, k));
    r -= fr.christoffel(l, i, k).v * value(bj.b(j, l));
  }
  return r;
}

struct IdentityResiduals {
  double parte = 0.0;
  double der_gauss = 0.0;
  double casi_codazzi = 0.0;
  double segder_l = 0.0;
};

inline IdentityResiduals identity_residuals(const PointFrame& fr, const BendingJet& bj) {
  const int n = fr.n;
  IdentityResiduals out;
  std::vector<VectorXd> av, bv, yv;  // α, β values; f_*Y values
  for (int k = 0; k < n * n; ++k) {
    av.push_back(value(fr.alpha[k]));
    bv.push_back(value(bj.beta[k]));
  }
  std::vector<VectorXd> lv, fv;
  for (int i = 0; i < n; ++i) {
    lv.push_back(value(bj.L[i]));
    fv.push_back(value(fr.f(i)));
  }

  // <α(X,Y), LZ> + <B(X,Y), f_*Z> = 0
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      for (int k = 0; k < n; ++k)
        out.parte = std::max(out.parte, std::abs(fr.inner(av[i * n + j], lv[k]) + fr.inner(value(bj.b(i, j)), fv[k])));

  // <β(X,W),α(Y,Z)> + <α(X,W),β(Y,Z)> - <β(X,Z),α(Y,W)> - <α(X,Z),β(Y,W)> = 0
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y)
      for (int z = 0; z < n; ++z)
        for (int w = 0; w < n; ++w) {
          double s = fr.inner(bv[x * n + w], av[y * n + z]) + fr.inner(av[x * n + w], bv[y * n + z]) -
                     fr.inner(bv[x * n + z], av[y * n + w]) - fr.inner(av[x * n + z], bv[y * n + w]);
          out.der_gauss = std::max(out.der_gauss, std::abs(s));
        }

  std::vector<VectorXd> lr(static_cast<std::size_t>(n * n * n));  // L R(∂i,∂j)∂k
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        VectorXd v = VectorXd::Zero(fr.m);
        for (int l = 0; l < n; ++l) v += fr.riem(l, k, i, j) * lv[l];
        lr[(i * n + j) * n + k] = v;
      }

  // (∇~_X B)(Y,Z) - (∇~_Y B)(X,Z) = -L R(X,Y)Z
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        VectorXd d = covariant_derivative_b(fr, bj, i, j, k) - covariant_derivative_b(fr, bj, j, i, k) + lr[(i * n + j) * n + k];
        out.segder_l = std::max(out.segder_l, d.norm());
      }

  // (∇⊥_X β)(Y,Z) - (∇⊥_Y β)(X,Z) = α(Y, Y(X,Z)) - α(X, Y(Y,Z)) - (L R(X,Y)Z)_N
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        VectorXd lhs = normal_covariant_derivative(fr, bj.beta, i, j, k) - normal_covariant_derivative(fr, bj.beta, j, i, k);
        VectorXd rhs = -fr.normal_part(lr[(i * n + j) * n + k]);
        for (int l = 0; l < n; ++l) rhs += bj.y(l, i, k).v * av[j * n + l] - bj.y(l, j, k).v * av[i * n + l];
        out.casi_codazzi = std::max(out.casi_codazzi, (lhs - rhs).norm());
      }
  return out;
}

/// Components <B(∂i,∂j), N> for a hypersurface with unit normal N = ξ_1.
inline MatrixXd normal_b(const PointFrame& fr, const BendingJet& bj) {
  if (fr.p != 1) throw PreconditionError("triviality test requires codimension 1");
  MatrixXd out(fr.n, fr.n);
  VectorXd nv = value(fr.normals[0]);
  for (int i = 0; i < fr.n; ++i)
    for (int j = 0; j < fr.n; ++j) out(i, j) = fr.inner(value(bj.b(i, j)), nv);
  return out;
}

struct TrivialityResult {
  bool trivial = true;
  double sup_norm = 0.0;  // sup over points of max |B_N| entry
  std::size_t worst = 0;
};

/// A hypersurface bending is trivial iff B_N vanishes; decided over the supplied points.
inline TrivialityResult triviality_test_hypersurface(const std::vector<PointFrame>& frames, const std::vector<BendingJet>& jets,
                                                     double tol = 1e-7) {
  TrivialityResult out;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    double v = normal_b(frames[k], jets[k]).cwiseAbs().maxCoeff();
    if (v > out.sup_norm) {
      out.sup_norm = v;
      out.worst = k;
    }
  }
  out.trivial = out.sup_norm <= tol;
  return out;
}

/// τ = D f + w for D skew with respect to the ambient product.
inline BendingField make_trivial_bending(const MatrixXd& d, const VectorXd& w, const ImmersionChart& chart, double tol = 1e-12) {
  const int m = chart.ambient_dim;
  if (d.rows() != m || d.cols() != m || w.size() != m) throw PreconditionError("trivial bending data has wrong dimension");
  auto e = chart.eps();
  VectorXd ev(m);
  for (int k = 0; k < m; ++k) ev[k] = e[k];
  MatrixXd ed = ev.asDiagonal() * d;
  if ((ed + ed.transpose()).cwiseAbs().maxCoeff() > tol) throw PreconditionError("matrix is not skew for the ambient product");
  BendingField tau;
  for (int a = 0; a < m; ++a) {
    std::vector<Expr> terms;
    for (int b = 0; b < m; ++b)
      if (d(a, b) != 0.0) terms.push_back(scaled(d(a, b), chart.components[b]));
    if (w[a] != 0.0) terms.push_back(Expr::constant(w[a]));
    tau.components.push_back(sum_of(terms, chart.n));
  }
  return tau;
}

/// B(∂i,∂j) from the t-derivative of the second fundamental form of f + tτ,
/// central differences at ±h and ±h/2 with one Richardson step.
inline std::vector<VectorXd> b_from_variation(const PointFrame& fr, const BendingJet& bj, double h = 1e-4) {
  const int n = fr.n, m = fr.m;
  auto alpha_t = [&](double t) {
    std::vector<VectorXd> fi(static_cast<std::size_t>(n)), fij(static_cast<std::size_t>(n * n));
    std::vector<MatrixXd> dg(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      VectorXd v(m);
      for (int a = 0; a < m; ++a) v[a] = fr.f_jets[a].d(i) + t * bj.tau_jets[a].d(i);
      fi[i] = v;
      for (int j = 0; j < n; ++j) {
        VectorXd w(m);
        for (int a = 0; a < m; ++a) w[a] = fr.f_jets[a].d(i, j) + t * bj.tau_jets[a].d(i, j);
        fij[i * n + j] = w;
      }
    }
    MatrixXd g(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) g(i, j) = fr.inner(fi[i], fi[j]);
    MatrixXd gi = g.inverse();
    std::vector<VectorXd> out(static_cast<std::size_t>(n * n));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        // Γ^l_ij = g^{lk} <f_ij, f_k> for an immersion into flat space
        VectorXd b(n);
        for (int k = 0; k < n; ++k) b[k] = fr.inner(fij[i * n + j], fi[k]);
        VectorXd gam = gi * b;
        VectorXd a = fij[i * n + j];
        for (int l = 0; l < n; ++l) a -= gam[l] * fi[l];
        out[i * n + j] = a;
      }
    return out;
  };
  auto central = [&](double step) {
    auto ap = alpha_t(step), am = alpha_t(-step);
    std::vector<VectorXd> d(ap.size());
    for (std::size_t k = 0; k < ap.size(); ++k) d[k] = (ap[k] - am[k]) / (2.0 * step);
    return d;
  };
  auto d1 = central(h), d2 = central(h / 2.0);
  std::vector<VectorXd> out(d1.size());
  for (std::size_t k = 0; k < d1.size(); ++k) out[k] = (4.0 * d2[k] - d1[k]) / 3.0;
  return out;
}

}  // namespace ibend

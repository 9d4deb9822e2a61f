#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ibend/dual.hpp"
#include "ibend/error.hpp"
#include "ibend/expression.hpp"
#include "ibend/jet.hpp"
#include "ibend/linalg.hpp"

namespace ibend {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Coordinate description of an immersion into flat space of signature (ambient_dim - s, s),
/// where the s negative directions are the last coordinates.
struct ImmersionChart {
  int n = 0;
  int ambient_dim = 0;
  int ambient_signature = 0;
  int metric_index = 0;  // number of negative directions allowed in the induced metric
  std::vector<Expr> components;
  std::vector<Interval> box;

  int codim() const { return ambient_dim - n; }

  std::vector<double> eps() const {
    std::vector<double> e(static_cast<std::size_t>(ambient_dim), 1.0);
    for (int k = ambient_dim - ambient_signature; k < ambient_dim; ++k) e[static_cast<std::size_t>(k)] = -1.0;
    return e;
  }

  std::vector<double> center() const {
    std::vector<double> c;
    for (const auto& iv : box) c.push_back(0.5 * (iv.lo + iv.hi));
    return c;
  }

  bool contains(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != n) return false;
    for (int i = 0; i < n; ++i)
      if (x[i] < box[i].lo || x[i] > box[i].hi) return false;
    return true;
  }

  void validate() const {
    if (n < 1 || n > kMaxVars) throw PreconditionError("chart dimension must be in 1.." + std::to_string(kMaxVars));
    if (ambient_dim <= n) throw PreconditionError("ambient dimension must exceed the chart dimension");
    if (ambient_signature < 0 || ambient_signature > 1) throw PreconditionError("ambient signature must be 0 or 1");
    if (static_cast<int>(components.size()) != ambient_dim)
      throw PreconditionError("number of components differs from the ambient dimension");
    if (static_cast<int>(box.size()) != n) throw PreconditionError("chart box must have one interval per variable");
    for (const auto& iv : box)
      if (!(iv.lo < iv.hi)) throw PreconditionError("chart box interval is empty");
    for (const auto& c : components)
      if (c.dim() > n) throw PreconditionError("component uses a variable outside the chart");
  }
};

inline std::vector<Jet3> jets_of(const std::vector<Expr>& exprs, std::span<const double> x, int order) {
  std::vector<Jet3> out;
  out.reserve(exprs.size());
  for (const auto& e : exprs) out.push_back(eval_jet(e, x, order));
  return out;
}

/// First-order Dual vector (value, first partials) from jets.
inline DVec dual_values(const std::vector<Jet3>& jets) {
  DVec out(jets.size());
  for (std::size_t a = 0; a < jets.size(); ++a) {
    out[a].v = jets[a].value;
    for (int k = 0; k < jets[a].n; ++k) out[a].d[k] = jets[a].d(k);
  }
  return out;
}

/// Dual vector of the i-th partial (value f_i, derivatives f_ik).
inline DVec dual_partial(const std::vector<Jet3>& jets, int i) {
  DVec out(jets.size());
  for (std::size_t a = 0; a < jets.size(); ++a) {
    out[a].v = jets[a].d(i);
    for (int k = 0; k < jets[a].n; ++k) out[a].d[k] = jets[a].d(i, k);
  }
  return out;
}

/// Dual vector of the (i,j) second partial (value f_ij, derivatives f_ijk).
inline DVec dual_second(const std::vector<Jet3>& jets, int i, int j) {
  DVec out(jets.size());
  for (std::size_t a = 0; a < jets.size(); ++a) {
    out[a].v = jets[a].d(i, j);
    for (int k = 0; k < jets[a].n; ++k) out[a].d[k] = jets[a].d(i, j, k);
  }
  return out;
}

/// Pointwise geometry of an immersion. Quantities that are differentiated again downstream
/// are carried as Dual (value plus first partials).
struct PointFrame {
  int n = 0, m = 0, p = 0;
  std::vector<double> point;
  std::vector<double> eps;
  std::vector<Jet3> f_jets;
  std::vector<DVec> tangent;   // f_i
  std::vector<DVec> second;    // f_ij, [i*n+j]
  std::vector<Dual> g, ginv;   // [i*n+j]
  std::vector<Dual> gamma;     // Γ^l_ij, [(l*n+i)*n+j]
  std::vector<DVec> alpha;     // α(∂i,∂j) as ambient vectors, [i*n+j]
  std::vector<DVec> normals;   // ξ_a
  std::vector<double> normal_eps;
  std::vector<double> omega;    // <∂_i ξ_a, ξ_b>, [(i*p+a)*p+b]
  std::vector<double> riemann;  // R^l_kij with R(∂i,∂j)∂k = R^l_kij ∂l, [((l*n+k)*n+i)*n+j]
  MatrixXd jacobian;
  double sigma_min = 0.0, sigma_max = 0.0;

  const DVec& f(int i) const { return tangent[static_cast<std::size_t>(i)]; }
  const DVec& f2(int i, int j) const { return second[static_cast<std::size_t>(i * n + j)]; }
  const Dual& metric(int i, int j) const { return g[static_cast<std::size_t>(i * n + j)]; }
  const Dual& inv_metric(int i, int j) const { return ginv[static_cast<std::size_t>(i * n + j)]; }
  const Dual& christoffel(int l, int i, int j) const { return gamma[static_cast<std::size_t>((l * n + i) * n + j)]; }
  const DVec& sff(int i, int j) const { return alpha[static_cast<std::size_t>(i * n + j)]; }
  double riem(int l, int k, int i, int j) const { return riemann[static_cast<std::size_t>(((l * n + k) * n + i) * n + j)]; }

  double inner(const VectorXd& a, const VectorXd& b) const {
    double s = 0.0;
    for (int c = 0; c < m; ++c) s += eps[static_cast<std::size_t>(c)] * a[c] * b[c];
    return s;
  }
  Dual inner(const DVec& a, const DVec& b) const { return dot(a, b, eps); }

  MatrixXd metric_value() const {
    MatrixXd r(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) r(i, j) = metric(i, j).v;
    return r;
  }
  MatrixXd inv_metric_value() const {
    MatrixXd r(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) r(i, j) = inv_metric(i, j).v;
    return r;
  }

  /// Coordinates c of the tangent part of v, so that v_T = sum c^i f_i.
  VectorXd tangent_coords(const VectorXd& v) const {
    VectorXd b(n);
    for (int j = 0; j < n; ++j) b[j] = inner(v, value(f(j)));
    return inv_metric_value() * b;
  }
  std::vector<Dual> tangent_coords(const DVec& v) const {
    std::vector<Dual> b(static_cast<std::size_t>(n)), c(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) b[j] = inner(v, f(j));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) c[i] += inv_metric(i, j) * b[j];
    return c;
  }

  VectorXd tangent_part(const VectorXd& v) const { return jacobian * tangent_coords(v); }
  VectorXd normal_part(const VectorXd& v) const { return v - tangent_part(v); }
  DVec normal_part(const DVec& v) const {
    auto c = tangent_coords(v);
    DVec r = v;
    for (int i = 0; i < n; ++i) axpy(r, -c[i], f(i));
    return r;
  }

  /// Coordinates of the normal part of v in the frame: v_N = sum c_a ξ_a.
  VectorXd normal_coords(const VectorXd& v) const {
    VectorXd c(p);
    for (int a = 0; a < p; ++a) c[a] = normal_eps[a] * inner(v, value(normals[a]));
    return c;
  }

  MatrixXd normal_basis() const {
    MatrixXd r(m, p);
    for (int a = 0; a < p; ++a) r.col(a) = value(normals[a]);
    return r;
  }

  VectorXd normal_signature() const {
    VectorXd e(p);
    for (int a = 0; a < p; ++a) e[a] = normal_eps[a];
    return e;
  }

  /// h^a_ij = <α(∂i,∂j), ξ_a>.
  double h(int a, int i, int j) const {
    double s = 0.0;
    const DVec& al = sff(i, j);
    const DVec& xi = normals[a];
    for (int c = 0; c < m; ++c) s += eps[c] * al[c].v * xi[c].v;
    return s;
  }
};

namespace detail {

inline void build_normal_frame(PointFrame& fr) {
  const int n = fr.n, m = fr.m;
  // P_N e_k for every ambient basis vector, ordered by Euclidean norm (descending, stable).
  std::vector<DVec> cand;
  std::vector<double> norms;
  for (int k = 0; k < m; ++k) {
    DVec e = dvec_zero(m);
    e[k] = Dual(1.0);
    cand.push_back(fr.normal_part(e));
    norms.push_back(value(cand.back()).norm());
  }
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return norms[a] > norms[b]; });

  auto gram_schmidt = [&](const std::vector<DVec>& input, std::size_t want) {
    std::vector<DVec> out;
    std::vector<double> sig;
    for (const auto& v : input) {
      if (out.size() == want) break;
      DVec w = v;
      for (std::size_t b = 0; b < out.size(); ++b) axpy(w, -sig[b] * fr.inner(v, out[b]), out[b]);
      Dual nn = fr.inner(w, w);
      if (std::abs(nn.v) < 1e-10) continue;
      double s = nn.v > 0.0 ? 1.0 : -1.0;
      Dual len = sqrt(s * nn);
      for (auto& c : w) c = c / len;
      out.push_back(std::move(w));
      sig.push_back(s);
    }
    return std::make_pair(out, sig);
  };

  std::vector<DVec> ordered;
  for (int k : order) ordered.push_back(cand[k]);
  auto [first, sig1] = gram_schmidt(ordered, static_cast<std::size_t>(fr.p));
  if (static_cast<int>(first.size()) != fr.p) throw NumericFailure("could not complete the normal frame");
  auto [second_pass, sig2] = gram_schmidt(first, static_cast<std::size_t>(fr.p));
  if (static_cast<int>(second_pass.size()) != fr.p) throw NumericFailure("normal frame lost rank on reorthonormalization");
  fr.normals = std::move(second_pass);
  fr.normal_eps = std::move(sig2);
  (void)n;
}

}  // namespace detail

/// All pointwise geometry of the chart at x (jets of order 3 are evaluated once).
inline PointFrame frame_at(const ImmersionChart& chart, std::span<const double> x, double rank_tol = kDefaultRankTol) {
  const int n = chart.n, m = chart.ambient_dim;
  if (static_cast<int>(x.size()) != n) throw PreconditionError("point dimension differs from chart dimension");
  PointFrame fr;
  fr.n = n;
  fr.m = m;
  fr.p = m - n;
  fr.point.assign(x.begin(), x.end());
  fr.eps = chart.eps();
  fr.f_jets = jets_of(chart.components, x, 3);

  for (int i = 0; i < n; ++i) fr.tangent.push_back(dual_partial(fr.f_jets, i));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) fr.second.push_back(dual_second(fr.f_jets, i, j));

  fr.jacobian.resize(m, n);
  for (int i = 0; i < n; ++i) fr.jacobian.col(i) = value(fr.tangent[i]);
  Eigen::JacobiSVD<MatrixXd> svd(fr.jacobian);
  fr.sigma_max = svd.singularValues()[0];
  fr.sigma_min = svd.singularValues()[n - 1];
  if (!(fr.sigma_min > rank_tol * fr.sigma_max))
    throw PreconditionError("rank-deficient differential at " + detail::point_string(x) +
                            ": smallest singular value " + detail::format_number(fr.sigma_min));

  fr.g.resize(static_cast<std::size_t>(n * n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) fr.g[i * n + j] = fr.inner(fr.f(i), fr.f(j));

  MatrixXd gv = fr.metric_value();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(gv);
  const VectorXd& lam = es.eigenvalues();
  double lam_scale = lam.cwiseAbs().maxCoeff();
  if (lam.cwiseAbs().minCoeff() <= 1e-12 * lam_scale)
    throw PreconditionError("degenerate induced metric at " + detail::point_string(x));
  int index = static_cast<int>((lam.array() < 0.0).count());
  if (index != chart.metric_index)
    throw PreconditionError("induced metric has index " + std::to_string(index) + ", expected " +
                            std::to_string(chart.metric_index) + " at " + detail::point_string(x));

  MatrixXd gi = gv.inverse();
  fr.ginv.resize(static_cast<std::size_t>(n * n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) fr.ginv[i * n + j].v = gi(i, j);
  for (int k = 0; k < n; ++k) {
    MatrixXd dg(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) dg(i, j) = fr.metric(i, j).d[k];
    MatrixXd dgi = -gi * dg * gi;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) fr.ginv[i * n + j].d[k] = dgi(i, j);
  }

  // dg[(k*n+i)*n+j] = ∂_k g_ij, carried with its own first partials.
  std::vector<Dual> dg(static_cast<std::size_t>(n * n * n));
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) dg[(k * n + i) * n + j] = fr.inner(fr.f2(i, k), fr.f(j)) + fr.inner(fr.f(i), fr.f2(j, k));

  fr.gamma.resize(static_cast<std::size_t>(n * n * n));
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        Dual s;
        for (int k = 0; k < n; ++k)
          s += fr.inv_metric(l, k) * (dg[(i * n + j) * n + k] + dg[(j * n + i) * n + k] - dg[(k * n + i) * n + j]);
        s *= 0.5;
        fr.gamma[(l * n + i) * n + j] = s;
        fr.gamma[(l * n + j) * n + i] = s;
      }

  fr.alpha.resize(static_cast<std::size_t>(n * n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      DVec a = fr.f2(i, j);
      for (int l = 0; l < n; ++l) axpy(a, -fr.christoffel(l, i, j), fr.f(l));
      fr.alpha[i * n + j] = std::move(a);
    }

  detail::build_normal_frame(fr);
  const int p = fr.p;
  fr.omega.assign(static_cast<std::size_t>(n * p * p), 0.0);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < p; ++a)
      for (int b = 0; b < p; ++b) {
        double s = 0.0;
        for (int c = 0; c < m; ++c) s += fr.eps[c] * fr.normals[a][c].d[i] * fr.normals[b][c].v;
        fr.omega[(i * p + a) * p + b] = s;
      }

  fr.riemann.assign(static_cast<std::size_t>(n * n * n * n), 0.0);
  for (int l = 0; l < n; ++l)
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double r = fr.christoffel(l, j, k).d[i] - fr.christoffel(l, i, k).d[j];
          for (int q = 0; q < n; ++q)
            r += fr.christoffel(l, i, q).v * fr.christoffel(q, j, k).v - fr.christoffel(l, j, q).v * fr.christoffel(q, i, k).v;
          fr.riemann[((l * n + k) * n + i) * n + j] = r;
        }
  return fr;
}

/// max |<R(X,Y)Z,W> - (<α(X,W),α(Y,Z)> - <α(X,Z),α(Y,W)>)| over coordinate fields.
inline double gauss_residual(const PointFrame& fr) {
  const int n = fr.n;
  double worst = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double lhs = 0.0;
          for (int q = 0; q < n; ++q) lhs += fr.metric(l, q).v * fr.riem(q, k, i, j);
          double rhs = fr.inner(fr.sff(i, l), fr.sff(j, k)).v - fr.inner(fr.sff(i, k), fr.sff(j, l)).v;
          worst = std::max(worst, std::abs(lhs - rhs));
        }
  return worst;
}

/// (∇⊥_i T)(j,k) for a normal-valued symmetric tensor T given as Dual ambient vectors [i*n+j].
inline VectorXd normal_covariant_derivative(const PointFrame& fr, const std::vector<DVec>& t, int i, int j, int k) {
  const int n = fr.n;
  VectorXd r = fr.normal_part(partial(t[j * n + k], i));
  for (int l = 0; l < n; ++l) {
    r -= fr.christoffel(l, i, j).v * value(t[l * n + k]);
    r -= fr.christoffel(l, i, k).v * value(t[j * n + l]);
  }
  return r;
}

/// max |(∇⊥_X α)(Y,Z) - (∇⊥_Y α)(X,Z)| over coordinate fields.
inline double codazzi_residual(const PointFrame& fr) {
  const int n = fr.n;
  double worst = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        VectorXd d = normal_covariant_derivative(fr, fr.alpha, i, j, k) - normal_covariant_derivative(fr, fr.alpha, j, i, k);
        worst = std::max(worst, d.norm());
      }
  return worst;
}

/// Shape operator as the mixed tensor A^i_j, defined by g(A X, Y) = <α(X,Y), ξ>.
inline MatrixXd shape_operator(const PointFrame& fr, const VectorXd& xi, double tol = 1e-8) {
  if (xi.size() != fr.m) throw PreconditionError("normal vector has wrong dimension");
  double tang = fr.tangent_part(xi).norm();
  if (tang > tol * (1.0 + xi.norm())) throw PreconditionError("vector is not normal: tangential part " + detail::format_number(tang));
  MatrixXd hm(fr.n, fr.n);
  for (int i = 0; i < fr.n; ++i)
    for (int j = 0; j < fr.n; ++j) hm(i, j) = fr.inner(value(fr.sff(i, j)), xi);
  return fr.inv_metric_value() * hm;
}

struct NullityData {
  MatrixXd delta;  // n x nu, orthonormal in chart coordinates
  int nu = 0;
  MatrixXd n1;  // m x dim N1, Euclidean-orthonormal ambient basis
  int n1_dim = 0;
};

/// Stacked matrix whose kernel is {X : T(X, ∂j) = 0 for all j} for a tensor given as ambient vectors.
inline MatrixXd stacked_kernel_matrix(const std::vector<VectorXd>& t, int n) {
  const auto m = t.empty() ? 0 : t.front().size();
  MatrixXd s(n * m, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s.block(j * m, i, m, 1) = t[i * n + j];
  return s;
}

inline NullityData nullity_at(const PointFrame& fr, double tol = kDefaultRankTol) {
  const int n = fr.n;
  std::vector<VectorXd> vals;
  MatrixXd cols(fr.m, n * n);
  for (int k = 0; k < n * n; ++k) {
    vals.push_back(value(fr.alpha[k]));
    cols.col(k) = vals.back();
  }
  NullityData out;
  out.delta = kernel_basis(stacked_kernel_matrix(vals, n), tol);
  out.nu = static_cast<int>(out.delta.cols());
  out.n1 = range_basis(cols, tol);
  out.n1_dim = static_cast<int>(out.n1.cols());
  return out;
}

}  // namespace ibend

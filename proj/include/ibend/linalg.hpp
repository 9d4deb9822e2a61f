#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "ibend/dual.hpp"

namespace ibend {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kDefaultRankTol = 1e-8;

/// Number of singular values above tol * max(sigma_1, 1).
inline int numerical_rank(const VectorXd& sigma, double tol = kDefaultRankTol) {
  if (sigma.size() == 0) return 0;
  double ref = std::max(sigma.maxCoeff(), 1.0);
  int r = 0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    if (sigma[i] > tol * ref) ++r;
  return r;
}

struct SvdSplit {
  int rank = 0;
  MatrixXd range;   // orthonormal columns spanning the column space
  MatrixXd kernel;  // orthonormal columns spanning the null space
  VectorXd sigma;
};

inline SvdSplit svd_split(const MatrixXd& a, double tol = kDefaultRankTol) {
  SvdSplit out;
  const Eigen::Index rows = a.rows(), cols = a.cols();
  if (rows == 0 || cols == 0) {
    out.range = MatrixXd(rows, 0);
    out.kernel = MatrixXd::Identity(cols, cols);
    return out;
  }
  Eigen::JacobiSVD<MatrixXd> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  out.sigma = svd.singularValues();
  out.rank = numerical_rank(out.sigma, tol);
  out.range = svd.matrixU().leftCols(out.rank);
  out.kernel = svd.matrixV().rightCols(cols - out.rank);
  return out;
}

inline MatrixXd kernel_basis(const MatrixXd& a, double tol = kDefaultRankTol) { return svd_split(a, tol).kernel; }
inline MatrixXd range_basis(const MatrixXd& a, double tol = kDefaultRankTol) { return svd_split(a, tol).range; }
inline int matrix_rank(const MatrixXd& a, double tol = kDefaultRankTol) { return svd_split(a, tol).rank; }

inline MatrixXd pseudo_inverse(const MatrixXd& a, double tol = kDefaultRankTol) {
  if (a.rows() == 0 || a.cols() == 0) return MatrixXd::Zero(a.cols(), a.rows());
  Eigen::JacobiSVD<MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& s = svd.singularValues();
  int r = numerical_rank(s, tol);
  MatrixXd out = MatrixXd::Zero(a.cols(), a.rows());
  for (int i = 0; i < r; ++i) out += svd.matrixV().col(i) * (1.0 / s[i]) * svd.matrixU().col(i).transpose();
  return out;
}

/// Euclidean distance from v to the column span of an orthonormal basis q.
inline double distance_to_span(const VectorXd& v, const MatrixXd& q) {
  if (q.cols() == 0) return v.norm();
  return (v - q * (q.transpose() * v)).norm();
}

/// Orthonormal basis of an arbitrary column set.
inline MatrixXd orthonormalize(const MatrixXd& a, double tol = kDefaultRankTol) { return range_basis(a, tol); }

/// Gram matrix b^T E b for a diagonal signature E.
inline MatrixXd signed_gram(const MatrixXd& b, const VectorXd& eps) { return b.transpose() * eps.asDiagonal() * b; }

/// Orthonormal basis of S ∩ S^⊥ for S = span(b) under the diagonal product eps.
inline MatrixXd radical_of_span(const MatrixXd& b, const VectorXd& eps, double tol = kDefaultRankTol) {
  MatrixXd q = orthonormalize(b, tol);
  if (q.cols() == 0) return q;
  MatrixXd k = kernel_basis(signed_gram(q, eps), tol);
  if (k.cols() == 0) return MatrixXd(q.rows(), 0);
  return orthonormalize(q * k, tol);
}

/// Orthonormal (Euclidean) basis of the eps-orthogonal complement of span(b).
inline MatrixXd signed_complement(const MatrixXd& b, const VectorXd& eps, double tol = kDefaultRankTol) {
  if (b.cols() == 0) return MatrixXd::Identity(eps.size(), eps.size());
  return kernel_basis(b.transpose() * eps.asDiagonal(), tol);
}

/// Nonzero c with c^T G c = 0, if the symmetric matrix G admits one.
inline std::optional<VectorXd> isotropic_vector(const MatrixXd& g, double tol = kDefaultRankTol) {
  if (g.rows() == 0) return std::nullopt;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(g);
  const VectorXd& lam = es.eigenvalues();
  double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  Eigen::Index imin = 0;
  lam.cwiseAbs().minCoeff(&imin);
  if (std::abs(lam[imin]) <= tol * scale) return VectorXd(es.eigenvectors().col(imin));
  double lo = lam[0], hi = lam[lam.size() - 1];
  if (lo < 0.0 && hi > 0.0) {
    VectorXd c = std::sqrt(-lo) * es.eigenvectors().col(lam.size() - 1) + std::sqrt(hi) * es.eigenvectors().col(0);
    return VectorXd(c.normalized());
  }
  return std::nullopt;
}

/// Orthogonal projector P onto ker M and its partials, for a matrix with Dual entries.
/// Uses dP = -M^+ dM P - (M^+ dM P)^T, valid while the rank is locally constant.
struct KernelProjector {
  MatrixXd p;
  std::vector<MatrixXd> dp;  // one per chart direction
  MatrixXd kernel;           // orthonormal basis of ker M at the point
};

inline KernelProjector kernel_projector(const std::vector<std::vector<Dual>>& m, int cols, int nvars,
                                        double tol = kDefaultRankTol) {
  const auto rows = static_cast<Eigen::Index>(m.size());
  MatrixXd mv(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) mv(r, c) = m[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].v;
  KernelProjector out;
  out.kernel = kernel_basis(mv, tol);
  out.p = out.kernel * out.kernel.transpose();
  MatrixXd pinv = pseudo_inverse(mv, tol);
  for (int k = 0; k < nvars; ++k) {
    MatrixXd dm(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) dm(r, c) = m[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].d[k];
    MatrixXd t = pinv * dm * out.p;
    out.dp.push_back(-t - t.transpose());
  }
  return out;
}

/// Portable pseudo-random source: mt19937_64 with hand-rolled uniform/normal maps so that
/// streams do not depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  VectorXd normal_vector(Eigen::Index n) {
    VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  VectorXd unit_vector(Eigen::Index n) {
    VectorXd v = normal_vector(n);
    double nv = v.norm();
    return nv > 0.0 ? VectorXd(v / nv) : VectorXd(VectorXd::Unit(n, 0));
  }

  int integer(int lo, int hi) { return lo + static_cast<int>(eng_() % static_cast<std::uint64_t>(hi - lo + 1)); }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ibend

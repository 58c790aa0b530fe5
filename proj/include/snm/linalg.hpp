#ifndef SNM_LINALG_HPP
#define SNM_LINALG_HPP

#include <cmath>
#include <utility>

#include "snm/types.hpp"

namespace snm {

/// Dense symmetric matrix. Storage is the full square matrix, symmetrized at
/// construction so entries (i, j) and (j, i) compare equal exactly.
template <typename Scalar>
class SymMatrix {
 public:
  using Mat = MatX<Scalar>;
  using Vec = VecX<Scalar>;

  SymMatrix() = default;

  explicit SymMatrix(const Mat& m) {
    if (m.rows() != m.cols()) {
      throw DimensionMismatch("SymMatrix: input must be square");
    }
    // (a + b)/2 rounds identically on both sides of the diagonal, so the
    // stored matrix is bitwise symmetric even for asymmetric input.
    m_ = Scalar(0.5) * (m + m.transpose());
  }

  static SymMatrix Identity(Index d) { return SymMatrix(Mat::Identity(d, d)); }

  static SymMatrix Zero(Index d) { return SymMatrix(Mat::Zero(d, d)); }

  /// c * I_d.
  static SymMatrix Scaled(Index d, Scalar c) {
    return SymMatrix(Mat(c * Mat::Identity(d, d)));
  }

  static SymMatrix Diagonal(const Vec& diag) {
    return SymMatrix(Mat(diag.asDiagonal()));
  }

  Index dim() const { return m_.rows(); }
  const Mat& mat() const { return m_; }
  Scalar operator()(Index i, Index j) const { return m_(i, j); }

  bool is_zero() const { return m_.isZero(Scalar(0)); }

  friend SymMatrix operator+(const SymMatrix& a, const SymMatrix& b) {
    if (a.dim() != b.dim()) {
      throw DimensionMismatch("SymMatrix +: dimension mismatch");
    }
    SymMatrix r;
    r.m_ = a.m_ + b.m_;
    return r;
  }

  friend SymMatrix operator-(const SymMatrix& a, const SymMatrix& b) {
    if (a.dim() != b.dim()) {
      throw DimensionMismatch("SymMatrix -: dimension mismatch");
    }
    SymMatrix r;
    r.m_ = a.m_ - b.m_;
    return r;
  }

  friend SymMatrix operator*(Scalar c, const SymMatrix& a) {
    SymMatrix r;
    r.m_ = c * a.m_;
    return r;
  }

 private:
  Mat m_;
};

using SymMatrixd = SymMatrix<double>;

/// Lower-triangular Cholesky factor L (A = L Lᵀ) with a cached
/// log-determinant of A, kept consistent through rank-one updates.
template <typename Scalar>
class CholFactor {
 public:
  using Mat = MatX<Scalar>;
  using Vec = VecX<Scalar>;

  CholFactor() = default;

  /// Takes a lower-triangular factor with strictly positive diagonal.
  explicit CholFactor(Mat lower) : lower_(std::move(lower)) {
    if (lower_.rows() != lower_.cols()) {
      throw DimensionMismatch("CholFactor: factor must be square");
    }
    for (Index i = 0; i < lower_.rows(); ++i) {
      if (!(lower_(i, i) > Scalar(0))) {
        throw NotPositiveDefinite("CholFactor: non-positive pivot");
      }
    }
    lower_.template triangularView<Eigen::StrictlyUpper>().setZero();
    recompute_logdet();
  }

  Index dim() const { return lower_.rows(); }
  const Mat& lower() const { return lower_; }

  /// log det(L Lᵀ) = 2 * sum_i log L_ii.
  Scalar logdet() const { return logdet_; }

  Mat reconstruct() const { return lower_ * lower_.transpose(); }

  /// In-place update of the factorization of A to that of A + x xᵀ,
  /// O(d²) via a sweep of plane rotations. The cached logdet is refreshed
  /// from the new diagonal.
  void rank_one_update(const Vec& x) {
    const Index d = lower_.rows();
    if (x.size() != d) {
      throw DimensionMismatch("rank_one_update: vector size mismatch");
    }
    Vec w = x;
    for (Index k = 0; k < d; ++k) {
      if (w[k] == Scalar(0)) continue;  // rotation is the identity
      Scalar lkk = lower_(k, k);
      Scalar r = std::sqrt(lkk * lkk + w[k] * w[k]);
      Scalar c = r / lkk;
      Scalar s = w[k] / lkk;
      lower_(k, k) = r;
      if (k + 1 < d) {
        auto col = lower_.col(k).segment(k + 1, d - k - 1);
        auto tail = w.segment(k + 1, d - k - 1);
        col = (col + s * tail) / c;
        tail = c * tail - s * col;
      }
    }
    recompute_logdet();
  }

 private:
  void recompute_logdet() {
    logdet_ = Scalar(0);
    for (Index i = 0; i < lower_.rows(); ++i) {
      logdet_ += std::log(lower_(i, i));
    }
    logdet_ *= Scalar(2);
  }

  Mat lower_;
  Scalar logdet_ = Scalar(0);
};

using CholFactord = CholFactor<double>;

/// Cholesky factorization of a symmetric positive definite matrix.
template <typename Scalar>
CholFactor<Scalar> cholesky(const SymMatrix<Scalar>& m) {
  Eigen::LLT<MatX<Scalar>> llt(m.mat());
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("cholesky: matrix is not positive definite");
  }
  MatX<Scalar> lower = llt.matrixL();
  for (Index i = 0; i < lower.rows(); ++i) {
    if (!(lower(i, i) > Scalar(0))) {
      throw NotPositiveDefinite("cholesky: non-positive pivot");
    }
  }
  return CholFactor<Scalar>(std::move(lower));
}

/// Factor of A + x xᵀ from the factor of A, without re-factorizing.
template <typename Scalar>
CholFactor<Scalar> rank_one_update(const CholFactor<Scalar>& f,
                                   const VecX<Scalar>& x) {
  CholFactor<Scalar> g = f;
  g.rank_one_update(x);
  return g;
}

/// Solves A y = b given the factor of A (two triangular solves).
template <typename Scalar>
VecX<Scalar> solve(const CholFactor<Scalar>& f, const VecX<Scalar>& b) {
  if (b.size() != f.dim()) {
    throw DimensionMismatch("solve: right-hand side size mismatch");
  }
  VecX<Scalar> y =
      f.lower().template triangularView<Eigen::Lower>().solve(b);
  f.lower().transpose().template triangularView<Eigen::Upper>().solveInPlace(
      y);
  return y;
}

/// vᵀ A⁻¹ v given the factor of A, as the squared norm of L⁻¹ v.
template <typename Scalar>
Scalar quad_form_inv(const CholFactor<Scalar>& f, const VecX<Scalar>& v) {
  if (v.size() != f.dim()) {
    throw DimensionMismatch("quad_form_inv: vector size mismatch");
  }
  VecX<Scalar> y =
      f.lower().template triangularView<Eigen::Lower>().solve(v);
  return y.squaredNorm();
}

/// Smallest eigenvalue of (b - a); nonnegative (up to tolerance) iff a ⪯ b.
template <typename Scalar>
Scalar psd_margin(const SymMatrix<Scalar>& a, const SymMatrix<Scalar>& b) {
  if (a.dim() != b.dim()) {
    throw DimensionMismatch("psd_margin: dimension mismatch");
  }
  Eigen::SelfAdjointEigenSolver<MatX<Scalar>> es(b.mat() - a.mat(),
                                                 Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// Loewner order test a ⪯ b within tolerance. The default tolerance scales
/// with the Frobenius norm of b.
template <typename Scalar>
bool psd_order_leq(const SymMatrix<Scalar>& a, const SymMatrix<Scalar>& b,
                   Scalar tol = Scalar(-1)) {
  if (tol < Scalar(0)) tol = default_psd_tol<Scalar>(b.mat());
  return psd_margin(a, b) >= -tol;
}

}  // namespace snm

#endif  // SNM_LINALG_HPP

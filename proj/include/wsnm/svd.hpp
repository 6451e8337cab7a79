#pragma once

// Thin SVD by one-sided (Hestenes) Jacobi rotations.
//
// Columns are orthogonalized pairwise in a fixed cyclic order (0,1), (0,2),
// ..., (n-2,n-1), so the result depends only on the input bits. Singular
// values come out non-ascending; ties keep original column order.
//
// By default the input is first reduced by a column-pivoted Householder QR,
// A P = Q R, and the rotations run on R^T, which needs far fewer sweeps.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/QR>

#include "wsnm/types.hpp"

namespace wsnm {

template <typename Scalar>
struct SvdFactors {
  Matrix<Scalar> U;  // m x r
  Vector<Scalar> singular_values;
  Matrix<Scalar> V;  // n x r

  Eigen::Index rank() const { return singular_values.size(); }

  Matrix<Scalar> reconstruct() const {
    return U * singular_values.asDiagonal() * V.transpose();
  }
};

struct SvdOptions {
  int max_sweeps = 80;
  bool qr_precondition = true;
};

/// Thrown when the sweep budget runs out; carries the achieved off-diagonal
/// measure max |<a_i,a_j>| / (|a_i| |a_j|).
class SvdNoConvergence : public SolverError {
 public:
  explicit SvdNoConvergence(double off_norm)
      : SolverError("jacobi svd did not converge, off-diagonal " + std::to_string(off_norm)),
        off_norm_(off_norm) {}
  double off_norm() const { return off_norm_; }

 private:
  double off_norm_;
};

namespace detail {

// [a_i a_j] <- [c*a_i - s*a_j, s*a_i + c*a_j]
template <typename Scalar>
inline void rotate_columns(Matrix<Scalar>& A, Eigen::Index i, Eigen::Index j, Scalar c, Scalar s) {
  Scalar* __restrict a = A.col(i).data();
  Scalar* __restrict b = A.col(j).data();
  const Eigen::Index rows = A.rows();
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Scalar x = a[r];
    const Scalar y = b[r];
    a[r] = c * x - s * y;
    b[r] = s * x + c * y;
  }
}

// Orthogonalizes the columns of W in place (m >= n assumed) and accumulates
// the right rotations into V. Returns the number of sweeps used.
template <typename Scalar>
int jacobi_orthogonalize(Matrix<Scalar>& W, Matrix<Scalar>& V, const SvdOptions& opts) {
  using std::abs;
  using std::sqrt;
  const Eigen::Index n = W.cols();
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  const Scalar tol = eps * Scalar(W.rows());
  Vector<Scalar> sq(n);

  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    for (Eigen::Index k = 0; k < n; ++k) sq(k) = W.col(k).squaredNorm();
    // columns below the null threshold of jacobi_factor are left alone; their
    // directions are rounding noise and rotating them need not settle
    const Scalar null_scale = eps * Scalar(W.rows());
    const Scalar null_sq = (n > 0 ? sq.maxCoeff() : Scalar(0)) * null_scale * null_scale;
    Scalar off = 0;
    bool rotated = false;
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const Scalar alpha = sq(i);
        const Scalar beta = sq(j);
        if (alpha <= null_sq || beta <= null_sq) continue;
        const Scalar gamma = W.col(i).dot(W.col(j));
        const Scalar cosine = abs(gamma) / (sqrt(alpha) * sqrt(beta));
        off = std::max(off, cosine);
        if (cosine <= tol) continue;

        const Scalar zeta = (beta - alpha) / (Scalar(2) * gamma);
        const Scalar t = (zeta >= 0 ? Scalar(1) : Scalar(-1)) / (abs(zeta) + sqrt(Scalar(1) + zeta * zeta));
        const Scalar c = Scalar(1) / sqrt(Scalar(1) + t * t);
        const Scalar s = c * t;
        rotate_columns(W, i, j, c, s);
        rotate_columns(V, i, j, c, s);
        sq(i) = alpha - t * gamma;
        sq(j) = beta + t * gamma;
        // the updates cancel badly once a column shrinks a lot; recompute then
        if (!(sq(i) > Scalar(0.25) * alpha)) sq(i) = W.col(i).squaredNorm();
        if (!(sq(j) > Scalar(0.25) * beta)) sq(j) = W.col(j).squaredNorm();
        rotated = true;
      }
    }
    if (!rotated) return sweep + 1;
    if (sweep + 1 == opts.max_sweeps) throw SvdNoConvergence(static_cast<double>(off));
  }
  return opts.max_sweeps;
}

// Fills column k of U (assumed numerically null) with a unit vector orthogonal
// to all columns in `filled`, trying canonical basis vectors in order.
template <typename Scalar>
void complete_basis_column(Matrix<Scalar>& U, Eigen::Index k, const std::vector<Eigen::Index>& filled) {
  const Eigen::Index m = U.rows();
  for (Eigen::Index e = 0; e < m; ++e) {
    Vector<Scalar> v = Vector<Scalar>::Unit(m, e);
    // two passes of Gram-Schmidt
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index f : filled) v -= U.col(f).dot(v) * U.col(f);
    const Scalar nv = v.norm();
    if (nv > Scalar(0.5)) {
      U.col(k) = v / nv;
      return;
    }
  }
}

// Sign convention: the largest-magnitude entry of each U column is non-negative.
template <typename Scalar>
void fix_signs(SvdFactors<Scalar>& f) {
  for (Eigen::Index k = 0; k < f.rank(); ++k) {
    Eigen::Index imax = 0;
    f.U.col(k).cwiseAbs().maxCoeff(&imax);
    if (f.U(imax, k) < Scalar(0)) {
      f.U.col(k) = -f.U.col(k);
      f.V.col(k) = -f.V.col(k);
    }
  }
}

// Runs the rotations on W (m x n, m >= n). Returns the sorted singular values
// with W's normalized columns as the left factor and the accumulated
// rotations as the right factor.
template <typename Scalar>
SvdFactors<Scalar> jacobi_factor(Matrix<Scalar> W, Matrix<Scalar> V, const SvdOptions& opts) {
  const Eigen::Index m = W.rows();
  const Eigen::Index n = W.cols();
  jacobi_orthogonalize(W, V, opts);

  Vector<Scalar> norms(n);
  for (Eigen::Index k = 0; k < n; ++k) norms(k) = W.col(k).norm();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return norms(a) > norms(b); });

  SvdFactors<Scalar> out;
  out.U.resize(m, n);
  out.V.resize(n, n);
  out.singular_values.resize(n);
  const Scalar smax = n > 0 ? norms(order.front()) : Scalar(0);
  const Scalar null_tol = smax * std::numeric_limits<Scalar>::epsilon() * Scalar(m);
  std::vector<Eigen::Index> filled;
  std::vector<Eigen::Index> null_cols;
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.singular_values(k) = norms(src);
    out.V.col(k) = V.col(src);
    if (norms(src) > null_tol && norms(src) > Scalar(0)) {
      out.U.col(k) = W.col(src) / norms(src);
      filled.push_back(k);
    } else {
      null_cols.push_back(k);
    }
  }
  for (Eigen::Index k : null_cols) {
    complete_basis_column(out.U, k, filled);
    filled.push_back(k);
  }
  return out;
}

template <typename Scalar>
SvdFactors<Scalar> svd_tall(const Matrix<Scalar>& A, const SvdOptions& opts) {
  if (!opts.qr_precondition || A.cols() == 0) {
    auto out = jacobi_factor<Scalar>(A, Matrix<Scalar>::Identity(A.cols(), A.cols()), opts);
    fix_signs(out);
    return out;
  }
  // A P = Q R and R^T = Ux S Vx^T give A = (Q Vx) S (P Ux)^T.
  const Eigen::Index m = A.rows();
  const Eigen::Index n = A.cols();
  Eigen::ColPivHouseholderQR<Matrix<Scalar>> qr(A);
  Matrix<Scalar> Rt = qr.matrixQR().topRows(n).template triangularView<Eigen::Upper>().transpose();
  auto inner = jacobi_factor<Scalar>(std::move(Rt), Matrix<Scalar>::Identity(n, n), opts);

  SvdFactors<Scalar> out;
  out.singular_values = std::move(inner.singular_values);
  out.U = Matrix<Scalar>::Identity(m, n);
  out.U.topRows(n) = inner.V;
  out.U.applyOnTheLeft(qr.householderQ());
  out.V = qr.colsPermutation() * inner.U;
  fix_signs(out);
  return out;
}

}  // namespace detail

/// Thin SVD of a finite matrix. Deterministic for identical input bits.
template <typename Derived>
SvdFactors<typename Derived::Scalar> svd(const Eigen::MatrixBase<Derived>& M, const SvdOptions& opts = {}) {
  using Scalar = typename Derived::Scalar;
  if (!M.allFinite()) throw DomainError("svd: matrix has non-finite entries");
  if (M.rows() >= M.cols()) return detail::svd_tall<Scalar>(M.eval(), opts);

  // wide input: factor the transpose and swap the roles of U and V
  auto t = detail::svd_tall<Scalar>(M.transpose().eval(), opts);
  SvdFactors<Scalar> out{std::move(t.V), std::move(t.singular_values), std::move(t.U)};
  detail::fix_signs(out);
  return out;
}

/// Thin SVD of a matrix with rows >= cols, starting the rotations from an
/// approximate right factor V0 (n x n), e.g. the previous iterate's V in an
/// iterative solver. V0 is re-orthonormalized first, so any full-rank guess
/// gives a valid SVD; a close one needs fewer sweeps.
template <typename Derived, typename DerivedV>
SvdFactors<typename Derived::Scalar> svd_warm(const Eigen::MatrixBase<Derived>& M,
                                              const Eigen::MatrixBase<DerivedV>& V0,
                                              const SvdOptions& opts = {}) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = M.cols();
  if (M.rows() < n) throw DimensionMismatch("svd_warm: needs rows >= cols");
  detail::require_same_shape(V0.rows(), V0.cols(), n, n, "svd_warm");
  if (!M.allFinite()) throw DomainError("svd: matrix has non-finite entries");
  if (!V0.allFinite()) throw DomainError("svd_warm: guess has non-finite entries");
  Eigen::HouseholderQR<Matrix<Scalar>> qr(V0.eval());
  Matrix<Scalar> Q = Matrix<Scalar>::Identity(n, n);
  Q.applyOnTheLeft(qr.householderQ());
  Matrix<Scalar> W = M * Q;
  auto out = detail::jacobi_factor<Scalar>(std::move(W), std::move(Q), opts);
  detail::fix_signs(out);
  return out;
}

template <typename Derived>
Vector<typename Derived::Scalar> singular_values(const Eigen::MatrixBase<Derived>& M) {
  return svd(M).singular_values;
}

}  // namespace wsnm

#pragma once

// Weighted Schatten p-norm and its proximal operator.
//
// For Y = U diag(sigma) V^T and weights w_1 <= ... <= w_r, the minimizer of
//
//     a ||X - Y||_F^2 + sum_i w_i sigma_i(X)^p
//
// is U diag(delta) V^T with delta_i = GST(sigma_i, w_i / (2a), p). The
// non-descending weight order guarantees the decoupled deltas stay sorted,
// which is what makes the per-value solution globally optimal. Weights in any
// other order are rejected unless the caller opts out explicitly.

#include <algorithm>
#include <string>
#include <utility>

#include "wsnm/gst.hpp"
#include "wsnm/svd.hpp"
#include "wsnm/types.hpp"

namespace wsnm {

/// Non-negative per-singular-value weights. `certified()` is true once the
/// weights have been checked to be non-descending.
template <typename Scalar>
class WeightVector {
 public:
  WeightVector() = default;

  /// Validates non-negativity and records whether the order is non-descending.
  explicit WeightVector(Vector<Scalar> weights) : weights_(std::move(weights)) {
    for (Eigen::Index i = 0; i < weights_.size(); ++i) {
      if (!(weights_(i) >= Scalar(0)) || !std::isfinite(static_cast<double>(weights_(i)))) {
        throw DomainError("WeightVector: weight " + std::to_string(i) + " is negative or non-finite");
      }
    }
    certified_ = true;
    for (Eigen::Index i = 1; i < weights_.size(); ++i) {
      if (weights_(i) < weights_(i - 1)) {
        certified_ = false;
        break;
      }
    }
  }

  static WeightVector uniform(Eigen::Index r, Scalar value) {
    return WeightVector(Vector<Scalar>::Constant(r, value));
  }

  const Vector<Scalar>& values() const { return weights_; }
  Eigen::Index size() const { return weights_.size(); }
  Scalar operator()(Eigen::Index i) const { return weights_(i); }
  bool certified() const { return certified_; }

 private:
  Vector<Scalar> weights_;
  bool certified_ = false;
};

enum class WeightOrder {
  kRequireNonDescending,
  /// Accept any order; the result is then only a stationary candidate.
  kAllowUncertified,
};

template <typename Scalar>
struct ProxResult {
  Matrix<Scalar> X;
  Vector<Scalar> sigma_in;   // singular values of the input
  Vector<Scalar> sigma_out;  // shrunk values, same order
};

namespace detail {

template <typename Scalar>
void check_weights_for(Eigen::Index r, const WeightVector<Scalar>& w, const char* where) {
  if (w.size() != r) {
    throw DimensionMismatch(std::string(where) + ": expected " + std::to_string(r) +
                            " weights, got " + std::to_string(w.size()));
  }
}

}  // namespace detail

/// sum_i w_i sigma_i(M)^p, i.e. the weighted Schatten p-norm raised to p.
template <typename Derived, typename Scalar = typename Derived::Scalar>
Scalar weighted_schatten_norm_p(const Eigen::MatrixBase<Derived>& M, const WeightVector<Scalar>& w,
                                Scalar p) {
  using std::pow;
  detail::check_power(p, "weighted_schatten_norm_p");
  const Eigen::Index r = std::min(M.rows(), M.cols());
  detail::check_weights_for(r, w, "weighted_schatten_norm_p");
  const Vector<Scalar> s = singular_values(M);
  Scalar total = 0;
  for (Eigen::Index i = 0; i < r; ++i) total += w(i) * pow(s(i), p);
  return total;
}

/// Shrinks singular values already in non-ascending order. Each slot is
/// written independently, so a parallel loop gives identical bits.
template <typename Scalar>
Vector<Scalar> shrink_singular_values(const Vector<Scalar>& sigma, const WeightVector<Scalar>& w, Scalar p,
                                      Scalar fidelity_scale, int inner_iters = kGstSolverIters) {
  Vector<Scalar> delta(sigma.size());
  const Scalar to_lambda = Scalar(1) / (Scalar(2) * fidelity_scale);
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    delta(i) = gst_solve(sigma(i), w(i) * to_lambda, p, inner_iters);
  }
  return delta;
}

/// Full prox with diagnostics: returns X together with the singular values
/// before and after shrinkage.
template <typename Derived, typename Scalar = typename Derived::Scalar>
ProxResult<Scalar> wsnm_prox_full(const Eigen::MatrixBase<Derived>& Y, const WeightVector<Scalar>& w, Scalar p,
                                  Scalar fidelity_scale,
                                  WeightOrder order = WeightOrder::kRequireNonDescending,
                                  int inner_iters = kGstSolverIters) {
  detail::check_power(p, "wsnm_prox");
  if (!(fidelity_scale > Scalar(0))) throw DomainError("wsnm_prox: fidelity scale must be positive");
  const Eigen::Index r = std::min(Y.rows(), Y.cols());
  detail::check_weights_for(r, w, "wsnm_prox");
  if (order == WeightOrder::kRequireNonDescending && !w.certified()) {
    throw DomainError("wsnm_prox: weights are not non-descending; the decoupled solution is not optimal");
  }
  auto f = svd(Y);
  ProxResult<Scalar> out;
  out.sigma_out = shrink_singular_values(f.singular_values, w, p, fidelity_scale, inner_iters);
  out.X = f.U * out.sigma_out.asDiagonal() * f.V.transpose();
  out.sigma_in = std::move(f.singular_values);
  return out;
}

/// argmin_X  a ||X - Y||_F^2 + ||X||_{w,S_p}^p  with a = fidelity_scale.
template <typename Derived, typename Scalar = typename Derived::Scalar>
Matrix<Scalar> wsnm_prox(const Eigen::MatrixBase<Derived>& Y, const WeightVector<Scalar>& w, Scalar p,
                         Scalar fidelity_scale, WeightOrder order = WeightOrder::kRequireNonDescending) {
  return wsnm_prox_full(Y, w, p, fidelity_scale, order).X;
}

/// Objective minimized by wsnm_prox, evaluated at X.
template <typename DerivedX, typename DerivedY, typename Scalar = typename DerivedX::Scalar>
Scalar wsnm_objective(const Eigen::MatrixBase<DerivedX>& X, const Eigen::MatrixBase<DerivedY>& Y,
                      const WeightVector<Scalar>& w, Scalar p, Scalar fidelity_scale) {
  detail::require_same_shape(X.rows(), X.cols(), Y.rows(), Y.cols(), "wsnm_objective");
  return fidelity_scale * (X - Y).squaredNorm() + weighted_schatten_norm_p(X, w, p);
}

/// (tr(A^T B), sum_i sigma_i(A) sigma_i(B)); the first never exceeds the second.
template <typename DerivedA, typename DerivedB, typename Scalar = typename DerivedA::Scalar>
std::pair<Scalar, Scalar> von_neumann_gap(const Eigen::MatrixBase<DerivedA>& A,
                                          const Eigen::MatrixBase<DerivedB>& B) {
  detail::require_same_shape(A.rows(), A.cols(), B.rows(), B.cols(), "von_neumann_gap");
  const Scalar trace = (A.transpose() * B).trace();
  const Scalar bound = singular_values(A).dot(singular_values(B));
  return {trace, bound};
}

}  // namespace wsnm

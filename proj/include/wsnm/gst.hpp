#pragma once

// Generalized soft-thresholding (GST).
//
// Solves the scalar problem
//
//     min_{delta >= 0}  1/2 (delta - |sigma|)^2 + lambda * delta^p,   0 < p <= 1,
//
// exactly: a closed-form dead-zone threshold decides whether the minimizer is
// zero, otherwise a short fixed-point iteration on the stationarity condition
// delta = |sigma| - lambda p delta^(p-1) converges to the nonzero minimizer.
//
// Convention: the quadratic carries a factor 1/2. A caller whose objective is
// a (delta - sigma)^2 + w delta^p must pass lambda = w / (2a).

#include <cmath>
#include <string>

#include "wsnm/types.hpp"

namespace wsnm {

inline constexpr int kGstSolverIters = 8;
inline constexpr int kGstDiagnosticIters = 30;

template <typename Scalar>
struct GstParams {
  Scalar p = Scalar(1);
  int inner_iters = kGstSolverIters;
};

namespace detail {

template <typename Scalar>
void check_power(Scalar p, const char* where) {
  if (!(p > Scalar(0) && p <= Scalar(1))) {
    throw DomainError(std::string(where) + ": power p must lie in (0,1], got " +
                      std::to_string(static_cast<double>(p)));
  }
}

template <typename Scalar>
void check_weight(Scalar lambda, const char* where) {
  if (!(lambda >= Scalar(0)) || !std::isfinite(static_cast<double>(lambda))) {
    throw DomainError(std::string(where) + ": weight must be finite and non-negative, got " +
                      std::to_string(static_cast<double>(lambda)));
  }
}

template <typename Scalar>
inline constexpr Scalar kIterateFloor = Scalar(1e-12);

}  // namespace detail

/// Dead-zone threshold: |sigma| at or below it shrinks to exactly zero.
template <typename Scalar>
Scalar gst_threshold(Scalar lambda, Scalar p) {
  using std::pow;
  detail::check_power(p, "gst_threshold");
  detail::check_weight(lambda, "gst_threshold");
  if (lambda == Scalar(0)) return Scalar(0);
  if (p == Scalar(1)) return lambda;  // the general formula is 0^0 here
  const Scalar base = Scalar(2) * lambda * (Scalar(1) - p);
  return pow(base, Scalar(1) / (Scalar(2) - p)) +
         lambda * p * pow(base, (p - Scalar(1)) / (Scalar(2) - p));
}

/// Global minimizer of 1/2 (delta - |sigma|)^2 + lambda delta^p, with the sign
/// of sigma restored.
template <typename Scalar>
Scalar gst_solve(Scalar sigma, Scalar lambda, Scalar p, int inner_iters = kGstSolverIters) {
  using std::abs;
  using std::max;
  using std::pow;
  if (!std::isfinite(static_cast<double>(sigma))) throw DomainError("gst_solve: non-finite sigma");
  if (inner_iters < 1) throw DomainError("gst_solve: inner iteration count must be >= 1");
  const Scalar tau = gst_threshold(lambda, p);
  const Scalar mag = abs(sigma);
  if (mag <= tau) return Scalar(0);

  Scalar delta;
  if (p == Scalar(1)) {
    delta = mag - lambda;
  } else {
    delta = mag;
    for (int k = 0; k < inner_iters; ++k) {
      delta = mag - lambda * p * pow(max(delta, detail::kIterateFloor<Scalar>), p - Scalar(1));
    }
    delta = max(delta, detail::kIterateFloor<Scalar>);
  }
  return sigma < Scalar(0) ? -delta : delta;
}

template <typename Scalar>
Scalar gst_solve(Scalar sigma, Scalar lambda, const GstParams<Scalar>& params) {
  return gst_solve(sigma, lambda, params.p, params.inner_iters);
}

/// delta - |sigma| + lambda p delta^(p-1); vanishes at the nonzero minimizer.
template <typename Scalar>
Scalar gst_stationarity_residual(Scalar delta, Scalar sigma, Scalar lambda, Scalar p) {
  using std::abs;
  using std::pow;
  if (!(delta > Scalar(0))) throw DomainError("gst_stationarity_residual: delta must be positive");
  detail::check_power(p, "gst_stationarity_residual");
  return delta - abs(sigma) + lambda * p * pow(delta, p - Scalar(1));
}

/// The scalar objective 1/2 (delta - |sigma|)^2 + lambda |delta|^p.
template <typename Scalar>
Scalar gst_objective(Scalar delta, Scalar sigma, Scalar lambda, Scalar p) {
  using std::abs;
  using std::pow;
  const Scalar d = abs(delta) - abs(sigma);
  return Scalar(0.5) * d * d + lambda * pow(abs(delta), p);
}

}  // namespace wsnm

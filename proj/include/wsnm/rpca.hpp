#pragma once

// Robust PCA, Y = X + E with X low rank and E sparse, solved by inexact
// augmented-Lagrangian alternation. The low-rank step is the WSNM proximal
// operator; nnm_rpca is the nuclear-norm baseline.

#include <optional>
#include <string>
#include <vector>

#include "wsnm/prox.hpp"
#include "wsnm/types.hpp"

namespace wsnm {

enum class WeightMode {
  kReweighted,  // weights from the spectrum of each X-step target
  kFixedFromY,  // weights from the spectrum of Y, computed once
  kUniform,     // every weight equal to RpcaConfig::uniform_weight
};

std::string to_string(WeightMode mode);
WeightMode weight_mode_from_string(const std::string& name);

struct RpcaConfig {
  double p = 0.7;
  std::optional<double> C;    // 10^{1/p} when unset
  std::optional<double> mu0;  // 1 / ||Y||_2 when unset
  double rho = 1.2;
  double tol = 1e-7;
  // Iteration also continues until the squared step falls below this. Zero
  // disables the check.
  double step_tol = 1e-10;
  int max_iters = 500;
  WeightMode weight_mode = WeightMode::kReweighted;
  double uniform_weight = 1.0;

  void validate() const;
  double weight_scale() const;
};

struct RpcaResult {
  DenseMatrix X;
  DenseMatrix E;
  int iterations = 0;
  bool converged = false;  // false means max_iters was hit
  std::vector<double> residual_history;         // ||Y - X - E||_F / ||Y||_F
  std::vector<double> step_history;             // ||dX||_F^2 + ||dE||_F^2
  std::vector<double> multiplier_norm_history;  // ||Z||_F after the update
  int estimated_rank = 0;
};

inline constexpr double kRankRelTol = 1e-6;
inline constexpr double kWeightEps = 1e-16;

/// Entrywise sgn(m) max(|m| - tau, 0).
template <typename Derived>
Matrix<typename Derived::Scalar> soft_threshold_matrix(const Eigen::MatrixBase<Derived>& M,
                                                       typename Derived::Scalar tau) {
  using Scalar = typename Derived::Scalar;
  if (!(tau >= Scalar(0))) throw DomainError("soft_threshold_matrix: tau must be non-negative");
  return M.unaryExpr([tau](Scalar v) {
    const Scalar mag = std::abs(v) - tau;
    return mag > Scalar(0) ? (v < Scalar(0) ? -mag : mag) : Scalar(0);
  });
}

/// w_i = C sqrt(mn) / (sigma_i + eps). Non-ascending sigma gives certified weights.
WeightVector<double> rpca_weights(const DenseVector& sigma, double C, Eigen::Index m, Eigen::Index n,
                                  double eps = kWeightEps);

/// Number of singular values above rel_tol * sigma_1; 0 for the zero matrix.
int estimate_rank(const DenseMatrix& X, double rel_tol = kRankRelTol);

RpcaResult wsnm_rpca(const DenseMatrix& Y, const RpcaConfig& cfg);

/// Nuclear-norm RPCA. Uses cfg.mu0, rho, tol, step_tol and max_iters; the
/// sparse weight lambda defaults to 1 / sqrt(max(m, n)).
RpcaResult nnm_rpca(const DenseMatrix& Y, const RpcaConfig& cfg, std::optional<double> lambda = {});

}  // namespace wsnm

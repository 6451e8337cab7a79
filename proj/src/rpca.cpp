#include "wsnm/rpca.hpp"

#include <cmath>
#include <functional>
#include <limits>

#include "wsnm/svd.hpp"

namespace wsnm {

std::string to_string(WeightMode mode) {
  switch (mode) {
    case WeightMode::kReweighted: return "reweighted";
    case WeightMode::kFixedFromY: return "fixed_from_y";
    case WeightMode::kUniform: return "uniform";
  }
  return "unknown";
}

WeightMode weight_mode_from_string(const std::string& name) {
  if (name == "reweighted") return WeightMode::kReweighted;
  if (name == "fixed_from_y") return WeightMode::kFixedFromY;
  if (name == "uniform") return WeightMode::kUniform;
  throw DomainError("unknown weight_mode '" + name + "' (expected reweighted, fixed_from_y or uniform)");
}

void RpcaConfig::validate() const {
  if (!(p > 0.0 && p <= 1.0)) throw DomainError("p must lie in (0, 1]");
  if (C && !(*C >= 0.0 && std::isfinite(*C))) throw DomainError("C must be non-negative");
  if (mu0 && !(*mu0 > 0.0 && std::isfinite(*mu0))) throw DomainError("mu0 must be positive");
  if (!(rho > 1.0)) throw DomainError("rho must be greater than 1");
  if (!(tol > 0.0)) throw DomainError("tol must be positive");
  if (!(step_tol >= 0.0)) throw DomainError("step_tol must be non-negative");
  if (max_iters < 1) throw DomainError("max_iters must be at least 1");
  if (!(uniform_weight >= 0.0)) throw DomainError("uniform_weight must be non-negative");
}

double RpcaConfig::weight_scale() const { return C ? *C : std::pow(10.0, 1.0 / p); }

WeightVector<double> rpca_weights(const DenseVector& sigma, double C, Eigen::Index m, Eigen::Index n,
                                  double eps) {
  const double scale = C * std::sqrt(static_cast<double>(m) * static_cast<double>(n));
  DenseVector w(sigma.size());
  for (Eigen::Index i = 0; i < sigma.size(); ++i) w(i) = scale / (sigma(i) + eps);
  return WeightVector<double>(std::move(w));
}

int estimate_rank(const DenseMatrix& X, double rel_tol) {
  if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw DomainError("estimate_rank: rel_tol must lie in (0, 1)");
  if (X.size() == 0) return 0;
  const DenseVector s = singular_values(X);
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) rank += s(i) > rel_tol * s(0) ? 1 : 0;
  return rank;
}

namespace {

// Low-rank step: returns the shrunk singular values for the target's spectrum.
using Shrinker = std::function<DenseVector(const DenseVector& sigma, double mu)>;

RpcaResult run_alm(const DenseMatrix& Y, const RpcaConfig& cfg, double sparse_weight, const Shrinker& shrink) {
  if (!Y.allFinite()) throw DomainError("rpca: observation contains non-finite entries");
  RpcaResult out;
  const double y_norm = Y.norm();
  if (y_norm == 0.0) {
    out.X = DenseMatrix::Zero(Y.rows(), Y.cols());
    out.E = DenseMatrix::Zero(Y.rows(), Y.cols());
    out.iterations = 1;
    out.converged = true;
    out.residual_history = {0.0};
    out.step_history = {0.0};
    out.multiplier_norm_history = {0.0};
    return out;
  }

  double mu = cfg.mu0 ? *cfg.mu0 : 1.0 / singular_values(Y)(0);
  DenseMatrix X = Y;
  DenseMatrix E = DenseMatrix::Zero(Y.rows(), Y.cols());
  DenseMatrix Z = DenseMatrix::Zero(Y.rows(), Y.cols());
  // consecutive X-step targets are close, so the previous right factor is a
  // good starting point for the rotations
  const bool warm = Y.rows() >= Y.cols();
  DenseMatrix V_prev;

  for (int k = 1; k <= cfg.max_iters; ++k) {
    const DenseMatrix Y_plus = Y + Z / mu;
    DenseMatrix E_next = soft_threshold_matrix(Y_plus - X, sparse_weight / mu);

    DenseMatrix X_next;
    try {
      auto f = warm && V_prev.size() > 0 ? svd_warm(Y_plus - E_next, V_prev) : svd(Y_plus - E_next);
      const DenseVector delta = shrink(f.singular_values, mu);
      X_next = f.U * delta.asDiagonal() * f.V.transpose();
      if (warm) V_prev = std::move(f.V);
    } catch (const DomainError& e) {
      throw SolverError("rpca: iteration " + std::to_string(k) + ": " + e.what());
    } catch (const SvdNoConvergence& e) {
      throw SolverError("rpca: iteration " + std::to_string(k) + ": " + e.what());
    }

    const DenseMatrix gap = Y - X_next - E_next;
    Z += mu * gap;
    if (!X_next.allFinite() || !E_next.allFinite() || !Z.allFinite()) {
      throw SolverError("rpca: non-finite iterate at iteration " + std::to_string(k));
    }

    const double residual = gap.norm() / y_norm;
    const double step = (X_next - X).squaredNorm() + (E_next - E).squaredNorm();
    out.residual_history.push_back(residual);
    out.step_history.push_back(step);
    out.multiplier_norm_history.push_back(Z.norm());
    X = std::move(X_next);
    E = std::move(E_next);
    out.iterations = k;
    mu *= cfg.rho;

    if (residual <= cfg.tol && step <= cfg.step_tol) {
      out.converged = true;
      break;
    }
  }

  out.estimated_rank = estimate_rank(X);
  out.X = std::move(X);
  out.E = std::move(E);
  return out;
}

}  // namespace

RpcaResult wsnm_rpca(const DenseMatrix& Y, const RpcaConfig& cfg) {
  cfg.validate();
  const double p = cfg.p;
  const double C = cfg.weight_scale();
  const Eigen::Index m = Y.rows();
  const Eigen::Index n = Y.cols();
  const Eigen::Index r = std::min(m, n);

  WeightVector<double> fixed;
  if (cfg.weight_mode == WeightMode::kFixedFromY) fixed = rpca_weights(singular_values(Y), C, m, n);
  if (cfg.weight_mode == WeightMode::kUniform) fixed = WeightVector<double>::uniform(r, cfg.uniform_weight);

  auto shrink = [&](const DenseVector& sigma, double mu) {
    // a = mu / 2, so each value sees lambda = w / mu.
    if (cfg.weight_mode == WeightMode::kReweighted) {
      return shrink_singular_values(sigma, rpca_weights(sigma, C, m, n), p, mu / 2.0);
    }
    return shrink_singular_values(sigma, fixed, p, mu / 2.0);
  };
  return run_alm(Y, cfg, 1.0, shrink);
}

RpcaResult nnm_rpca(const DenseMatrix& Y, const RpcaConfig& cfg, std::optional<double> lambda) {
  cfg.validate();
  const double lam = lambda ? *lambda : 1.0 / std::sqrt(static_cast<double>(std::max(Y.rows(), Y.cols())));
  if (!(lam > 0.0)) throw DomainError("nnm_rpca: lambda must be positive");
  auto shrink = [](const DenseVector& sigma, double mu) -> DenseVector {
    return (sigma.array() - 1.0 / mu).max(0.0).matrix();
  };
  return run_alm(Y, cfg, lam, shrink);
}

}  // namespace wsnm

#pragma once

// Nonlocal patch-group denoising: block matching, per-group WSNM shrinkage
// with noise-adaptive weights, uniform aggregation and iterative
// regularization.

#include <cstdint>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "wsnm/image.hpp"
#include "wsnm/prox.hpp"
#include "wsnm/types.hpp"

namespace wsnm {

struct NoiseSpec {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Adds i.i.d. N(0, sigma^2) noise from a seeded splitmix64 stream. Not clamped.
GrayImage add_gaussian_noise(const GrayImage& img, const NoiseSpec& spec);

/// Power by noise level: <= 20 -> 1.0, <= 30 -> 0.85, <= 50 -> 0.75,
/// <= 60 -> 0.7, <= 75 -> 0.1, otherwise 0.05.
double select_power(double sigma_n);

inline constexpr double kDefaultWeightConstant = 2.0 * std::numbers::sqrt2;

struct DenoiseConfig {
  double sigma_n = 0.0;
  double p = 1.0;
  int K = 8;             // outer iterations
  double alpha = 0.1;    // iterative regularization
  int patch_size = 6;
  int group_size = 70;   // patches per group
  int search_window = 30;
  int key_patch_step = 3;
  // Weight constant, kDefaultWeightConstant when unset. Together with the
  // default fidelity the shrinkage threshold is sqrt(2) sigma^2 sqrt(n) / delta^(1/p).
  std::optional<double> c;
  // Fidelity a in a ||Y - X||^2; 1 / sigma^2 of the working noise level when unset.
  std::optional<double> fidelity_scale;
  // Working noise level after the first pass:
  // gamma * sqrt(max(sigma_n^2 - mean((y - y_k)^2), 0)).
  bool reestimate_noise = true;
  double gamma = 1.0;
  bool subtract_group_mean = false;
  int threads = 1;

  /// Bucketed defaults for the given noise level, with p from select_power.
  static DenoiseConfig for_noise_level(double sigma_n);
  void validate() const;
};

struct PatchGroup {
  DenseMatrix matrix;  // patch_size^2 x n, one row-major vectorized patch per column
  std::vector<std::pair<int, int>> positions;  // (row, col) top-left corners
  int reference_index = 0;
  int patch_size = 0;
};

/// Extracts the patch with top-left corner (row, col) as a row-major vector.
DenseVector extract_patch(const GrayImage& img, int row, int col, int patch_size);

/// The group_size candidates closest to the anchor patch (squared Euclidean
/// distance), searched over top-left corners within +-search_window/2 of the
/// anchor's, clipped to the image. The anchor is always first; ties go in
/// raster order.
PatchGroup block_match(const GrayImage& img, std::pair<int, int> anchor, const DenoiseConfig& cfg);

/// delta_j = sqrt(max(sigma_j^2 - n sigma_n^2, 0)), w_j = c sqrt(n) / (delta_j^{1/p} + eps).
WeightVector<double> estimate_group_weights(const DenseVector& sigma_vals, double sigma_n, int n, double p,
                                            double c, double eps = 1e-16);

struct GroupShrinkage {
  double sigma_n = 0.0;
  double p = 1.0;
  double c = 0.0;
  double fidelity_scale = 0.0;
  bool subtract_mean = false;
};

/// wsnm_prox of the group matrix with weights from estimate_group_weights.
/// sigma_n == 0 returns the input unchanged.
DenseMatrix denoise_patch_group(const PatchGroup& group, const GroupShrinkage& params);
/// Shorthand with a = 1 / sigma_n^2.
DenseMatrix denoise_patch_group(const PatchGroup& group, double sigma_n, double p, double c);

/// Averages every patch estimate into its pixels. Pixels no patch covers keep
/// the value from `fallback` (or 0 when it is empty).
GrayImage aggregate(const std::vector<PatchGroup>& groups, int width, int height, const GrayImage& fallback = {});

/// x_prev + alpha (y - x_prev).
GrayImage iterate_regularization(const GrayImage& y, const GrayImage& x_prev, double alpha);

/// Top-left corners of key patches along one axis: 0, step, ... plus the last
/// valid position so the border is covered.
std::vector<int> key_positions(int extent, int patch_size, int step);

struct DenoiseTrace {
  std::vector<double> working_sigma;  // per outer iteration
};

/// Runs cfg.K outer iterations; the result is clamped to [0, 255].
GrayImage denoise_image(const GrayImage& y, const DenoiseConfig& cfg, DenoiseTrace* trace = nullptr);

}  // namespace wsnm

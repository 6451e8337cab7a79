#pragma once

// Synthetic low-rank plus sparse benchmarks, recovery metrics, table and
// phase-diagram sweeps, and foreground metrics for background subtraction.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "wsnm/image.hpp"
#include "wsnm/rpca.hpp"
#include "wsnm/types.hpp"

namespace wsnm {

struct SyntheticSpec {
  int m = 150;
  double rank_fraction = 0.05;
  double corruption_fraction = 0.05;
  double corruption_magnitude = 50.0;  // half-range of the uniform outliers
  std::uint64_t seed = 0;

  int rank() const;
  Eigen::Index corrupted_count() const;
  void validate() const;
};

struct SyntheticData {
  DenseMatrix X;  // low-rank ground truth
  DenseMatrix E;  // sparse outliers
  DenseMatrix Y;  // X + E
};

/// X = A B^T with N(0,1) factors of rank round(m P_r); E has exactly
/// round(m^2 P_e) nonzeros, uniform on [-mag, mag], at Fisher-Yates-sampled
/// positions. Draw order: A, then B (column-major), then positions, then values.
SyntheticData gen_lowrank_sparse(const SyntheticSpec& spec);

struct RelativeError {
  double linear = 0.0;  // ||X_hat - X||_F^2 / ||X||_F^2
  double log = 0.0;     // natural log of linear; -inf when exact
};

RelativeError log_relative_error(const DenseMatrix& X_hat, const DenseMatrix& X);

struct MethodSpec {
  enum class Kind { kNnm, kWsnm };
  Kind kind = Kind::kWsnm;
  RpcaConfig config;  // p, C and weight mode are used by WSNM only

  static MethodSpec nnm(const RpcaConfig& base = {});
  static MethodSpec wsnm(double p, const RpcaConfig& base = {});
  /// "nnm" or "wsnm_p<p>", e.g. "wsnm_p0.7".
  std::string name() const;
  RpcaResult run(const DenseMatrix& Y) const;
};

/// Parses "nnm", "wsnm" (p = 0.7) or "wsnm_p<p>".
MethodSpec parse_method(const std::string& name, const RpcaConfig& base = {});

struct RunRecord {
  double p_r = 0.0;
  double p_e = 0.0;
  std::string method;
  int repeat = 0;
  double rel_err = 0.0;
  double log_rel_err = 0.0;
  int est_rank = 0;
  int iters = 0;
  double seconds = 0.0;
  bool converged = false;
  std::string failure;  // solver error text; empty on success
  // convergence diagnostics from the solver histories
  double final_residual = 0.0;
  double final_step = 0.0;
  int multiplier_peak_iter = 0;  // 0-based iteration of max ||Z_k||_F (first on ties)
  double multiplier_tail_growth = 0.0;  // (||Z_last|| - ||Z_{last-20}||) / ||Z_last||, 0 for short runs
};

struct CellSummary {
  double p_r = 0.0;
  double p_e = 0.0;
  std::string method;
  int repeats = 0;
  int failures = 0;
  double mean_rel_err = 0.0;
  double mean_log_rel_err = 0.0;
  double mean_rank = 0.0;
  bool success = false;  // mean_rel_err <= threshold and no failed repeat
};

struct SweepReport {
  std::vector<RunRecord> runs;
  std::vector<CellSummary> cells;

  int success_count(const std::string& method) const;
  const CellSummary* find(double p_r, double p_e, const std::string& method) const;
  /// Header p_r,p_e,method,repeat,rel_err,log_rel_err,est_rank,iters,seconds;
  /// floats with 9 significant digits. With timings off the seconds column is 0.
  void write_csv(std::ostream& out, bool timings = true) const;
  /// Header p_r,p_e,method,repeat,converged,iters,final_residual,final_step,
  /// multiplier_peak_iter,multiplier_tail_growth; same number format.
  void write_diagnostics_csv(std::ostream& out) const;
};

inline constexpr double kSuccessThreshold = 1e-4;

struct SweepOptions {
  int m = 150;
  std::vector<double> rank_fractions;
  std::vector<double> corruption_fractions;
  int repeats = 3;
  std::vector<MethodSpec> methods;
  std::uint64_t base_seed = 0;
  double corruption_magnitude = 50.0;
  double success_threshold = kSuccessThreshold;
  int threads = 1;
};

/// Evaluates every (P_r, P_e, repeat) cell; all methods see the same data,
/// seeded by derive_seed(base_seed, i_r, i_e, repeat). Solver failures are
/// recorded in the run, not thrown.
SweepReport run_phase_sweep(const SweepOptions& opts);

/// Table rows: ranks are absolute (P_r = rank / m) at one corruption level.
SweepReport run_table(int m, const std::vector<int>& ranks, double corruption_fraction, int repeats,
                      const std::vector<MethodSpec>& methods, std::uint64_t base_seed, int threads = 1);

/// lo, lo + step, ... up to hi inclusive (rounded to 1e-9 to absorb drift).
std::vector<double> fraction_grid(double lo, double hi, double step);

// Background subtraction.

/// Column j is frame j, vectorized in row-major order.
DenseMatrix video_to_matrix(const std::vector<GrayImage>& frames);
/// Inverse of video_to_matrix for one column.
GrayImage matrix_column_to_image(const DenseMatrix& M, Eigen::Index column, int width, int height);

struct ForegroundMask {
  using Pixels = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Pixels pixels;  // 0 or 1

  ForegroundMask() = default;
  ForegroundMask(int width, int height) : pixels(Pixels::Zero(height, width)) {}
  int width() const { return static_cast<int>(pixels.cols()); }
  int height() const { return static_cast<int>(pixels.rows()); }
  Eigen::Index count() const { return (pixels != 0).count(); }
  GrayImage to_image() const;
};

inline constexpr double kDefaultForegroundTheta = 3.0;

/// Weight scale C used for frame sequences in pixel units [0, 255]. Moving-box
/// sequences from 30x32 to 80x60 pixels separate cleanly for C in [1e4, 1e5].
inline constexpr double kBackgroundWeightScale = 3e4;

/// Pixel on iff |e| > theta * s, where s = 1.4826 * median |e| over all
/// entries of the columns of E that contain any nonzero. One mask per column.
std::vector<ForegroundMask> binarize_foreground(const DenseMatrix& E, int width, int height,
                                                double theta = kDefaultForegroundTheta);

/// |A n B| / |A u B|; 1 when both are empty.
double foreground_similarity(const ForegroundMask& a, const ForegroundMask& b);

/// Static textured background with a bright box moving left to right.
struct MovingBoxSequence {
  std::vector<GrayImage> frames;
  std::vector<ForegroundMask> truth;
  GrayImage background;
};

MovingBoxSequence gen_moving_box(int width, int height, int frames, int box, std::uint64_t seed);

}  // namespace wsnm

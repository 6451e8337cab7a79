#include "wsnm/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

#include "wsnm/parallel.hpp"
#include "wsnm/rng.hpp"

namespace wsnm {

int SyntheticSpec::rank() const { return static_cast<int>(std::lround(m * rank_fraction)); }

Eigen::Index SyntheticSpec::corrupted_count() const {
  return static_cast<Eigen::Index>(std::llround(static_cast<double>(m) * m * corruption_fraction));
}

void SyntheticSpec::validate() const {
  if (m < 1) throw DomainError("synthetic: m must be positive");
  if (!(rank_fraction > 0.0 && rank_fraction < 1.0)) throw DomainError("synthetic: rank fraction must lie in (0, 1)");
  if (!(corruption_fraction >= 0.0 && corruption_fraction < 1.0)) {
    throw DomainError("synthetic: corruption fraction must lie in [0, 1)");
  }
  if (!(corruption_magnitude >= 0.0)) throw DomainError("synthetic: corruption magnitude must be non-negative");
  if (rank() < 1) throw DomainError("synthetic: m * rank fraction rounds to zero");
  if (rank() >= m) throw DomainError("synthetic: rank " + std::to_string(rank()) + " is not below m");
}

SyntheticData gen_lowrank_sparse(const SyntheticSpec& spec) {
  spec.validate();
  const int m = spec.m;
  const int r = spec.rank();
  SplitMix64 rng(spec.seed);
  DenseMatrix A(m, r);
  DenseMatrix B(m, r);
  for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < B.size(); ++i) B.data()[i] = rng.normal();

  SyntheticData out;
  out.X = A * B.transpose();
  out.E = DenseMatrix::Zero(m, m);
  const Eigen::Index total = static_cast<Eigen::Index>(m) * m;
  const Eigen::Index k = spec.corrupted_count();
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(total));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  // partial Fisher-Yates: the first k slots are a uniform k-subset
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto j = i + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(total - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  const double mag = spec.corruption_magnitude;
  for (Eigen::Index i = 0; i < k; ++i) out.E.data()[idx[static_cast<std::size_t>(i)]] = rng.uniform(-mag, mag);
  out.Y = out.X + out.E;
  return out;
}

RelativeError log_relative_error(const DenseMatrix& X_hat, const DenseMatrix& X) {
  detail::require_same_shape(X_hat.rows(), X_hat.cols(), X.rows(), X.cols(), "log_relative_error");
  const double denom = X.squaredNorm();
  if (denom == 0.0) throw DomainError("log_relative_error: ground truth is zero");
  RelativeError e;
  e.linear = (X_hat - X).squaredNorm() / denom;
  e.log = e.linear == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(e.linear);
  return e;
}

MethodSpec MethodSpec::nnm(const RpcaConfig& base) {
  MethodSpec s;
  s.kind = Kind::kNnm;
  s.config = base;
  return s;
}

MethodSpec MethodSpec::wsnm(double p, const RpcaConfig& base) {
  MethodSpec s;
  s.kind = Kind::kWsnm;
  s.config = base;
  s.config.p = p;
  return s;
}

std::string MethodSpec::name() const {
  if (kind == Kind::kNnm) return "nnm";
  char buf[32];
  std::snprintf(buf, sizeof buf, "wsnm_p%g", config.p);
  return buf;
}

RpcaResult MethodSpec::run(const DenseMatrix& Y) const {
  return kind == Kind::kNnm ? nnm_rpca(Y, config) : wsnm_rpca(Y, config);
}

MethodSpec parse_method(const std::string& name, const RpcaConfig& base) {
  if (name == "nnm") return MethodSpec::nnm(base);
  if (name == "wsnm") return MethodSpec::wsnm(0.7, base);
  const std::string prefix = "wsnm_p";
  if (name.rfind(prefix, 0) == 0) {
    std::size_t used = 0;
    double p = 0.0;
    try {
      p = std::stod(name.substr(prefix.size()), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used > 0 && used == name.size() - prefix.size()) {
      if (!(p > 0.0 && p <= 1.0)) throw DomainError("method '" + name + "': p must lie in (0, 1]");
      return MethodSpec::wsnm(p, base);
    }
  }
  throw DomainError("unknown method '" + name + "' (expected nnm, wsnm or wsnm_p<p>)");
}

int SweepReport::success_count(const std::string& method) const {
  return static_cast<int>(std::count_if(cells.begin(), cells.end(),
                                        [&](const CellSummary& c) { return c.method == method && c.success; }));
}

const CellSummary* SweepReport::find(double p_r, double p_e, const std::string& method) const {
  for (const auto& c : cells) {
    if (std::abs(c.p_r - p_r) < 1e-9 && std::abs(c.p_e - p_e) < 1e-9 && c.method == method) return &c;
  }
  return nullptr;
}

void SweepReport::write_csv(std::ostream& out, bool timings) const {
  out << "p_r,p_e,method,repeat,rel_err,log_rel_err,est_rank,iters,seconds\n";
  char buf[512];
  for (const auto& r : runs) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%s,%d,%.9g,%.9g,%d,%d,%.9g\n", r.p_r, r.p_e, r.method.c_str(),
                  r.repeat, r.rel_err, r.log_rel_err, r.est_rank, r.iters, timings ? r.seconds : 0.0);
    out << buf;
  }
}

void SweepReport::write_diagnostics_csv(std::ostream& out) const {
  out << "p_r,p_e,method,repeat,converged,iters,final_residual,final_step,multiplier_peak_iter,"
         "multiplier_tail_growth\n";
  char buf[512];
  for (const auto& r : runs) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%s,%d,%d,%d,%.9g,%.9g,%d,%.9g\n", r.p_r, r.p_e, r.method.c_str(),
                  r.repeat, r.converged ? 1 : 0, r.iters, r.final_residual, r.final_step, r.multiplier_peak_iter,
                  r.multiplier_tail_growth);
    out << buf;
  }
}

namespace {

struct Cell {
  double p_r;
  double p_e;
  std::uint64_t seed;
  int repeat;
};

SweepReport evaluate(int m, const std::vector<Cell>& tasks, int repeats, const std::vector<MethodSpec>& methods,
                     double magnitude, double threshold, int threads) {
  if (methods.empty()) throw DomainError("sweep: no methods given");
  if (repeats < 1) throw DomainError("sweep: repeats must be at least 1");
  const std::size_t nm = methods.size();
  std::vector<RunRecord> records(tasks.size() * nm);

  parallel_for(tasks.size(), threads, [&](std::size_t t) {
    const Cell& cell = tasks[t];
    SyntheticSpec spec{m, cell.p_r, cell.p_e, magnitude, cell.seed};
    const SyntheticData data = gen_lowrank_sparse(spec);
    for (std::size_t k = 0; k < nm; ++k) {
      RunRecord& rec = records[t * nm + k];
      rec.p_r = cell.p_r;
      rec.p_e = cell.p_e;
      rec.method = methods[k].name();
      rec.repeat = cell.repeat;
      const auto start = std::chrono::steady_clock::now();
      try {
        const RpcaResult res = methods[k].run(data.Y);
        const RelativeError err = log_relative_error(res.X, data.X);
        rec.rel_err = err.linear;
        rec.log_rel_err = err.log;
        rec.est_rank = res.estimated_rank;
        rec.iters = res.iterations;
        rec.converged = res.converged;
        if (!res.residual_history.empty()) {
          rec.final_residual = res.residual_history.back();
          rec.final_step = res.step_history.back();
          const auto& z = res.multiplier_norm_history;
          rec.multiplier_peak_iter = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
          if (z.size() > 20 && z.back() > 0.0) rec.multiplier_tail_growth = (z.back() - z[z.size() - 21]) / z.back();
        }
      } catch (const std::exception& e) {
        rec.failure = e.what();
        rec.rel_err = std::numeric_limits<double>::quiet_NaN();
        rec.log_rel_err = std::numeric_limits<double>::quiet_NaN();
      }
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
  });

  // records are grouped per cell (repeats consecutive), then per method
  SweepReport report;
  for (std::size_t c = 0; c < tasks.size(); c += static_cast<std::size_t>(repeats)) {
    for (std::size_t k = 0; k < nm; ++k) {
      CellSummary s;
      s.p_r = tasks[c].p_r;
      s.p_e = tasks[c].p_e;
      s.method = methods[k].name();
      s.repeats = repeats;
      for (int rep = 0; rep < repeats; ++rep) {
        const RunRecord& rec = records[(c + static_cast<std::size_t>(rep)) * nm + k];
        report.runs.push_back(rec);
        if (!rec.failure.empty()) {
          ++s.failures;
          continue;
        }
        s.mean_rel_err += rec.rel_err;
        s.mean_log_rel_err += rec.log_rel_err;
        s.mean_rank += rec.est_rank;
      }
      const int ok = repeats - s.failures;
      if (ok > 0) {
        s.mean_rel_err /= ok;
        s.mean_log_rel_err /= ok;
        s.mean_rank /= ok;
      } else {
        s.mean_rel_err = s.mean_log_rel_err = s.mean_rank = std::numeric_limits<double>::quiet_NaN();
      }
      s.success = s.failures == 0 && s.mean_rel_err <= threshold;
      report.cells.push_back(s);
    }
  }
  return report;
}

}  // namespace

SweepReport run_phase_sweep(const SweepOptions& opts) {
  for (double v : opts.rank_fractions) {
    if (!(v > 0.0 && v < 1.0)) throw DomainError("sweep: rank fractions must lie in (0, 1)");
  }
  for (double v : opts.corruption_fractions) {
    if (!(v >= 0.0 && v < 1.0)) throw DomainError("sweep: corruption fractions must lie in [0, 1)");
  }
  std::vector<Cell> tasks;
  for (std::size_t i = 0; i < opts.rank_fractions.size(); ++i) {
    for (std::size_t j = 0; j < opts.corruption_fractions.size(); ++j) {
      for (int rep = 0; rep < opts.repeats; ++rep) {
        tasks.push_back({opts.rank_fractions[i], opts.corruption_fractions[j],
                         derive_seed(opts.base_seed, i, j, static_cast<std::uint64_t>(rep)), rep});
      }
    }
  }
  return evaluate(opts.m, tasks, opts.repeats, opts.methods, opts.corruption_magnitude, opts.success_threshold,
                  opts.threads);
}

SweepReport run_table(int m, const std::vector<int>& ranks, double corruption_fraction, int repeats,
                      const std::vector<MethodSpec>& methods, std::uint64_t base_seed, int threads) {
  if (m < 2) throw DomainError("table: m must be at least 2");
  std::vector<Cell> tasks;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    if (ranks[i] < 1 || ranks[i] >= m) throw DomainError("table: rank " + std::to_string(ranks[i]) + " out of range");
    for (int rep = 0; rep < repeats; ++rep) {
      tasks.push_back({static_cast<double>(ranks[i]) / m, corruption_fraction,
                       derive_seed(base_seed, i, 0, static_cast<std::uint64_t>(rep)), rep});
    }
  }
  return evaluate(m, tasks, repeats, methods, 50.0, kSuccessThreshold, threads);
}

std::vector<double> fraction_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) throw DomainError("fraction_grid: need step > 0 and hi >= lo");
  std::vector<double> out;
  for (int k = 0;; ++k) {
    const double v = std::round((lo + k * step) * 1e9) / 1e9;
    if (v > hi + 1e-12) break;
    out.push_back(v);
  }
  return out;
}

DenseMatrix video_to_matrix(const std::vector<GrayImage>& frames) {
  if (frames.empty()) throw DomainError("video_to_matrix: no frames");
  const int w = frames.front().width();
  const int h = frames.front().height();
  DenseMatrix M(static_cast<Eigen::Index>(w) * h, static_cast<Eigen::Index>(frames.size()));
  for (std::size_t j = 0; j < frames.size(); ++j) {
    detail::require_same_shape(frames[j].height(), frames[j].width(), h, w, "video_to_matrix");
    // the raster is row-major, so its storage order is the vectorization
    M.col(static_cast<Eigen::Index>(j)) =
        Eigen::Map<const DenseVector>(frames[j].pixels().data(), static_cast<Eigen::Index>(w) * h);
  }
  return M;
}

GrayImage matrix_column_to_image(const DenseMatrix& M, Eigen::Index column, int width, int height) {
  if (M.rows() != static_cast<Eigen::Index>(width) * height) {
    throw DimensionMismatch("matrix_column_to_image: column length does not match width * height");
  }
  GrayImage::Raster px(height, width);
  Eigen::Map<DenseVector>(px.data(), px.size()) = M.col(column);
  return GrayImage(std::move(px));
}

GrayImage ForegroundMask::to_image() const { return GrayImage(pixels.cast<double>() * 255.0); }

std::vector<ForegroundMask> binarize_foreground(const DenseMatrix& E, int width, int height, double theta) {
  if (!(theta > 0.0)) throw DomainError("binarize_foreground: theta must be positive");
  if (E.rows() != static_cast<Eigen::Index>(width) * height) {
    throw DimensionMismatch("binarize_foreground: rows do not match width * height");
  }
  std::vector<double> mags;
  for (Eigen::Index j = 0; j < E.cols(); ++j) {
    if ((E.col(j).array() != 0.0).any()) {
      for (Eigen::Index i = 0; i < E.rows(); ++i) mags.push_back(std::abs(E(i, j)));
    }
  }
  double s = 0.0;
  if (!mags.empty()) {
    const auto mid = mags.begin() + static_cast<std::ptrdiff_t>(mags.size() / 2);
    std::nth_element(mags.begin(), mid, mags.end());
    double med = *mid;
    if (mags.size() % 2 == 0) med = 0.5 * (med + *std::max_element(mags.begin(), mid));
    s = 1.4826 * med;
  }
  std::vector<ForegroundMask> masks;
  masks.reserve(static_cast<std::size_t>(E.cols()));
  for (Eigen::Index j = 0; j < E.cols(); ++j) {
    ForegroundMask mask(width, height);
    for (Eigen::Index i = 0; i < E.rows(); ++i) {
      if (std::abs(E(i, j)) > theta * s) mask.pixels.data()[i] = 1;
    }
    masks.push_back(std::move(mask));
  }
  return masks;
}

double foreground_similarity(const ForegroundMask& a, const ForegroundMask& b) {
  detail::require_same_shape(a.height(), a.width(), b.height(), b.width(), "foreground_similarity");
  const auto on_a = a.pixels != 0;
  const auto on_b = b.pixels != 0;
  const auto inter = (on_a && on_b).count();
  const auto uni = (on_a || on_b).count();
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

MovingBoxSequence gen_moving_box(int width, int height, int frames, int box, std::uint64_t seed) {
  if (width < 1 || height < 1 || frames < 1) throw DomainError("gen_moving_box: empty sequence");
  if (box < 1 || box > width || box > height) throw DomainError("gen_moving_box: box does not fit");
  SplitMix64 rng(seed);
  MovingBoxSequence seq;
  seq.background = GrayImage(width, height);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      // smooth gradient plus fixed speckle, darker than the box
      seq.background(r, c) = 40.0 + 60.0 * (r + c) / (width + height) + rng.uniform(0.0, 20.0);
    }
  }
  const int top = (height - box) / 2;
  for (int f = 0; f < frames; ++f) {
    const int left = frames == 1 ? 0 : (width - box) * f / (frames - 1);
    GrayImage img = seq.background;
    ForegroundMask truth(width, height);
    for (int r = top; r < top + box; ++r) {
      for (int c = left; c < left + box; ++c) {
        img(r, c) = 220.0;
        truth.pixels(r, c) = 1;
      }
    }
    seq.frames.push_back(std::move(img));
    seq.truth.push_back(std::move(truth));
  }
  return seq;
}

}  // namespace wsnm

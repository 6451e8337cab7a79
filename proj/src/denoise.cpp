#include "wsnm/denoise.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wsnm/parallel.hpp"
#include "wsnm/rng.hpp"
#include "wsnm/svd.hpp"

namespace wsnm {

GrayImage add_gaussian_noise(const GrayImage& img, const NoiseSpec& spec) {
  if (!(spec.sigma >= 0.0)) throw DomainError("add_gaussian_noise: sigma must be non-negative");
  GrayImage out = img;
  if (spec.sigma == 0.0) return out;
  SplitMix64 rng(spec.seed);
  double* px = out.pixels().data();
  for (Eigen::Index i = 0; i < out.size(); ++i) px[i] += spec.sigma * rng.normal();
  return out;
}

double select_power(double sigma_n) {
  if (!(sigma_n > 0.0)) throw DomainError("select_power: sigma_n must be positive");
  if (sigma_n <= 20.0) return 1.0;
  if (sigma_n <= 30.0) return 0.85;
  if (sigma_n <= 50.0) return 0.75;
  if (sigma_n <= 60.0) return 0.7;
  if (sigma_n <= 75.0) return 0.1;
  return 0.05;
}

DenoiseConfig DenoiseConfig::for_noise_level(double sigma_n) {
  DenoiseConfig cfg;
  cfg.sigma_n = sigma_n;
  cfg.p = sigma_n > 0.0 ? select_power(sigma_n) : 1.0;
  if (sigma_n <= 20.0) {
    cfg.patch_size = 6, cfg.group_size = 70, cfg.K = 8;
  } else if (sigma_n <= 40.0) {
    cfg.patch_size = 7, cfg.group_size = 90, cfg.K = 12;
  } else if (sigma_n <= 60.0) {
    cfg.patch_size = 8, cfg.group_size = 120, cfg.K = 14;
  } else {
    cfg.patch_size = 9, cfg.group_size = 140, cfg.K = 14;
  }
  return cfg;
}

void DenoiseConfig::validate() const {
  if (!(sigma_n >= 0.0 && std::isfinite(sigma_n))) throw DomainError("sigma_n must be non-negative");
  if (!(p > 0.0 && p <= 1.0)) throw DomainError("p must lie in (0, 1]");
  if (K < 1) throw DomainError("K must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  if (patch_size < 1) throw DomainError("patch_size must be positive");
  if (group_size < 1) throw DomainError("group_size must be positive");
  if (search_window < patch_size) throw DomainError("search_window must be at least patch_size");
  if (key_patch_step < 1 || key_patch_step > patch_size) {
    throw DomainError("key_patch_step must lie in [1, patch_size]");
  }
  if (c && !(*c >= 0.0)) throw DomainError("c must be non-negative");
  if (fidelity_scale && !(*fidelity_scale > 0.0)) throw DomainError("fidelity_scale must be positive");
  if (!(gamma > 0.0)) throw DomainError("gamma must be positive");
}

DenseVector extract_patch(const GrayImage& img, int row, int col, int patch_size) {
  DenseVector v(static_cast<Eigen::Index>(patch_size) * patch_size);
  for (int r = 0; r < patch_size; ++r) {
    for (int c = 0; c < patch_size; ++c) v(r * patch_size + c) = img(row + r, col + c);
  }
  return v;
}

PatchGroup block_match(const GrayImage& img, std::pair<int, int> anchor, const DenoiseConfig& cfg) {
  const int ps = cfg.patch_size;
  const auto [ar, ac] = anchor;
  if (ar < 0 || ac < 0 || ar + ps > img.height() || ac + ps > img.width()) {
    throw DomainError("block_match: anchor patch out of bounds");
  }
  const int half = cfg.search_window / 2;
  const int r0 = std::max(0, ar - half);
  const int r1 = std::min(img.height() - ps, ar + half);
  const int c0 = std::max(0, ac - half);
  const int c1 = std::min(img.width() - ps, ac + half);

  struct Candidate {
    double dist;
    int row;
    int col;
  };
  std::vector<Candidate> cands;
  cands.reserve(static_cast<std::size_t>((r1 - r0 + 1) * (c1 - c0 + 1)));
  const auto& px = img.pixels();
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      if (r == ar && c == ac) continue;
      double d = 0.0;
      for (int i = 0; i < ps; ++i) {
        d += (px.row(r + i).segment(c, ps) - px.row(ar + i).segment(ac, ps)).square().sum();
      }
      cands.push_back({d, r, c});
    }
  }
  const auto take = std::min<std::size_t>(cands.size(), static_cast<std::size_t>(cfg.group_size - 1));
  // candidates were generated in raster order, so (dist, row, col) is the tie rule
  std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(take), cands.end(),
                    [](const Candidate& a, const Candidate& b) {
                      if (a.dist != b.dist) return a.dist < b.dist;
                      if (a.row != b.row) return a.row < b.row;
                      return a.col < b.col;
                    });

  PatchGroup g;
  g.patch_size = ps;
  g.reference_index = 0;
  g.positions.reserve(take + 1);
  g.positions.emplace_back(ar, ac);
  for (std::size_t i = 0; i < take; ++i) g.positions.emplace_back(cands[i].row, cands[i].col);
  g.matrix.resize(static_cast<Eigen::Index>(ps) * ps, static_cast<Eigen::Index>(g.positions.size()));
  for (std::size_t j = 0; j < g.positions.size(); ++j) {
    g.matrix.col(static_cast<Eigen::Index>(j)) = extract_patch(img, g.positions[j].first, g.positions[j].second, ps);
  }
  return g;
}

WeightVector<double> estimate_group_weights(const DenseVector& sigma_vals, double sigma_n, int n, double p,
                                            double c, double eps) {
  detail::check_power(p, "estimate_group_weights");
  DenseVector w(sigma_vals.size());
  const double noise_energy = static_cast<double>(n) * sigma_n * sigma_n;
  const double scale = c * std::sqrt(static_cast<double>(n));
  for (Eigen::Index j = 0; j < sigma_vals.size(); ++j) {
    const double delta = std::sqrt(std::max(sigma_vals(j) * sigma_vals(j) - noise_energy, 0.0));
    w(j) = scale / (std::pow(delta, 1.0 / p) + eps);
  }
  return WeightVector<double>(std::move(w));
}

DenseMatrix denoise_patch_group(const PatchGroup& group, const GroupShrinkage& params) {
  if (params.sigma_n == 0.0) return group.matrix;
  DenseMatrix M = group.matrix;
  DenseVector mean;
  if (params.subtract_mean) {
    mean = M.rowwise().mean();
    M.colwise() -= mean;
  }
  auto f = svd(M);
  const auto w = estimate_group_weights(f.singular_values, params.sigma_n, static_cast<int>(M.cols()), params.p,
                                        params.c);
  const DenseVector delta = shrink_singular_values(f.singular_values, w, params.p, params.fidelity_scale);
  DenseMatrix X = f.U * delta.asDiagonal() * f.V.transpose();
  if (params.subtract_mean) X.colwise() += mean;
  return X;
}

DenseMatrix denoise_patch_group(const PatchGroup& group, double sigma_n, double p, double c) {
  GroupShrinkage params;
  params.sigma_n = sigma_n;
  params.p = p;
  params.c = c;
  params.fidelity_scale = sigma_n > 0.0 ? 1.0 / (sigma_n * sigma_n) : 1.0;
  return denoise_patch_group(group, params);
}

namespace {

struct Accumulator {
  GrayImage::Raster sum;
  GrayImage::Raster count;

  Accumulator(int width, int height)
      : sum(GrayImage::Raster::Zero(height, width)), count(GrayImage::Raster::Zero(height, width)) {}

  void add(const PatchGroup& g) {
    const int ps = g.patch_size;
    if (g.matrix.rows() != static_cast<Eigen::Index>(ps) * ps ||
        g.matrix.cols() != static_cast<Eigen::Index>(g.positions.size())) {
      throw DimensionMismatch("aggregate: group matrix does not match its positions");
    }
    for (std::size_t j = 0; j < g.positions.size(); ++j) {
      const auto [r0, c0] = g.positions[j];
      if (r0 < 0 || c0 < 0 || r0 + ps > sum.rows() || c0 + ps > sum.cols()) {
        throw DomainError("aggregate: patch out of bounds");
      }
      const auto col = g.matrix.col(static_cast<Eigen::Index>(j));
      for (int r = 0; r < ps; ++r) {
        for (int c = 0; c < ps; ++c) {
          sum(r0 + r, c0 + c) += col(r * ps + c);
          count(r0 + r, c0 + c) += 1.0;
        }
      }
    }
  }

  GrayImage finish(const GrayImage& fallback) const {
    GrayImage::Raster out(sum.rows(), sum.cols());
    const bool has_fallback = !fallback.empty();
    if (has_fallback) detail::require_same_shape(fallback.height(), fallback.width(), sum.rows(), sum.cols(), "aggregate");
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      const double n = count.data()[i];
      out.data()[i] = n > 0.0 ? sum.data()[i] / n : (has_fallback ? fallback.pixels().data()[i] : 0.0);
    }
    return GrayImage(std::move(out));
  }
};

}  // namespace

GrayImage aggregate(const std::vector<PatchGroup>& groups, int width, int height, const GrayImage& fallback) {
  Accumulator acc(width, height);
  for (const auto& g : groups) acc.add(g);
  return acc.finish(fallback);
}

GrayImage iterate_regularization(const GrayImage& y, const GrayImage& x_prev, double alpha) {
  detail::require_same_shape(y.height(), y.width(), x_prev.height(), x_prev.width(), "iterate_regularization");
  return GrayImage(x_prev.pixels() + alpha * (y.pixels() - x_prev.pixels()));
}

std::vector<int> key_positions(int extent, int patch_size, int step) {
  std::vector<int> out;
  const int last = extent - patch_size;
  if (last < 0) return out;
  for (int v = 0; v <= last; v += step) out.push_back(v);
  if (out.back() != last) out.push_back(last);
  return out;
}

GrayImage denoise_image(const GrayImage& y, const DenoiseConfig& cfg, DenoiseTrace* trace) {
  cfg.validate();
  if (y.empty()) throw DomainError("denoise_image: empty image");
  if (cfg.patch_size > y.width() || cfg.patch_size > y.height()) {
    throw DomainError("denoise_image: patch larger than the image");
  }
  const auto rows = key_positions(y.height(), cfg.patch_size, cfg.key_patch_step);
  const auto cols = key_positions(y.width(), cfg.patch_size, cfg.key_patch_step);
  std::vector<std::pair<int, int>> keys;
  keys.reserve(rows.size() * cols.size());
  for (int r : rows)
    for (int c : cols) keys.emplace_back(r, c);

  // groups are produced in parallel batches and summed in key order
  constexpr std::size_t kBatch = 256;
  GrayImage x = y;
  for (int k = 1; k <= cfg.K; ++k) {
    const GrayImage yk = iterate_regularization(y, x, cfg.alpha);
    double sigma = cfg.sigma_n;
    if (k > 1 && cfg.reestimate_noise) {
      const double removed = (y.pixels() - yk.pixels()).square().mean();
      sigma = cfg.gamma * std::sqrt(std::max(cfg.sigma_n * cfg.sigma_n - removed, 0.0));
    }
    if (trace) trace->working_sigma.push_back(sigma);

    GroupShrinkage params;
    params.sigma_n = sigma;
    params.p = cfg.p;
    params.c = cfg.c ? *cfg.c : kDefaultWeightConstant;
    params.fidelity_scale = cfg.fidelity_scale ? *cfg.fidelity_scale : (sigma > 0.0 ? 1.0 / (sigma * sigma) : 1.0);
    params.subtract_mean = cfg.subtract_group_mean;

    Accumulator acc(y.width(), y.height());
    std::vector<PatchGroup> batch;
    for (std::size_t start = 0; start < keys.size(); start += kBatch) {
      const std::size_t count = std::min(kBatch, keys.size() - start);
      batch.assign(count, PatchGroup{});
      parallel_for(count, cfg.threads, [&](std::size_t i) {
        PatchGroup g = block_match(yk, keys[start + i], cfg);
        g.matrix = denoise_patch_group(g, params);
        batch[i] = std::move(g);
      });
      for (const auto& g : batch) acc.add(g);
    }
    x = acc.finish(yk);
  }
  return x.clamped();
}

}  // namespace wsnm

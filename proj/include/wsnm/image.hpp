#pragma once

#include <filesystem>
#include <string>

#include <Eigen/Core>

#include "wsnm/types.hpp"

namespace wsnm {

/// Grayscale raster, row-major, nominal range [0, 255]. Intermediate images
/// may leave that range; only written outputs are clamped.
class GrayImage {
 public:
  using Raster = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  GrayImage() = default;
  GrayImage(int width, int height, double fill = 0.0);
  explicit GrayImage(Raster pixels);

  int width() const { return static_cast<int>(pixels_.cols()); }
  int height() const { return static_cast<int>(pixels_.rows()); }
  Eigen::Index size() const { return pixels_.size(); }
  bool empty() const { return pixels_.size() == 0; }

  double& operator()(int row, int col) { return pixels_(row, col); }
  double operator()(int row, int col) const { return pixels_(row, col); }

  const Raster& pixels() const { return pixels_; }
  Raster& pixels() { return pixels_; }

  GrayImage clamped() const;

 private:
  Raster pixels_;
};

/// 10 log10(255^2 / MSE); +infinity for identical images.
double psnr(const GrayImage& a, const GrayImage& b);
double mse(const GrayImage& a, const GrayImage& b);

// Binary PGM (P5), 8-bit, maxval 255. Writing rounds and clamps to [0,255].
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& img);

// Raw float64 dump: 8-byte magic "WSNMF64\0", u32 width, u32 height (all
// little-endian), then width*height doubles in row-major order. Matrices use
// width = cols, height = rows.
inline constexpr char kFloatDumpMagic[8] = {'W', 'S', 'N', 'M', 'F', '6', '4', '\0'};

void write_float_dump(const std::filesystem::path& path, const GrayImage& img);
GrayImage read_float_dump(const std::filesystem::path& path);
void write_matrix_dump(const std::filesystem::path& path, const DenseMatrix& m);
DenseMatrix read_matrix_dump(const std::filesystem::path& path);

}  // namespace wsnm

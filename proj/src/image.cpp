#include "wsnm/image.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

namespace wsnm {

GrayImage::GrayImage(int width, int height, double fill) {
  if (width <= 0 || height <= 0) throw DomainError("GrayImage: dimensions must be positive");
  pixels_ = Raster::Constant(height, width, fill);
}

GrayImage::GrayImage(Raster pixels) : pixels_(std::move(pixels)) {}

GrayImage GrayImage::clamped() const { return GrayImage(pixels_.max(0.0).min(255.0)); }

double mse(const GrayImage& a, const GrayImage& b) {
  detail::require_same_shape(a.height(), a.width(), b.height(), b.width(), "mse");
  return (a.pixels() - b.pixels()).square().mean();
}

double psnr(const GrayImage& a, const GrayImage& b) {
  const double e = mse(a, b);
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / e);
}

namespace {

// Skips whitespace and '#' comments between PGM header tokens.
int read_header_int(std::istream& in, const std::filesystem::path& path) {
  int c = in.peek();
  while (c != EOF) {
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
    c = in.peek();
  }
  int value = 0;
  if (!(in >> value)) throw IoError("malformed PGM header in " + path.string());
  return value;
}

static_assert(std::endian::native == std::endian::little,
              "float dumps are written by byte-copy and assume a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw IoError("truncated float dump " + path.string());
  return v;
}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::array<char, 2> magic{};
  in.read(magic.data(), 2);
  if (!in || magic[0] != 'P' || magic[1] != '5') throw IoError(path.string() + " is not a binary PGM (P5)");
  const int width = read_header_int(in, path);
  const int height = read_header_int(in, path);
  const int maxval = read_header_int(in, path);
  if (width <= 0 || height <= 0) throw IoError("bad PGM dimensions in " + path.string());
  if (maxval != 255) throw IoError("only 8-bit PGM (maxval 255) is supported: " + path.string());
  in.get();  // single whitespace before the raster

  std::vector<unsigned char> raw(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw IoError("truncated PGM raster in " + path.string());

  GrayImage img(width, height);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) img(r, c) = raw[static_cast<std::size_t>(r) * width + c];
  return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << img.width() << " " << img.height() << "\n255\n";
  std::vector<unsigned char> raw(static_cast<std::size_t>(img.size()));
  for (int r = 0; r < img.height(); ++r) {
    for (int c = 0; c < img.width(); ++c) {
      const double v = std::clamp(std::round(img(r, c)), 0.0, 255.0);
      raw[static_cast<std::size_t>(r) * img.width() + c] = static_cast<unsigned char>(v);
    }
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

void write_float_dump(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kFloatDumpMagic, sizeof(kFloatDumpMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(img.width()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(img.height()));
  // the raster is row-major already
  out.write(reinterpret_cast<const char*>(img.pixels().data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(img.size())));
  if (!out) throw IoError("failed writing " + path.string());
}

GrayImage read_float_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kFloatDumpMagic, 8) != 0) {
    throw IoError(path.string() + " is not a WSNMF64 dump");
  }
  const auto width = get<std::uint32_t>(in, path);
  const auto height = get<std::uint32_t>(in, path);
  if (width == 0 || height == 0) throw IoError("empty WSNMF64 dump " + path.string());
  GrayImage::Raster px(height, width);
  in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(sizeof(double) * px.size()));
  if (!in) throw IoError("truncated float dump " + path.string());
  return GrayImage(std::move(px));
}

void write_matrix_dump(const std::filesystem::path& path, const DenseMatrix& m) {
  GrayImage::Raster px = m.array();  // column-major -> row-major copy
  write_float_dump(path, GrayImage(std::move(px)));
}

DenseMatrix read_matrix_dump(const std::filesystem::path& path) {
  return read_float_dump(path).pixels().matrix();
}

}  // namespace wsnm

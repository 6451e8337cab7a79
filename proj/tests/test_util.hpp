#pragma once

#include <algorithm>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>
#include <Eigen/QR>

#include "wsnm/rng.hpp"
#include "wsnm/types.hpp"

namespace wsnm::testing {

inline DenseMatrix random_matrix(SplitMix64& rng, Eigen::Index rows, Eigen::Index cols) {
  DenseMatrix M(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) M(i, j) = rng.normal();
  return M;
}

inline DenseMatrix random_orthogonal(SplitMix64& rng, Eigen::Index n) {
  Eigen::HouseholderQR<DenseMatrix> qr(random_matrix(rng, n, n));
  return qr.householderQ() * DenseMatrix::Identity(n, n);
}

/// Sorted non-descending random weights in [0, hi).
inline DenseVector random_nondescending(SplitMix64& rng, Eigen::Index r, double hi) {
  DenseVector w(r);
  for (Eigen::Index i = 0; i < r; ++i) w(i) = rng.uniform(0.0, hi);
  std::sort(w.data(), w.data() + r);
  return w;
}

/// Fresh scratch directory under the build tree, unique per test.
inline std::filesystem::path scratch_dir() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  auto dir = std::filesystem::temp_directory_path() / "wsnm_tests" /
             (std::string(info->test_suite_name()) + "." + info->name());
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace wsnm::testing

#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace wsnm {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using DenseMatrix = Matrix<double>;
using DenseVector = Vector<double>;

/// Invalid parameter value (p outside (0,1], negative weight, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Iterative kernel ran out of budget or produced non-finite values.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require_same_shape(Eigen::Index r0, Eigen::Index c0, Eigen::Index r1,
                               Eigen::Index c1, const char* what) {
  if (r0 != r1 || c0 != c1) {
    throw DimensionMismatch(std::string(what) + ": " + std::to_string(r0) + "x" +
                            std::to_string(c0) + " vs " + std::to_string(r1) + "x" +
                            std::to_string(c1));
  }
}

}  // namespace detail
}  // namespace wsnm

#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace surrlad {

inline constexpr const char* kVersion = "0.1.0";

using Index = Eigen::Index;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Thrown when a computation hits a numerically degenerate configuration
/// (singular inner matrix, rank-deficient retraction argument, measurement
/// error covariance swallowing the signal, ...). Distinct from
/// std::invalid_argument, which signals a violated precondition.
class DegeneracyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace surrlad

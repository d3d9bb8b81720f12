#pragma once

#include <stdexcept>
#include <string>

namespace umpc {

/// Raised when a covariance with determinant <= kPsdEpsilon must be inverted.
class SingularCovarianceError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class InsufficientDataError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a least-squares regressor matrix is numerically singular.
class RankDeficiencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatchError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace umpc

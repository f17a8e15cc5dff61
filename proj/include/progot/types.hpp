#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace progot {

/// Dense row-major matrix; rows are points (n x d) or source atoms (n x m).
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Bad input: shapes, ranges, malformed files. The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A solver could not reach its feasibility threshold and the caller asked
/// for that to be fatal. The CLI maps this to exit code 3 under --strict.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace progot

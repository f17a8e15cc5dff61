#pragma once

#include "progot/types.hpp"

namespace progot {

/// Dense n x m transport plan together with the marginals it is meant to have.
struct Coupling {
  Matrix matrix;
  Vector row_weights;  // intended a
  Vector col_weights;  // intended b

  Eigen::Index rows() const { return matrix.rows(); }
  Eigen::Index cols() const { return matrix.cols(); }
  double mass() const { return matrix.sum(); }
};

struct MarginalErrors {
  double row = 0.0;  // ||P 1_m - a||_1
  double col = 0.0;  // ||P^T 1_n - b||_1
};

/// L1 deviations of P's marginals from (a, b).
MarginalErrors marginal_error(const Matrix& p, const Vector& a, const Vector& b);
inline MarginalErrors marginal_error(const Coupling& c) {
  return marginal_error(c.matrix, c.row_weights, c.col_weights);
}

}  // namespace progot

#pragma once

#include "progot/types.hpp"

#include <cstddef>
#include <span>

namespace progot {

/// Weighted finite measure: n points in R^d with probability weights.
///
/// Construction validates: n >= 1, d >= 1, finite coordinates, strictly
/// positive weights summing to 1 within 1e-12.
class PointCloud {
 public:
  /// Uniform weights 1/n.
  explicit PointCloud(Matrix points);
  PointCloud(Matrix points, Vector weights);

  const Matrix& points() const { return points_; }
  const Vector& weights() const { return weights_; }
  std::size_t size() const { return static_cast<std::size_t>(points_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(points_.cols()); }

  /// Same weights, new locations (used when ProgOT moves the source).
  PointCloud with_points(Matrix points) const;

  bool operator==(const PointCloud&) const = default;

 private:
  Matrix points_;
  Vector weights_;
};

/// Translation-invariant power cost h(z) = (1/p) sum_i |z_i|^p, p > 1.
/// p = 2 is the squared-Euclidean cost 1/2 ||z||^2.
class CostModel {
 public:
  explicit CostModel(double p = 2.0);

  double p() const { return p_; }
  /// Conjugate exponent q = p / (p - 1).
  double q() const { return q_; }
  bool is_squared_euclidean() const { return p_ == 2.0; }

  double h(std::span<const double> delta) const;
  /// sign(z_i) |z_i|^(p-1), with sign(0) = 0.
  void grad_h(std::span<const double> delta, std::span<double> out) const;
  /// sign(v_i) |v_i|^(q-1); inverse of grad_h.
  void grad_h_conj(std::span<const double> v, std::span<double> out) const;

  /// h(x - y) without materializing the difference.
  double between(const double* x, const double* y, std::size_t d) const;

  bool operator==(const CostModel&) const = default;

 private:
  double p_;
  double q_;
};

/// c(x, y) = h(x - y). Throws ValidationError on dimension mismatch.
double cost(const CostModel& model, const Vector& x, const Vector& y);
Vector grad_h(const CostModel& model, const Vector& delta);
Vector grad_h_conj(const CostModel& model, const Vector& v);

/// C_ij = h(x_i - y_j), computed row-parallel.
Matrix cost_matrix(const CostModel& model, const Matrix& x, const Matrix& y);
Matrix cost_matrix(const CostModel& model, const PointCloud& x, const PointCloud& y);

/// Mean of all cost matrix entries, unweighted; accumulated per row and then
/// over rows in index order so the value does not depend on thread count.
double mean_cost(const CostModel& model, const Matrix& x, const Matrix& y);

/// One twentieth of the unweighted mean cost. Throws ValidationError when the
/// clouds are degenerate (mean cost 0), in which case eps must be explicit.
double default_eps_scale(const CostModel& model, const PointCloud& x, const PointCloud& y);
double default_eps_scale(const CostModel& model, const Matrix& x, const Matrix& y);

}  // namespace progot

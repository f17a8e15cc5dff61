#include "progot/geometry.hpp"

#include "progot/kernels.hpp"

#include <cmath>
#include <string>

namespace progot {

namespace {

void check_points(const Matrix& points) {
  if (points.rows() < 1 || points.cols() < 1) {
    throw ValidationError("point cloud must have n >= 1 points of dimension d >= 1");
  }
  if (!points.allFinite()) {
    throw ValidationError("point cloud contains non-finite coordinates");
  }
}

double signed_pow(double v, double e) {
  if (v == 0.0) return 0.0;
  return std::copysign(std::pow(std::abs(v), e), v);
}

void check_same_dim(std::size_t a, std::size_t b) {
  if (a != b) {
    throw ValidationError("dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

}  // namespace

PointCloud::PointCloud(Matrix points)
    : points_(std::move(points)), weights_() {
  check_points(points_);
  const auto n = points_.rows();
  weights_ = Vector::Constant(n, 1.0 / static_cast<double>(n));
}

PointCloud::PointCloud(Matrix points, Vector weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  check_points(points_);
  if (weights_.size() != points_.rows()) {
    throw ValidationError("weight vector length does not match number of points");
  }
  if (!weights_.allFinite() || (weights_.array() <= 0.0).any()) {
    throw ValidationError("weights must be finite and strictly positive");
  }
  if (std::abs(weights_.sum() - 1.0) > 1e-12) {
    throw ValidationError("weights must sum to 1 (within 1e-12)");
  }
}

PointCloud PointCloud::with_points(Matrix points) const {
  if (points.rows() != points_.rows()) {
    throw ValidationError("with_points: number of points changed");
  }
  return PointCloud(std::move(points), weights_);
}

CostModel::CostModel(double p) : p_(p), q_(0.0) {
  if (!(p > 1.0) || !std::isfinite(p)) {
    throw ValidationError("cost exponent p must be a finite real > 1");
  }
  q_ = p_ / (p_ - 1.0);
}

double CostModel::h(std::span<const double> delta) const {
  double s = 0.0;
  if (is_squared_euclidean()) {
    for (double v : delta) s += v * v;
    return 0.5 * s;
  }
  for (double v : delta) s += std::pow(std::abs(v), p_);
  return s / p_;
}

double CostModel::between(const double* x, const double* y, std::size_t d) const {
  double s = 0.0;
  if (is_squared_euclidean()) {
    for (std::size_t k = 0; k < d; ++k) {
      const double v = x[k] - y[k];
      s += v * v;
    }
    return 0.5 * s;
  }
  for (std::size_t k = 0; k < d; ++k) s += std::pow(std::abs(x[k] - y[k]), p_);
  return s / p_;
}

void CostModel::grad_h(std::span<const double> delta, std::span<double> out) const {
  check_same_dim(delta.size(), out.size());
  if (is_squared_euclidean()) {
    for (std::size_t k = 0; k < delta.size(); ++k) out[k] = delta[k];
    return;
  }
  for (std::size_t k = 0; k < delta.size(); ++k) out[k] = signed_pow(delta[k], p_ - 1.0);
}

void CostModel::grad_h_conj(std::span<const double> v, std::span<double> out) const {
  check_same_dim(v.size(), out.size());
  if (is_squared_euclidean()) {
    for (std::size_t k = 0; k < v.size(); ++k) out[k] = v[k];
    return;
  }
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = signed_pow(v[k], q_ - 1.0);
}

double cost(const CostModel& model, const Vector& x, const Vector& y) {
  check_same_dim(static_cast<std::size_t>(x.size()), static_cast<std::size_t>(y.size()));
  if (!x.allFinite() || !y.allFinite()) throw ValidationError("cost: non-finite input");
  return model.between(x.data(), y.data(), static_cast<std::size_t>(x.size()));
}

Vector grad_h(const CostModel& model, const Vector& delta) {
  if (!delta.allFinite()) throw ValidationError("grad_h: non-finite input");
  Vector out(delta.size());
  model.grad_h({delta.data(), static_cast<std::size_t>(delta.size())},
               {out.data(), static_cast<std::size_t>(out.size())});
  return out;
}

Vector grad_h_conj(const CostModel& model, const Vector& v) {
  if (!v.allFinite()) throw ValidationError("grad_h_conj: non-finite input");
  Vector out(v.size());
  model.grad_h_conj({v.data(), static_cast<std::size_t>(v.size())},
                    {out.data(), static_cast<std::size_t>(out.size())});
  return out;
}

Matrix cost_matrix(const CostModel& model, const Matrix& x, const Matrix& y) {
  check_same_dim(static_cast<std::size_t>(x.cols()), static_cast<std::size_t>(y.cols()));
  Matrix c;
  kernels::fill_cost_matrix(model, x, y, c);
  return c;
}

Matrix cost_matrix(const CostModel& model, const PointCloud& x, const PointCloud& y) {
  return cost_matrix(model, x.points(), y.points());
}

double mean_cost(const CostModel& model, const Matrix& x, const Matrix& y) {
  check_same_dim(static_cast<std::size_t>(x.cols()), static_cast<std::size_t>(y.cols()));
  if (x.rows() == 0 || y.rows() == 0) throw ValidationError("mean_cost: empty cloud");
  Vector sums(x.rows());
  kernels::row_sums(model, x, y, {sums.data(), static_cast<std::size_t>(sums.size())});
  double total = 0.0;
  for (Eigen::Index i = 0; i < sums.size(); ++i) total += sums[i];
  return total / (static_cast<double>(x.rows()) * static_cast<double>(y.rows()));
}

double default_eps_scale(const CostModel& model, const Matrix& x, const Matrix& y) {
  const double scale = mean_cost(model, x, y) / 20.0;
  if (!(scale > 0.0)) {
    throw ValidationError("degenerate clouds: mean cost is zero, eps must be given explicitly");
  }
  return scale;
}

double default_eps_scale(const CostModel& model, const PointCloud& x, const PointCloud& y) {
  return default_eps_scale(model, x.points(), y.points());
}

}  // namespace progot

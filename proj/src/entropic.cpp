#include "progot/entropic.hpp"

#include "progot/kernels.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace progot {

namespace {

void check_target(const PointCloud& target, const Vector& g, double eps) {
  if (g.size() != static_cast<Eigen::Index>(target.size())) {
    throw ValidationError("entropic map: g length does not match target size");
  }
  if (!(eps > 0.0)) throw ValidationError("entropic map: eps must be > 0");
}

// Conditional weights p_j of x against (b, Y, g) written into w (sums to 1).
void conditional_weights(const PointCloud& target, const Vector& g, double eps,
                         const CostModel& model, const double* x, Eigen::ArrayXd& w) {
  const Matrix& y = target.points();
  const Vector& b = target.weights();
  const auto d = target.dim();
  const Eigen::Index m = y.rows();
  w.resize(m);
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < m; ++j) {
    const double l = std::log(b[j]) + (g[j] - model.between(x, y.row(j).data(), d)) / eps;
    w[j] = l;
    mx = std::max(mx, l);
  }
  w = (w - mx).exp();
  double s = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) s += w[j];
  w /= s;
}

// Displacement z = grad h*(sum_j p_j grad h(x - y_j)) and the map image x - z.
// For p = 2 the image is computed directly as the barycenter sum_j p_j y_j.
void map_point(const PointCloud& target, const Vector& g, double eps, const CostModel& model,
               const double* x, double* image, double* z, Eigen::ArrayXd& w, Vector& acc,
               Vector& tmp) {
  conditional_weights(target, g, eps, model, x, w);
  const Matrix& y = target.points();
  const auto d = static_cast<Eigen::Index>(target.dim());
  acc.setZero(d);
  if (model.is_squared_euclidean()) {
    for (Eigen::Index j = 0; j < y.rows(); ++j) {
      for (Eigen::Index k = 0; k < d; ++k) acc[k] += w[j] * y(j, k);
    }
    for (Eigen::Index k = 0; k < d; ++k) {
      if (image) image[k] = acc[k];
      if (z) z[k] = x[k] - acc[k];
    }
    return;
  }
  tmp.resize(d);
  Vector grad(d);
  const auto du = static_cast<std::size_t>(d);
  for (Eigen::Index j = 0; j < y.rows(); ++j) {
    for (Eigen::Index k = 0; k < d; ++k) tmp[k] = x[k] - y(j, k);
    model.grad_h({tmp.data(), du}, {grad.data(), du});
    acc += w[j] * grad;
  }
  model.grad_h_conj({acc.data(), du}, {tmp.data(), du});
  for (Eigen::Index k = 0; k < d; ++k) {
    if (image) image[k] = x[k] - tmp[k];
    if (z) z[k] = tmp[k];
  }
}

void check_batch(const PointCloud& target, const Matrix& xs) {
  if (static_cast<std::size_t>(xs.cols()) != target.dim()) {
    throw ValidationError("entropic map: dimension mismatch");
  }
}

}  // namespace

double entropic_potential_eval(const PointCloud& target, const Vector& g, double eps,
                               const CostModel& model, const Vector& x) {
  check_target(target, g, eps);
  if (static_cast<std::size_t>(x.size()) != target.dim()) {
    throw ValidationError("entropic potential: dimension mismatch");
  }
  const Matrix& y = target.points();
  const Eigen::Index m = y.rows();
  Vector c(m);
  for (Eigen::Index j = 0; j < m; ++j) c[j] = model.between(x.data(), y.row(j).data(), target.dim());
  const Vector v = g + eps * target.weights().array().log().matrix();
  Matrix row = c.transpose();
  double out = 0.0;
  kernels::serial::softmin_rows(row, {v.data(), static_cast<std::size_t>(m)}, eps, {&out, 1});
  return out;
}

Vector entropic_map_apply(const PointCloud& target, const Vector& g, double eps,
                          const CostModel& model, const Vector& x) {
  check_target(target, g, eps);
  if (static_cast<std::size_t>(x.size()) != target.dim()) {
    throw ValidationError("entropic map: dimension mismatch");
  }
  Vector out(x.size()), acc, tmp;
  Eigen::ArrayXd w;
  map_point(target, g, eps, model, x.data(), out.data(), nullptr, w, acc, tmp);
  return out;
}

Vector entropic_displacement(const PointCloud& target, const Vector& g, double eps,
                             const CostModel& model, const Vector& x) {
  check_target(target, g, eps);
  if (static_cast<std::size_t>(x.size()) != target.dim()) {
    throw ValidationError("entropic map: dimension mismatch");
  }
  Vector z(x.size()), acc, tmp;
  Eigen::ArrayXd w;
  map_point(target, g, eps, model, x.data(), nullptr, z.data(), w, acc, tmp);
  return z;
}

Matrix entropic_step(const PointCloud& target, const Vector& g, double eps,
                     const CostModel& model, const Matrix& xs, double alpha) {
  check_target(target, g, eps);
  check_batch(target, xs);
  Matrix out(xs.rows(), xs.cols());
  const Eigen::Index n = xs.rows();
  const Eigen::Index d = xs.cols();
  const bool full = alpha == 1.0;
#pragma omp parallel if (n * target.points().rows() >= kernels::kParallelCells) \
    num_threads(kernels::thread_count())
  {
    Eigen::ArrayXd w;
    Vector acc, tmp, z(d);
#pragma omp for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
      if (full) {
        map_point(target, g, eps, model, xs.row(i).data(), out.row(i).data(), nullptr, w, acc, tmp);
        continue;
      }
      map_point(target, g, eps, model, xs.row(i).data(), nullptr, z.data(), w, acc, tmp);
      for (Eigen::Index k = 0; k < d; ++k) out(i, k) = xs(i, k) - alpha * z[k];
    }
  }
  return out;
}

Matrix entropic_map_apply(const PointCloud& target, const Vector& g, double eps,
                          const CostModel& model, const Matrix& xs) {
  check_target(target, g, eps);
  check_batch(target, xs);
  Matrix out(xs.rows(), xs.cols());
  const Eigen::Index n = xs.rows();
#pragma omp parallel if (n * target.points().rows() >= kernels::kParallelCells) \
    num_threads(kernels::thread_count())
  {
    Eigen::ArrayXd w;
    Vector acc, tmp;
#pragma omp for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
      map_point(target, g, eps, model, xs.row(i).data(), out.row(i).data(), nullptr, w, acc, tmp);
    }
  }
  return out;
}

namespace serial {
Matrix entropic_map_apply(const PointCloud& target, const Vector& g, double eps,
                          const CostModel& model, const Matrix& xs) {
  check_target(target, g, eps);
  check_batch(target, xs);
  Matrix out(xs.rows(), xs.cols());
  Eigen::ArrayXd w;
  Vector acc, tmp;
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    map_point(target, g, eps, model, xs.row(i).data(), out.row(i).data(), nullptr, w, acc, tmp);
  }
  return out;
}
}  // namespace serial

Matrix barycentric_displacement(const Matrix& p, const Matrix& x, const Matrix& y,
                                const CostModel& model) {
  if (p.rows() != x.rows() || p.cols() != y.rows() || x.cols() != y.cols()) {
    throw ValidationError("barycentric_displacement: shape mismatch");
  }
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const auto du = static_cast<std::size_t>(d);
  Matrix z(n, d);
  bool zero_row = false;
#pragma omp parallel if (p.size() >= kernels::kParallelCells) num_threads(kernels::thread_count())
  {
    Vector acc(d), diff(d), grad(d);
#pragma omp for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
      double rs = 0.0;
      for (Eigen::Index j = 0; j < p.cols(); ++j) rs += p(i, j);
      if (!(rs > 0.0) || !std::isfinite(rs)) {
#pragma omp atomic write
        zero_row = true;
        continue;
      }
      acc.setZero();
      if (model.is_squared_euclidean()) {
        for (Eigen::Index j = 0; j < p.cols(); ++j) {
          const double q = p(i, j) / rs;
          for (Eigen::Index k = 0; k < d; ++k) acc[k] += q * y(j, k);
        }
        for (Eigen::Index k = 0; k < d; ++k) z(i, k) = x(i, k) - acc[k];
        continue;
      }
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        for (Eigen::Index k = 0; k < d; ++k) diff[k] = x(i, k) - y(j, k);
        model.grad_h({diff.data(), du}, {grad.data(), du});
        acc += (p(i, j) / rs) * grad;
      }
      model.grad_h_conj({acc.data(), du}, {diff.data(), du});
      z.row(i) = diff.transpose();
    }
  }
  if (zero_row) throw ValidationError("barycentric_displacement: coupling has a zero row");
  return z;
}

double auto_divergence_eps(const CostModel& model, const PointCloud& y) {
  const double eps = 0.05 * mean_cost(model, y.points(), y.points());
  if (!(eps > 0.0)) {
    throw ValidationError("divergence: target cloud is a single point; give eps explicitly");
  }
  return eps;
}

DivergenceResult sinkhorn_divergence(const PointCloud& x, const PointCloud& y,
                                     const CostModel& model, const DivergenceOptions& options) {
  DivergenceResult out;
  out.eps = options.eps ? *options.eps : auto_divergence_eps(model, y);
  SinkhornOptions so;
  so.tau = options.tau;
  so.max_iter = options.max_iter;
  so.materialize_coupling = false;
  const auto xy = sinkhorn_solve(x, y, model, out.eps, so);
  const auto xx = sinkhorn_solve(x, x, model, out.eps, so);
  const auto yy = sinkhorn_solve(y, y, model, out.eps, so);
  out.reports = {xy.report, xx.report, yy.report};
  out.converged = xy.report.converged && xx.report.converged && yy.report.converged;
  out.value = xy.report.dual_objective -
              0.5 * (xx.report.dual_objective + yy.report.dual_objective);
  return out;
}

}  // namespace progot

#include "progot/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

namespace progot::kernels {

namespace {

std::atomic<int> g_thread_override{0};

int env_thread_count() {
  static const int value = [] {
    if (const char* env = std::getenv("PROGOT_THREADS")) {
      char* end = nullptr;
      const long v = std::strtol(env, &end, 10);
      if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
    }
    return omp_get_max_threads();
  }();
  return value;
}

void check_shapes(const Matrix& cost, std::span<const double> v, std::span<double> out) {
  if (static_cast<std::size_t>(cost.cols()) != v.size() ||
      static_cast<std::size_t>(cost.rows()) != out.size()) {
    throw ValidationError("softmin_rows: shape mismatch");
  }
}

// Fixed-order sum with four interleaved accumulators.
double ordered_sum(const double* p, std::size_t m) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t j = 0;
  for (; j + 4 <= m; j += 4) {
    s0 += p[j];
    s1 += p[j + 1];
    s2 += p[j + 2];
    s3 += p[j + 3];
  }
  for (; j < m; ++j) s0 += p[j];
  return (s0 + s1) + (s2 + s3);
}

// -eps * log sum_j exp((v_j - c_j) / eps). buf is an aligned scratch array so
// the vectorized exp and sum split packets and tail identically for every row.
double softmin_row(const double* c, const double* v, std::size_t m, double eps,
                   Eigen::ArrayXd& buf) {
  const auto mm = static_cast<Eigen::Index>(m);
  buf.resize(mm);
  const double inv = 1.0 / eps;
  buf = (Eigen::Map<const Eigen::ArrayXd>(v, mm) - Eigen::Map<const Eigen::ArrayXd>(c, mm)) * inv;
  const double mx = buf.maxCoeff();
  if (!std::isfinite(mx)) return mx == -std::numeric_limits<double>::infinity() ? -mx : mx;
  buf = (buf - mx).exp();
  return -eps * (mx + std::log(buf.sum()));
}

void cost_row(const CostModel& model, const Matrix& x, const Matrix& y, Eigen::Index i,
              double* out) {
  const auto d = static_cast<std::size_t>(x.cols());
  const double* xi = x.row(i).data();
  for (Eigen::Index j = 0; j < y.rows(); ++j) out[j] = model.between(xi, y.row(j).data(), d);
}

void check_dims(const Matrix& x, const Matrix& y) {
  if (x.cols() != y.cols()) {
    throw ValidationError("dimension mismatch: " + std::to_string(x.cols()) + " vs " +
                          std::to_string(y.cols()));
  }
}

void gibbs_row(const double* c, double fi, std::span<const double> g, double log_ai,
               std::span<const double> log_b, double eps, Eigen::ArrayXd& buf, double* out) {
  const auto m = g.size();
  buf.resize(static_cast<Eigen::Index>(m));
  const double inv = 1.0 / eps;
  for (std::size_t j = 0; j < m; ++j) {
    buf[static_cast<Eigen::Index>(j)] = log_ai + log_b[j] + (fi + g[j] - c[j]) * inv;
  }
  buf = buf.exp();
  std::copy(buf.data(), buf.data() + m, out);
}

void check_gibbs(const Matrix& cost, std::span<const double> f, std::span<const double> g,
                 std::span<const double> log_a, std::span<const double> log_b) {
  if (static_cast<std::size_t>(cost.rows()) != f.size() || f.size() != log_a.size() ||
      static_cast<std::size_t>(cost.cols()) != g.size() || g.size() != log_b.size()) {
    throw ValidationError("gibbs_coupling: shape mismatch");
  }
}

}  // namespace

int thread_count() {
  const int o = g_thread_override.load(std::memory_order_relaxed);
  return o > 0 ? o : env_thread_count();
}

void set_thread_count(int threads) {
  g_thread_override.store(std::max(threads, 0), std::memory_order_relaxed);
}

double softmin(double eps, std::span<const double> row) {
  if (!(eps > 0.0)) throw ValidationError("softmin: eps must be > 0");
  if (row.empty()) return std::numeric_limits<double>::infinity();
  Eigen::ArrayXd zeros = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(row.size()));
  Eigen::ArrayXd buf;
  return softmin_row(row.data(), zeros.data(), row.size(), eps, buf);
}

void softmin_rows(const Matrix& cost, std::span<const double> v, double eps,
                  std::span<double> out) {
  check_shapes(cost, v, out);
  if (cost.size() < kParallelCells) return serial::softmin_rows(cost, v, eps, out);
  const auto m = v.size();
  const Eigen::Index n = cost.rows();
#pragma omp parallel num_threads(thread_count())
  {
    Eigen::ArrayXd buf;
#pragma omp for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
      out[static_cast<std::size_t>(i)] = softmin_row(cost.row(i).data(), v.data(), m, eps, buf);
    }
  }
}

void softmin_rows_lazy(const CostModel& model, const Matrix& x, const Matrix& y,
                       std::span<const double> v, double eps, std::span<double> out,
                       std::size_t block_rows) {
  check_dims(x, y);
  if (static_cast<std::size_t>(y.rows()) != v.size() ||
      static_cast<std::size_t>(x.rows()) != out.size()) {
    throw ValidationError("softmin_rows_lazy: shape mismatch");
  }
  block_rows = std::max<std::size_t>(block_rows, 1);
  const Eigen::Index n = x.rows();
  const Eigen::Index m = y.rows();
  if (n * m < kParallelCells) {
    return serial::softmin_rows_lazy(model, x, y, v, eps, out, block_rows);
  }
  const Eigen::Index blocks = (n + static_cast<Eigen::Index>(block_rows) - 1) /
                              static_cast<Eigen::Index>(block_rows);
#pragma omp parallel num_threads(thread_count())
  {
    Eigen::ArrayXd buf;
    Matrix block(static_cast<Eigen::Index>(block_rows), m);
#pragma omp for schedule(static)
    for (Eigen::Index b = 0; b < blocks; ++b) {
      const Eigen::Index r0 = b * static_cast<Eigen::Index>(block_rows);
      const Eigen::Index r1 = std::min(n, r0 + static_cast<Eigen::Index>(block_rows));
      for (Eigen::Index i = r0; i < r1; ++i) cost_row(model, x, y, i, block.row(i - r0).data());
      for (Eigen::Index i = r0; i < r1; ++i) {
        out[static_cast<std::size_t>(i)] =
            softmin_row(block.row(i - r0).data(), v.data(), static_cast<std::size_t>(m), eps, buf);
      }
    }
  }
}

void fill_cost_matrix(const CostModel& model, const Matrix& x, const Matrix& y, Matrix& out) {
  check_dims(x, y);
  if (x.rows() * y.rows() < kParallelCells) return serial::fill_cost_matrix(model, x, y, out);
  out.resize(x.rows(), y.rows());
  const Eigen::Index n = x.rows();
#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (Eigen::Index i = 0; i < n; ++i) cost_row(model, x, y, i, out.row(i).data());
}

void row_sums(const CostModel& model, const Matrix& x, const Matrix& y, std::span<double> out) {
  check_dims(x, y);
  if (static_cast<std::size_t>(x.rows()) != out.size()) {
    throw ValidationError("row_sums: shape mismatch");
  }
  if (x.rows() * y.rows() < kParallelCells) return serial::row_sums(model, x, y, out);
  const Eigen::Index n = x.rows();
  const auto m = static_cast<std::size_t>(y.rows());
#pragma omp parallel num_threads(thread_count())
  {
    Vector row(y.rows());
#pragma omp for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
      cost_row(model, x, y, i, row.data());
      out[static_cast<std::size_t>(i)] = ordered_sum(row.data(), m);
    }
  }
}

void gibbs_coupling(const Matrix& cost, std::span<const double> f, std::span<const double> g,
                    std::span<const double> log_a, std::span<const double> log_b, double eps,
                    Matrix& out) {
  check_gibbs(cost, f, g, log_a, log_b);
  if (cost.size() < kParallelCells) return serial::gibbs_coupling(cost, f, g, log_a, log_b, eps, out);
  out.resize(cost.rows(), cost.cols());
  const Eigen::Index n = cost.rows();
#pragma omp parallel num_threads(thread_count())
  {
    Eigen::ArrayXd buf;
#pragma omp for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      gibbs_row(cost.row(i).data(), f[k], g, log_a[k], log_b, eps, buf, out.row(i).data());
    }
  }
}

namespace serial {

void softmin_rows(const Matrix& cost, std::span<const double> v, double eps,
                  std::span<double> out) {
  check_shapes(cost, v, out);
  Eigen::ArrayXd buf;
  for (Eigen::Index i = 0; i < cost.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = softmin_row(cost.row(i).data(), v.data(), v.size(), eps, buf);
  }
}

void softmin_rows_lazy(const CostModel& model, const Matrix& x, const Matrix& y,
                       std::span<const double> v, double eps, std::span<double> out,
                       std::size_t block_rows) {
  check_dims(x, y);
  if (static_cast<std::size_t>(y.rows()) != v.size() ||
      static_cast<std::size_t>(x.rows()) != out.size()) {
    throw ValidationError("softmin_rows_lazy: shape mismatch");
  }
  (void)block_rows;
  Eigen::ArrayXd buf;
  Vector row(y.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    cost_row(model, x, y, i, row.data());
    out[static_cast<std::size_t>(i)] = softmin_row(row.data(), v.data(), v.size(), eps, buf);
  }
}

void fill_cost_matrix(const CostModel& model, const Matrix& x, const Matrix& y, Matrix& out) {
  check_dims(x, y);
  out.resize(x.rows(), y.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) cost_row(model, x, y, i, out.row(i).data());
}

void row_sums(const CostModel& model, const Matrix& x, const Matrix& y, std::span<double> out) {
  check_dims(x, y);
  if (static_cast<std::size_t>(x.rows()) != out.size()) {
    throw ValidationError("row_sums: shape mismatch");
  }
  Vector row(y.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    cost_row(model, x, y, i, row.data());
    out[static_cast<std::size_t>(i)] = ordered_sum(row.data(), static_cast<std::size_t>(y.rows()));
  }
}

void gibbs_coupling(const Matrix& cost, std::span<const double> f, std::span<const double> g,
                    std::span<const double> log_a, std::span<const double> log_b, double eps,
                    Matrix& out) {
  check_gibbs(cost, f, g, log_a, log_b);
  out.resize(cost.rows(), cost.cols());
  Eigen::ArrayXd buf;
  for (Eigen::Index i = 0; i < cost.rows(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    gibbs_row(cost.row(i).data(), f[k], g, log_a[k], log_b, eps, buf, out.row(i).data());
  }
}

}  // namespace serial

}  // namespace progot::kernels

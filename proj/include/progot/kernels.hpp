#pragma once

// Data-parallel inner loops. Every kernel has an OpenMP version in
// progot::kernels and a single-threaded reference in progot::kernels::serial.
// Parallelism is over independent rows only; each row is reduced in a fixed
// order, so both versions return bitwise identical results for any thread
// count.

#include "progot/geometry.hpp"
#include "progot/types.hpp"

#include <cstddef>
#include <span>

namespace progot::kernels {

/// Below this many cost cells a kernel runs on the calling thread.
inline constexpr Eigen::Index kParallelCells = 4096;

/// Thread cap for all kernels. Read once from PROGOT_THREADS; falls back to
/// the OpenMP default when unset or invalid.
int thread_count();
/// Override the cap (0 restores the environment/default value).
void set_thread_count(int threads);

/// Stabilized soft minimum -eps * log sum_j exp(-row_j / eps).
double softmin(double eps, std::span<const double> row);

/// out_i = -eps * log sum_j exp((v_j - C_ij) / eps), i.e. min_eps of row i
/// of C shifted by v. C is rows x v.size(), row-major.
void softmin_rows(const Matrix& cost, std::span<const double> v, double eps, std::span<double> out);

/// Same reduction, but rows of C = [h(x_i - y_j)] are generated on demand in
/// blocks of `block_rows`, never materializing the whole matrix.
void softmin_rows_lazy(const CostModel& model, const Matrix& x, const Matrix& y,
                       std::span<const double> v, double eps, std::span<double> out,
                       std::size_t block_rows = 64);

/// Rows of C = [h(x_i - y_j)].
void fill_cost_matrix(const CostModel& model, const Matrix& x, const Matrix& y, Matrix& out);

/// out_i = sum_j C_ij (fixed order per row).
void row_sums(const CostModel& model, const Matrix& x, const Matrix& y, std::span<double> out);

/// Gibbs coupling P_ij = exp(log_a_i + log_b_j + (f_i + g_j - C_ij) / eps).
void gibbs_coupling(const Matrix& cost, std::span<const double> f, std::span<const double> g,
                    std::span<const double> log_a, std::span<const double> log_b, double eps,
                    Matrix& out);

namespace serial {

void softmin_rows(const Matrix& cost, std::span<const double> v, double eps, std::span<double> out);
void softmin_rows_lazy(const CostModel& model, const Matrix& x, const Matrix& y,
                       std::span<const double> v, double eps, std::span<double> out,
                       std::size_t block_rows = 64);
void fill_cost_matrix(const CostModel& model, const Matrix& x, const Matrix& y, Matrix& out);
void row_sums(const CostModel& model, const Matrix& x, const Matrix& y, std::span<double> out);
void gibbs_coupling(const Matrix& cost, std::span<const double> f, std::span<const double> g,
                    std::span<const double> log_a, std::span<const double> log_b, double eps,
                    Matrix& out);

}  // namespace serial

}  // namespace progot::kernels

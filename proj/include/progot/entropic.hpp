#pragma once

#include "progot/coupling.hpp"
#include "progot/geometry.hpp"
#include "progot/sinkhorn.hpp"
#include "progot/types.hpp"

#include <array>
#include <optional>

namespace progot {

/// Soft c-transform of g against the weighted target (b, Y):
///   f(x) = -eps log sum_j b_j exp((g_j - h(x - y_j)) / eps).
double entropic_potential_eval(const PointCloud& target, const Vector& g, double eps,
                               const CostModel& model, const Vector& x);

/// Displacement z(x) = grad h*( sum_j p_j grad h(x - y_j) ) where
/// p_j is proportional to b_j exp((g_j - h(x - y_j)) / eps).
/// The entropic map is x - z(x).
Vector entropic_displacement(const PointCloud& target, const Vector& g, double eps,
                             const CostModel& model, const Vector& x);

/// x - z(x). For p = 2 this is the conditional barycenter sum_j p_j y_j.
Vector entropic_map_apply(const PointCloud& target, const Vector& g, double eps,
                          const CostModel& model, const Vector& x);

/// Row-wise entropic map over a batch of points (OpenMP over rows; results
/// do not depend on how the batch is partitioned).
Matrix entropic_map_apply(const PointCloud& target, const Vector& g, double eps,
                          const CostModel& model, const Matrix& xs);

/// One partial step xs - alpha * z(xs) per row; alpha == 1 returns the map
/// image itself.
Matrix entropic_step(const PointCloud& target, const Vector& g, double eps,
                     const CostModel& model, const Matrix& xs, double alpha);

namespace serial {
Matrix entropic_map_apply(const PointCloud& target, const Vector& g, double eps,
                          const CostModel& model, const Matrix& xs);
}

/// Renormalizes P's rows into a transition kernel Q and returns Z with
/// Z_i = grad h*( sum_j Q_ij grad h(x_i - y_j) ). Throws ValidationError on a
/// zero row.
Matrix barycentric_displacement(const Matrix& p, const Matrix& x, const Matrix& y,
                                const CostModel& model);
inline Matrix barycentric_displacement(const Coupling& p, const Matrix& x, const Matrix& y,
                                       const CostModel& model) {
  return barycentric_displacement(p.matrix, x, y, model);
}

struct DivergenceOptions {
  /// Explicit regularization; when empty, 5% of the mean intra-target cost.
  std::optional<double> eps;
  double tau = 1e-4;
  std::size_t max_iter = 100000;
};

struct DivergenceResult {
  double value = 0.0;
  double eps = 0.0;
  bool converged = false;
  std::array<SinkhornReport, 3> reports;  // (X,Y), (X,X), (Y,Y)
};

/// OT_eps(X,Y) - (OT_eps(X,X) + OT_eps(Y,Y)) / 2 from three Sinkhorn solves.
DivergenceResult sinkhorn_divergence(const PointCloud& x, const PointCloud& y,
                                     const CostModel& model, const DivergenceOptions& options = {});

/// 0.05 x mean of cost_matrix(Y, Y).
double auto_divergence_eps(const CostModel& model, const PointCloud& y);

}  // namespace progot

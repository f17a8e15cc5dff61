#pragma once

#include "progot/coupling.hpp"
#include "progot/geometry.hpp"
#include "progot/types.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace progot {

/// Entropic dual pair. The induced plan is
///   P_ij = a_i b_j exp((f_i + g_j - C_ij) / eps),
/// so f and g are the potentials of the KL(P || a b^T)-regularized problem
/// and f(x_i) agrees with the soft c-transform of g at training points.
struct DualPotentials {
  Vector f;
  Vector g;
  double eps = 0.0;
};

struct SinkhornReport {
  std::size_t iterations = 0;   // completed (f, g) update pairs
  double marginal_error = 0.0;  // row marginal L1 error, the stopping statistic
  double col_marginal_error = 0.0;
  bool converged = false;       // marginal_error <= tau
  double dual_objective = 0.0;
  double mass = 0.0;            // total mass of the induced plan
};

struct SinkhornOptions {
  double tau = 1e-3;
  std::size_t max_iter = 100000;
  /// Warm start; empty means zero.
  Vector f_init;
  Vector g_init;
  /// Above this many bytes for C and C^T the cost is recomputed in row
  /// blocks on every pass instead of being stored.
  std::size_t cost_budget_bytes = std::size_t{2} << 30;
  bool materialize_coupling = true;
  /// Use the single-threaded reference kernels.
  bool serial = false;
};

struct SinkhornResult {
  DualPotentials potentials;
  Coupling coupling;  // empty matrix when materialize_coupling is false
  SinkhornReport report;
};

/// Log-domain Sinkhorn with warm starts.
///
/// Alternates f_i <- min_eps over j of (C_ij - g_j - eps log b_j) and the
/// symmetric g-update until the row marginal L1 error of the induced plan
/// drops to tau or max_iter pairs have run. Non-convergence is reported in
/// the result, not thrown.
///
/// Throws ValidationError for eps <= 0, tau <= 0, mismatched warm-start
/// lengths or dimensions, and for eps below 1e-6 times default_eps_scale.
SinkhornResult sinkhorn_solve(const PointCloud& source, const PointCloud& target,
                              const CostModel& model, double eps,
                              const SinkhornOptions& options = {});

/// Solves at every eps in the list, largest first, each solve warm-started
/// from the previous potentials (options' own warm start seeds the first).
/// Slot p of the result belongs to eps_values[p].
std::vector<SinkhornResult> sinkhorn_solve_path(const PointCloud& source, const PointCloud& target,
                                                const CostModel& model,
                                                const std::vector<double>& eps_values,
                                                const SinkhornOptions& options = {});

/// <f, a> + <g, b> - eps (mass - 1): the entropic OT value at convergence.
double dual_objective(const DualPotentials& pot, const Vector& a, const Vector& b, double mass);

/// Stabilized -eps log sum_j exp(-row_j / eps).
double softmin(double eps, std::span<const double> row);

}  // namespace progot

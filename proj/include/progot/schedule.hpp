#pragma once

#include "progot/geometry.hpp"
#include "progot/sinkhorn.hpp"
#include "progot/types.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace progot {

enum class AlphaKind { decelerated, constant, accelerated };

AlphaKind parse_alpha_kind(std::string_view name);
std::string_view to_string(AlphaKind kind);

/// Step fractions alpha_k and path times t_k = 1 - prod_{l<=k} (1 - alpha_l)
/// for steps k = 0..K.
struct AlphaSchedule {
  std::vector<double> alphas;
  std::vector<double> times;
};

/// constant:    t_k = (k+1)/(K+1)
/// accelerated: t_k = ((k+1)/(K+1))^2
/// decelerated: alpha_k = 1/e for k < K
/// In every case alpha_K = 1 and t_K = 1 exactly.
AlphaSchedule alpha_schedule(AlphaKind kind, std::size_t steps_k);

/// Linear ramp from tau_init (k = 0) to tau_final (k = K); tau_K is exact.
std::vector<double> threshold_schedule(double tau_init, double tau_final, std::size_t steps_k);

/// Everything ProgOT needs per step. Exactly one way of choosing eps_k:
/// an explicit list, or eps_k = theta * default_eps_scale(X^(k), Y)
/// evaluated on the moving source.
struct ScheduleSet {
  std::vector<double> alphas;
  std::vector<double> times;
  std::vector<double> thresholds;
  std::vector<double> epsilons;
  std::optional<double> eps_theta;

  std::size_t steps_k() const { return alphas.empty() ? 0 : alphas.size() - 1; }
  /// Throws ValidationError if any invariant fails.
  void validate() const;
};

ScheduleSet make_schedule(AlphaKind kind, std::size_t steps_k, double tau_init, double tau_final);

/// Random held-out split of a cloud: the training part keeps its points with
/// renormalized weights, the holdout is returned as a bare point matrix.
struct HoldoutSplit {
  PointCloud train;
  Matrix test;
};
HoldoutSplit holdout_split(const PointCloud& cloud, double test_fraction, std::uint64_t seed);

struct EpsilonSchedule {
  std::vector<double> epsilons;
  double eps0 = 0.0;     // default_eps_scale(X, Y)
  double sigma = 0.0;    // default_eps_scale(Y, Y)
  double eps_final = 0.0;
  std::size_t selected = 0;
  std::vector<double> candidate_errors;  // +inf for non-converged candidates
};

inline const std::vector<double> kDefaultScales = {0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0};

/// Regularization schedule tuned on the target's self-transport: each scale
/// s_p proposes eps = s_p * sigma, the one-step entropic self-map of (b, Y)
/// is scored on the holdout by sum ||y - T(y)||^2, the smallest error wins
/// (smallest index on ties), and eps_k interpolates beta0 * eps0 -> eps_final
/// along the path times.
EpsilonSchedule epsilon_schedule(const PointCloud& target, const Matrix& target_test,
                                 const PointCloud& source, const CostModel& model,
                                 const std::vector<double>& scales, double beta0,
                                 const std::vector<double>& times, double tau,
                                 std::size_t max_iter = 100000);

/// Index of the first minimum; +inf entries never win unless all are +inf.
std::size_t first_argmin(const std::vector<double>& values);

}  // namespace progot

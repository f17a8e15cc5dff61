#include "progot/schedule.hpp"

#include "progot/entropic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

namespace progot {

AlphaKind parse_alpha_kind(std::string_view name) {
  if (name == "decelerated") return AlphaKind::decelerated;
  if (name == "constant") return AlphaKind::constant;
  if (name == "accelerated") return AlphaKind::accelerated;
  throw ValidationError("unknown schedule kind '" + std::string(name) +
                        "' (expected decelerated|constant|accelerated)");
}

std::string_view to_string(AlphaKind kind) {
  switch (kind) {
    case AlphaKind::decelerated: return "decelerated";
    case AlphaKind::constant: return "constant";
    case AlphaKind::accelerated: return "accelerated";
  }
  return "constant";
}

AlphaSchedule alpha_schedule(AlphaKind kind, std::size_t steps_k) {
  const std::size_t count = steps_k + 1;
  AlphaSchedule s;
  s.alphas.resize(count);
  s.times.resize(count);
  if (kind == AlphaKind::decelerated) {
    const double alpha = std::exp(-1.0);
    double remaining = 1.0;
    for (std::size_t k = 0; k < steps_k; ++k) {
      s.alphas[k] = alpha;
      remaining *= 1.0 - alpha;
      s.times[k] = 1.0 - remaining;
    }
  } else {
    const double denom = static_cast<double>(count);
    double prev = 0.0;
    for (std::size_t k = 0; k < steps_k; ++k) {
      double t = static_cast<double>(k + 1) / denom;
      if (kind == AlphaKind::accelerated) t *= t;
      s.alphas[k] = (t - prev) / (1.0 - prev);
      s.times[k] = t;
      prev = t;
    }
  }
  s.alphas[steps_k] = 1.0;
  s.times[steps_k] = 1.0;
  return s;
}

std::vector<double> threshold_schedule(double tau_init, double tau_final, std::size_t steps_k) {
  if (!(tau_final > 0.0) || !(tau_init >= tau_final)) {
    throw ValidationError("threshold schedule requires tau_init >= tau_K > 0");
  }
  std::vector<double> out(steps_k + 1);
  for (std::size_t k = 0; k < steps_k; ++k) {
    const double frac = static_cast<double>(k) / static_cast<double>(steps_k);
    out[k] = tau_init + frac * (tau_final - tau_init);
  }
  out[steps_k] = tau_final;
  return out;
}

void ScheduleSet::validate() const {
  const std::size_t count = alphas.size();
  if (count == 0) throw ValidationError("schedule: no steps");
  if (times.size() != count || thresholds.size() != count) {
    throw ValidationError("schedule: alphas, times and thresholds must all have K+1 entries");
  }
  const bool explicit_eps = !epsilons.empty();
  if (explicit_eps == eps_theta.has_value()) {
    throw ValidationError("schedule: give exactly one of an explicit eps list or a theta rule");
  }
  if (explicit_eps && epsilons.size() != count) {
    throw ValidationError("schedule: epsilon list must have K+1 entries");
  }
  if (eps_theta && !(*eps_theta > 0.0 && std::isfinite(*eps_theta))) {
    throw ValidationError("schedule: theta must be > 0");
  }
  for (std::size_t k = 0; k < count; ++k) {
    if (!(alphas[k] > 0.0 && alphas[k] <= 1.0)) {
      throw ValidationError("schedule: alphas must lie in (0, 1]");
    }
    if (!(thresholds[k] > 0.0)) throw ValidationError("schedule: thresholds must be > 0");
    if (k > 0 && thresholds[k] > thresholds[k - 1]) {
      throw ValidationError("schedule: thresholds must be non-increasing");
    }
    if (k > 0 && !(times[k] > times[k - 1])) {
      throw ValidationError("schedule: times must be strictly increasing");
    }
    if (explicit_eps && !(epsilons[k] > 0.0 && std::isfinite(epsilons[k]))) {
      throw ValidationError("schedule: epsilons must be finite and > 0");
    }
  }
  if (alphas.back() != 1.0) throw ValidationError("schedule: last alpha must be 1");
  if (std::abs(times.back() - 1.0) > 1e-12) throw ValidationError("schedule: t_K must be 1");
}

ScheduleSet make_schedule(AlphaKind kind, std::size_t steps_k, double tau_init,
                          double tau_final) {
  auto a = alpha_schedule(kind, steps_k);
  ScheduleSet s;
  s.alphas = std::move(a.alphas);
  s.times = std::move(a.times);
  s.thresholds = threshold_schedule(tau_init, tau_final, steps_k);
  return s;
}

HoldoutSplit holdout_split(const PointCloud& cloud, double test_fraction, std::uint64_t seed) {
  const std::size_t n = cloud.size();
  if (n < 2) throw ValidationError("holdout split needs at least 2 points");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ValidationError("holdout fraction must be in (0, 1)");
  }
  std::size_t n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);

  std::vector<Eigen::Index> idx(n);
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::sort(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());

  const auto d = static_cast<Eigen::Index>(cloud.dim());
  Matrix test(static_cast<Eigen::Index>(n_test), d);
  Matrix train(static_cast<Eigen::Index>(n - n_test), d);
  Vector w(static_cast<Eigen::Index>(n - n_test));
  for (std::size_t r = 0; r < n_test; ++r) test.row(static_cast<Eigen::Index>(r)) = cloud.points().row(idx[r]);
  for (std::size_t r = n_test; r < n; ++r) {
    const auto row = static_cast<Eigen::Index>(r - n_test);
    train.row(row) = cloud.points().row(idx[r]);
    w[row] = cloud.weights()[idx[r]];
  }
  w /= w.sum();
  return {PointCloud(std::move(train), std::move(w)), std::move(test)};
}

std::size_t first_argmin(const std::vector<double>& values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] < values[best]) best = i;
  }
  return best;
}

EpsilonSchedule epsilon_schedule(const PointCloud& target, const Matrix& target_test,
                                 const PointCloud& source, const CostModel& model,
                                 const std::vector<double>& scales, double beta0,
                                 const std::vector<double>& times, double tau,
                                 std::size_t max_iter) {
  if (scales.empty()) throw ValidationError("epsilon schedule: empty scale grid");
  if (!(beta0 > 0.0)) throw ValidationError("epsilon schedule: beta0 must be > 0");
  if (times.empty()) throw ValidationError("epsilon schedule: empty time grid");
  if (target_test.rows() == 0 || static_cast<std::size_t>(target_test.cols()) != target.dim()) {
    throw ValidationError("epsilon schedule: holdout must be a nonempty cloud of the target dimension");
  }
  for (double s : scales) {
    if (!(s > 0.0)) throw ValidationError("epsilon schedule: scales must be > 0");
  }

  EpsilonSchedule out;
  out.eps0 = default_eps_scale(model, source, target);
  out.sigma = default_eps_scale(model, target, target);

  SinkhornOptions so;
  so.tau = tau;
  so.max_iter = max_iter;
  so.materialize_coupling = false;
  out.candidate_errors.assign(scales.size(), std::numeric_limits<double>::infinity());
  bool any_converged = false;
  std::vector<double> candidates;
  for (double s : scales) candidates.push_back(s * out.sigma);
  const auto fits = sinkhorn_solve_path(target, target, model, candidates, so);
  for (std::size_t p = 0; p < scales.size(); ++p) {
    const double eps = candidates[p];
    const auto& res = fits[p];
    if (!res.report.converged) continue;
    any_converged = true;
    const Matrix mapped = entropic_map_apply(target, res.potentials.g, eps, model, target_test);
    out.candidate_errors[p] = (target_test - mapped).squaredNorm();
  }
  if (!any_converged) {
    std::string msg = "epsilon schedule: no candidate self-transport solve converged (scales:";
    for (double s : scales) msg += " " + std::to_string(s);
    throw ConvergenceError(msg + ")");
  }
  out.selected = first_argmin(out.candidate_errors);
  out.eps_final = scales[out.selected] * out.sigma;
  out.epsilons.reserve(times.size());
  for (double t : times) out.epsilons.push_back((1.0 - t) * beta0 * out.eps0 + t * out.eps_final);
  return out;
}

}  // namespace progot

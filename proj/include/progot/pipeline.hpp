#pragma once

// End-to-end runs driven by a RunConfig, shared by the CLI and the benchmarks.

#include "progot/bench.hpp"
#include "progot/config.hpp"
#include "progot/progot.hpp"

#include <optional>
#include <vector>

namespace progot {

/// Resolves the config into a concrete schedule for (X, Y). With the
/// scheduler, the holdout is a seeded split of Y and the tuning details are
/// written to *tuning when given.
ScheduleSet build_schedule(const PointCloud& source, const PointCloud& target,
                           const RunConfig& config, EpsilonSchedule* tuning = nullptr);

struct CoupleOutcome {
  Coupling coupling;
  std::vector<SinkhornReport> reports;
  std::vector<double> epsilons;
  CouplingMetrics metrics;
  bool converged = false;  // the last solve reached its threshold
};

/// Sinkhorn mode: one solve at theta * default scale (or the given eps) and
/// tau_final. ProgOT mode: progot_fit over build_schedule.
CoupleOutcome run_couple(const PointCloud& source, const PointCloud& target,
                         const RunConfig& config);

struct MapFit {
  FitResult fit;
  std::optional<EpsilonSchedule> tuning;
};
MapFit run_fit_map(const PointCloud& source, const PointCloud& target, const RunConfig& config);

}  // namespace progot

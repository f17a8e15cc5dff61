#pragma once

#include "progot/coupling.hpp"
#include "progot/geometry.hpp"
#include "progot/schedule.hpp"
#include "progot/sinkhorn.hpp"
#include "progot/types.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace progot {

struct ProgStep {
  Vector g;
  double eps = 0.0;
  double alpha = 0.0;

  bool operator==(const ProgStep&) const = default;
};

/// A fitted progressive map: the target measure plus the per-step dual
/// potential, regularization and step fraction. Immutable after fitting.
struct ProgState {
  PointCloud target;
  std::vector<ProgStep> steps;
  CostModel model;

  std::size_t steps_k() const { return steps.empty() ? 0 : steps.size() - 1; }
  void validate() const;

  bool operator==(const ProgState&) const = default;
};

struct FitOptions {
  std::size_t max_iter = 100000;
  /// Initialize each solve from (1 - alpha_k) times the previous potentials.
  bool warm_start = true;
  /// Keep X^(0), ..., X^(K) (the cloud each step's solve sees).
  bool record_trajectory = false;
  bool serial = false;
};

struct FitResult {
  ProgState state;
  Coupling coupling;  // EOT coupling of the last step; row i is source point i
  std::vector<SinkhornReport> reports;
  std::vector<Matrix> trajectory;

  std::size_t total_iterations() const;
  bool converged() const { return !reports.empty() && reports.back().converged; }
};

/// Progressive EOT: at step k solve Sinkhorn between the current source
/// cloud and the target at (eps_k, tau_k), then move every source point a
/// fraction alpha_k of the way along its barycentric displacement.
FitResult progot_fit(const PointCloud& source, const PointCloud& target, const CostModel& model,
                     const ScheduleSet& schedule, const FitOptions& options = {});

/// Out-of-sample map: replays every step on x, the last with alpha = 1.
Vector progot_transport(const ProgState& state, const Vector& x);
Matrix progot_transport(const ProgState& state, const Matrix& xs);

/// Clouds before each step and the final image: K + 2 matrices.
std::vector<Matrix> progot_trajectory(const ProgState& state, const Matrix& xs);

/// "PGOT" little-endian binary format. Round trip is bit-exact.
void save_prog_state(const ProgState& state, std::ostream& out);
void save_prog_state(const ProgState& state, const std::filesystem::path& path);
ProgState load_prog_state(std::istream& in);
ProgState load_prog_state(const std::filesystem::path& path);

}  // namespace progot

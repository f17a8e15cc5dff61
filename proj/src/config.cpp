#include "progot/config.hpp"

#include "progot/types.hpp"

#include <cmath>

namespace progot {

SolverMode parse_solver_mode(std::string_view name) {
  if (name == "sinkhorn") return SolverMode::sinkhorn;
  if (name == "progot") return SolverMode::progot;
  throw ValidationError("unknown solver '" + std::string(name) + "' (expected sinkhorn|progot)");
}

std::string_view to_string(SolverMode mode) {
  return mode == SolverMode::sinkhorn ? "sinkhorn" : "progot";
}

EpsSource RunConfig::eps_source() const {
  const int count = (theta ? 1 : 0) + (eps_list.empty() ? 0 : 1) + (use_scheduler ? 1 : 0);
  if (count != 1) {
    throw ValidationError("give exactly one of --theta, --eps/--eps-list or --scheduler");
  }
  if (theta) return EpsSource::theta;
  return eps_list.empty() ? EpsSource::scheduler : EpsSource::list;
}

void RunConfig::validate() const {
  if (!(p > 1.0) || !std::isfinite(p)) throw ValidationError("p must be > 1");
  const EpsSource source = eps_source();
  if (source == EpsSource::theta && !(*theta > 0.0 && std::isfinite(*theta))) {
    throw ValidationError("theta must be > 0");
  }
  for (double e : eps_list) {
    if (!(e > 0.0) || !std::isfinite(e)) throw ValidationError("eps values must be > 0");
  }
  if (source == EpsSource::list) {
    const std::size_t want = mode == SolverMode::sinkhorn ? 1 : steps_k + 1;
    if (eps_list.size() != want) {
      throw ValidationError("expected " + std::to_string(want) + " eps value(s), got " +
                            std::to_string(eps_list.size()));
    }
  }
  if (source == EpsSource::scheduler && mode == SolverMode::sinkhorn) {
    throw ValidationError("the eps scheduler applies to the progressive solver only");
  }
  if (!(beta0 > 0.0)) throw ValidationError("beta0 must be > 0");
  if (scales.empty()) throw ValidationError("scale grid must be nonempty");
  for (double s : scales) {
    if (!(s > 0.0)) throw ValidationError("scales must be > 0");
  }
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    throw ValidationError("holdout fraction must be in (0, 1)");
  }
  if (!(tau_final > 0.0) || !(tau_init >= tau_final)) {
    throw ValidationError("thresholds need tau_init >= tau > 0");
  }
  if (max_iter == 0) throw ValidationError("max_iter must be >= 1");
}

RunConfig RunConfig::coupling_defaults() {
  RunConfig c;
  c.steps_k = 4;
  c.theta = 0.0625;
  c.tau_init = 1e-3;
  c.tau_final = 1e-3;
  return c;
}

RunConfig RunConfig::map_defaults() {
  RunConfig c;
  c.steps_k = 16;
  c.use_scheduler = true;
  c.beta0 = 5.0;
  c.tau_init = 0.1;
  c.tau_final = 1e-3;
  return c;
}

}  // namespace progot

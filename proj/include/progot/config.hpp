#pragma once

#include "progot/schedule.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace progot {

enum class SolverMode { sinkhorn, progot };

SolverMode parse_solver_mode(std::string_view name);
std::string_view to_string(SolverMode mode);

/// How eps is chosen. Exactly one applies per run.
enum class EpsSource { theta, list, scheduler };

/// Settings shared by the CLI subcommands.
struct RunConfig {
  double p = 2.0;
  SolverMode mode = SolverMode::progot;
  std::size_t steps_k = 4;
  AlphaKind kind = AlphaKind::constant;

  std::optional<double> theta;           // eps_k = theta * default scale of (X^(k), Y)
  std::vector<double> eps_list;          // explicit eps_0..eps_K (or a single eps for Sinkhorn)
  bool use_scheduler = false;            // tuned on the target's self-transport
  double beta0 = 5.0;
  std::vector<double> scales = kDefaultScales;
  double holdout_fraction = 0.1;

  double tau_init = 0.1;
  double tau_final = 1e-3;
  std::size_t max_iter = 100000;
  std::uint64_t seed = 0;

  std::string input;
  std::string target;
  std::string output;

  /// Which eps specification is active; throws unless exactly one is set.
  EpsSource eps_source() const;
  /// Range checks plus the eps exclusivity rule. Throws ValidationError.
  void validate() const;

  /// Coupling-mode defaults: theta = 2^-4, tau = 1e-3 throughout, K = 4.
  static RunConfig coupling_defaults();
  /// Map-mode defaults: K = 16, constant speed, scheduler with beta0 = 5
  /// over scales 2^-3..2^3, tau ramp 0.1 -> 1e-3.
  static RunConfig map_defaults();
};

}  // namespace progot

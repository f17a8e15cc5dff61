#include <doctest.h>

#include "oracles.hpp"
#include "progot/entropic.hpp"
#include "progot/progot.hpp"
#include "progot/sinkhorn.hpp"

#include <cmath>

using namespace progot;

namespace {

// Three orders of magnitude centred on the default scale.
const std::vector<double> kFactors = {0.03, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0};

struct Instance {
  PointCloud x;
  PointCloud y;
  CostModel model;
};

std::vector<Instance> instances() {
  std::vector<Instance> out;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const double p = seed % 2 ? 1.5 : 2.0;
    // Far-apart clouds make the raw Gibbs kernel underflow at small eps.
    const double shift = seed < 2 ? 0.0 : 50.0;
    out.push_back({PointCloud(oracle::uniform_points(seed, 40, 3), oracle::random_weights(seed + 1, 40)),
                   PointCloud(oracle::uniform_points(seed + 10, 33, 3, shift, shift + 2.0)),
                   CostModel(p)});
  }
  return out;
}

}  // namespace

TEST_CASE("Sinkhorn stays finite across the eps range") {
  for (const auto& inst : instances()) {
    const double scale = default_eps_scale(inst.model, inst.x, inst.y);
    for (double factor : kFactors) {
      CAPTURE(factor);
      const double eps = factor * scale;
      const auto r = sinkhorn_solve(inst.x, inst.y, inst.model, eps, {.tau = 1e-6});
      CHECK(r.report.converged);
      CHECK(oracle::all_finite(r.potentials.f));
      CHECK(oracle::all_finite(r.potentials.g));
      CHECK(oracle::all_finite(r.coupling.matrix));
      CHECK(std::isfinite(r.report.dual_objective));
      CHECK(r.report.marginal_error <= 1e-6);
      CHECK(r.coupling.matrix.minCoeff() >= 0.0);

      const Matrix far = oracle::uniform_points(99, 20, 3, -100.0, 100.0);
      const Matrix mapped = entropic_map_apply(inst.y, r.potentials.g, eps, inst.model, far);
      CHECK(oracle::all_finite(mapped));
      const double pot = entropic_potential_eval(inst.y, r.potentials.g, eps, inst.model,
                                                 Vector(far.row(0).transpose()));
      CHECK(std::isfinite(pot));
    }
  }
}

TEST_CASE("progressive fits stay finite across the eps range") {
  for (const auto& inst : instances()) {
    const double scale = default_eps_scale(inst.model, inst.x, inst.y);
    for (double factor : kFactors) {
      CAPTURE(factor);
      ScheduleSet s = make_schedule(AlphaKind::constant, 3, 1e-3, 1e-3);
      s.epsilons = std::vector<double>(4, factor * scale);
      FitOptions fo;
      fo.record_trajectory = true;
      const auto fit = progot_fit(inst.x, inst.y, inst.model, s, fo);
      CHECK(fit.converged());
      CHECK(oracle::all_finite(fit.coupling.matrix));
      for (const auto& step : fit.state.steps) CHECK(oracle::all_finite(step.g));
      for (const auto& xk : fit.trajectory) CHECK(oracle::all_finite(xk));
      const Matrix out = progot_transport(fit.state, oracle::uniform_points(5, 15, 3, -100.0, 100.0));
      CHECK(oracle::all_finite(out));
    }
  }
}

TEST_CASE("divergence stays finite and nonnegative across the eps range") {
  for (const auto& inst : instances()) {
    const double base = auto_divergence_eps(inst.model, inst.y);
    for (double factor : kFactors) {
      CAPTURE(factor);
      const auto d = sinkhorn_divergence(inst.x, inst.y, inst.model, {.eps = factor * base, .tau = 1e-6});
      CHECK(d.converged);
      CHECK(std::isfinite(d.value));
      CHECK(d.value >= -1e-8);
      const auto self = sinkhorn_divergence(inst.x, inst.x, inst.model, {.eps = factor * base});
      CHECK(std::abs(self.value) <= 1e-8);
    }
  }
}

TEST_CASE("eps near the floor does not overflow") {
  const PointCloud x(oracle::uniform_points(1, 12, 2));
  const PointCloud y(oracle::uniform_points(2, 12, 2, 100.0, 101.0));
  const CostModel model(2.0);
  const double scale = default_eps_scale(model, x, y);
  const auto r = sinkhorn_solve(x, y, model, 2e-6 * scale, {.max_iter = 2000});
  CHECK(oracle::all_finite(r.potentials.f));
  CHECK(oracle::all_finite(r.potentials.g));
  CHECK(oracle::all_finite(r.coupling.matrix));
  CHECK(std::isfinite(r.report.dual_objective));
}

#include "progot/pipeline.hpp"

#include "progot/kernels.hpp"

namespace progot {

ScheduleSet build_schedule(const PointCloud& source, const PointCloud& target,
                           const RunConfig& config, EpsilonSchedule* tuning) {
  config.validate();
  ScheduleSet s = make_schedule(config.kind, config.steps_k, config.tau_init, config.tau_final);
  switch (config.eps_source()) {
    case EpsSource::theta:
      s.eps_theta = config.theta;
      break;
    case EpsSource::list:
      s.epsilons = config.eps_list;
      break;
    case EpsSource::scheduler: {
      const CostModel model(config.p);
      const HoldoutSplit split = holdout_split(target, config.holdout_fraction, config.seed);
      EpsilonSchedule tuned = epsilon_schedule(split.train, split.test, source, model,
                                               config.scales, config.beta0, s.times,
                                               config.tau_final, config.max_iter);
      s.epsilons = tuned.epsilons;
      if (tuning) *tuning = std::move(tuned);
      break;
    }
  }
  s.validate();
  return s;
}

CoupleOutcome run_couple(const PointCloud& source, const PointCloud& target,
                         const RunConfig& config) {
  config.validate();
  const CostModel model(config.p);
  CoupleOutcome out;
  if (config.mode == SolverMode::sinkhorn) {
    const double eps = config.theta ? *config.theta * default_eps_scale(model, source, target)
                                    : config.eps_list.front();
    SinkhornOptions so;
    so.tau = config.tau_final;
    so.max_iter = config.max_iter;
    auto res = sinkhorn_solve(source, target, model, eps, so);
    out.coupling = std::move(res.coupling);
    out.reports.push_back(res.report);
    out.epsilons.push_back(eps);
  } else {
    const ScheduleSet sched = build_schedule(source, target, config);
    FitOptions fo;
    fo.max_iter = config.max_iter;
    auto fit = progot_fit(source, target, model, sched, fo);
    out.coupling = std::move(fit.coupling);
    out.reports = std::move(fit.reports);
    for (const auto& s : fit.state.steps) out.epsilons.push_back(s.eps);
  }
  Matrix cost;
  kernels::fill_cost_matrix(model, source.points(), target.points(), cost);
  out.metrics = coupling_metrics(out.coupling, cost);
  out.converged = out.reports.back().converged;
  return out;
}

MapFit run_fit_map(const PointCloud& source, const PointCloud& target, const RunConfig& config) {
  if (config.mode != SolverMode::progot) {
    throw ValidationError("fit-map needs the progressive solver");
  }
  EpsilonSchedule tuning;
  const ScheduleSet sched = build_schedule(source, target, config, &tuning);
  FitOptions fo;
  fo.max_iter = config.max_iter;
  MapFit out{progot_fit(source, target, CostModel(config.p), sched, fo), std::nullopt};
  if (config.use_scheduler) out.tuning = std::move(tuning);
  return out;
}

}  // namespace progot

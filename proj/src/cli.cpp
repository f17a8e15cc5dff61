#include "progot/cli.hpp"

#include "progot/bench.hpp"
#include "progot/config.hpp"
#include "progot/entropic.hpp"
#include "progot/io.hpp"
#include "progot/kernels.hpp"
#include "progot/pipeline.hpp"
#include "progot/progot.hpp"
#include "progot/schedule.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace progot {

namespace {

using nlohmann::json;

constexpr const char* kSchema = "progot-report/1";

// Non-finite values have no JSON spelling; they become null.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json array(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(number(x));
  return out;
}

json rows(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) r.push_back(number(m(i, k)));
    out.push_back(std::move(r));
  }
  return out;
}

json report_json(const SinkhornReport& r) {
  return {{"iterations", r.iterations},
          {"marginal_error", number(r.marginal_error)},
          {"col_marginal_error", number(r.col_marginal_error)},
          {"converged", r.converged},
          {"dual_objective", number(r.dual_objective)},
          {"mass", number(r.mass)}};
}

json reports_json(const std::vector<SinkhornReport>& reports) {
  json out = json::array();
  for (const auto& r : reports) out.push_back(report_json(r));
  return out;
}

std::size_t total_iterations(const std::vector<SinkhornReport>& reports) {
  std::size_t s = 0;
  for (const auto& r : reports) s += r.iterations;
  return s;
}

json tuning_json(const EpsilonSchedule& t) {
  return {{"eps0", number(t.eps0)},
          {"sigma", number(t.sigma)},
          {"eps_final", number(t.eps_final)},
          {"selected", t.selected},
          {"candidate_errors", array(t.candidate_errors)}};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Options every subcommand shares.
struct Common {
  std::string out_path;
  bool strict = false;
  bool timing = false;
  int threads = 0;
};

// Solver flags shared by couple, fit-map and bench-blur.
struct SolverFlags {
  std::string solver;
  double p = 2.0;
  std::size_t k = 4;
  std::string kind = "constant";
  std::optional<double> theta;
  std::vector<double> eps;
  bool scheduler = false;
  double beta0 = 5.0;
  std::vector<double> scales = kDefaultScales;
  double holdout = 0.1;
  std::optional<double> tau_init;
  double tau = 1e-3;
  std::size_t max_iter = 100000;
  std::uint64_t seed = 0;

  void add(CLI::App* app, bool with_solver, bool with_scheduler) {
    if (with_solver) {
      app->add_option("--solver", solver, "sinkhorn | progot")->check(CLI::IsMember({"sinkhorn", "progot"}));
    }
    app->add_option("--p", p, "cost exponent, h(z) = sum |z_i|^p / p");
    app->add_option("--K", k, "number of progressive steps after the first");
    app->add_option("--kind", kind, "alpha schedule")
        ->check(CLI::IsMember({"decelerated", "constant", "accelerated"}));
    app->add_option("--theta", theta, "eps_k = theta * mean cost / 20 of the current clouds");
    app->add_option("--eps", eps, "explicit eps (one for sinkhorn, K+1 for progot)")->delimiter(',');
    if (with_scheduler) {
      app->add_flag("--scheduler", scheduler, "tune eps on the target's self-transport");
      app->add_option("--beta0", beta0, "scheduler: initial eps multiplier");
      app->add_option("--scales", scales, "scheduler: candidate scales")->delimiter(',');
      app->add_option("--holdout", holdout, "scheduler: held-out fraction of the target");
    }
    app->add_option("--tau-init", tau_init, "threshold of the first step");
    app->add_option("--tau", tau, "final marginal threshold");
    app->add_option("--max-iter", max_iter, "Sinkhorn iteration cap per solve");
    app->add_option("--seed", seed, "random seed");
  }

  RunConfig config(const RunConfig& defaults) const {
    RunConfig c = defaults;
    if (!solver.empty()) c.mode = parse_solver_mode(solver);
    c.p = p;
    c.steps_k = k;
    c.kind = parse_alpha_kind(kind);
    if (theta || !eps.empty() || scheduler) {
      c.theta = theta;
      c.eps_list = eps;
      c.use_scheduler = scheduler;
    }
    c.beta0 = beta0;
    c.scales = scales;
    c.holdout_fraction = holdout;
    c.tau_final = tau;
    // Without --tau-init, a constant-threshold default stays constant.
    const bool ramp = defaults.tau_init != defaults.tau_final;
    c.tau_init = tau_init ? *tau_init : ramp ? std::max(defaults.tau_init, tau) : tau;
    c.max_iter = max_iter;
    c.seed = seed;
    c.validate();
    return c;
  }
};

json config_json(const RunConfig& c) {
  json j = {{"p", c.p},
            {"solver", std::string(to_string(c.mode))},
            {"K", c.steps_k},
            {"kind", std::string(to_string(c.kind))},
            {"tau_init", c.tau_init},
            {"tau", c.tau_final},
            {"max_iter", c.max_iter},
            {"seed", c.seed}};
  switch (c.eps_source()) {
    case EpsSource::theta: j["theta"] = *c.theta; break;
    case EpsSource::list: j["eps"] = array(c.eps_list); break;
    case EpsSource::scheduler:
      j["scheduler"] = {{"beta0", c.beta0}, {"scales", array(c.scales)},
                        {"holdout", c.holdout_fraction}};
      break;
  }
  return j;
}

struct CloudArgs {
  std::string format;
  bool weights = false;

  void add(CLI::App* app) {
    app->add_option("--format", format, "csv | bin (default: by file extension)")
        ->check(CLI::IsMember({"csv", "bin"}));
    app->add_flag("--weights", weights, "CSV inputs carry a trailing weight column");
  }

  PointCloud read(const std::string& path) const {
    const CloudFormat f = format.empty() ? format_from_path(path) : parse_cloud_format(format);
    return read_point_cloud(path, f, CsvOptions{weights});
  }
};

class Runner {
 public:
  Runner(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int run(const std::vector<std::string>& args);

 private:
  void emit(json j, double seconds);
  void check_strict(bool converged, const std::string& what);

  std::ostream& out_;
  std::ostream& err_;
  Common common_;
  bool nonconverged_ = false;
};

void Runner::emit(json j, double seconds) {
  json doc = {{"schema", kSchema}};
  doc.update(j);
  if (common_.timing) doc["wall_time_s"] = seconds;
  const std::string text = doc.dump(2) + "\n";
  if (common_.out_path.empty()) {
    out_ << text;
  } else {
    std::ofstream f(common_.out_path);
    if (!f) throw ValidationError("cannot open " + common_.out_path + " for writing");
    f << text;
  }
}

void Runner::check_strict(bool converged, const std::string& what) {
  if (converged) return;
  err_ << "warning: " << what << " did not reach its marginal threshold\n";
  nonconverged_ = true;
}

int Runner::run(const std::vector<std::string>& args) {
  CLI::App app{"Progressive entropic optimal transport"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--out", common_.out_path, "write the JSON report here instead of stdout");
  app.add_flag("--strict", common_.strict, "exit 3 when a solve does not converge");
  app.add_flag("--timing", common_.timing, "add wall-clock time to the report");
  app.add_option("--threads", common_.threads, "thread cap for the parallel kernels");

  std::function<void()> action;
  const auto started = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  };

  // couple
  auto* couple = app.add_subcommand("couple", "compute a coupling and its metrics");
  std::string c_src, c_tgt, c_coupling_out;
  bool c_emit = false;
  CloudArgs c_io;
  SolverFlags c_flags;
  c_flags.solver = "progot";
  couple->add_option("source", c_src)->required();
  couple->add_option("target", c_tgt)->required();
  couple->add_option("--coupling-out", c_coupling_out, "write the coupling matrix as CSV");
  couple->add_flag("--emit-coupling", c_emit, "include the coupling matrix in the report");
  c_io.add(couple);
  c_flags.add(couple, true, false);
  couple->callback([&] {
    action = [&] {
      const PointCloud x = c_io.read(c_src);
      const PointCloud y = c_io.read(c_tgt);
      const RunConfig cfg = c_flags.config(RunConfig::coupling_defaults());
      const auto res = run_couple(x, y, cfg);
      if (!c_coupling_out.empty()) {
        std::ofstream f(c_coupling_out);
        if (!f) throw ValidationError("cannot open " + c_coupling_out + " for writing");
        write_matrix_csv(res.coupling.matrix, f);
      }
      json j = {{"command", "couple"},
                {"config", config_json(cfg)},
                {"n", x.size()},
                {"m", y.size()},
                {"epsilons", array(res.epsilons)},
                {"reports", reports_json(res.reports)},
                {"total_iterations", total_iterations(res.reports)},
                {"converged", res.converged},
                {"metrics",
                 {{"transport_cost", number(res.metrics.transport_cost)},
                  {"entropy", number(res.metrics.entropy)},
                  {"row_marginal_error", number(res.metrics.row_error)},
                  {"col_marginal_error", number(res.metrics.col_error)}}}};
      if (c_emit) j["coupling"] = rows(res.coupling.matrix);
      err_ << "couple: " << to_string(cfg.mode) << ", cost " << res.metrics.transport_cost
           << ", marginal errors " << res.metrics.row_error << " / " << res.metrics.col_error
           << ", " << total_iterations(res.reports) << " iterations\n";
      check_strict(res.converged, "the final solve");
      emit(std::move(j), elapsed());
    };
  });

  // fit-map
  auto* fit = app.add_subcommand("fit-map", "fit a progressive map and save its state");
  std::string f_src, f_tgt, f_state;
  CloudArgs f_io;
  SolverFlags f_flags;
  f_flags.k = 16;
  fit->add_option("source", f_src)->required();
  fit->add_option("target", f_tgt)->required();
  fit->add_option("--state-out", f_state, "PGOT file to write")->required();
  f_io.add(fit);
  f_flags.add(fit, false, true);
  fit->callback([&] {
    action = [&] {
      const PointCloud x = f_io.read(f_src);
      const PointCloud y = f_io.read(f_tgt);
      const RunConfig cfg = f_flags.config(RunConfig::map_defaults());
      const auto res = run_fit_map(x, y, cfg);
      save_prog_state(res.fit.state, std::filesystem::path(f_state));
      std::vector<double> eps, alphas;
      for (const auto& s : res.fit.state.steps) {
        eps.push_back(s.eps);
        alphas.push_back(s.alpha);
      }
      json j = {{"command", "fit-map"},
                {"config", config_json(cfg)},
                {"n", x.size()},
                {"m", y.size()},
                {"state", f_state},
                {"epsilons", array(eps)},
                {"alphas", array(alphas)},
                {"reports", reports_json(res.fit.reports)},
                {"total_iterations", res.fit.total_iterations()},
                {"converged", res.fit.converged()}};
      if (res.tuning) j["tuning"] = tuning_json(*res.tuning);
      err_ << "fit-map: " << res.fit.state.steps.size() << " steps, "
           << res.fit.total_iterations() << " iterations, state written to " << f_state << "\n";
      check_strict(res.fit.converged(), "the final solve");
      emit(std::move(j), elapsed());
    };
  });

  // transport
  auto* transport = app.add_subcommand("transport", "apply a saved progressive map");
  std::string t_state, t_points, t_points_out;
  bool t_trajectory = false;
  CloudArgs t_io;
  transport->add_option("state", t_state)->required();
  transport->add_option("points", t_points)->required();
  transport->add_option("--points-out", t_points_out, "write mapped points (format by extension)");
  transport->add_flag("--trajectory", t_trajectory, "report every intermediate cloud");
  t_io.add(transport);
  transport->callback([&] {
    action = [&] {
      const ProgState state = load_prog_state(std::filesystem::path(t_state));
      const PointCloud xs = t_io.read(t_points);
      if (xs.dim() != state.target.dim()) throw ValidationError("transport: dimension mismatch");
      json j = {{"command", "transport"},
                {"state", t_state},
                {"n", xs.size()},
                {"d", xs.dim()},
                {"steps", state.steps.size()}};
      Matrix mapped;
      if (t_trajectory) {
        const auto traj = progot_trajectory(state, xs.points());
        json all = json::array();
        for (const auto& m : traj) all.push_back(rows(m));
        j["trajectory"] = std::move(all);
        mapped = traj.back();
      } else {
        mapped = progot_transport(state, xs.points());
      }
      if (t_points_out.empty()) {
        j["points"] = rows(mapped);
      } else {
        write_point_cloud(xs.with_points(mapped), t_points_out, format_from_path(t_points_out), false);
        j["points_out"] = t_points_out;
      }
      err_ << "transport: mapped " << xs.size() << " points through " << state.steps.size()
           << " steps\n";
      emit(std::move(j), elapsed());
    };
  });

  // divergence
  auto* divergence = app.add_subcommand("divergence", "Sinkhorn divergence between two clouds");
  std::string d_x, d_y;
  double d_p = 2.0, d_tau = 1e-4;
  std::optional<double> d_eps;
  std::size_t d_max_iter = 100000;
  CloudArgs d_io;
  divergence->add_option("x", d_x)->required();
  divergence->add_option("y", d_y)->required();
  divergence->add_option("--p", d_p, "cost exponent");
  divergence->add_option("--eps", d_eps, "regularization (default 5% of mean intra-target cost)");
  divergence->add_option("--tau", d_tau, "marginal threshold");
  divergence->add_option("--max-iter", d_max_iter, "iteration cap per solve");
  d_io.add(divergence);
  divergence->callback([&] {
    action = [&] {
      const PointCloud x = d_io.read(d_x);
      const PointCloud y = d_io.read(d_y);
      DivergenceOptions opt;
      opt.eps = d_eps;
      opt.tau = d_tau;
      opt.max_iter = d_max_iter;
      const auto res = sinkhorn_divergence(x, y, CostModel(d_p), opt);
      json reps = json::array();
      for (const auto& r : res.reports) reps.push_back(report_json(r));
      json j = {{"command", "divergence"},
                {"p", d_p},
                {"value", number(res.value)},
                {"eps", number(res.eps)},
                {"converged", res.converged},
                {"reports", std::move(reps)}};
      err_ << "divergence: " << res.value << " at eps " << res.eps << "\n";
      check_strict(res.converged, "a divergence solve");
      emit(std::move(j), elapsed());
    };
  });

  // schedule
  auto* schedule = app.add_subcommand("schedule", "print a step schedule");
  std::string s_kind = "constant";
  std::size_t s_k = 4;
  double s_tau_init = 0.1, s_tau = 1e-3;
  std::optional<double> s_theta;
  std::vector<double> s_eps;
  schedule->add_option("--kind", s_kind, "alpha schedule")
      ->check(CLI::IsMember({"decelerated", "constant", "accelerated"}));
  schedule->add_option("--K", s_k, "number of steps after the first");
  schedule->add_option("--tau-init", s_tau_init, "threshold of the first step");
  schedule->add_option("--tau", s_tau, "final threshold");
  schedule->add_option("--theta", s_theta, "eps rule multiplier");
  schedule->add_option("--eps", s_eps, "explicit eps list")->delimiter(',');
  schedule->callback([&] {
    action = [&] {
      ScheduleSet s = make_schedule(parse_alpha_kind(s_kind), s_k, s_tau_init, s_tau);
      if (s_theta && !s_eps.empty()) throw ValidationError("give at most one of --theta and --eps");
      s.eps_theta = s_theta;
      s.epsilons = s_eps;
      json j = {{"command", "schedule"},
                {"kind", s_kind},
                {"K", s_k},
                {"alphas", array(s.alphas)},
                {"times", array(s.times)},
                {"thresholds", array(s.thresholds)}};
      if (s_theta || !s_eps.empty()) {
        s.validate();
        if (s_theta) j["theta"] = *s_theta;
        if (!s_eps.empty()) j["epsilons"] = array(s_eps);
      }
      emit(std::move(j), elapsed());
    };
  });

  // bench-blur
  auto* blur = app.add_subcommand("bench-blur", "match random images to their blurred copies");
  std::size_t b_n = 256, b_side = 16;
  double b_sigma = 2.0;
  SolverFlags b_flags;
  b_flags.solver = "progot";
  blur->add_option("--n", b_n, "number of images");
  blur->add_option("--N", b_side, "image side length");
  blur->add_option("--sigma", b_sigma, "blur strength");
  b_flags.add(blur, true, false);
  blur->callback([&] {
    action = [&] {
      RunConfig cfg = b_flags.config(RunConfig::coupling_defaults());
      const auto task = blur_task(random_images(cfg.seed, b_n, b_side), b_sigma);
      const auto res = run_couple(task.source, task.target, cfg);
      const auto id = identity_recovery_metrics(res.coupling);
      json j = {{"command", "bench-blur"},
                {"task", {{"n", b_n}, {"N", b_side}, {"sigma", b_sigma}, {"seed", cfg.seed}}},
                {"config", config_json(cfg)},
                {"epsilons", array(res.epsilons)},
                {"reports", reports_json(res.reports)},
                {"total_iterations", total_iterations(res.reports)},
                {"converged", res.converged},
                {"metrics",
                 {{"trace", number(id.trace)},
                  {"kl", number(id.kl)},
                  {"transport_cost", number(res.metrics.transport_cost)},
                  {"entropy", number(res.metrics.entropy)},
                  {"row_marginal_error", number(res.metrics.row_error)},
                  {"col_marginal_error", number(res.metrics.col_error)}}}};
      err_ << "bench-blur: " << to_string(cfg.mode) << " trace " << id.trace << ", KL " << id.kl
           << "\n";
      check_strict(res.converged, "the final solve");
      emit(std::move(j), elapsed());
    };
  });

  // bench-map
  auto* bmap = app.add_subcommand("bench-map", "affine ground-truth map sweep over sample sizes");
  std::vector<std::size_t> m_sizes{256, 1024};
  std::size_t m_seeds = 3, m_test = 500, m_folds = 5;
  std::vector<double> m_diag{2.0, 1.0}, m_shift;
  bool m_baseline = false;
  SolverFlags m_flags;
  m_flags.k = 16;
  bmap->add_option("--sizes", m_sizes, "training sizes")->delimiter(',');
  bmap->add_option("--seeds", m_seeds, "seeds per size (0..seeds-1)");
  bmap->add_option("--n-test", m_test, "held-out sources");
  bmap->add_option("--diag", m_diag, "diagonal of A (dimension = its length)")->delimiter(',');
  bmap->add_option("--shift", m_shift, "offset b (default 0)")->delimiter(',');
  bmap->add_flag("--baseline", m_baseline, "also fit the cross-validated entropic map");
  bmap->add_option("--folds", m_folds, "cross-validation folds for the baseline");
  m_flags.add(bmap, false, true);
  bmap->callback([&] {
    action = [&] {
      const RunConfig base = m_flags.config(RunConfig::map_defaults());
      const auto d = static_cast<Eigen::Index>(m_diag.size());
      if (d == 0) throw ValidationError("--diag must be nonempty");
      if (!m_shift.empty() && static_cast<Eigen::Index>(m_shift.size()) != d) {
        throw ValidationError("--shift must match --diag in length");
      }
      if (m_sizes.empty() || m_seeds == 0 || m_test == 0) {
        throw ValidationError("need at least one size, seed and test point");
      }
      const Matrix a = Eigen::Map<const Vector>(m_diag.data(), d).asDiagonal();
      const Vector b = m_shift.empty() ? Vector::Zero(d) : Vector(Eigen::Map<const Vector>(m_shift.data(), d));
      json records = json::array();
      json summary = json::array();
      bool all_converged = true;
      for (std::size_t n : m_sizes) {
        std::vector<double> prog_mse, ent_mse;
        for (std::size_t s = 0; s < m_seeds; ++s) {
          RunConfig cfg = base;
          cfg.seed = base.seed + s;
          const auto task = affine_ground_truth(cfg.seed, n, static_cast<std::size_t>(d), a, b);
          const auto test = affine_ground_truth(cfg.seed + 0x9E3779B9u, m_test, static_cast<std::size_t>(d), a, b);
          const auto fit = run_fit_map(task.source, task.target, cfg);
          const double mse = map_mse(progot_transport(fit.fit.state, test.source.points()),
                                     *test.true_map_at_source);
          prog_mse.push_back(mse);
          all_converged = all_converged && fit.fit.converged();
          json r = {{"task", "affine"},
                    {"n", n},
                    {"seed", cfg.seed},
                    {"progot_mse", number(mse)},
                    {"progot_iterations", fit.fit.total_iterations()},
                    {"converged", fit.fit.converged()}};
          if (fit.tuning) r["tuning"] = tuning_json(*fit.tuning);
          if (m_baseline) {
            CrossValidationOptions cv;
            cv.scales = cfg.scales;
            cv.folds = m_folds;
            cv.seed = cfg.seed;
            cv.tau = cfg.tau_final;
            cv.max_iter = cfg.max_iter;
            const auto ent = cross_validated_entropic_map(task.source, task.target,
                                                          CostModel(cfg.p), cv);
            const double emse = map_mse(ent.map.apply(test.source.points()), *test.true_map_at_source);
            ent_mse.push_back(emse);
            r["entropic_mse"] = number(emse);
            r["entropic_eps"] = number(ent.map.eps);
            r["entropic_selected"] = ent.selected;
          }
          err_ << "bench-map: n=" << n << " seed=" << cfg.seed << " progot MSE " << mse << "\n";
          records.push_back(std::move(r));
        }
        json s = {{"n", n}, {"median_progot_mse", number(median(prog_mse))}};
        if (m_baseline) s["median_entropic_mse"] = number(median(ent_mse));
        summary.push_back(std::move(s));
      }
      json j = {{"command", "bench-map"},
                {"config", config_json(base)},
                {"diag", array(m_diag)},
                {"records", std::move(records)},
                {"summary", std::move(summary)}};
      check_strict(all_converged, "a map fit");
      emit(std::move(j), elapsed());
    };
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out_ << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out_ << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err_ << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  if (common_.threads < 0) {
    err_ << "error: --threads must be >= 0\n";
    return 2;
  }
  struct ThreadCap {
    explicit ThreadCap(int t) { kernels::set_thread_count(t); }
    ~ThreadCap() { kernels::set_thread_count(0); }
  } cap(common_.threads);
  try {
    action();
  } catch (const ValidationError& e) {
    err_ << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConvergenceError& e) {
    err_ << "error: " << e.what() << "\n";
    return common_.strict ? 3 : 1;
  } catch (const std::exception& e) {
    err_ << "error: " << e.what() << "\n";
    return 1;
  }
  return common_.strict && nonconverged_ ? 3 : 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Runner runner(out, err);
  return runner.run(args);
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace progot

// Acceptance checks. Usage: acceptance [criterion...]; no arguments runs all.
// Prints one PASS/FAIL line per criterion and exits non-zero on any FAIL.

#include <json.hpp>

#include "progot/bench.hpp"
#include "progot/cli.hpp"
#include "progot/entropic.hpp"
#include "progot/io.hpp"
#include "progot/pipeline.hpp"
#include "progot/progot.hpp"
#include "progot/schedule.hpp"
#include "progot/sinkhorn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace progot;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Matrix uniform(std::uint64_t seed, Eigen::Index n, Eigen::Index d, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = u(rng);
  }
  return m;
}

Vector positive_weights(std::uint64_t seed, Eigen::Index n) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  Vector w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = u(rng);
  return w / w.sum();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

double inner(const Matrix& p, const Matrix& c) { return (p.array() * c.array()).sum(); }

// 1. Blur identity recovery.
Outcome blur_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  const Matrix images = random_images(0, 256, 16);
  auto solve = [&](double sigma, SolverMode mode) {
    const auto task = blur_task(images, sigma);
    RunConfig cfg = RunConfig::coupling_defaults();
    cfg.mode = mode;
    const auto res = run_couple(task.source, task.target, cfg);
    return identity_recovery_metrics(res.coupling);
  };
  const auto sk2 = solve(2.0, SolverMode::sinkhorn);
  const auto pg2 = solve(2.0, SolverMode::progot);
  const auto sk4 = solve(4.0, SolverMode::sinkhorn);
  const auto pg4 = solve(4.0, SolverMode::progot);
  const double elapsed = seconds_since(t0);
  const bool ok2 = sk2.trace >= 0.999 && sk2.kl <= 0.01 && pg2.trace >= 0.999 && pg2.kl <= 0.01;
  const bool ok4 = pg4.kl <= sk4.kl;
  return {ok2 && ok4 && elapsed < 60.0,
          "sigma=2 sinkhorn trace " + fmt(sk2.trace) + " KL " + fmt(sk2.kl) + ", progot trace " +
              fmt(pg2.trace) + " KL " + fmt(pg2.kl) + " (need trace >= 0.999, KL <= 0.01); sigma=4 KL progot " +
              fmt(pg4.kl) + " vs sinkhorn " + fmt(sk4.kl) + "; " + fmt(elapsed) + " s"};
}

// 2. Small-eps Sinkhorn against the exact oracle.
Outcome oracle_equivalence() {
  double worst_gap = 0.0, worst_err = 0.0;
  bool ok = true;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const Eigen::Index n = 8 + static_cast<Eigen::Index>(seed % 25);
    const CostModel model(seed % 2 ? 1.5 : 2.0);
    const bool weighted = seed % 3 == 0;
    const Vector a = weighted ? positive_weights(seed + 500, n) : Vector::Constant(n, 1.0 / n);
    const Vector b = weighted ? positive_weights(seed + 600, n) : Vector::Constant(n, 1.0 / n);
    const PointCloud x(uniform(seed, n, 2), a);
    const PointCloud y(uniform(seed + 100, n, 2, 0.3, 1.3), b);
    const double eps = 1e-3 * default_eps_scale(model, x, y);
    const auto r = sinkhorn_solve(x, y, model, eps, {.tau = 1e-3, .max_iter = 1000000});
    const auto lp = exact_ot_oracle(x, y, model);
    const double gap = std::abs(inner(r.coupling.matrix, cost_matrix(model, x, y)) - lp.cost) / lp.cost;
    const auto err = marginal_error(r.coupling);
    const double e = std::max(err.row, err.col);
    worst_gap = std::max(worst_gap, gap);
    worst_err = std::max(worst_err, e);
    ok = ok && r.report.converged && gap <= 0.02 && e <= 1e-3;
  }
  return {ok, "25 instances, worst relative cost gap " + fmt(worst_gap) + " (<= 0.02), worst marginal error " +
                  fmt(worst_err) + " (<= 1e-3)"};
}

// 3. Marginal feasibility of converged `couple` runs.
Outcome couple_feasibility() {
  const auto dir = std::filesystem::temp_directory_path() / "progot_acceptance_couple";
  std::filesystem::create_directories(dir);
  std::vector<std::pair<PointCloud, PointCloud>> cases;
  cases.emplace_back(PointCloud(uniform(1, 40, 2)), PointCloud(uniform(2, 35, 2, 0.5, 1.5)));
  cases.emplace_back(PointCloud(uniform(3, 30, 3), positive_weights(4, 30)),
                     PointCloud(uniform(5, 50, 3, -1.0, 0.0), positive_weights(6, 50)));
  cases.emplace_back(PointCloud(uniform(7, 60, 1, 0.0, 10.0)), PointCloud(uniform(8, 60, 1, 5.0, 6.0)));
  {
    const std::vector<GmmComponent> src = {{Vector::Zero(2), Matrix::Identity(2, 2) * 0.2, 0.5},
                                           {Vector::Constant(2, 2.0), Matrix::Identity(2, 2) * 0.1, 0.5}};
    const std::vector<GmmComponent> dst = {{Vector::Constant(2, 1.0), Matrix::Identity(2, 2) * 0.5, 1.0}};
    cases.emplace_back(gmm_sample(9, 100, 2, src), gmm_sample(10, 90, 2, dst));
  }
  {
    const auto task = blur_task(random_images(11, 32, 8), 2.0);
    cases.emplace_back(task.source, task.target);
  }
  std::map<std::string, int> converged_runs;
  double worst = 0.0;
  bool ok = true;
  int idx = 0;
  for (const auto& [x, y] : cases) {
    const std::string xp = (dir / ("x" + std::to_string(idx) + ".bin")).string();
    const std::string yp = (dir / ("y" + std::to_string(idx) + ".bin")).string();
    write_point_cloud(x, xp, CloudFormat::bin, true);
    write_point_cloud(y, yp, CloudFormat::bin, true);
    for (const std::string solver : {"sinkhorn", "progot"}) {
      for (const std::string k : {"2", "4", "8"}) {
        if (solver == "sinkhorn" && k != "2") continue;
        std::ostringstream out, err;
        const int code = cli_main({"couple", xp, yp, "--solver", solver, "--K", k}, out, err);
        if (code != 0) {
          ok = false;
          continue;
        }
        const json j = json::parse(out.str());
        if (!j["converged"].get<bool>()) continue;
        ++converged_runs[solver];
        const double e = std::max(j["metrics"]["row_marginal_error"].get<double>(),
                                  j["metrics"]["col_marginal_error"].get<double>());
        worst = std::max(worst, e);
        ok = ok && e <= 1.001e-3;
      }
    }
    ++idx;
  }
  std::filesystem::remove_all(dir);
  ok = ok && converged_runs["sinkhorn"] > 0 && converged_runs["progot"] > 0;
  return {ok, std::to_string(converged_runs["sinkhorn"]) + " sinkhorn and " +
                  std::to_string(converged_runs["progot"]) + " progot converged runs, worst marginal error " +
                  fmt(worst) + " (<= 1.001e-3)"};
}

// 4. Map consistency on the affine task.
Outcome map_consistency() {
  const Matrix a = Eigen::Vector2d(2.0, 1.0).asDiagonal();
  const Vector b = Vector::Zero(2);
  const RunConfig base = RunConfig::map_defaults();
  std::vector<double> small, large, baseline;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RunConfig cfg = base;
    cfg.seed = seed;
    const auto test = affine_ground_truth(seed + 0x9E3779B9u, 500, 2, a, b);
    for (std::size_t n : {256, 4096}) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto task = affine_ground_truth(seed, n, 2, a, b);
      const auto fit = run_fit_map(task.source, task.target, cfg);
      const double mse = map_mse(progot_transport(fit.fit.state, test.source.points()),
                                 *test.true_map_at_source);
      (n == 256 ? small : large).push_back(mse);
      std::cerr << "  seed " << seed << " n " << n << " progot MSE " << mse << " (" << fmt(seconds_since(t0))
                << " s)\n";
      if (n == 4096) {
        const auto t1 = std::chrono::steady_clock::now();
        CrossValidationOptions cv;
        cv.scales = cfg.scales;
        cv.seed = seed;
        cv.tau = cfg.tau_final;
        cv.max_iter = cfg.max_iter;
        const auto ent = cross_validated_entropic_map(task.source, task.target, CostModel(cfg.p), cv);
        const double emse = map_mse(ent.map.apply(test.source.points()), *test.true_map_at_source);
        baseline.push_back(emse);
        std::cerr << "  seed " << seed << " n 4096 entropic MSE " << emse << " (" << fmt(seconds_since(t1))
                  << " s)\n";
      }
    }
  }
  const double m256 = median(small), m4096 = median(large), mcv = median(baseline);
  const bool trend = m4096 < m256;
  const bool ratio = m4096 <= 1.1 * mcv;
  return {trend && ratio, "median progot MSE n=256 " + fmt(m256) + ", n=4096 " + fmt(m4096) +
                              "; cross-validated entropic map n=4096 " + fmt(mcv) + ", ratio " +
                              fmt(m4096 / mcv) + " (<= 1.1)"};
}

// 5. K = 0 equals plain Sinkhorn.
Outcome reduction_identity() {
  const CostModel model(2.0);
  const PointCloud x(uniform(1, 64, 2), positive_weights(2, 64));
  const PointCloud y(uniform(3, 64, 2, 0.5, 1.5));
  const double eps = 0.1 * default_eps_scale(model, x, y);
  ScheduleSet s = make_schedule(AlphaKind::constant, 0, 1e-6, 1e-6);
  s.epsilons = {eps};
  const auto fit = progot_fit(x, y, model, s);
  const auto ref = sinkhorn_solve(x, y, model, eps, {.tau = 1e-6});
  const double pgap = (fit.coupling.matrix - ref.coupling.matrix).cwiseAbs().maxCoeff();
  const Matrix q = uniform(4, 64, 2, -0.5, 2.0);
  const double tgap =
      (progot_transport(fit.state, q) - entropic_map_apply(y, ref.potentials.g, eps, model, q)).cwiseAbs().maxCoeff();
  return {pgap <= 1e-10 && tgap <= 1e-12,
          "coupling gap " + fmt(pgap) + " (<= 1e-10), transport gap " + fmt(tgap) + " (<= 1e-12)"};
}

// 6. Schedule properties.
Outcome schedule_properties() {
  bool ok = true;
  double worst_const = 0.0;
  for (std::size_t k : {1, 4, 16}) {
    for (auto kind : {AlphaKind::decelerated, AlphaKind::constant, AlphaKind::accelerated}) {
      const auto s = alpha_schedule(kind, k);
      ok = ok && s.times.size() == k + 1 && s.times.back() == 1.0 && s.alphas.back() == 1.0;
      for (std::size_t i = 1; i <= k; ++i) ok = ok && s.times[i] > s.times[i - 1];
      for (std::size_t i = 2; i <= k; ++i) {
        const double d1 = s.times[i - 1] - s.times[i - 2];
        const double d2 = s.times[i] - s.times[i - 1];
        if (kind == AlphaKind::constant) {
          worst_const = std::max(worst_const, std::abs(d2 - d1));
          ok = ok && std::abs(d2 - d1) <= 1e-12;
        }
        if (kind == AlphaKind::accelerated) ok = ok && d2 > d1;
      }
    }
  }
  return {ok, "K in {1,4,16} x 3 kinds, worst constant-speed increment deviation " + fmt(worst_const)};
}

// 7. Sinkhorn divergence properties.
Outcome divergence_properties() {
  double worst_self = 0.0, worst_sym = 0.0, lowest = INFINITY;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const CostModel model(seed % 2 ? 1.5 : 2.0);
    const Eigen::Index n = 10 + static_cast<Eigen::Index>(seed);
    const PointCloud x(uniform(seed, n, 2), positive_weights(seed + 40, n));
    const PointCloud y(uniform(seed + 20, 25, 2, 0.2 * seed / 20.0, 1.0 + 0.1 * seed));
    DivergenceOptions o;
    o.eps = auto_divergence_eps(model, y);
    o.tau = 1e-9;
    o.max_iter = 1000000;
    worst_self = std::max(worst_self, std::abs(sinkhorn_divergence(x, x, model, o).value));
    const double xy = sinkhorn_divergence(x, y, model, o).value;
    const double yx = sinkhorn_divergence(y, x, model, o).value;
    worst_sym = std::max(worst_sym, std::abs(xy - yx));
    lowest = std::min({lowest, xy, yx});
  }
  return {worst_self <= 1e-8 && worst_sym <= 1e-8 && lowest >= -1e-8,
          "20 instances, max |D(X,X)| " + fmt(worst_self) + ", max asymmetry " + fmt(worst_sym) + ", min D " +
              fmt(lowest)};
}

// 8. Empirical stability of entropic maps.
Outcome map_stability() {
  const CostModel model(2.0);
  bool ok = true;
  double worst_ratio = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Eigen::Index n = 12 + static_cast<Eigen::Index>(seed % 21);
    const PointCloud mu(uniform(seed, n, 2, -1.0, 1.0));
    const double scale = 0.02 + 0.01 * static_cast<double>(seed % 10);
    const PointCloud mu2(mu.points() + scale * uniform(seed + 7, n, 2, -1.0, 1.0));
    const PointCloud rho(uniform(seed + 13, 32, 2, -1.0, 1.0));
    double radius = 0.0;
    for (const Matrix* m : {&mu.points(), &mu2.points(), &rho.points()}) {
      radius = std::max(radius, m->rowwise().norm().maxCoeff());
    }
    // The oracle cost is (1/2)|x - y|^2.
    const double w2sq = 2.0 * exact_ot_oracle(mu, mu2, model).cost;
    for (double theta : {0.1, 1.0}) {
      const double eps = theta * default_eps_scale(model, mu, rho);
      const SinkhornOptions so{.tau = 1e-6, .max_iter = 1000000, .materialize_coupling = false};
      const auto r1 = sinkhorn_solve(mu, rho, model, eps, so);
      const auto r2 = sinkhorn_solve(mu2, rho, model, eps, so);
      ok = ok && r1.report.converged && r2.report.converged;
      const Matrix t1 = entropic_map_apply(rho, r1.potentials.g, eps, model, mu.points());
      const Matrix t2 = entropic_map_apply(rho, r2.potentials.g, eps, model, mu.points());
      const double lhs = (t1 - t2).rowwise().squaredNorm().dot(mu.weights());
      const double rhs = 3.0 * radius * radius / eps * w2sq + 1e-8;
      worst_ratio = std::max(worst_ratio, lhs / rhs);
      ok = ok && lhs <= rhs;
    }
  }
  return {ok, "20 triples x 2 eps, worst lhs/rhs " + fmt(worst_ratio) + " (<= 1)"};
}

// 9. Warm starts save iterations.
Outcome warm_start_benefit() {
  const std::vector<GmmComponent> src = {
      {Vector::Zero(2), Matrix::Identity(2, 2) * 0.3, 0.3},
      {Eigen::Vector2d(3.0, 0.0), Matrix::Identity(2, 2) * 0.2, 0.3},
      {Eigen::Vector2d(0.0, 3.0), Matrix::Identity(2, 2) * 0.4, 0.4}};
  const std::vector<GmmComponent> dst = {
      {Eigen::Vector2d(5.0, 5.0), Matrix::Identity(2, 2) * 0.5, 0.5},
      {Eigen::Vector2d(7.0, 4.0), Matrix::Identity(2, 2) * 0.3, 0.5}};
  const RunConfig cfg = RunConfig::coupling_defaults();
  int wins = 0;
  std::string counts;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const PointCloud x = gmm_sample(2 * seed, 256, 2, src);
    const PointCloud y = gmm_sample(2 * seed + 1, 256, 2, dst);
    const ScheduleSet s = build_schedule(x, y, cfg);
    FitOptions warm, cold;
    warm.max_iter = cold.max_iter = cfg.max_iter;
    cold.warm_start = false;
    const auto a = progot_fit(x, y, CostModel(2.0), s, warm);
    const auto b = progot_fit(x, y, CostModel(2.0), s, cold);
    std::size_t wa = 0, wb = 0;
    for (std::size_t k = 1; k < a.reports.size(); ++k) {
      wa += a.reports[k].iterations;
      wb += b.reports[k].iterations;
    }
    if (wa <= wb) ++wins;
    counts += (seed ? ", " : "") + std::to_string(wa) + "/" + std::to_string(wb);
  }
  return {wins >= 4, std::to_string(wins) + " of 5 seeds (need 4); warm/cold iterations " + counts};
}

// 10. Unit and property suites plus an eps sweep without NaN or Inf.
Outcome numerical_robustness(const std::filesystem::path& self) {
  std::filesystem::path dir = self.parent_path();
  if (const char* env = std::getenv("PROGOT_TEST_BIN_DIR")) dir = env;
  const std::vector<std::string> suites = {"test_geometry", "test_kernels", "test_sinkhorn", "test_entropic",
                                           "test_schedule", "test_progot",  "test_bench",    "test_io",
                                           "test_cli",      "test_robustness"};
  std::vector<std::string> failed;
  for (const auto& s : suites) {
    const auto path = dir / s;
    const std::string cmd = "\"" + path.string() + "\" > /dev/null 2>&1";
    if (!std::filesystem::exists(path) || std::system(cmd.c_str()) != 0) failed.push_back(s);
  }

  // 10^-1.5 .. 10^1.5 times the default scale.
  std::size_t nonfinite = 0, unconverged = 0, runs = 0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const CostModel model(seed % 2 ? 1.5 : 2.0);
    const PointCloud x(uniform(seed, 48, 3), positive_weights(seed + 9, 48));
    const PointCloud y(uniform(seed + 30, 40, 3, 10.0 * seed, 10.0 * seed + 1.0));
    const double scale = default_eps_scale(model, x, y);
    for (int e = -6; e <= 6; ++e) {
      const double eps = scale * std::pow(10.0, e / 4.0);
      ++runs;
      const auto r = sinkhorn_solve(x, y, model, eps, {.tau = 1e-6, .max_iter = 200000});
      if (!r.report.converged) ++unconverged;
      const Matrix q = uniform(seed + 60, 16, 3, -50.0, 50.0);
      const Matrix mapped = entropic_map_apply(y, r.potentials.g, eps, model, q);
      ScheduleSet s = make_schedule(AlphaKind::accelerated, 3, 1e-3, 1e-3);
      s.epsilons.assign(4, eps);
      const auto fit = progot_fit(x, y, model, s);
      const auto d = sinkhorn_divergence(x, y, model, {.eps = eps, .tau = 1e-6, .max_iter = 200000});
      const bool finite = r.potentials.f.allFinite() && r.potentials.g.allFinite() &&
                          r.coupling.matrix.allFinite() && mapped.allFinite() &&
                          fit.coupling.matrix.allFinite() && progot_transport(fit.state, q).allFinite() &&
                          std::isfinite(d.value) && std::isfinite(r.report.dual_objective);
      if (!finite) ++nonfinite;
      if (!fit.converged() || !d.converged) ++unconverged;
    }
  }
  std::string detail = std::to_string(suites.size() - failed.size()) + "/" + std::to_string(suites.size()) +
                       " suites passed";
  for (const auto& f : failed) detail += " [" + f + " failed]";
  detail += "; eps sweep over 3 decades: " + std::to_string(runs) + " settings, " + std::to_string(nonfinite) +
            " with non-finite output, " + std::to_string(unconverged) + " unconverged solves";
  return {failed.empty() && nonfinite == 0 && unconverged == 0, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::filesystem::path self = std::filesystem::absolute(argv[0]);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"blur identity recovery", blur_recovery},
      {"oracle equivalence", oracle_equivalence},
      {"couple feasibility", couple_feasibility},
      {"map consistency trend", map_consistency},
      {"K=0 reduction", reduction_identity},
      {"schedule properties", schedule_properties},
      {"Sinkhorn divergence properties", divergence_properties},
      {"entropic map stability", map_stability},
      {"warm-start benefit", warm_start_benefit},
      {"numerical robustness", [&] { return numerical_robustness(self); }},
  };
  std::vector<std::size_t> selected;
  for (int i = 1; i < argc; ++i) {
    const int c = std::atoi(argv[i]);
    if (c < 1 || c > static_cast<int>(criteria.size())) {
      std::cerr << "usage: acceptance [1-" << criteria.size() << "]...\n";
      return 2;
    }
    selected.push_back(static_cast<std::size_t>(c));
  }
  if (selected.empty()) {
    for (std::size_t c = 1; c <= criteria.size(); ++c) selected.push_back(c);
  }
  bool all = true;
  for (std::size_t c : selected) {
    const auto& [name, fn] = criteria[c - 1];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c << " (" << name << "): " << o.detail << " ["
              << fmt(seconds_since(t0)) << " s]" << std::endl;
  }
  return all ? 0 : 1;
}

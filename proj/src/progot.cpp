#include "progot/progot.hpp"

#include "binary_io.hpp"
#include "progot/entropic.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

namespace progot {

namespace {

constexpr char kMagic[5] = "PGOT";
constexpr std::uint32_t kVersion = 1;

double step_alpha(const ProgState& state, std::size_t k) {
  return k + 1 == state.steps.size() ? 1.0 : state.steps[k].alpha;
}

}  // namespace

void ProgState::validate() const {
  if (steps.empty()) throw ValidationError("ProgState: no steps");
  const auto m = static_cast<Eigen::Index>(target.size());
  for (const auto& s : steps) {
    if (s.g.size() != m) throw ValidationError("ProgState: potential length differs from target size");
    if (!s.g.allFinite()) throw ValidationError("ProgState: non-finite potential");
    if (!(s.eps > 0.0 && std::isfinite(s.eps))) throw ValidationError("ProgState: eps must be > 0");
    if (!(s.alpha > 0.0 && s.alpha <= 1.0)) throw ValidationError("ProgState: alpha must lie in (0, 1]");
  }
}

std::size_t FitResult::total_iterations() const {
  return std::accumulate(reports.begin(), reports.end(), std::size_t{0},
                         [](std::size_t acc, const SinkhornReport& r) { return acc + r.iterations; });
}

FitResult progot_fit(const PointCloud& source, const PointCloud& target, const CostModel& model,
                     const ScheduleSet& schedule, const FitOptions& options) {
  schedule.validate();
  if (source.dim() != target.dim()) throw ValidationError("progot_fit: dimension mismatch");

  const std::size_t count = schedule.alphas.size();
  FitResult out{ProgState{target, {}, model}, {}, {}, {}};
  out.state.steps.reserve(count);
  out.reports.reserve(count);

  Matrix x = source.points();
  Vector f_prev;
  Vector g_prev;
  for (std::size_t k = 0; k < count; ++k) {
    const double alpha = schedule.alphas[k];
    if (options.record_trajectory) out.trajectory.push_back(x);
    const PointCloud current = source.with_points(x);
    const double eps = schedule.eps_theta
                           ? *schedule.eps_theta * default_eps_scale(model, current, target)
                           : schedule.epsilons[k];

    SinkhornOptions so;
    so.tau = schedule.thresholds[k];
    so.max_iter = options.max_iter;
    so.serial = options.serial;
    if (options.warm_start && k > 0) {
      so.f_init = (1.0 - alpha) * f_prev;
      so.g_init = (1.0 - alpha) * g_prev;
    }
    auto res = sinkhorn_solve(current, target, model, eps, so);
    out.reports.push_back(res.report);
    out.state.steps.push_back({res.potentials.g, eps, alpha});

    if (k + 1 < count) {
      const Matrix z = barycentric_displacement(res.coupling, x, target.points(), model);
      x -= alpha * z;
      f_prev = std::move(res.potentials.f);
      g_prev = std::move(res.potentials.g);
    } else {
      out.coupling = std::move(res.coupling);
    }
  }
  return out;
}

Vector progot_transport(const ProgState& state, const Vector& x) {
  Matrix xs = x.transpose();
  return progot_transport(state, xs).row(0).transpose();
}

Matrix progot_transport(const ProgState& state, const Matrix& xs) {
  state.validate();
  Matrix y = xs;
  for (std::size_t k = 0; k < state.steps.size(); ++k) {
    const auto& s = state.steps[k];
    y = entropic_step(state.target, s.g, s.eps, state.model, y, step_alpha(state, k));
  }
  return y;
}

std::vector<Matrix> progot_trajectory(const ProgState& state, const Matrix& xs) {
  state.validate();
  std::vector<Matrix> out;
  out.reserve(state.steps.size() + 1);
  out.push_back(xs);
  for (std::size_t k = 0; k < state.steps.size(); ++k) {
    const auto& s = state.steps[k];
    out.push_back(entropic_step(state.target, s.g, s.eps, state.model, out.back(), step_alpha(state, k)));
  }
  return out;
}

void save_prog_state(const ProgState& state, std::ostream& out) {
  using namespace binary;
  state.validate();
  const std::size_t m = state.target.size();
  const std::size_t d = state.target.dim();
  put_magic(out, kMagic);
  put_u32(out, kVersion);
  put_u64(out, state.steps_k());
  put_u64(out, m);
  put_u64(out, d);
  put_f64(out, state.model.p());
  for (const auto& s : state.steps) {
    put_f64(out, s.eps);
    put_f64(out, s.alpha);
    for (Eigen::Index j = 0; j < s.g.size(); ++j) put_f64(out, s.g[j]);
  }
  const Vector& b = state.target.weights();
  for (Eigen::Index j = 0; j < b.size(); ++j) put_f64(out, b[j]);
  const Matrix& y = state.target.points();
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    for (Eigen::Index c = 0; c < y.cols(); ++c) put_f64(out, y(i, c));
  }
  if (!out) throw std::runtime_error("failed writing ProgState");
}

void save_prog_state(const ProgState& state, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open " + path.string() + " for writing");
  save_prog_state(state, out);
}

ProgState load_prog_state(std::istream& in) {
  using namespace binary;
  expect_magic(in, kMagic);
  const std::uint32_t version = get_u32(in, "version");
  if (version != kVersion) {
    throw ValidationError("unsupported PGOT version " + std::to_string(version));
  }
  const std::uint64_t steps_k = get_u64(in, "K");
  const std::uint64_t m = get_u64(in, "m");
  const std::uint64_t d = get_u64(in, "d");
  const double p = get_f64(in, "p");
  constexpr std::uint64_t kLimit = std::uint64_t{1} << 32;
  if (m == 0 || d == 0 || m > kLimit || d > kLimit || steps_k >= kLimit) {
    throw ValidationError("PGOT header has implausible sizes");
  }
  const CostModel model(p);

  std::vector<ProgStep> steps(steps_k + 1);
  for (auto& s : steps) {
    s.eps = get_f64(in, "eps");
    s.alpha = get_f64(in, "alpha");
    s.g.resize(static_cast<Eigen::Index>(m));
    for (Eigen::Index j = 0; j < s.g.size(); ++j) s.g[j] = get_f64(in, "potential");
  }
  Vector b(static_cast<Eigen::Index>(m));
  for (Eigen::Index j = 0; j < b.size(); ++j) b[j] = get_f64(in, "weights");
  Matrix y(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    for (Eigen::Index c = 0; c < y.cols(); ++c) y(i, c) = get_f64(in, "points");
  }
  ProgState state{PointCloud(std::move(y), std::move(b)), std::move(steps), model};
  state.validate();
  return state;
}

ProgState load_prog_state(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return load_prog_state(in);
}

}  // namespace progot

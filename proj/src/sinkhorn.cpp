#include "progot/sinkhorn.hpp"

#include "progot/kernels.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>

namespace progot {

namespace {

std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}
std::span<double> as_span(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

// Row and column soft-min passes over C, either stored (C and C^T) or
// regenerated in row blocks when the pair would exceed the memory budget.
class CostOperator {
 public:
  CostOperator(const CostModel& model, const Matrix& x, const Matrix& y, std::size_t budget,
               bool serial)
      : model_(model), x_(x), y_(y), serial_(serial) {
    const double bytes = 2.0 * static_cast<double>(x.rows()) * static_cast<double>(y.rows()) *
                         sizeof(double);
    if (bytes <= static_cast<double>(budget)) {
      cost_.emplace();
      if (serial_) {
        kernels::serial::fill_cost_matrix(model, x, y, *cost_);
      } else {
        kernels::fill_cost_matrix(model, x, y, *cost_);
      }
      cost_t_.emplace(cost_->transpose());
    }
  }

  bool dense() const { return cost_.has_value(); }
  const Matrix& cost() const { return *cost_; }

  double mean() const {
    if (!dense()) return mean_cost(model_, x_, y_);
    double total = 0.0;
    for (Eigen::Index i = 0; i < cost_->rows(); ++i) {
      double row = 0.0;
      for (Eigen::Index j = 0; j < cost_->cols(); ++j) row += (*cost_)(i, j);
      total += row;
    }
    return total / static_cast<double>(cost_->size());
  }

  // out_i = min_eps_j (C_ij - v_j)
  void rows(std::span<const double> v, double eps, std::span<double> out) const {
    if (dense()) {
      serial_ ? kernels::serial::softmin_rows(*cost_, v, eps, out)
              : kernels::softmin_rows(*cost_, v, eps, out);
    } else {
      serial_ ? kernels::serial::softmin_rows_lazy(model_, x_, y_, v, eps, out)
              : kernels::softmin_rows_lazy(model_, x_, y_, v, eps, out);
    }
  }

  // out_j = min_eps_i (C_ij - u_i)
  void cols(std::span<const double> u, double eps, std::span<double> out) const {
    if (dense()) {
      serial_ ? kernels::serial::softmin_rows(*cost_t_, u, eps, out)
              : kernels::softmin_rows(*cost_t_, u, eps, out);
    } else {
      serial_ ? kernels::serial::softmin_rows_lazy(model_, y_, x_, u, eps, out)
              : kernels::softmin_rows_lazy(model_, y_, x_, u, eps, out);
    }
  }

 private:
  const CostModel& model_;
  const Matrix& x_;
  const Matrix& y_;
  bool serial_;
  std::optional<Matrix> cost_;
  std::optional<Matrix> cost_t_;
};

// a_i exp((f_i - s_i) / eps) summed as L1 deviation from a, plus the total mass.
std::pair<double, double> marginal_from_softmin(const Vector& pot, const Vector& smin,
                                                const Vector& w, double eps) {
  double err = 0.0;
  double mass = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double r = w[i] * std::exp((pot[i] - smin[i]) / eps);
    err += std::abs(r - w[i]);
    mass += r;
  }
  return {err, mass};
}

}  // namespace

double softmin(double eps, std::span<const double> row) { return kernels::softmin(eps, row); }

double dual_objective(const DualPotentials& pot, const Vector& a, const Vector& b, double mass) {
  if (pot.f.size() != a.size() || pot.g.size() != b.size()) {
    throw ValidationError("dual_objective: shape mismatch");
  }
  return pot.f.dot(a) + pot.g.dot(b) - pot.eps * (mass - 1.0);
}

SinkhornResult sinkhorn_solve(const PointCloud& source, const PointCloud& target,
                              const CostModel& model, double eps,
                              const SinkhornOptions& options) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw ValidationError("sinkhorn: eps must be > 0");
  if (!(options.tau > 0.0)) throw ValidationError("sinkhorn: tau must be > 0");
  if (source.dim() != target.dim()) {
    throw ValidationError("sinkhorn: dimension mismatch");
  }
  const auto n = static_cast<Eigen::Index>(source.size());
  const auto m = static_cast<Eigen::Index>(target.size());
  if (options.f_init.size() != 0 && options.f_init.size() != n) {
    throw ValidationError("sinkhorn: f_init has wrong length");
  }
  if (options.g_init.size() != 0 && options.g_init.size() != m) {
    throw ValidationError("sinkhorn: g_init has wrong length");
  }

  const Vector& a = source.weights();
  const Vector& b = target.weights();
  const Vector log_a = a.array().log();
  const Vector log_b = b.array().log();

  CostOperator op(model, source.points(), target.points(), options.cost_budget_bytes,
                  options.serial);
  const double scale = op.mean() / 20.0;
  if (scale > 0.0 && eps < 1e-6 * scale) {
    throw ValidationError("sinkhorn: eps " + std::to_string(eps) +
                          " is below 1e-6 x default scale " + std::to_string(scale));
  }

  Vector f = options.f_init.size() ? options.f_init : Vector::Zero(n);
  Vector g = options.g_init.size() ? options.g_init : Vector::Zero(m);
  if (!f.allFinite() || !g.allFinite()) throw ValidationError("sinkhorn: non-finite warm start");

  Vector s(n), t(m), shifted_g(m), shifted_f(n);
  SinkhornReport report;
  std::size_t it = 0;
#ifndef NDEBUG
  double last_objective = -std::numeric_limits<double>::infinity();
#endif
  for (;;) {
    shifted_g = g + eps * log_b;
    op.rows(as_span(shifted_g), eps, as_span(s));
    const auto [err, mass] = marginal_from_softmin(f, s, a, eps);
    report.marginal_error = err;
    report.mass = mass;
    if (!std::isfinite(err)) {
      throw ConvergenceError("sinkhorn: non-finite marginal error (eps too small?)");
    }
#ifndef NDEBUG
    if (it > 0 && it % 10 == 0) {
      const double obj = f.dot(a) + g.dot(b) - eps * (mass - 1.0);
      assert(obj >= last_objective - 1e-9 * (1.0 + std::abs(obj)));
      last_objective = obj;
    }
#endif
    if (err <= options.tau) {
      report.converged = true;
      break;
    }
    if (it >= options.max_iter) break;
    f = s;
    shifted_f = f + eps * log_a;
    op.cols(as_span(shifted_f), eps, as_span(t));
    g = t;
    ++it;
  }
  report.iterations = it;

  shifted_f = f + eps * log_a;
  op.cols(as_span(shifted_f), eps, as_span(t));
  report.col_marginal_error = marginal_from_softmin(g, t, b, eps).first;

  SinkhornResult result;
  result.potentials = DualPotentials{std::move(f), std::move(g), eps};
  report.dual_objective = dual_objective(result.potentials, a, b, report.mass);
  result.report = report;

  if (options.materialize_coupling) {
    Matrix p = op.dense() ? op.cost() : cost_matrix(model, source.points(), target.points());
    const auto& pot = result.potentials;
    if (options.serial) {
      kernels::serial::gibbs_coupling(p, as_span(pot.f), as_span(pot.g), as_span(log_a),
                                      as_span(log_b), eps, p);
    } else {
      kernels::gibbs_coupling(p, as_span(pot.f), as_span(pot.g), as_span(log_a), as_span(log_b),
                              eps, p);
    }
    result.coupling = Coupling{std::move(p), a, b};
  }
  return result;
}

MarginalErrors marginal_error(const Matrix& p, const Vector& a, const Vector& b) {
  if (p.rows() != a.size() || p.cols() != b.size()) {
    throw ValidationError("marginal_error: shape mismatch");
  }
  MarginalErrors e;
  e.row = (p.rowwise().sum() - a).cwiseAbs().sum();
  e.col = (p.colwise().sum().transpose() - b).cwiseAbs().sum();
  return e;
}

std::vector<SinkhornResult> sinkhorn_solve_path(const PointCloud& source, const PointCloud& target,
                                                const CostModel& model,
                                                const std::vector<double>& eps_values,
                                                const SinkhornOptions& options) {
  std::vector<std::size_t> order(eps_values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) { return eps_values[l] > eps_values[r]; });
  std::vector<SinkhornResult> out(eps_values.size());
  SinkhornOptions so = options;
  for (std::size_t p : order) {
    out[p] = sinkhorn_solve(source, target, model, eps_values[p], so);
    so.f_init = out[p].potentials.f;
    so.g_init = out[p].potentials.g;
  }
  return out;
}

}  // namespace progot

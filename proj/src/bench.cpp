#include "progot/bench.hpp"

#include "progot/entropic.hpp"
#include "progot/kernels.hpp"
#include "progot/schedule.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <utility>

namespace progot {

namespace {

struct PreparedComponent {
  Vector mean;
  Matrix factor;  // factor * factor^T = covariance
};

std::vector<PreparedComponent> prepare_components(std::size_t d,
                                                  const std::vector<GmmComponent>& components,
                                                  std::vector<double>& weights) {
  if (components.empty()) throw ValidationError("gmm: no components");
  if (d == 0) throw ValidationError("gmm: dimension must be >= 1");
  std::vector<PreparedComponent> out;
  double total = 0.0;
  const auto dd = static_cast<Eigen::Index>(d);
  for (const auto& c : components) {
    if (c.mean.size() != dd || c.covariance.rows() != dd || c.covariance.cols() != dd) {
      throw ValidationError("gmm: component shapes do not match dimension " + std::to_string(d));
    }
    if (!(c.weight > 0.0) || !std::isfinite(c.weight)) {
      throw ValidationError("gmm: component weights must be > 0");
    }
    if (!c.mean.allFinite() || !c.covariance.allFinite()) {
      throw ValidationError("gmm: non-finite component parameters");
    }
    const double scale = std::max(1.0, c.covariance.cwiseAbs().maxCoeff());
    if ((c.covariance - c.covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw ValidationError("gmm: covariance is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c.covariance);
    Eigen::VectorXd lambda = eig.eigenvalues();
    if (lambda.minCoeff() < -1e-12 * scale) {
      throw ValidationError("gmm: covariance is not positive semi-definite");
    }
    lambda = lambda.cwiseMax(0.0).cwiseSqrt();
    out.push_back({c.mean, eig.eigenvectors() * lambda.asDiagonal()});
    weights.push_back(c.weight);
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("gmm: component weights must sum to 1");
  return out;
}

PointCloud gmm_draw(std::uint64_t seed, std::size_t n, std::size_t d,
                    const std::vector<GmmComponent>& components, std::vector<std::size_t>* labels) {
  if (n == 0) throw ValidationError("gmm: n must be >= 1");
  std::vector<double> weights;
  const auto prepared = prepare_components(d, components, weights);
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto dd = static_cast<Eigen::Index>(d);
  Matrix points(static_cast<Eigen::Index>(n), dd);
  Vector z(dd);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const std::size_t c = pick(rng);
    for (Eigen::Index k = 0; k < dd; ++k) z[k] = normal(rng);
    points.row(i) = (prepared[c].mean + prepared[c].factor * z).transpose();
    if (labels) labels->push_back(c);
  }
  return PointCloud(std::move(points));
}

// Shortest augmenting path assignment on a square cost matrix. Returns the
// column assigned to each row and potentials with u_i + v_j <= C_ij.
struct Assignment {
  std::vector<Eigen::Index> col_of_row;
  Vector u;
  Vector v;
};

Assignment solve_assignment(const Matrix& c) {
  const Eigen::Index n = c.rows();
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based with a virtual column 0, as in the classical formulation.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<Eigen::Index> row_of(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (Eigen::Index i = 1; i <= n; ++i) {
    row_of[0] = i;
    Eigen::Index j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const Eigen::Index i0 = row_of[j0];
      double delta = inf;
      Eigen::Index j1 = 0;
      for (Eigen::Index j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = c(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Eigen::Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u[row_of[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of[j0] != 0);
    do {
      const Eigen::Index j1 = way[j0];
      row_of[j0] = row_of[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  Assignment out;
  out.col_of_row.assign(static_cast<std::size_t>(n), 0);
  for (Eigen::Index j = 1; j <= n; ++j) out.col_of_row[row_of[j] - 1] = j - 1;
  out.u.resize(n);
  out.v.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.u[i] = u[i + 1];
    out.v[i] = v[i + 1];
  }
  return out;
}

// Successive shortest paths on the bipartite transportation network with
// node potentials (Dijkstra on reduced costs). Flow is real-valued; each
// augmentation empties a supply, fills a demand or cancels a reverse arc.
struct NetworkSolution {
  Matrix flow;
  Vector f;
  Vector g;
};

NetworkSolution solve_transport_network(const Matrix& c, const Vector& a, const Vector& b) {
  const Eigen::Index n = c.rows();
  const Eigen::Index m = c.cols();
  const Eigen::Index nodes = n + m;  // rows 0..n-1, columns n..n+m-1
  constexpr double kTiny = 1e-15;
  const double inf = std::numeric_limits<double>::infinity();

  Matrix flow = Matrix::Zero(n, m);
  std::vector<double> supply(a.data(), a.data() + n);
  std::vector<double> demand(b.data(), b.data() + m);
  std::vector<double> pi(static_cast<std::size_t>(nodes), 0.0);
  for (Eigen::Index j = 0; j < m; ++j) pi[n + j] = c.col(j).minCoeff();

  std::vector<double> dist(static_cast<std::size_t>(nodes));
  std::vector<Eigen::Index> prev(static_cast<std::size_t>(nodes));
  std::vector<char> done(static_cast<std::size_t>(nodes));
  const std::size_t max_rounds = static_cast<std::size_t>(4 * (n * m + nodes) + 16);

  for (std::size_t round = 0; round < max_rounds; ++round) {
    bool any_supply = false, any_demand = false;
    for (double s : supply) any_supply |= s > kTiny;
    for (double t : demand) any_demand |= t > kTiny;
    if (!any_supply || !any_demand) break;

    std::fill(dist.begin(), dist.end(), inf);
    std::fill(prev.begin(), prev.end(), -1);
    std::fill(done.begin(), done.end(), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (supply[i] > kTiny) dist[i] = 0.0;
    }
    Eigen::Index sink = -1;
    while (true) {
      Eigen::Index u = -1;
      for (Eigen::Index v = 0; v < nodes; ++v) {
        if (!done[v] && dist[v] < inf && (u < 0 || dist[v] < dist[u])) u = v;
      }
      if (u < 0) break;
      done[u] = 1;
      if (u >= n && demand[u - n] > kTiny) {
        sink = u;
        break;
      }
      if (u < n) {
        for (Eigen::Index j = 0; j < m; ++j) {
          const Eigen::Index v = n + j;
          if (done[v]) continue;
          const double rc = std::max(0.0, c(u, j) + pi[u] - pi[v]);
          if (dist[u] + rc < dist[v]) {
            dist[v] = dist[u] + rc;
            prev[v] = u;
          }
        }
      } else {
        const Eigen::Index j = u - n;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (done[i] || !(flow(i, j) > 0.0)) continue;
          const double rc = std::max(0.0, -c(i, j) + pi[u] - pi[i]);
          if (dist[u] + rc < dist[i]) {
            dist[i] = dist[u] + rc;
            prev[i] = u;
          }
        }
      }
    }
    if (sink < 0) throw std::runtime_error("exact_ot_oracle: network has no augmenting path");

    const double reach = dist[sink];
    for (Eigen::Index v = 0; v < nodes; ++v) pi[v] += std::min(dist[v], reach);

    double delta = demand[sink - n];
    Eigen::Index v = sink;
    while (prev[v] >= 0) {
      const Eigen::Index u = prev[v];
      if (u >= n) delta = std::min(delta, flow(v, u - n));  // reverse arc column -> row
      v = u;
    }
    delta = std::min(delta, supply[v]);
    const Eigen::Index start = v;
    v = sink;
    while (prev[v] >= 0) {
      const Eigen::Index u = prev[v];
      if (u < n) {
        flow(u, v - n) += delta;
      } else {
        flow(v, u - n) -= delta;
        if (flow(v, u - n) < kTiny * 1e-3) flow(v, u - n) = 0.0;
      }
      v = u;
    }
    supply[start] -= delta;
    demand[sink - n] -= delta;
  }

  NetworkSolution out{std::move(flow), Vector(n), Vector(m)};
  for (Eigen::Index i = 0; i < n; ++i) out.f[i] = -pi[i];
  for (Eigen::Index j = 0; j < m; ++j) out.g[j] = pi[n + j];
  return out;
}

double certificate_violation(const Matrix& c, const Matrix& p, const Vector& f, const Vector& g) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
      const double slack = c(i, j) - f[i] - g[j];
      worst = std::max(worst, -slack);
      if (p(i, j) > 0.0) worst = std::max(worst, std::abs(slack));
    }
  }
  return worst;
}

}  // namespace

PointCloud gmm_sample(std::uint64_t seed, std::size_t n, std::size_t d,
                      const std::vector<GmmComponent>& components) {
  return gmm_draw(seed, n, d, components, nullptr);
}

std::vector<std::size_t> gmm_labels(std::uint64_t seed, std::size_t n,
                                    const std::vector<GmmComponent>& components) {
  std::vector<std::size_t> labels;
  if (components.empty()) throw ValidationError("gmm: no components");
  gmm_draw(seed, n, static_cast<std::size_t>(components.front().mean.size()), components, &labels);
  return labels;
}

GroundTruthTask affine_ground_truth(std::uint64_t seed, std::size_t n, std::size_t d,
                                    const Matrix& a, const Vector& b) {
  const auto dd = static_cast<Eigen::Index>(d);
  if (a.rows() != dd || a.cols() != dd || b.size() != dd) {
    throw ValidationError("affine_ground_truth: A must be d x d and b length d");
  }
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw ValidationError("affine_ground_truth: A must be symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    throw ValidationError("affine_ground_truth: A must be positive-definite");
  }
  GmmComponent standard{Vector::Zero(dd), Matrix::Identity(dd, dd), 1.0};
  PointCloud source = gmm_sample(seed, n, d, {standard});
  Matrix mapped = source.points() * a.transpose();
  mapped.rowwise() += b.transpose();
  PointCloud target(mapped);
  return {std::move(source), std::move(target), std::move(mapped), std::nullopt};
}

BlurOperator::BlurOperator(std::size_t side, double sigma) : side_(side), sigma_(sigma) {
  if (side == 0) throw ValidationError("blur: image side must be >= 1");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("blur: sigma must be > 0");
  const auto nn = static_cast<Eigen::Index>(side);
  const double width = sigma * static_cast<double>(side) * static_cast<double>(side);
  kernel_.resize(nn, nn);
  for (Eigen::Index i = 0; i < nn; ++i) {
    for (Eigen::Index j = 0; j < nn; ++j) {
      const double diff = static_cast<double>(i - j);
      kernel_(i, j) = std::exp(-diff * diff / width);
    }
  }
  blur_kernel_min_pivot(side, sigma);
}

Matrix BlurOperator::apply(const Matrix& image) const {
  const auto nn = static_cast<Eigen::Index>(side_);
  if (image.rows() != nn || image.cols() != nn) throw ValidationError("blur: image shape mismatch");
  return kernel_ * image * kernel_;
}

Vector BlurOperator::apply_flat(const Vector& image) const {
  const auto nn = static_cast<Eigen::Index>(side_);
  if (image.size() != nn * nn) throw ValidationError("blur: flat image length mismatch");
  const Matrix u = Eigen::Map<const Matrix>(image.data(), nn, nn);
  const Matrix out = apply(u);
  return Eigen::Map<const Vector>(out.data(), nn * nn);
}

double blur_kernel_min_pivot(std::size_t side, double sigma) {
  using Real = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<200>>;
  if (side == 0) throw ValidationError("blur: image side must be >= 1");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("blur: sigma must be > 0");
  const std::size_t n = side;
  const Real width = Real(sigma) * n * n;
  std::vector<Real> k(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const Real diff = Real(static_cast<double>(i) - static_cast<double>(j));
      k[i * n + j] = exp(-diff * diff / width);
    }
  }
  // Symmetric elimination, pivoting on the largest remaining diagonal.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Real smallest = -1;
  for (std::size_t s = 0; s < n; ++s) {
    std::size_t best = s;
    for (std::size_t t = s + 1; t < n; ++t) {
      if (k[order[t] * n + order[t]] > k[order[best] * n + order[best]]) best = t;
    }
    std::swap(order[s], order[best]);
    const std::size_t p = order[s];
    const Real pivot = k[p * n + p];
    if (!(pivot > 0)) {
      throw ValidationError("blur kernel is not positive-definite (pivot " +
                            std::to_string(static_cast<double>(pivot)) + ")");
    }
    if (smallest < 0 || pivot < smallest) smallest = pivot;
    for (std::size_t t = s + 1; t < n; ++t) {
      const std::size_t r = order[t];
      const Real lr = k[r * n + p] / pivot;
      for (std::size_t u = s + 1; u < n; ++u) {
        const std::size_t q = order[u];
        k[r * n + q] -= lr * k[p * n + q];
      }
    }
  }
  return static_cast<double>(smallest);
}

Matrix random_images(std::uint64_t seed, std::size_t n, std::size_t side) {
  if (n == 0 || side == 0) throw ValidationError("random_images: n and side must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pixel(0.0, 1.0);
  Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(side * side));
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) = pixel(rng);
  }
  return out;
}

GroundTruthTask blur_task(const Matrix& images, double sigma) {
  const Eigen::Index n = images.rows();
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(images.cols()))));
  if (static_cast<Eigen::Index>(side * side) != images.cols() || side == 0) {
    throw ValidationError("blur_task: image length is not a perfect square");
  }
  if (n < 2) throw ValidationError("blur_task: need at least 2 images");
  if (!images.allFinite()) throw ValidationError("blur_task: non-finite pixels");
  const BlurOperator blur(side, sigma);
  Matrix blurred(n, images.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    blurred.row(i) = blur.apply_flat(images.row(i).transpose()).transpose();
  }
  for (Eigen::Index i = 1; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      if (images.row(i) == images.row(j)) throw ValidationError("blur_task: duplicate images");
    }
  }
  PointCloud source(images);
  PointCloud target(std::move(blurred));
  const double un = 1.0 / static_cast<double>(n);
  Coupling truth{Matrix::Identity(n, n) * un, source.weights(), target.weights()};
  return {std::move(source), std::move(target), std::nullopt, std::move(truth)};
}

OracleResult exact_ot_oracle(const Matrix& cost, const Vector& a, const Vector& b,
                             std::size_t max_cells) {
  const Eigen::Index n = cost.rows();
  const Eigen::Index m = cost.cols();
  if (n == 0 || m == 0 || a.size() != n || b.size() != m) {
    throw ValidationError("exact_ot_oracle: shape mismatch");
  }
  if (static_cast<std::size_t>(n) * static_cast<std::size_t>(m) > max_cells) {
    throw ValidationError("exact_ot_oracle: n*m = " + std::to_string(n * m) +
                          " exceeds the size guard " + std::to_string(max_cells));
  }
  if (!cost.allFinite()) throw ValidationError("exact_ot_oracle: non-finite cost");

  const double un = 1.0 / static_cast<double>(n);
  const bool uniform_square =
      n == m && (a.array() == un).all() && (b.array() == un).all();

  OracleResult out;
  out.coupling.row_weights = a;
  out.coupling.col_weights = b;
  if (uniform_square) {
    const Assignment sol = solve_assignment(cost);
    out.coupling.matrix = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) out.coupling.matrix(i, sol.col_of_row[i]) = un;
    // Assignment duals are feasible OT duals; with weights 1/n their value is the OT cost.
    out.f = sol.u;
    out.g = sol.v;
  } else {
    NetworkSolution sol = solve_transport_network(cost, a, b);
    out.coupling.matrix = std::move(sol.flow);
    out.f = std::move(sol.f);
    out.g = std::move(sol.g);
  }
  out.cost = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) out.cost += out.coupling.matrix(i, j) * cost(i, j);
  }
  out.violation = certificate_violation(cost, out.coupling.matrix, out.f, out.g);
  return out;
}

OracleResult exact_ot_oracle(const PointCloud& x, const PointCloud& y, const CostModel& model,
                             std::size_t max_cells) {
  if (x.dim() != y.dim()) throw ValidationError("exact_ot_oracle: dimension mismatch");
  if (x.size() * y.size() > max_cells) {
    throw ValidationError("exact_ot_oracle: n*m = " + std::to_string(x.size() * y.size()) +
                          " exceeds the size guard " + std::to_string(max_cells));
  }
  Matrix c;
  kernels::serial::fill_cost_matrix(model, x.points(), y.points(), c);
  return exact_ot_oracle(c, x.weights(), y.weights(), max_cells);
}

CouplingMetrics coupling_metrics(const Coupling& p, const Matrix& cost) {
  if (p.rows() != cost.rows() || p.cols() != cost.cols()) {
    throw ValidationError("coupling_metrics: coupling and cost shapes differ");
  }
  CouplingMetrics out;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double v = p.matrix(i, j);
      out.transport_cost += v * cost(i, j);
      if (v > 0.0) out.entropy -= v * (std::log(v) - 1.0);
    }
  }
  const auto err = marginal_error(p);
  out.row_error = err.row;
  out.col_error = err.col;
  return out;
}

IdentityMetrics identity_recovery_metrics(const Coupling& p) {
  const Eigen::Index n = p.rows();
  if (n == 0 || p.cols() != n) throw ValidationError("identity metrics need a square coupling");
  IdentityMetrics out;
  double log_sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = p.matrix(i, i);
    out.trace += d;
    log_sum += std::log(std::max(d, 1e-300));
  }
  const double dn = static_cast<double>(n);
  out.kl = -std::log(dn) - log_sum / dn;
  return out;
}

double map_mse(const Matrix& estimate, const Matrix& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols() || estimate.rows() == 0) {
    throw ValidationError("map_mse: shape mismatch");
  }
  return (estimate - truth).rowwise().squaredNorm().mean();
}

Matrix EntropicMapModel::apply(const Matrix& xs) const {
  return entropic_map_apply(target, g, eps, model, xs);
}

namespace {

std::vector<std::vector<Eigen::Index>> make_folds(std::size_t n, std::size_t folds,
                                                  std::uint64_t seed) {
  std::vector<Eigen::Index> idx(n);
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::vector<Eigen::Index>> out(folds);
  for (std::size_t r = 0; r < n; ++r) out[r % folds].push_back(idx[r]);
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

PointCloud subset(const PointCloud& cloud, const std::vector<Eigen::Index>& rows) {
  const auto k = static_cast<Eigen::Index>(rows.size());
  Matrix pts(k, static_cast<Eigen::Index>(cloud.dim()));
  Vector w(k);
  for (Eigen::Index r = 0; r < k; ++r) {
    pts.row(r) = cloud.points().row(rows[r]);
    w[r] = cloud.weights()[rows[r]];
  }
  w /= w.sum();
  return PointCloud(std::move(pts), std::move(w));
}

std::vector<Eigen::Index> complement(std::size_t n, const std::vector<Eigen::Index>& held) {
  std::vector<char> mask(n, 0);
  for (auto i : held) mask[static_cast<std::size_t>(i)] = 1;
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) out.push_back(static_cast<Eigen::Index>(i));
  }
  return out;
}

}  // namespace

CrossValidatedMap cross_validated_entropic_map(const PointCloud& source, const PointCloud& target,
                                               const CostModel& model,
                                               const CrossValidationOptions& options) {
  if (options.scales.empty()) throw ValidationError("cross-validation: empty scale grid");
  for (double s : options.scales) {
    if (!(s > 0.0)) throw ValidationError("cross-validation: scales must be > 0");
  }
  if (options.folds < 2) throw ValidationError("cross-validation: need at least 2 folds");
  if (source.size() < 2 * options.folds || target.size() < 2 * options.folds) {
    throw ValidationError("cross-validation: too few points for the number of folds");
  }
  const double eps0 = default_eps_scale(model, source, target);
  std::vector<double> scores(options.scales.size(), 0.0);
  std::vector<double> candidates;
  for (double s : options.scales) candidates.push_back(s * eps0);
  SinkhornOptions so;
  so.tau = options.tau;
  so.max_iter = options.max_iter;
  so.materialize_coupling = false;

  const auto src_folds = make_folds(source.size(), options.folds, options.seed);
  const auto tgt_folds = make_folds(target.size(), options.folds, options.seed + 1);
  for (std::size_t f = 0; f < options.folds; ++f) {
    const PointCloud x_train = subset(source, complement(source.size(), src_folds[f]));
    const PointCloud y_train = subset(target, complement(target.size(), tgt_folds[f]));
    const PointCloud x_val = subset(source, src_folds[f]);
    const PointCloud y_val = subset(target, tgt_folds[f]);
    const auto fits = sinkhorn_solve_path(x_train, y_train, model, candidates, so);
    for (std::size_t p = 0; p < fits.size(); ++p) {
      if (!fits[p].report.converged) {
        scores[p] = std::numeric_limits<double>::infinity();
        continue;
      }
      const double eps = options.scales[p] * eps0;
      const Matrix mapped = entropic_map_apply(y_train, fits[p].potentials.g, eps, model,
                                               x_val.points());
      DivergenceOptions dopt;
      dopt.tau = options.tau;
      dopt.max_iter = options.max_iter;
      const auto div = sinkhorn_divergence(x_val.with_points(mapped), y_val, model, dopt);
      scores[p] += div.value;
    }
  }
  const std::size_t selected = first_argmin(scores);
  if (!std::isfinite(scores[selected])) {
    throw ConvergenceError("cross-validation: no candidate converged on every fold");
  }
  const double eps = candidates[selected];
  auto res = sinkhorn_solve(source, target, model, eps, so);
  return CrossValidatedMap{EntropicMapModel{target, std::move(res.potentials.g), eps, model},
                           eps0, selected, std::move(scores), {res.report}};
}

}  // namespace progot

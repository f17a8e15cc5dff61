#pragma once

#include "progot/coupling.hpp"
#include "progot/geometry.hpp"
#include "progot/sinkhorn.hpp"
#include "progot/types.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace progot {

struct GmmComponent {
  Vector mean;
  Matrix covariance;  // positive semi-definite; zero gives a point mass
  double weight = 1.0;
};

/// n i.i.d. draws with uniform point weights. Deterministic given the seed.
PointCloud gmm_sample(std::uint64_t seed, std::size_t n, std::size_t d,
                      const std::vector<GmmComponent>& components);

/// Which component each draw of gmm_sample(seed, n, ...) came from.
std::vector<std::size_t> gmm_labels(std::uint64_t seed, std::size_t n,
                                    const std::vector<GmmComponent>& components);

struct GroundTruthTask {
  PointCloud source;
  PointCloud target;
  std::optional<Matrix> true_map_at_source;
  std::optional<Coupling> true_coupling;
};

/// Standard normal source, targets y_i = A x_i + b. For p = 2 the affine map
/// is the gradient of a convex quadratic and hence the exact OT map.
GroundTruthTask affine_ground_truth(std::uint64_t seed, std::size_t n, std::size_t d,
                                    const Matrix& a, const Vector& b);

/// Separable Gaussian blur of N x N images: U -> K U K with
/// K_ij = exp(-(i - j)^2 / (sigma N^2)).
class BlurOperator {
 public:
  BlurOperator(std::size_t side, double sigma);

  std::size_t side() const { return side_; }
  double sigma() const { return sigma_; }
  const Matrix& kernel() const { return kernel_; }

  /// image is N x N.
  Matrix apply(const Matrix& image) const;
  /// Row-major flattened image of length N^2.
  Vector apply_flat(const Vector& image) const;

 private:
  std::size_t side_;
  double sigma_;
  Matrix kernel_;
};

/// The kernel is mathematically positive-definite, but for N >= 16 its
/// smallest pivots fall far below double precision. This runs a diagonally
/// pivoted LDL^T in 200-digit arithmetic and returns the smallest pivot
/// (as a double, may underflow to a tiny positive value); throws
/// ValidationError when a pivot is not positive.
double blur_kernel_min_pivot(std::size_t side, double sigma);

/// n images of side N, pixels uniform in [0, 1), flattened row-major.
Matrix random_images(std::uint64_t seed, std::size_t n, std::size_t side);

/// Sources are the images, targets their blurred versions. The exact
/// coupling is Id / n.
GroundTruthTask blur_task(const Matrix& images, double sigma);

struct OracleResult {
  Coupling coupling;
  double cost = 0.0;
  Vector f;  // dual potentials with f_i + g_j <= C_ij
  Vector g;
  double violation = 0.0;  // worst dual infeasibility or slackness gap
};

inline constexpr std::size_t kOracleMaxCells = 10000;

/// Exact optimal coupling by linear programming. Equal-size uniform inputs
/// use a shortest-augmenting-path assignment solver; anything else uses
/// successive shortest paths on the transportation network. Both return
/// duals and are certified by dual feasibility and complementary slackness.
/// Throws ValidationError when n * m exceeds max_cells.
OracleResult exact_ot_oracle(const PointCloud& x, const PointCloud& y, const CostModel& model,
                             std::size_t max_cells = kOracleMaxCells);
OracleResult exact_ot_oracle(const Matrix& cost, const Vector& a, const Vector& b,
                             std::size_t max_cells = kOracleMaxCells);

struct CouplingMetrics {
  double transport_cost = 0.0;  // <P, C>
  double entropy = 0.0;         // -sum P (log P - 1), 0 log 0 = 0
  double row_error = 0.0;
  double col_error = 0.0;
};
CouplingMetrics coupling_metrics(const Coupling& p, const Matrix& cost);

struct IdentityMetrics {
  double trace = 0.0;  // sum_i P_ii; 1 for Id / n
  double kl = 0.0;     // KL(Id/n || P) = -log n - (1/n) sum_i log P_ii
};
IdentityMetrics identity_recovery_metrics(const Coupling& p);

/// Mean over rows of ||estimate_i - truth_i||^2.
double map_mse(const Matrix& estimate, const Matrix& truth);

/// A single-step entropic map x -> x - z(x) fitted at one eps.
struct EntropicMapModel {
  PointCloud target;
  Vector g;
  double eps = 0.0;
  CostModel model;

  Matrix apply(const Matrix& xs) const;
};

struct CrossValidatedMap {
  EntropicMapModel map;
  double eps0 = 0.0;  // default_eps_scale(X, Y); candidates are scale * eps0
  std::size_t selected = 0;
  std::vector<double> scores;  // summed held-out Sinkhorn divergence per scale
  std::vector<SinkhornReport> refit_reports;
};

struct CrossValidationOptions {
  std::vector<double> scales = {0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  double tau = 1e-3;
  std::size_t max_iter = 100000;
};

/// Entropic map baseline with eps chosen by k-fold cross-validation. Source
/// and target are split into folds independently; each candidate is fitted
/// on the remaining folds and scored by the Sinkhorn divergence between the
/// mapped held-out sources and the held-out targets. The winner (smallest
/// index on ties) is refitted on all data. Candidates are solved from the
/// largest eps down, each warm-started from the previous potentials.
CrossValidatedMap cross_validated_entropic_map(const PointCloud& source, const PointCloud& target,
                                               const CostModel& model,
                                               const CrossValidationOptions& options = {});

}  // namespace progot

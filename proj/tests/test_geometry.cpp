#include <doctest.h>

#include "oracles.hpp"
#include "progot/geometry.hpp"

#include <random>

using namespace progot;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_CASE("point cloud validation") {
  Matrix x(2, 2);
  x << 0, 0, 1, 1;
  PointCloud c(x);
  CHECK(c.size() == 2);
  CHECK(c.dim() == 2);
  CHECK(c.weights()[0] == doctest::Approx(0.5));

  CHECK_THROWS_AS(PointCloud(Matrix(0, 2)), ValidationError);
  CHECK_THROWS_AS(PointCloud(Matrix(2, 0)), ValidationError);
  Matrix bad = x;
  bad(1, 1) = std::nan("");
  CHECK_THROWS_AS(PointCloud{bad}, ValidationError);
  CHECK_THROWS_AS(PointCloud(x, vec({0.5, 0.6})), ValidationError);
  CHECK_THROWS_AS(PointCloud(x, vec({1.0, 0.0})), ValidationError);
  CHECK_THROWS_AS(PointCloud(x, vec({1.0})), ValidationError);
  CHECK_NOTHROW(PointCloud(x, vec({0.25, 0.75})));
}

TEST_CASE("cost examples") {
  const CostModel sq(2.0);
  const CostModel p15(1.5);
  CHECK(cost(sq, vec({0, 0}), vec({3, 4})) == doctest::Approx(12.5).epsilon(1e-15));
  CHECK(cost(sq, vec({7, -1}), vec({7, -1})) == 0.0);
  CHECK(cost(p15, vec({1, 0}), vec({0, 0})) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(cost(sq, vec({1}), vec({1, 2})), ValidationError);
  CHECK_THROWS_AS(CostModel(1.0), ValidationError);
  CHECK(p15.q() == doctest::Approx(3.0));
}

TEST_CASE("gradient examples") {
  const CostModel sq(2.0);
  const CostModel p15(1.5);
  CHECK(grad_h(sq, vec({3, -2})) == vec({3, -2}));
  CHECK(grad_h(p15, vec({4}))[0] == doctest::Approx(2.0));
  CHECK(grad_h(p15, vec({0}))[0] == 0.0);
  CHECK(grad_h_conj(sq, vec({3, -2})) == vec({3, -2}));
  CHECK(grad_h_conj(p15, vec({2}))[0] == doctest::Approx(4.0));
  CHECK(grad_h_conj(p15, vec({0}))[0] == 0.0);
}

TEST_CASE("cost matrix examples") {
  const CostModel sq(2.0);
  const Matrix c = cost_matrix(sq, oracle::column({0, 2}), oracle::column({0, 2}));
  CHECK(c(0, 0) == 0.0);
  CHECK(c(0, 1) == 2.0);
  CHECK(c(1, 0) == 2.0);
  CHECK(c(1, 1) == 0.0);
  CHECK(cost_matrix(sq, oracle::column({5}), oracle::column({5}))(0, 0) == 0.0);
  const Matrix c15 = cost_matrix(CostModel(1.5), oracle::column({0}), oracle::column({1, -1}));
  CHECK(c15(0, 0) == doctest::Approx(2.0 / 3.0));
  CHECK(c15(0, 1) == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS_AS(cost_matrix(sq, Matrix::Zero(2, 2), Matrix::Zero(2, 3)), ValidationError);
}

TEST_CASE("default eps scale examples") {
  const CostModel sq(2.0);
  CHECK(default_eps_scale(sq, oracle::column({0, 2}), oracle::column({0, 2})) ==
        doctest::Approx(0.05).epsilon(1e-15));
  CHECK(default_eps_scale(sq, oracle::column({0}), oracle::column({1})) ==
        doctest::Approx(0.025).epsilon(1e-15));
  CHECK_THROWS_AS(default_eps_scale(sq, oracle::column({0}), oracle::column({0})), ValidationError);
}

TEST_CASE("h is convex") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 2.0);
  std::uniform_real_distribution<double> unif;
  for (double p : {1.2, 1.5, 2.0, 3.0}) {
    const CostModel model(p);
    for (int t = 0; t < 200; ++t) {
      Vector d1(3), d2(3);
      for (int k = 0; k < 3; ++k) {
        d1[k] = normal(rng);
        d2[k] = normal(rng);
      }
      const double lam = unif(rng);
      const Vector mid = lam * d1 + (1.0 - lam) * d2;
      const double lhs = model.h({mid.data(), 3});
      const double rhs = lam * model.h({d1.data(), 3}) + (1.0 - lam) * model.h({d2.data(), 3});
      CHECK(lhs <= rhs + 1e-12);
    }
  }
}

TEST_CASE("grad_h matches finite differences and inverts through grad_h_conj") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> mag(1e-3 + 0.05, 3.0);
  std::bernoulli_distribution sign;
  for (double p : {1.5, 2.0, 2.5}) {
    const CostModel model(p);
    const auto h = [&](const Vector& z) { return model.h({z.data(), static_cast<std::size_t>(z.size())}); };
    for (int t = 0; t < 100; ++t) {
      Vector z(4);
      for (int k = 0; k < 4; ++k) z[k] = (sign(rng) ? 1.0 : -1.0) * mag(rng);
      const Vector g = grad_h(model, z);
      const Vector fd = oracle::finite_difference_gradient(h, z, 1e-6);
      for (int k = 0; k < 4; ++k) {
        CHECK(std::abs(g[k] - fd[k]) <= 1e-6 * std::max(1.0, std::abs(g[k])));
      }
      const Vector back = grad_h_conj(model, g);
      CHECK((back - z).cwiseAbs().maxCoeff() <= 1e-9);
    }
  }
}

TEST_CASE("self cost matrix is symmetric with zero diagonal") {
  const Matrix x = oracle::uniform_points(3, 17, 3, -2.0, 2.0);
  for (double p : {1.5, 2.0}) {
    const Matrix c = cost_matrix(CostModel(p), x, x);
    CHECK(c.diagonal().cwiseAbs().maxCoeff() == 0.0);
    CHECK((c - c.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(c.minCoeff() >= 0.0);
  }
}

TEST_CASE("mean cost and the point cloud move") {
  const CostModel sq(2.0);
  const Matrix x = oracle::uniform_points(9, 20, 2);
  const Matrix y = oracle::uniform_points(10, 30, 2);
  const Matrix c = cost_matrix(sq, x, y);
  CHECK(mean_cost(sq, x, y) == doctest::Approx(c.mean()).epsilon(1e-13));
  PointCloud cloud(x, oracle::random_weights(1, 20));
  const PointCloud moved = cloud.with_points(y.topRows(20));
  CHECK(moved.weights() == cloud.weights());
  CHECK(moved.points() == y.topRows(20));
}

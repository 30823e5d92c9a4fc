#include "doctest.h"
#include "oracles.hpp"
#include "trajproj/errors.hpp"
#include "trajproj/lbfgs.hpp"

using namespace trajproj;

namespace {

double rosenbrock(std::span<const double> x, std::span<double> g) {
  const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
  g[0] = -2.0 * a - 400.0 * x[0] * b;
  g[1] = 200.0 * b;
  return a * a + 100.0 * b * b;
}

bool monotone(const OptimTrace& t) {
  for (std::size_t i = 1; i < t.objective_values.size(); ++i)
    if (t.objective_values[i] > t.objective_values[i - 1]) return false;
  return true;
}

}  // namespace

TEST_CASE("shifted sphere") {
  const std::vector<double> a{1.0, -2.0, 3.5, 0.25};
  auto f = [&](std::span<const double> x, std::span<double> g) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      g[i] = 2.0 * (x[i] - a[i]);
      s += (x[i] - a[i]) * (x[i] - a[i]);
    }
    return s;
  };
  const auto r = minimize(f, std::vector<double>(4, 0.0), LbfgsConfig{});
  CHECK(r.trace.reason == Termination::gradient_tolerance);
  CHECK(r.trace.iterations <= 2);
  CHECK(oracle::rel_diff(r.x, a) <= 1e-10);
}

TEST_CASE("rosenbrock") {
  LbfgsConfig cfg;
  cfg.max_iters = 200;
  cfg.record_path = true;
  const auto r = minimize(rosenbrock, {-1.2, 1.0}, cfg);
  CHECK(r.trace.reason == Termination::gradient_tolerance);
  CHECK(r.trace.iterations <= 200);
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(r.trace.gradient_norms.back() <= 1e-8);
  CHECK(monotone(r.trace));
  CHECK(r.trace.iterates.size() == r.trace.iterations + 1);
  CHECK(r.trace.iterates.front() == std::vector<double>{-1.2, 1.0});
  CHECK(r.trace.iterates.back() == r.x);
}

TEST_CASE("accepted steps satisfy the strong wolfe conditions") {
  LbfgsConfig cfg;
  const auto r = minimize(rosenbrock, {-1.2, 1.0}, cfg);
  for (const auto& s : r.trace.steps) {
    CHECK(s.slope0 < 0.0);
    CHECK(s.f1 <= s.f0 + cfg.wolfe_c1 * s.alpha * s.slope0 + 1e-12 * std::abs(s.f0));
    CHECK(std::abs(s.slope1) <= cfg.wolfe_c2 * std::abs(s.slope0) + 1e-12);
  }
}

TEST_CASE("convex quadratic against a dense solve") {
  const int n = 50;
  const auto m = oracle::random_vector(n * n, 11);
  const Eigen::MatrixXd a = Eigen::Map<const Eigen::MatrixXd>(m.data(), n, n);
  const Eigen::MatrixXd q = a.transpose() * a / n + Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd b = oracle::to_eigen(oracle::random_vector(n, 12));
  auto f = [&](std::span<const double> x, std::span<double> g) {
    const Eigen::VectorXd xv = oracle::to_eigen(x);
    const Eigen::VectorXd qx = q * xv;
    for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = qx(i) - b(i);
    return 0.5 * xv.dot(qx) - b.dot(xv);
  };
  LbfgsConfig cfg;
  cfg.max_iters = 500;
  cfg.record_path = true;
  const auto r = minimize(f, std::vector<double>(n, 0.0), cfg);
  const Eigen::VectorXd ref = q.ldlt().solve(b);
  CHECK(oracle::rel_diff(r.x, oracle::from_eigen(ref)) <= 1e-6);
  CHECK(monotone(r.trace));
}

TEST_CASE("stationary start does not move") {
  const auto r = minimize(rosenbrock, {1.0, 1.0}, LbfgsConfig{});
  CHECK(r.trace.iterations == 0);
  CHECK(r.trace.reason == Termination::gradient_tolerance);
  CHECK(r.x == std::vector<double>{1.0, 1.0});
}

TEST_CASE("iteration cap") {
  LbfgsConfig cfg;
  cfg.max_iters = 3;
  const auto r = minimize(rosenbrock, {-1.2, 1.0}, cfg);
  CHECK(r.trace.reason == Termination::max_iterations);
  CHECK(r.trace.iterations == 3);
  CHECK(to_string(r.trace.reason) == "max-iterations");
}

TEST_CASE("config validation") {
  LbfgsConfig cfg;
  cfg.memory = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = LbfgsConfig{};
  cfg.wolfe_c1 = 0.95;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

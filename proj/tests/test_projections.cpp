#include "doctest.h"
#include "oracles.hpp"
#include "trajproj/errors.hpp"
#include "trajproj/integrators.hpp"
#include "trajproj/projections.hpp"

using namespace trajproj;

namespace {

// Lorenz instance with N = 24: an Euler trajectory plus noise.
struct LorenzToy {
  GridSpec grid = GridSpec::lorenz(1.0 / 512.0, 8);
  Trajectory gt, uhat;
  ConstraintSpec spec;

  LorenzToy() {
    gt = euler_integrate({-3.0, 2.0, 20.0}, LorenzParams{}, grid.dt, grid.num_steps);
    spec = ConstraintSpec::from_ground_truth(gt, Scheme::euler, 1);
    uhat = gt;
    const auto noise = oracle::random_vector(uhat.values.size(), 42, 0.05);
    for (std::size_t i = 0; i < noise.size(); ++i) uhat.values[i] += noise[i];
  }
};

struct DenseLinearization {
  Eigen::MatrixXd c;
  Eigen::VectorXd b;
};

DenseLinearization linearize(Constraint& h, const Trajectory& uhat) {
  DenseLinearization d;
  const std::size_t n = uhat.values.size();
  d.c = oracle::fd_jacobian([&](std::span<const double> a, std::span<double> o) { h.residual(a, o); }, uhat.values, n);
  const auto r0 = h.residual(uhat);
  d.b = d.c * oracle::to_eigen(uhat.values) - oracle::to_eigen(r0.values);
  return d;
}

ProjectionConfig tight(ProjectionMethod m, double lambda = 1000.0) {
  ProjectionConfig cfg;
  cfg.method = m;
  cfg.lambda = LambdaSpec::literal(lambda);
  cfg.krylov_tol = 1e-13;
  cfg.krylov_max_iters = 5000;
  return cfg;
}

}  // namespace

TEST_CASE("toy affine constraint u1 + u2 = 2") {
  AffineConstraint h(1, 2, {1.0, 1.0}, {2.0});
  const std::vector<double> uhat{0.0, 0.0};
  SUBCASE("constrained projection") {
    const auto p = project_constrained(h, uhat, tight(ProjectionMethod::constrained));
    CHECK(p.report.converged);
    CHECK(p.u[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.u[1] == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("relaxed projection approaches the constrained one as lambda grows") {
    const auto p = project_relaxed(h, uhat, tight(ProjectionMethod::relaxed, 1e8));
    CHECK(std::hypot(p.u[0] - 1.0, p.u[1] - 1.0) <= 1e-6);
    // Closed form for this toy: u_i = 2 lambda / (1 + 2 lambda).
    const auto q = project_relaxed(h, uhat, tight(ProjectionMethod::relaxed, 3.0));
    CHECK(q.u[0] == doctest::Approx(6.0 / 7.0).epsilon(1e-10));
  }
  SUBCASE("relaxed with lambda 0 returns the input") {
    const std::vector<double> start{0.3, -7.0};
    const auto p = project_relaxed(h, start, tight(ProjectionMethod::relaxed, 0.0));
    CHECK(p.u == start);
  }
}

TEST_CASE("feasible input is a fixed point") {
  LorenzToy toy;
  Constraint h(toy.grid, toy.spec, SystemParams{});
  for (auto m : {ProjectionMethod::constrained, ProjectionMethod::relaxed}) {
    const auto p = project(toy.gt, h, tight(m));
    CHECK(oracle::rel_diff(p.u.values, toy.gt.values) == 0.0);
    CHECK(p.converged);
  }
  auto cfg = tight(ProjectionMethod::lbfgs);
  const auto p = project(toy.gt, h, cfg);
  CHECK(p.iterations <= 1);
  CHECK(oracle::rel_diff(p.u.values, toy.gt.values) <= 1e-12);
}

TEST_CASE("lorenz toy against dense closed forms") {
  LorenzToy toy;
  Constraint h(toy.grid, toy.spec, SystemParams{});
  const auto d = linearize(h, toy.uhat);
  const Eigen::VectorXd uh = oracle::to_eigen(toy.uhat.values);
  const Eigen::Index n = uh.size();

  const Eigen::MatrixXd cct = d.c * d.c.transpose();
  const Eigen::VectorXd x = cct.ldlt().solve(d.c * uh - d.b);
  const Eigen::VectorXd u_con = uh - d.c.transpose() * x;
  const auto pc = project(toy.uhat, h, tight(ProjectionMethod::constrained));
  CHECK(pc.converged);
  CHECK(oracle::rel_diff(pc.u.values, oracle::from_eigen(u_con)) <= 1e-6);

  const double lam = 1000.0;
  const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n) + lam * d.c.transpose() * d.c;
  const Eigen::VectorXd u_rel = m.ldlt().solve(uh + lam * d.c.transpose() * d.b);
  const auto pr = project(toy.uhat, h, tight(ProjectionMethod::relaxed, lam));
  CHECK(pr.converged);
  CHECK(oracle::rel_diff(pr.u.values, oracle::from_eigen(u_rel)) <= 1e-6);

  SUBCASE("other krylov solvers agree") {
    for (auto s : {KrylovMethod::bicgstab, KrylovMethod::gmres}) {
      auto cfg = tight(ProjectionMethod::relaxed, lam);
      cfg.solver = s;
      const auto p = project(toy.uhat, h, cfg);
      CHECK(oracle::rel_diff(p.u.values, oracle::from_eigen(u_rel)) <= 1e-6);
    }
  }
}

TEST_CASE("lbfgs with a heavy penalty beats the linearized projection") {
  LorenzToy toy;
  Constraint h(toy.grid, toy.spec, SystemParams{});
  const auto pc = project(toy.uhat, h, tight(ProjectionMethod::constrained));
  auto cfg = tight(ProjectionMethod::lbfgs, 1e6);
  cfg.lbfgs.max_iters = 2000;
  const auto pl = project(toy.uhat, h, cfg);
  const double r_con = norm2(h.residual(pc.u).values);
  const double r_lb = norm2(h.residual(pl.u).values);
  CHECK(r_lb <= r_con);
  CHECK(r_lb < norm2(h.residual(toy.uhat).values));
}

TEST_CASE("projection objective gradient") {
  LorenzToy toy;
  Constraint h(toy.grid, toy.spec, SystemParams{});
  TrajectoryConstraint tc(h);
  for (bool squared : {true, false}) {
    CAPTURE(squared);
    const Objective f = projection_objective(tc, toy.uhat.values, 50.0, squared);
    std::vector<double> u = toy.uhat.values;
    const auto pert = oracle::random_vector(u.size(), 77, 0.3);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += pert[i];
    std::vector<double> g(u.size()), scratch(u.size());
    f(u, g);
    const auto dir = oracle::random_vector(u.size(), 78);
    const double eps = 1e-6 * oracle::norm(u) / oracle::norm(dir);
    std::vector<double> up = u, um = u;
    for (std::size_t i = 0; i < u.size(); ++i) {
      up[i] += eps * dir[i];
      um[i] -= eps * dir[i];
    }
    const double fd = (f(up, scratch) - f(um, scratch)) / (2.0 * eps);
    const double an = oracle::dot(g, dir);
    CHECK(std::abs(fd - an) <= 1e-6 * std::abs(an));
  }
}

TEST_CASE("lambda specification") {
  CHECK(LambdaSpec::parse("1000").value == 1000.0);
  CHECK(LambdaSpec::parse("10").value == 10.0);
  CHECK(LambdaSpec::parse("norm-of-uhat").norm_of_uhat);
  CHECK_THROWS_AS(LambdaSpec::parse("-3"), ConfigError);
  CHECK_THROWS_AS(LambdaSpec::parse("big"), ConfigError);

  ProjectionConfig cfg;
  cfg.lambda = LambdaSpec::norm();
  std::vector<double> e(7, 0.0);
  e[2] = 1.0;
  CHECK(resolve_lambda(cfg, e) == 1.0);
  const std::vector<double> v{3.0, 4.0};
  CHECK(resolve_lambda(cfg, v) == doctest::Approx(5.0));
  cfg.lambda = LambdaSpec::literal(1000.0);
  CHECK(resolve_lambda(cfg, v) == 1000.0);
}

TEST_CASE("configuration errors") {
  ProjectionConfig cfg;
  cfg.krylov_tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = ProjectionConfig{};
  cfg.lambda = LambdaSpec::literal(std::nan(""));
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK(parse_projection_method("lbfgs") == ProjectionMethod::lbfgs);
  CHECK_THROWS_AS(parse_projection_method("newton"), ConfigError);

  LorenzToy toy;
  Constraint h(toy.grid, toy.spec, SystemParams{});
  CHECK_THROWS_AS(project(Trajectory(GridSpec::lorenz(1.0 / 512.0, 9)), h, ProjectionConfig{}), ShapeError);
}

TEST_CASE("non-converged linear solve is reported") {
  LorenzToy toy;
  Constraint h(toy.grid, toy.spec, SystemParams{});
  auto cfg = tight(ProjectionMethod::constrained);
  cfg.krylov_max_iters = 2;
  const auto p = project(toy.uhat, h, cfg);
  CHECK_FALSE(p.converged);
  CHECK(p.iterations == 2);
  CHECK_FALSE(p.note.empty());
  CHECK(p.u.all_finite());
}

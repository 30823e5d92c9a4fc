#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "trajproj/errors.hpp"
#include "trajproj/harness.hpp"

using namespace trajproj;

namespace {

SystemConfig small_lorenz() {
  SystemConfig s = SystemConfig::defaults(SystemKind::lorenz);
  s.grid.num_steps = 32;
  return s;
}

SystemConfig small_ns() {
  SystemConfig s = SystemConfig::defaults(SystemKind::ns);
  s.grid = GridSpec::ns(32, 32, 0.032, 4);
  return s;
}

}  // namespace

TEST_CASE("degradation operators") {
  const SystemConfig ks = [] {
    SystemConfig s = SystemConfig::defaults(SystemKind::ks);
    s.grid.num_steps = 12;
    s.window_start = 0;
    return s;
  }();
  const Trajectory gt = generate_trajectory(ks, 3);

  SUBCASE("full keep fraction is the identity") {
    DegradeSpec d;
    d.kind = DegradeKind::spectral_truncate;
    d.keep_fraction = 1.0;
    CHECK(degrade(gt, d, ks).values == gt.values);
  }
  SUBCASE("zero noise is the identity") {
    DegradeSpec d;
    d.kind = DegradeKind::gaussian_noise;
    d.noise_sigma = 0.0;
    CHECK(degrade(gt, d, ks).values == gt.values);
  }
  SUBCASE("degraded trajectories keep the initial frame") {
    for (auto kind : {DegradeKind::spectral_truncate, DegradeKind::gaussian_noise, DegradeKind::coarse_time,
                      DegradeKind::blend}) {
      DegradeSpec d;
      d.kind = kind;
      d.keep_fraction = 0.3;
      d.noise_sigma = 0.1;
      d.coarse_factor = 2;
      d.blend_weight = 0.5;
      d.seed = 4;
      const Trajectory u = degrade(gt, d, ks);
      CHECK(u.grid == gt.grid);
      const auto a = u.frame(0), b = gt.frame(0);
      CHECK(std::equal(a.begin(), a.end(), b.begin()));
      CHECK(u.values != gt.values);
    }
  }
  SUBCASE("deterministic in the seed") {
    DegradeSpec d;
    d.kind = DegradeKind::gaussian_noise;
    d.noise_sigma = 0.1;
    d.seed = 9;
    CHECK(degrade(gt, d, ks).values == degrade(gt, d, ks).values);
    DegradeSpec e = d;
    e.seed = 10;
    CHECK(degrade(gt, d, ks).values != degrade(gt, e, ks).values);
  }
  SUBCASE("spectral truncation removes high modes") {
    const Trajectory u = spectral_truncate(gt, 0.25);
    SpectralWorkspace ws(gt.grid);
    std::vector<Complex> s(ws.spectral_size());
    ws.forward(u.frame(5), s);
    for (std::size_t i = 0; i < s.size(); ++i)
      if (std::abs(ws.mode_index(0)[i]) > 8) CHECK(std::abs(s[i]) <= 1e-12);
  }
  SUBCASE("invalid specs") {
    DegradeSpec d;
    d.kind = DegradeKind::spectral_truncate;
    d.keep_fraction = 1.5;
    CHECK_THROWS_AS(d.validate(), ConfigError);
    d = DegradeSpec{};
    d.noise_sigma = -1.0;
    CHECK_THROWS_AS(d.validate(), ConfigError);
    d = DegradeSpec{};
    d.kind = DegradeKind::coarse_time;
    d.coarse_factor = 0;
    CHECK_THROWS_AS(d.validate(), ConfigError);
    CHECK_THROWS_AS(parse_degrade_kind("blur"), ConfigError);
  }
  SUBCASE("spectral truncation needs a spatial grid") {
    const SystemConfig lz = small_lorenz();
    const Trajectory l = generate_trajectory(lz, 1);
    DegradeSpec d;
    d.kind = DegradeKind::spectral_truncate;
    d.keep_fraction = 0.5;
    CHECK_THROWS_AS(degrade(l, d, lz), UnsupportedOperation);
  }
}

TEST_CASE("ns spectral truncation raises the residual by orders of magnitude") {
  const SystemConfig ns = small_ns();
  const Trajectory gt = generate_trajectory(ns, 2);
  DegradeSpec d;
  d.kind = DegradeKind::spectral_truncate;
  d.keep_fraction = 0.25;
  const Trajectory u = degrade(gt, d, ns);
  Constraint h = make_constraint(ns, gt);
  const double r_gt = norm2(h.residual(gt).values);
  const double r_u = norm2(h.residual(u).values);
  CHECK(r_u >= 1e3 * std::max(r_gt, 1e-300));
}

TEST_CASE("metrics") {
  const SystemConfig lz = small_lorenz();
  const Trajectory gt = generate_trajectory(lz, 5);
  Constraint h = make_constraint(lz, gt);
  SUBCASE("ground truth") {
    const MetricsRow r = evaluate(gt, gt, h);
    CHECK(r.mse == 0.0);
    CHECK(r.residual <= 1e-20);
  }
  SUBCASE("constant offset") {
    Trajectory u = gt;
    for (double& x : u.values) x += 1.0;
    CHECK(evaluate(u, gt, h).mse == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("mse against extended precision") {
    const auto a = oracle::random_vector(50000, 1, 3.0), b = oracle::random_vector(50000, 2, 3.0);
    long double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (static_cast<long double>(a[i]) - b[i]) * (a[i] - b[i]);
    const double ref = static_cast<double>(s / a.size());
    CHECK(std::abs(mean_squared_error(a, b) - ref) <= 1e-12 * ref);
  }
  SUBCASE("residual is the squared norm") {
    Trajectory u = gt;
    u.values[10] += 0.5;
    CHECK(evaluate(u, gt, h).residual == doctest::Approx(norm2(h.residual(u).values)).epsilon(1e-14));
  }
  SUBCASE("shape mismatch") {
    const Trajectory other = generate_trajectory([] {
      SystemConfig s = SystemConfig::defaults(SystemKind::lorenz);
      s.grid.num_steps = 16;
      return s;
    }(), 5);
    CHECK_THROWS_AS(evaluate(other, gt, h), ShapeError);
  }
}

TEST_CASE("taylor landscape") {
  SUBCASE("linear dynamics make the gauss-newton model exact") {
    // Linear rhs: h is affine, so v is exactly quadratic in u.
    const GridSpec g = GridSpec::ks(3, 0.05, 6);
    auto dyn = std::make_unique<LinearDynamics>(3, std::vector<double>{-1, 2, 0, -2, -1, 0.5, 0, 0.3, -0.2});
    ConstraintSpec spec;
    spec.initial_state = {1.0, 0.0, -1.0};
    Constraint h(g, spec, std::move(dyn));
    const Trajectory uhat(g, oracle::random_vector(g.size(), 3));
    ProjectionConfig cfg;
    cfg.method = ProjectionMethod::lbfgs;
    cfg.lambda = LambdaSpec::literal(100.0);
    cfg.lbfgs.record_path = true;
    cfg.lbfgs.max_iters = 30;
    const auto p = project(uhat, h, cfg);
    const LandscapeCurve c = taylor_landscape(*p.trace, h, SecondOrderMode::gauss_newton);
    REQUIRE(c.size() == p.trace->iterates.size());
    CHECK(c.d[0] == 0.0);
    CHECK(c.v_true[0] == c.v_linear[0]);
    CHECK(c.v_true[0] == c.v_quadratic[0]);
    for (std::size_t k = 0; k < c.size(); ++k)
      CHECK(std::abs(c.v_quadratic[k] - c.v_true[k]) <= 1e-10 * std::max(1.0, c.v_true[0]));
    for (std::size_t k = 1; k < c.size(); ++k) CHECK(c.d[k] >= c.d[k - 1]);

    const LandscapeCurve s = taylor_landscape(*p.trace, h, SecondOrderMode::secant_fd);
    for (std::size_t k = 0; k < s.size(); ++k)
      CHECK(std::abs(s.v_quadratic[k] - s.v_true[k]) <= 1e-6 * std::max(1.0, s.v_true[0]));

    std::ostringstream csv;
    write_landscape_csv(csv, c);
    CHECK(csv.str().rfind("k,d,v_true,v_linear,v_quadratic\n", 0) == 0);
  }
  SUBCASE("needs a recorded path") {
    const SystemConfig lz = small_lorenz();
    const Trajectory gt = generate_trajectory(lz, 5);
    Constraint h = make_constraint(lz, gt);
    CHECK_THROWS_AS(taylor_landscape(OptimTrace{}, h, SecondOrderMode::gauss_newton), ConfigError);
  }
}

TEST_CASE("experiment runner") {
  ExperimentConfig cfg;
  cfg.system = small_lorenz();
  cfg.seeds = {1, 2, 3};
  cfg.degrade.kind = DegradeKind::gaussian_noise;
  cfg.degrade.noise_sigma = 1e-3;
  cfg.degrade.seed = 4;

  SUBCASE("no methods gives only the baseline row") {
    const ExperimentReport r = run_experiment(cfg);
    REQUIRE(r.table.size() == 1);
    CHECK(r.table[0].method == "baseline");
    CHECK(r.table[0].trajectories == 3);
    CHECK(r.records.size() == 3);
  }
  SUBCASE("rows per method and thread-count independence") {
    ProjectionConfig rel;
    rel.method = ProjectionMethod::relaxed;
    rel.lambda = LambdaSpec::literal(1000.0);
    ProjectionConfig lb;
    lb.method = ProjectionMethod::lbfgs;
    lb.lambda = LambdaSpec::literal(1e6);
    cfg.methods = {{"relaxed", rel}, {"lbfgs", lb}};
    const ExperimentReport one = run_experiment(cfg);
    cfg.threads = 3;
    const ExperimentReport three = run_experiment(cfg);
    REQUIRE(one.table.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(one.table[i].method == three.table[i].method);
      CHECK(one.table[i].mse == three.table[i].mse);
      CHECK(one.table[i].residual == three.table[i].residual);
    }
    const AggregateRow* base = one.find("baseline", 0);
    const AggregateRow* relaxed = one.find("relaxed", 0);
    REQUIRE(base);
    REQUIRE(relaxed);
    CHECK(relaxed->residual < base->residual);

    std::ostringstream csv;
    write_report_csv(csv, one);
    CHECK(csv.str().find("system,resolution,method,mse,residual") == 0);
    CHECK(format_report_table(one).find("relaxed") != std::string::npos);
  }
  SUBCASE("per-trajectory failures make rows partial") {
    ProjectionConfig bad;
    bad.method = ProjectionMethod::lbfgs;
    bad.lambda = LambdaSpec::literal(0.0);
    cfg.methods = {{"broken", bad}};
    const ExperimentReport r = run_experiment(cfg);
    const AggregateRow* row = r.find("broken", 0);
    REQUIRE(row);
    CHECK(row->partial());
    CHECK(row->failures == 3);
  }
  SUBCASE("invalid configs are rejected before running") {
    cfg.seeds.clear();
    CHECK_THROWS_AS(run_experiment(cfg), ConfigError);
  }
}

TEST_CASE("multi-resolution cases") {
  ExperimentConfig cfg;
  cfg.system = SystemConfig::defaults(SystemKind::ks);
  cfg.system.grid.num_steps = 6;
  cfg.system.window_start = 0;
  const Trajectory gt = generate_trajectory(cfg.system, 8);
  const Trajectory hat = spectral_truncate(gt, 0.5);
  const EvaluationCase base = make_case(cfg, gt, hat, 64);
  CHECK(base.u_gt.values == gt.values);
  const EvaluationCase fine = make_case(cfg, gt, hat, 128);
  CHECK(fine.u_gt.grid.resolution[0] == 128);
  CHECK(fine.u_hat.grid.resolution[0] == 128);
  CHECK(fine.spec.initial_state.size() == 128);
}

#include "doctest.h"
#include "oracles.hpp"
#include "trajproj/errors.hpp"
#include "trajproj/krylov.hpp"

using namespace trajproj;

namespace {

// Row-major copy of an Eigen matrix for dense_operator.
std::vector<double> row_major(const Eigen::MatrixXd& m) {
  std::vector<double> out(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
  return out;
}

Eigen::MatrixXd random_matrix(int n, std::uint64_t seed) {
  const auto v = oracle::random_vector(static_cast<std::size_t>(n * n), seed);
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), n, n);
}

LinearOperator op_of(const Eigen::MatrixXd& m, bool spd = false) {
  LinearOperator a = dense_operator(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()), row_major(m));
  a.symmetric = a.positive_definite = spd;
  return a;
}

}  // namespace

TEST_CASE("identity converges in one iteration") {
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(5, 5);
  const std::vector<double> b{1, 2, 3, 4, 5};
  for (auto m : {KrylovMethod::cg, KrylovMethod::bicgstab, KrylovMethod::gmres}) {
    CAPTURE(to_string(m));
    const auto r = solve(m, op_of(id, true), b, 1e-12, 50);
    CHECK(r.report.converged);
    CHECK(r.report.iterations == 1);
    CHECK(oracle::rel_diff(r.x, b) <= 1e-14);
  }
}

TEST_CASE("small exact systems") {
  SUBCASE("cg on a diagonal") {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(3, 3);
    d.diagonal() << 1, 2, 3;
    const auto r = cg(op_of(d, true), std::vector<double>{1, 2, 3}, 1e-12, 10);
    CHECK(oracle::rel_diff(r.x, std::vector<double>{1, 1, 1}) <= 1e-12);
  }
  SUBCASE("nonsymmetric 2x2") {
    Eigen::MatrixXd a(2, 2);
    a << 2, 1, 0, 1;
    for (auto m : {KrylovMethod::bicgstab, KrylovMethod::gmres}) {
      const auto r = solve(m, op_of(a), std::vector<double>{3, 1}, 1e-12, 10);
      CHECK(oracle::rel_diff(r.x, std::vector<double>{1, 1}) <= 1e-12);
    }
  }
}

TEST_CASE("random 100x100 systems against a dense solve") {
  const int n = 100;
  const Eigen::MatrixXd m = random_matrix(n, 1);
  const Eigen::MatrixXd spd = m.transpose() * m + Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd ns = random_matrix(n, 2) / std::sqrt(n) + 4.0 * Eigen::MatrixXd::Identity(n, n);
  const auto b = oracle::random_vector(n, 3);
  const Eigen::VectorXd x_spd = spd.ldlt().solve(oracle::to_eigen(b));
  const Eigen::VectorXd x_ns = ns.partialPivLu().solve(oracle::to_eigen(b));

  const auto r_cg = cg(op_of(spd, true), b, 1e-12, 1000);
  CHECK(oracle::rel_diff(r_cg.x, oracle::from_eigen(x_spd)) <= 1e-8);
  const auto r_bi = bicgstab(op_of(ns), b, 1e-12, 1000);
  CHECK(oracle::rel_diff(r_bi.x, oracle::from_eigen(x_ns)) <= 1e-8);
  const auto r_gm = gmres(op_of(ns), b, 1e-12, 1000, 30);
  CHECK(oracle::rel_diff(r_gm.x, oracle::from_eigen(x_ns)) <= 1e-8);
  const auto r_gm_spd = gmres(op_of(spd, true), b, 1e-12, 1000);
  CHECK(oracle::rel_diff(r_gm_spd.x, oracle::from_eigen(x_spd)) <= 1e-8);
}

TEST_CASE("cg iteration bound on well-conditioned spd systems") {
  const int n = 60;
  const Eigen::MatrixXd m = random_matrix(n, 5);
  const Eigen::MatrixXd spd = m.transpose() * m / n + Eigen::MatrixXd::Identity(n, n);
  const auto b = oracle::random_vector(n, 6);
  const auto r = cg(op_of(spd, true), b, 1e-10, 1000);
  CHECK(r.report.converged);
  CHECK(r.report.iterations <= static_cast<std::size_t>(n + 5));
  CHECK(r.report.final_relative_residual <= 1e-10);
}

TEST_CASE("reports") {
  const Eigen::MatrixXd spd = Eigen::MatrixXd::Identity(4, 4) * 2.0;
  SUBCASE("zero right-hand side") {
    const auto r = cg(op_of(spd, true), std::vector<double>(4, 0.0), 1e-10, 10);
    CHECK(r.report.converged);
    CHECK(r.report.iterations == 0);
    for (double x : r.x) CHECK(x == 0.0);
  }
  SUBCASE("warm start at the solution") {
    const std::vector<double> b{2, 4, 6, 8}, x0{1, 2, 3, 4};
    const auto r = cg(op_of(spd, true), b, 1e-10, 10, std::span<const double>(x0));
    CHECK(r.report.converged);
    CHECK(r.report.iterations == 0);
  }
  SUBCASE("iteration cap is reported") {
    const Eigen::MatrixXd m = random_matrix(40, 7);
    const Eigen::MatrixXd hard = m.transpose() * m + 1e-3 * Eigen::MatrixXd::Identity(40, 40);
    const auto r = cg(op_of(hard, true), oracle::random_vector(40, 8), 1e-14, 3);
    CHECK_FALSE(r.report.converged);
    CHECK(r.report.iterations == 3);
    CHECK(r.report.residual_history.size() >= 3);
    CHECK(r.report.final_relative_residual > 1e-14);
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(cg(op_of(spd, true), std::vector<double>(3, 1.0), 1e-10, 10), ShapeError);
  }
  SUBCASE("method names") {
    CHECK(parse_krylov_method("gmres") == KrylovMethod::gmres);
    CHECK(to_string(KrylovMethod::bicgstab) == "bicgstab");
    CHECK_THROWS_AS(parse_krylov_method("minres"), ConfigError);
  }
}

TEST_CASE("operator adjoint of a dense matrix") {
  Eigen::MatrixXd a(2, 3);
  a << 1, 2, 3, 4, 5, 6;
  const LinearOperator op = op_of(a);
  CHECK(op.in_dim == 3);
  CHECK(op.out_dim == 2);
  const auto y = op(std::vector<double>{1, 0, -1});
  CHECK(y == std::vector<double>{-2, -2});
  std::vector<double> z(3);
  op.apply_adjoint(std::vector<double>{1, 1}, z);
  CHECK(z == std::vector<double>{5, 7, 9});
}

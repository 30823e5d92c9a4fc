#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace trajproj {

/// Matrix-free linear map. `apply_adjoint` is optional; the flags describe
/// structure the caller vouches for.
struct LinearOperator {
  using Apply = std::function<void(std::span<const double>, std::span<double>)>;

  Apply apply;
  Apply apply_adjoint;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  bool symmetric = false;
  bool positive_definite = false;
  /// Reserved for a diagonal preconditioner; the solvers do not use it yet.
  std::optional<std::vector<double>> diagonal;

  std::vector<double> operator()(std::span<const double> v) const;
};

/// Operator for a dense row-major matrix.
LinearOperator dense_operator(std::size_t rows, std::size_t cols, std::vector<double> matrix);

struct SolveReport {
  std::size_t iterations = 0;
  /// Recomputed ||A x - rhs|| / ||rhs|| at exit, not the recursive estimate.
  double final_relative_residual = 0.0;
  bool converged = false;
  std::string solver;
  /// Breakdown or other diagnostics; empty when nothing happened.
  std::string note;
  /// Per-iteration residual estimate (relative), as tracked by the solver.
  std::vector<double> residual_history;
};

struct SolveResult {
  std::vector<double> x;
  SolveReport report;
};

SolveResult cg(const LinearOperator& a, std::span<const double> rhs, double tol, std::size_t max_iters,
               std::optional<std::span<const double>> x0 = std::nullopt);

SolveResult bicgstab(const LinearOperator& a, std::span<const double> rhs, double tol, std::size_t max_iters,
                     std::optional<std::span<const double>> x0 = std::nullopt);

/// Restarted GMRES with Givens-rotation least squares. `max_iters` counts
/// inner iterations across all restart cycles.
SolveResult gmres(const LinearOperator& a, std::span<const double> rhs, double tol, std::size_t max_iters,
                  std::size_t restart = 50, std::optional<std::span<const double>> x0 = std::nullopt);

enum class KrylovMethod { cg, bicgstab, gmres };

std::string to_string(KrylovMethod m);
KrylovMethod parse_krylov_method(const std::string& name);

SolveResult solve(KrylovMethod method, const LinearOperator& a, std::span<const double> rhs, double tol,
                  std::size_t max_iters, std::optional<std::span<const double>> x0 = std::nullopt);

}  // namespace trajproj

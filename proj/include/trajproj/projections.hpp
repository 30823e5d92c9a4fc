#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trajproj/field_core.hpp"
#include "trajproj/krylov.hpp"
#include "trajproj/lbfgs.hpp"
#include "trajproj/systems.hpp"

namespace trajproj {

/// h(u) - c as a flat map R^n -> R^m with matrix-free derivatives.
class ConstraintFunction {
 public:
  virtual ~ConstraintFunction() = default;
  virtual std::size_t input_size() const = 0;
  virtual std::size_t output_size() const = 0;
  virtual void residual(std::span<const double> u, std::span<double> r) = 0;
  virtual void jvp(std::span<const double> u, std::span<const double> v, std::span<double> out) = 0;
  virtual void vjp(std::span<const double> u, std::span<const double> w, std::span<double> out) = 0;
};

/// Adapter over a trajectory constraint. Holds a reference.
class TrajectoryConstraint final : public ConstraintFunction {
 public:
  explicit TrajectoryConstraint(Constraint& h) : h_(h) {}
  std::size_t input_size() const override { return h_.size(); }
  std::size_t output_size() const override { return h_.size(); }
  void residual(std::span<const double> u, std::span<double> r) override { h_.residual(u, r); }
  void jvp(std::span<const double> u, std::span<const double> v, std::span<double> out) override {
    h_.jvp(u, v, out);
  }
  void vjp(std::span<const double> u, std::span<const double> w, std::span<double> out) override {
    h_.vjp(u, w, out);
  }

 private:
  Constraint& h_;
};

/// h(u) - c = A u - b for a dense row-major A.
class AffineConstraint final : public ConstraintFunction {
 public:
  AffineConstraint(std::size_t rows, std::size_t cols, std::vector<double> a, std::vector<double> b);
  std::size_t input_size() const override { return cols_; }
  std::size_t output_size() const override { return rows_; }
  void residual(std::span<const double> u, std::span<double> r) override;
  void jvp(std::span<const double> u, std::span<const double> v, std::span<double> out) override;
  void vjp(std::span<const double> u, std::span<const double> w, std::span<double> out) override;

 private:
  std::size_t rows_, cols_;
  std::vector<double> a_, b_;
};

/// Linearization of h about a base point: h(u) - c ~ C u - b with
/// C = J_h(uhat) and b = c - h(uhat) + C uhat.
class LinearizedConstraint {
 public:
  LinearizedConstraint(ConstraintFunction& h, std::span<const double> base);

  /// C as an operator, with C^T as its adjoint.
  const LinearOperator& op() const { return op_; }
  std::span<const double> base() const { return base_; }
  /// h(uhat) - c.
  std::span<const double> base_residual() const { return r0_; }
  /// b, materialized on first use.
  std::span<const double> rhs();
  /// C u - b.
  std::vector<double> violation(std::span<const double> u);

 private:
  ConstraintFunction& h_;
  std::vector<double> base_;
  std::vector<double> r0_;
  std::optional<std::vector<double>> b_;
  LinearOperator op_;
};

enum class ProjectionMethod { constrained, relaxed, lbfgs };

std::string to_string(ProjectionMethod m);
ProjectionMethod parse_projection_method(const std::string& name);

/// Penalty weight: a literal, or the Euclidean norm of uhat.
struct LambdaSpec {
  bool norm_of_uhat = false;
  double value = 0.0;

  static LambdaSpec literal(double v) { return {false, v}; }
  static LambdaSpec norm() { return {true, 0.0}; }
  /// Accepts a number or the token "norm-of-uhat".
  static LambdaSpec parse(const std::string& text);
  std::string to_string() const;
  bool operator==(const LambdaSpec&) const = default;
};

struct ProjectionConfig {
  ProjectionMethod method = ProjectionMethod::constrained;
  LambdaSpec lambda = LambdaSpec::literal(1000.0);
  double krylov_tol = 1e-8;
  std::size_t krylov_max_iters = 2000;
  KrylovMethod solver = KrylovMethod::cg;
  LbfgsConfig lbfgs;
  /// LBFGS objective ||u - uhat||^2 + lambda ||h(u) - c||^2; when false the
  /// norms are unsquared.
  bool squared_norms = true;

  void validate() const;
};

double resolve_lambda(const ProjectionConfig& cfg, std::span<const double> uhat);
double resolve_lambda(const ProjectionConfig& cfg, const Trajectory& uhat);

struct LinearProjection {
  std::vector<double> u;
  SolveReport report;
};

struct LbfgsProjection {
  std::vector<double> u;
  OptimTrace trace;
};

LinearProjection project_constrained(ConstraintFunction& h, std::span<const double> uhat,
                                     const ProjectionConfig& cfg);
LinearProjection project_relaxed(ConstraintFunction& h, std::span<const double> uhat, const ProjectionConfig& cfg);
LbfgsProjection project_lbfgs(ConstraintFunction& h, std::span<const double> uhat, const ProjectionConfig& cfg);

/// Objective minimized by project_lbfgs; exposed for gradient checks.
Objective projection_objective(ConstraintFunction& h, std::span<const double> uhat, double lambda, bool squared);

/// Outcome of any of the three projections on a trajectory.
struct ProjectionResult {
  Trajectory u;
  ProjectionMethod method = ProjectionMethod::constrained;
  double lambda = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::string note;
  std::optional<SolveReport> solve;
  std::optional<OptimTrace> trace;
};

ProjectionResult project(const Trajectory& uhat, Constraint& h, const ProjectionConfig& cfg);
ProjectionResult project(const Trajectory& uhat, const ConstraintSpec& spec, const SystemParams& params,
                         const ProjectionConfig& cfg);

ProjectionResult project_constrained(const Trajectory& uhat, Constraint& h, const ProjectionConfig& cfg);
ProjectionResult project_relaxed(const Trajectory& uhat, Constraint& h, const ProjectionConfig& cfg);
ProjectionResult project_lbfgs(const Trajectory& uhat, Constraint& h, const ProjectionConfig& cfg);

}  // namespace trajproj

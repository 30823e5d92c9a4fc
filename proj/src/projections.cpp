#include "trajproj/projections.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <memory>
#include <sstream>

#include "trajproj/errors.hpp"

namespace trajproj {

AffineConstraint::AffineConstraint(std::size_t rows, std::size_t cols, std::vector<double> a, std::vector<double> b)
    : rows_(rows), cols_(cols), a_(std::move(a)), b_(std::move(b)) {
  if (a_.size() != rows * cols) throw ShapeError("affine constraint: matrix must be rows x cols");
  if (b_.size() != rows) throw ShapeError("affine constraint: rhs must have one entry per row");
}

void AffineConstraint::residual(std::span<const double> u, std::span<double> r) {
  jvp(u, u, r);
  for (std::size_t i = 0; i < rows_; ++i) r[i] -= b_[i];
}

void AffineConstraint::jvp(std::span<const double>, std::span<const double> v, std::span<double> out) {
  for (std::size_t i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) s += a_[i * cols_ + j] * v[j];
    out[i] = s;
  }
}

void AffineConstraint::vjp(std::span<const double>, std::span<const double> w, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) out[j] += a_[i * cols_ + j] * w[i];
}

LinearizedConstraint::LinearizedConstraint(ConstraintFunction& h, std::span<const double> base)
    : h_(h), base_(base.begin(), base.end()), r0_(h.output_size()) {
  if (base.size() != h.input_size()) throw ShapeError("linearized constraint: base point has the wrong size");
  h_.residual(base_, r0_);
  op_.in_dim = h.input_size();
  op_.out_dim = h.output_size();
  op_.apply = [this](std::span<const double> v, std::span<double> out) { h_.jvp(base_, v, out); };
  op_.apply_adjoint = [this](std::span<const double> w, std::span<double> out) { h_.vjp(base_, w, out); };
}

std::span<const double> LinearizedConstraint::rhs() {
  if (!b_) {
    std::vector<double> b(h_.output_size());
    h_.jvp(base_, base_, b);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] -= r0_[i];
    b_ = std::move(b);
  }
  return *b_;
}

std::vector<double> LinearizedConstraint::violation(std::span<const double> u) {
  std::vector<double> out(h_.output_size());
  h_.jvp(base_, u, out);
  const auto b = rhs();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

std::string to_string(ProjectionMethod m) {
  switch (m) {
    case ProjectionMethod::constrained: return "constrained";
    case ProjectionMethod::relaxed: return "relaxed";
    case ProjectionMethod::lbfgs: return "lbfgs";
  }
  return "unknown";
}

ProjectionMethod parse_projection_method(const std::string& name) {
  if (name == "constrained") return ProjectionMethod::constrained;
  if (name == "relaxed") return ProjectionMethod::relaxed;
  if (name == "lbfgs") return ProjectionMethod::lbfgs;
  throw ConfigError("unknown projection method '" + name + "' (expected constrained, relaxed or lbfgs)");
}

LambdaSpec LambdaSpec::parse(const std::string& text) {
  if (text == "norm-of-uhat") return norm();
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty())
    throw ConfigError("lambda: expected a number or 'norm-of-uhat', got '" + text + "'");
  if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("lambda must be a finite value >= 0, got " + text);
  return literal(v);
}

std::string LambdaSpec::to_string() const {
  if (norm_of_uhat) return "norm-of-uhat";
  std::ostringstream os;
  os.precision(17);
  os << value;
  return os.str();
}

void ProjectionConfig::validate() const {
  if (!lambda.norm_of_uhat && !(lambda.value >= 0.0 && std::isfinite(lambda.value)))
    throw ConfigError("projection: lambda must be a finite value >= 0");
  if (!(krylov_tol > 0.0)) throw ConfigError("projection: krylov-tol must be positive");
  if (krylov_max_iters < 1) throw ConfigError("projection: krylov-max-iters must be >= 1");
  lbfgs.validate();
}

double resolve_lambda(const ProjectionConfig& cfg, std::span<const double> uhat) {
  if (cfg.lambda.norm_of_uhat) return std::sqrt(norm2(uhat));
  if (!(cfg.lambda.value >= 0.0)) throw ConfigError("projection: lambda must be >= 0");
  return cfg.lambda.value;
}

double resolve_lambda(const ProjectionConfig& cfg, const Trajectory& uhat) { return resolve_lambda(cfg, uhat.values); }

namespace {

void require_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) throw NumericalError("projection: input trajectory contains non-finite values");
}

void check_input(ConstraintFunction& h, std::span<const double> uhat, const ProjectionConfig& cfg) {
  cfg.validate();
  if (uhat.size() != h.input_size()) throw ShapeError("projection: input size does not match the constraint");
  require_finite(uhat);
}

}  // namespace

LinearProjection project_constrained(ConstraintFunction& h, std::span<const double> uhat,
                                     const ProjectionConfig& cfg) {
  check_input(h, uhat, cfg);
  LinearizedConstraint lin(h, uhat);
  const LinearOperator& c = lin.op();
  LinearOperator cct;
  cct.in_dim = cct.out_dim = c.out_dim;
  cct.symmetric = true;
  cct.positive_definite = true;
  std::vector<double> mid(c.in_dim);
  cct.apply = [&](std::span<const double> x, std::span<double> out) {
    c.apply_adjoint(x, mid);
    c.apply(mid, out);
  };
  cct.apply_adjoint = cct.apply;

  // C uhat - b reduces to h(uhat) - c.
  SolveResult sol = solve(cfg.solver, cct, lin.base_residual(), cfg.krylov_tol, cfg.krylov_max_iters);
  LinearProjection out;
  out.u.assign(uhat.begin(), uhat.end());
  c.apply_adjoint(sol.x, mid);
  for (std::size_t i = 0; i < out.u.size(); ++i) out.u[i] -= mid[i];
  out.report = std::move(sol.report);
  if (!out.report.converged) {
    if (!out.report.note.empty()) out.report.note += "; ";
    out.report.note += "C C^T may be singular or ill-conditioned; the relaxed projection is more robust here";
  }
  return out;
}

LinearProjection project_relaxed(ConstraintFunction& h, std::span<const double> uhat, const ProjectionConfig& cfg) {
  check_input(h, uhat, cfg);
  const double lambda = resolve_lambda(cfg, uhat);
  LinearProjection out;
  if (lambda == 0.0) {
    out.u.assign(uhat.begin(), uhat.end());
    out.report.converged = true;
    out.report.solver = to_string(cfg.solver);
    return out;
  }
  LinearizedConstraint lin(h, uhat);
  const LinearOperator& c = lin.op();
  LinearOperator a;
  a.in_dim = a.out_dim = c.in_dim;
  a.symmetric = true;
  a.positive_definite = true;
  std::vector<double> mid(c.out_dim), back(c.in_dim);
  a.apply = [&](std::span<const double> x, std::span<double> y) {
    c.apply(x, mid);
    c.apply_adjoint(mid, back);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] + lambda * back[i];
  };
  a.apply_adjoint = a.apply;

  std::vector<double> rhs(c.in_dim);
  c.apply_adjoint(lin.rhs(), rhs);
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = uhat[i] + lambda * rhs[i];
  SolveResult sol = solve(cfg.solver, a, rhs, cfg.krylov_tol, cfg.krylov_max_iters, uhat);
  out.u = std::move(sol.x);
  out.report = std::move(sol.report);
  return out;
}

Objective projection_objective(ConstraintFunction& h, std::span<const double> uhat, double lambda, bool squared) {
  const std::size_t n = h.input_size();
  auto r = std::make_shared<std::vector<double>>(h.output_size());
  auto jt = std::make_shared<std::vector<double>>(n);
  return [&h, uhat, lambda, squared, n, r, jt](std::span<const double> u, std::span<double> grad) {
    h.residual(u, *r);
    h.vjp(u, *r, *jt);
    double dist2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) dist2 += (u[i] - uhat[i]) * (u[i] - uhat[i]);
    const double viol2 = norm2(*r);
    if (squared) {
      for (std::size_t i = 0; i < n; ++i) grad[i] = 2.0 * (u[i] - uhat[i]) + 2.0 * lambda * (*jt)[i];
      return dist2 + lambda * viol2;
    }
    const double dist = std::sqrt(dist2);
    const double viol = std::sqrt(viol2);
    const double a = dist > 0.0 ? 1.0 / dist : 0.0;
    const double b = viol > 0.0 ? lambda / viol : 0.0;
    for (std::size_t i = 0; i < n; ++i) grad[i] = a * (u[i] - uhat[i]) + b * (*jt)[i];
    return dist + lambda * viol;
  };
}

LbfgsProjection project_lbfgs(ConstraintFunction& h, std::span<const double> uhat, const ProjectionConfig& cfg) {
  check_input(h, uhat, cfg);
  const double lambda = resolve_lambda(cfg, uhat);
  if (!(lambda > 0.0)) throw ConfigError("lbfgs projection: lambda must be > 0");
  const Objective f = projection_objective(h, uhat, lambda, cfg.squared_norms);
  MinimizeResult res = minimize(f, std::vector<double>(uhat.begin(), uhat.end()), cfg.lbfgs);
  return {std::move(res.x), std::move(res.trace)};
}

ProjectionResult project_constrained(const Trajectory& uhat, Constraint& h, const ProjectionConfig& cfg) {
  require_same_grid(uhat.grid, h.grid(), "project_constrained");
  TrajectoryConstraint f(h);
  LinearProjection p = project_constrained(f, uhat.values, cfg);
  ProjectionResult out;
  out.u = Trajectory(uhat.grid, std::move(p.u));
  out.method = ProjectionMethod::constrained;
  out.iterations = p.report.iterations;
  out.converged = p.report.converged;
  out.note = p.report.note;
  out.solve = std::move(p.report);
  return out;
}

ProjectionResult project_relaxed(const Trajectory& uhat, Constraint& h, const ProjectionConfig& cfg) {
  require_same_grid(uhat.grid, h.grid(), "project_relaxed");
  TrajectoryConstraint f(h);
  LinearProjection p = project_relaxed(f, uhat.values, cfg);
  ProjectionResult out;
  out.u = Trajectory(uhat.grid, std::move(p.u));
  out.method = ProjectionMethod::relaxed;
  out.lambda = resolve_lambda(cfg, uhat);
  out.iterations = p.report.iterations;
  out.converged = p.report.converged;
  out.note = p.report.note;
  out.solve = std::move(p.report);
  return out;
}

ProjectionResult project_lbfgs(const Trajectory& uhat, Constraint& h, const ProjectionConfig& cfg) {
  require_same_grid(uhat.grid, h.grid(), "project_lbfgs");
  TrajectoryConstraint f(h);
  LbfgsProjection p = project_lbfgs(f, uhat.values, cfg);
  ProjectionResult out;
  out.u = Trajectory(uhat.grid, std::move(p.u));
  out.method = ProjectionMethod::lbfgs;
  out.lambda = resolve_lambda(cfg, uhat);
  out.iterations = p.trace.iterations;
  out.converged = p.trace.reason == Termination::gradient_tolerance;
  if (!out.converged) out.note = "terminated on " + to_string(p.trace.reason);
  out.trace = std::move(p.trace);
  return out;
}

ProjectionResult project(const Trajectory& uhat, Constraint& h, const ProjectionConfig& cfg) {
  switch (cfg.method) {
    case ProjectionMethod::constrained: return project_constrained(uhat, h, cfg);
    case ProjectionMethod::relaxed: return project_relaxed(uhat, h, cfg);
    case ProjectionMethod::lbfgs: return project_lbfgs(uhat, h, cfg);
  }
  throw ConfigError("projection: unknown method");
}

ProjectionResult project(const Trajectory& uhat, const ConstraintSpec& spec, const SystemParams& params,
                         const ProjectionConfig& cfg) {
  Constraint h(uhat.grid, spec, params);
  return project(uhat, h, cfg);
}

}  // namespace trajproj

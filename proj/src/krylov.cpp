#include "trajproj/krylov.hpp"

#include <cmath>

#include "trajproj/errors.hpp"
#include "trajproj/field_core.hpp"

namespace trajproj {

namespace {

double norm(std::span<const double> v) { return std::sqrt(norm2(v)); }

void check_square(const LinearOperator& a, std::span<const double> rhs, const char* who) {
  if (!a.apply) throw ConfigError(std::string(who) + ": operator has no apply function");
  if (a.in_dim != a.out_dim) throw ShapeError(std::string(who) + ": operator must be square");
  if (rhs.size() != a.out_dim) throw ShapeError(std::string(who) + ": rhs length does not match operator");
  for (double v : rhs)
    if (!std::isfinite(v)) throw ConfigError(std::string(who) + ": rhs contains non-finite values");
}

std::vector<double> initial_guess(std::size_t n, std::optional<std::span<const double>> x0) {
  if (!x0) return std::vector<double>(n, 0.0);
  if (x0->size() != n) throw ShapeError("krylov: initial guess length does not match operator");
  return std::vector<double>(x0->begin(), x0->end());
}

// r = b - A x
void true_residual(const LinearOperator& a, std::span<const double> b, std::span<const double> x,
                   std::vector<double>& ax, std::vector<double>& r) {
  a.apply(x, ax);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - ax[i];
}

double threshold(double tol, double bnorm) { return std::max(tol * bnorm, 1e-300); }

void finish(const LinearOperator& a, std::span<const double> b, double bnorm, double tol, SolveResult& res) {
  std::vector<double> ax(b.size()), r(b.size());
  true_residual(a, b, res.x, ax, r);
  const double rn = norm(r);
  res.report.final_relative_residual = rn / bnorm;
  res.report.converged = std::isfinite(rn) && rn <= threshold(tol, bnorm);
}

bool zero_rhs(std::span<const double> b, SolveResult& res, const char* name) {
  res.report.solver = name;
  if (norm2(b) != 0.0) return false;
  res.x.assign(b.size(), 0.0);
  res.report.converged = true;
  res.report.final_relative_residual = 0.0;
  return true;
}

}  // namespace

std::vector<double> LinearOperator::operator()(std::span<const double> v) const {
  std::vector<double> out(out_dim);
  apply(v, out);
  return out;
}

LinearOperator dense_operator(std::size_t rows, std::size_t cols, std::vector<double> matrix) {
  if (matrix.size() != rows * cols) throw ShapeError("dense_operator: matrix size mismatch");
  auto m = std::make_shared<std::vector<double>>(std::move(matrix));
  LinearOperator op;
  op.in_dim = cols;
  op.out_dim = rows;
  op.apply = [m, rows, cols](std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < rows; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < cols; ++j) s += (*m)[i * cols + j] * x[j];
      y[i] = s;
    }
  };
  op.apply_adjoint = [m, rows, cols](std::span<const double> x, std::span<double> y) {
    for (std::size_t j = 0; j < cols; ++j) y[j] = 0.0;
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) y[j] += (*m)[i * cols + j] * x[i];
  };
  return op;
}

SolveResult cg(const LinearOperator& a, std::span<const double> b, double tol, std::size_t max_iters,
               std::optional<std::span<const double>> x0) {
  check_square(a, b, "cg");
  SolveResult res;
  if (zero_rhs(b, res, "cg")) return res;
  const std::size_t n = b.size();
  const double bnorm = norm(b);
  const double thr = threshold(tol, bnorm);
  res.x = initial_guess(n, x0);

  std::vector<double> r(n), p(n), ap(n);
  true_residual(a, b, res.x, ap, r);
  p = r;
  double rs = norm2(r);
  std::size_t& it = res.report.iterations;
  while (std::sqrt(rs) > thr && it < max_iters) {
    a.apply(p, ap);
    const double pap = dot(p, ap);
    if (!(pap > 0.0)) {
      res.report.note = "cg breakdown: p^T A p <= 0 (operator singular or indefinite)";
      break;
    }
    const double alpha = rs / pap;
    for (std::size_t i = 0; i < n; ++i) {
      res.x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    ++it;
    double rs_new = norm2(r);
    res.report.residual_history.push_back(std::sqrt(rs_new) / bnorm);
    if (std::sqrt(rs_new) <= thr) {
      // Guard against drift of the recursive residual.
      true_residual(a, b, res.x, ap, r);
      rs_new = norm2(r);
      if (std::sqrt(rs_new) <= thr) break;
      p = r;
      rs = rs_new;
      continue;
    }
    const double beta = rs_new / rs;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    rs = rs_new;
  }
  finish(a, b, bnorm, tol, res);
  return res;
}

SolveResult bicgstab(const LinearOperator& a, std::span<const double> b, double tol, std::size_t max_iters,
                     std::optional<std::span<const double>> x0) {
  check_square(a, b, "bicgstab");
  SolveResult res;
  if (zero_rhs(b, res, "bicgstab")) return res;
  const std::size_t n = b.size();
  const double bnorm = norm(b);
  const double thr = threshold(tol, bnorm);
  res.x = initial_guess(n, x0);

  std::vector<double> r(n), rhat(n), p(n, 0.0), v(n, 0.0), s(n), t(n);
  true_residual(a, b, res.x, t, r);
  rhat = r;
  double rho = 1.0, alpha = 1.0, omega = 1.0;
  std::size_t& it = res.report.iterations;
  while (norm(r) > thr && it < max_iters) {
    const double rho_new = dot(rhat, r);
    if (rho_new == 0.0) {
      res.report.note = "bicgstab breakdown: rho = 0";
      break;
    }
    const double beta = (rho_new / rho) * (alpha / omega);
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
    a.apply(p, v);
    const double denom = dot(rhat, v);
    if (denom == 0.0) {
      res.report.note = "bicgstab breakdown: rhat^T A p = 0";
      break;
    }
    alpha = rho_new / denom;
    for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
    ++it;
    if (norm(s) <= thr) {
      for (std::size_t i = 0; i < n; ++i) res.x[i] += alpha * p[i];
      r = s;
      res.report.residual_history.push_back(norm(r) / bnorm);
      true_residual(a, b, res.x, t, r);
      if (norm(r) <= thr) break;
      rhat = r;
      rho = alpha = omega = 1.0;
      std::fill(p.begin(), p.end(), 0.0);
      std::fill(v.begin(), v.end(), 0.0);
      continue;
    }
    a.apply(s, t);
    const double tt = norm2(t);
    if (tt == 0.0) {
      for (std::size_t i = 0; i < n; ++i) res.x[i] += alpha * p[i];
      res.report.note = "bicgstab breakdown: A s = 0";
      break;
    }
    omega = dot(t, s) / tt;
    for (std::size_t i = 0; i < n; ++i) {
      res.x[i] += alpha * p[i] + omega * s[i];
      r[i] = s[i] - omega * t[i];
    }
    rho = rho_new;
    res.report.residual_history.push_back(norm(r) / bnorm);
    if (norm(r) <= thr) {
      true_residual(a, b, res.x, t, r);
      if (norm(r) <= thr) break;
      rhat = r;
      rho = alpha = omega = 1.0;
      std::fill(p.begin(), p.end(), 0.0);
      std::fill(v.begin(), v.end(), 0.0);
      continue;
    }
    if (omega == 0.0) {
      res.report.note = "bicgstab breakdown: omega = 0";
      break;
    }
  }
  finish(a, b, bnorm, tol, res);
  return res;
}

SolveResult gmres(const LinearOperator& a, std::span<const double> b, double tol, std::size_t max_iters,
                  std::size_t restart, std::optional<std::span<const double>> x0) {
  check_square(a, b, "gmres");
  if (restart == 0) throw ConfigError("gmres: restart must be positive");
  SolveResult res;
  if (zero_rhs(b, res, "gmres")) return res;
  const std::size_t n = b.size();
  const double bnorm = norm(b);
  const double thr = threshold(tol, bnorm);
  res.x = initial_guess(n, x0);
  const std::size_t m = std::min(restart, n);

  std::vector<std::vector<double>> basis(m + 1, std::vector<double>(n));
  std::vector<std::vector<double>> h(m + 1, std::vector<double>(m, 0.0));
  std::vector<double> cs(m), sn(m), g(m + 1), y(m), r(n), w(n);
  std::size_t& it = res.report.iterations;

  while (it < max_iters) {
    true_residual(a, b, res.x, w, r);
    const double beta = norm(r);
    if (beta <= thr) break;
    for (std::size_t i = 0; i < n; ++i) basis[0][i] = r[i] / beta;
    std::fill(g.begin(), g.end(), 0.0);
    g[0] = beta;
    std::size_t k = 0;
    bool happy = false;
    for (std::size_t j = 0; j < m && it < max_iters; ++j) {
      a.apply(basis[j], w);
      // Modified Gram-Schmidt with one reorthogonalization pass.
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t i = 0; i <= j; ++i) {
          const double hij = dot(basis[i], w);
          h[i][j] = (pass == 0 ? 0.0 : h[i][j]) + hij;
          for (std::size_t q = 0; q < n; ++q) w[q] -= hij * basis[i][q];
        }
      double hnext = norm(w);
      for (std::size_t i = 0; i < j; ++i) {
        const double t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
        h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
        h[i][j] = t;
      }
      const double denom = std::hypot(h[j][j], hnext);
      if (denom == 0.0) {
        cs[j] = 1.0;
        sn[j] = 0.0;
      } else {
        cs[j] = h[j][j] / denom;
        sn[j] = hnext / denom;
      }
      h[j][j] = cs[j] * h[j][j] + sn[j] * hnext;
      if (j + 1 < m) h[j + 1][j] = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = cs[j] * g[j];
      ++it;
      k = j + 1;
      res.report.residual_history.push_back(std::abs(g[j + 1]) / bnorm);
      if (hnext <= 1e-14 * std::abs(h[j][j]) || hnext == 0.0) {
        happy = true;
        break;
      }
      if (std::abs(g[j + 1]) <= thr) break;
      for (std::size_t q = 0; q < n; ++q) basis[j + 1][q] = w[q] / hnext;
    }
    // Back substitution on the triangular factor.
    for (std::size_t i = k; i-- > 0;) {
      double s = g[i];
      for (std::size_t q = i + 1; q < k; ++q) s -= h[i][q] * y[q];
      y[i] = h[i][i] != 0.0 ? s / h[i][i] : 0.0;
    }
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t q = 0; q < n; ++q) res.x[q] += y[i] * basis[i][q];
    if (happy) {
      true_residual(a, b, res.x, w, r);
      if (norm(r) > thr) res.report.note = "gmres: happy breakdown without reaching tolerance";
      break;
    }
  }
  finish(a, b, bnorm, tol, res);
  return res;
}

std::string to_string(KrylovMethod m) {
  switch (m) {
    case KrylovMethod::cg: return "cg";
    case KrylovMethod::bicgstab: return "bicgstab";
    case KrylovMethod::gmres: return "gmres";
  }
  return "unknown";
}

KrylovMethod parse_krylov_method(const std::string& name) {
  if (name == "cg") return KrylovMethod::cg;
  if (name == "bicgstab") return KrylovMethod::bicgstab;
  if (name == "gmres") return KrylovMethod::gmres;
  throw ConfigError("unknown krylov method '" + name + "' (expected cg, bicgstab or gmres)");
}

SolveResult solve(KrylovMethod method, const LinearOperator& a, std::span<const double> rhs, double tol,
                  std::size_t max_iters, std::optional<std::span<const double>> x0) {
  switch (method) {
    case KrylovMethod::cg: return cg(a, rhs, tol, max_iters, x0);
    case KrylovMethod::bicgstab: return bicgstab(a, rhs, tol, max_iters, x0);
    case KrylovMethod::gmres: return gmres(a, rhs, tol, max_iters, 50, x0);
  }
  throw ConfigError("unknown krylov method");
}

}  // namespace trajproj

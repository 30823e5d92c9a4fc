#include "trajproj/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "trajproj/errors.hpp"
#include "trajproj/field_core.hpp"

namespace trajproj {

void LbfgsConfig::validate() const {
  if (memory < 1) throw ConfigError("lbfgs: memory must be >= 1");
  if (!(wolfe_c1 > 0.0 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0))
    throw ConfigError("lbfgs: require 0 < c1 < c2 < 1");
  if (!(gradient_tolerance >= 0.0)) throw ConfigError("lbfgs: gradient tolerance must be non-negative");
  if (max_line_search_evals < 1) throw ConfigError("lbfgs: max-line-search-evals must be >= 1");
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::gradient_tolerance: return "gradient-tolerance";
    case Termination::max_iterations: return "max-iterations";
    case Termination::line_search_failure: return "line-search-failure";
  }
  return "unknown";
}

namespace {

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

struct Point {
  double alpha = 0.0;
  double f = 0.0;
  double slope = 0.0;
  bool finite = true;
};

// Minimizer of the cubic through two points with slopes, kept inside the
// open interval with a 10% margin. Falls back to bisection.
double interpolate(const Point& a, const Point& b) {
  const double lo = std::min(a.alpha, b.alpha);
  const double hi = std::max(a.alpha, b.alpha);
  const double margin = 0.1 * (hi - lo);
  const double mid = 0.5 * (lo + hi);
  if (!a.finite || !b.finite) return mid;
  const double d1 = a.slope + b.slope - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
  const double disc = d1 * d1 - a.slope * b.slope;
  double t = mid;
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), b.alpha - a.alpha);
    const double denom = b.slope - a.slope + 2.0 * d2;
    if (denom != 0.0) t = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / denom;
  }
  if (!std::isfinite(t)) t = mid;
  return std::clamp(t, lo + margin, hi - margin);
}

class LineSearch {
 public:
  LineSearch(const Objective& obj, const LbfgsConfig& cfg, std::span<const double> x, std::span<const double> d,
             double f0, double slope0)
      : obj_(obj), cfg_(cfg), x_(x), d_(d), f0_(f0), slope0_(slope0), trial_(x.size()), grad_(x.size()) {}

  // On success `trial()` and `grad()` hold the accepted point.
  bool run(double alpha0, LineSearchStep& step) {
    Point prev{0.0, f0_, slope0_, true};
    double alpha = alpha0;
    for (std::size_t i = 0; evals_ < cfg_.max_line_search_evals; ++i) {
      Point cur = eval(alpha);
      if (!cur.finite || cur.f > f0_ + cfg_.wolfe_c1 * alpha * slope0_ || (i > 0 && cur.f >= prev.f))
        return zoom(prev, cur, step);
      if (std::abs(cur.slope) <= -cfg_.wolfe_c2 * slope0_) return accept(cur, step);
      if (cur.slope >= 0.0) return zoom(cur, prev, step);
      prev = cur;
      alpha *= 2.0;
    }
    return false;
  }

  std::vector<double>& trial() { return trial_; }
  std::vector<double>& grad() { return grad_; }
  std::size_t evaluations() const { return evals_; }

 private:
  Point eval(double alpha) {
    for (std::size_t i = 0; i < trial_.size(); ++i) trial_[i] = x_[i] + alpha * d_[i];
    ++evals_;
    Point p;
    p.alpha = alpha;
    p.f = obj_(trial_, grad_);
    p.slope = dot(grad_, d_);
    p.finite = std::isfinite(p.f) && std::isfinite(p.slope);
    if (!p.finite) p.f = std::numeric_limits<double>::infinity();
    return p;
  }

  bool accept(const Point& p, LineSearchStep& step) {
    // `trial_`/`grad_` must describe p, which is always the last evaluation.
    step.alpha = p.alpha;
    step.f0 = f0_;
    step.f1 = p.f;
    step.slope0 = slope0_;
    step.slope1 = p.slope;
    step.evaluations = evals_;
    return true;
  }

  bool zoom(Point lo, Point hi, LineSearchStep& step) {
    while (evals_ < cfg_.max_line_search_evals) {
      const double width = std::abs(hi.alpha - lo.alpha);
      if (width <= std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(lo.alpha))) return false;
      const double alpha = interpolate(lo, hi);
      Point cur = eval(alpha);
      if (!cur.finite || cur.f > f0_ + cfg_.wolfe_c1 * alpha * slope0_ || cur.f >= lo.f) {
        hi = cur;
        continue;
      }
      if (std::abs(cur.slope) <= -cfg_.wolfe_c2 * slope0_) return accept(cur, step);
      if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
      lo = cur;
    }
    return false;
  }

  const Objective& obj_;
  const LbfgsConfig& cfg_;
  std::span<const double> x_;
  std::span<const double> d_;
  double f0_;
  double slope0_;
  std::vector<double> trial_;
  std::vector<double> grad_;
  std::size_t evals_ = 0;
};

struct Pair {
  std::vector<double> s, y;
  double rho;
};

void two_loop(const std::deque<Pair>& mem, std::span<const double> g, std::vector<double>& d) {
  d.assign(g.begin(), g.end());
  std::vector<double> a(mem.size());
  for (std::size_t i = mem.size(); i-- > 0;) {
    a[i] = mem[i].rho * dot(mem[i].s, d);
    for (std::size_t q = 0; q < d.size(); ++q) d[q] -= a[i] * mem[i].y[q];
  }
  if (!mem.empty()) {
    const auto& last = mem.back();
    const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
    for (double& v : d) v *= gamma;
  }
  for (std::size_t i = 0; i < mem.size(); ++i) {
    const double beta = mem[i].rho * dot(mem[i].y, d);
    for (std::size_t q = 0; q < d.size(); ++q) d[q] += (a[i] - beta) * mem[i].s[q];
  }
  for (double& v : d) v = -v;
}

}  // namespace

MinimizeResult minimize(const Objective& objective, std::vector<double> x0, const LbfgsConfig& cfg) {
  cfg.validate();
  MinimizeResult res;
  auto& tr = res.trace;
  std::vector<double> x = std::move(x0);
  std::vector<double> g(x.size());
  double f = objective(x, g);
  tr.evaluations = 1;
  if (!std::isfinite(f) || !std::all_of(g.begin(), g.end(), [](double v) { return std::isfinite(v); }))
    throw NumericalError("lbfgs: objective or gradient is not finite at the initial point");

  auto record = [&] {
    if (cfg.record_path) tr.iterates.push_back(x);
    tr.objective_values.push_back(f);
    tr.gradient_norms.push_back(inf_norm(g));
  };
  record();

  std::deque<Pair> mem;
  std::vector<double> d;
  tr.reason = Termination::max_iterations;
  while (true) {
    if (inf_norm(g) <= cfg.gradient_tolerance) {
      tr.reason = Termination::gradient_tolerance;
      break;
    }
    if (tr.iterations >= cfg.max_iters) break;

    bool accepted = false;
    LineSearchStep step;
    // A failed search with curvature memory is retried once along -g.
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      if (attempt == 1) {
        if (mem.empty()) break;
        mem.clear();
      }
      two_loop(mem, g, d);
      double slope = dot(g, d);
      if (!(slope < 0.0)) {
        mem.clear();
        two_loop(mem, g, d);
        slope = dot(g, d);
      }
      const double alpha0 = mem.empty() ? std::min(1.0, 1.0 / inf_norm(g)) : 1.0;
      LineSearch ls(objective, cfg, x, d, f, slope);
      accepted = ls.run(alpha0, step);
      tr.evaluations += ls.evaluations();
      if (accepted) {
        Pair p;
        p.s.resize(x.size());
        p.y.resize(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
          p.s[i] = ls.trial()[i] - x[i];
          p.y[i] = ls.grad()[i] - g[i];
        }
        const double sy = dot(p.s, p.y);
        if (sy > 1e-12 * std::sqrt(norm2(p.s) * norm2(p.y))) {
          p.rho = 1.0 / sy;
          mem.push_back(std::move(p));
          if (mem.size() > cfg.memory) mem.pop_front();
        }
        x.swap(ls.trial());
        g.swap(ls.grad());
        f = step.f1;
      }
    }
    if (!accepted) {
      tr.reason = Termination::line_search_failure;
      break;
    }
    tr.steps.push_back(step);
    ++tr.iterations;
    record();
  }
  res.x = std::move(x);
  return res;
}

}  // namespace trajproj

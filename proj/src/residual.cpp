#include <algorithm>

#include "trajproj/errors.hpp"
#include "trajproj/systems.hpp"

namespace trajproj {

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::euler: return "euler";
    case Scheme::bdf1: return "bdf1";
    case Scheme::heun: return "heun";
  }
  return "unknown";
}

Scheme parse_scheme(const std::string& name) {
  if (name == "euler") return Scheme::euler;
  if (name == "bdf1") return Scheme::bdf1;
  if (name == "heun") return Scheme::heun;
  throw ConfigError("unknown scheme '" + name + "' (expected euler, bdf1 or heun)");
}

Scheme default_scheme(SystemKind kind) {
  switch (kind) {
    case SystemKind::lorenz: return Scheme::euler;
    case SystemKind::ks: return Scheme::bdf1;
    case SystemKind::ns: return Scheme::heun;
  }
  return Scheme::euler;
}

std::size_t default_micro_steps(SystemKind kind) { return kind == SystemKind::ns ? 16 : 1; }

ConstraintSpec ConstraintSpec::from_ground_truth(const Trajectory& u_gt, Scheme scheme, std::size_t micro_steps) {
  ConstraintSpec spec;
  auto f0 = u_gt.frame(0);
  spec.initial_state.assign(f0.begin(), f0.end());
  spec.scheme = scheme;
  spec.micro_steps = micro_steps;
  return spec;
}

void ConstraintSpec::validate(const GridSpec& grid) const {
  if (initial_state.size() != grid.frame_size())
    throw ShapeError("constraint: initial state has " + std::to_string(initial_state.size()) +
                     " values, frame size is " + std::to_string(grid.frame_size()));
  if (micro_steps < 1) throw ConfigError("constraint: micro-steps must be >= 1");
  if (scheme == Scheme::bdf1 && micro_steps != 1) throw ConfigError("constraint: bdf1 requires micro-steps = 1");
  if (scheme != Scheme::euler && scheme != Scheme::bdf1 && scheme != Scheme::heun)
    throw ConfigError("constraint: unknown scheme tag");
}

ResidualVector::ResidualVector(GridSpec g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
  if (values.size() != grid.size()) throw ShapeError("residual vector: length does not match grid");
}

std::span<double> ResidualVector::initial_block() {
  return std::span<double>(values).subspan(0, grid.frame_size());
}
std::span<const double> ResidualVector::initial_block() const {
  return std::span<const double>(values).subspan(0, grid.frame_size());
}
std::span<double> ResidualVector::step_block(std::size_t t) {
  const auto fs = grid.frame_size();
  return std::span<double>(values).subspan((t + 1) * fs, fs);
}
std::span<const double> ResidualVector::step_block(std::size_t t) const {
  const auto fs = grid.frame_size();
  return std::span<const double>(values).subspan((t + 1) * fs, fs);
}

// ---------------------------------------------------------------------------
// Scheme maps

void explicit_step(Scheme scheme, Dynamics& f, std::span<const double> x, double dt, std::span<double> out) {
  const std::size_t n = x.size();
  std::vector<double> k1(n);
  f.rhs(x, k1);
  if (scheme == Scheme::euler) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + dt * k1[i];
    return;
  }
  if (scheme != Scheme::heun) throw ConfigError("explicit_step: scheme must be euler or heun");
  std::vector<double> xs(n), k2(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = x[i] + dt * k1[i];
  f.rhs(xs, k2);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + 0.5 * dt * (k1[i] + k2[i]);
}

void step_map(Scheme scheme, Dynamics& f, std::span<const double> x, double dt, std::size_t m,
              std::span<double> out) {
  std::vector<double> cur(x.begin(), x.end());
  for (std::size_t i = 0; i < m; ++i) {
    explicit_step(scheme, f, cur, dt, out);
    if (i + 1 < m) std::copy(out.begin(), out.end(), cur.begin());
  }
}

// ---------------------------------------------------------------------------

Constraint::Constraint(GridSpec grid, ConstraintSpec spec, std::unique_ptr<Dynamics> dynamics)
    : grid_(std::move(grid)), spec_(std::move(spec)), dyn_(std::move(dynamics)) {
  grid_.validate();
  spec_.validate(grid_);
  if (!dyn_ || dyn_->state_size() != grid_.frame_size())
    throw ShapeError("constraint: dynamics state size does not match the grid frame size");
  const auto fs = grid_.frame_size();
  t0_.resize(fs);
  t1_.resize(fs);
  t2_.resize(fs);
  t3_.resize(fs);
}

Constraint::Constraint(GridSpec grid, ConstraintSpec spec, const SystemParams& params)
    : Constraint(grid, std::move(spec), make_dynamics(grid, params)) {}

Constraint::Constraint(const Constraint& other)
    : Constraint(other.grid_, other.spec_, other.dyn_->clone()) {}

void Constraint::check(std::span<const double> a, const char* what) const {
  if (a.size() != grid_.size())
    throw ShapeError(std::string("constraint ") + what + ": expected " + std::to_string(grid_.size()) +
                     " values, got " + std::to_string(a.size()));
}

void Constraint::residual(std::span<const double> u, std::span<double> r) {
  check(u, "residual input");
  check(r, "residual output");
  const auto fs = grid_.frame_size();
  for (std::size_t i = 0; i < fs; ++i) r[i] = u[i] - spec_.initial_state[i];
  const double dt = micro_dt();
  for (std::size_t t = 0; t + 1 < grid_.num_steps; ++t) {
    auto ut = u.subspan(t * fs, fs);
    auto un = u.subspan((t + 1) * fs, fs);
    auto rb = r.subspan((t + 1) * fs, fs);
    if (spec_.scheme == Scheme::bdf1) {
      dyn_->rhs(un, t0_);
      for (std::size_t i = 0; i < fs; ++i) rb[i] = (un[i] - ut[i]) / dt - t0_[i];
    } else {
      step_map(spec_.scheme, *dyn_, ut, dt, spec_.micro_steps, t0_);
      for (std::size_t i = 0; i < fs; ++i) rb[i] = un[i] - t0_[i];
    }
  }
}

void Constraint::jvp(std::span<const double> u, std::span<const double> v, std::span<double> out) {
  check(u, "jvp point");
  check(v, "jvp direction");
  check(out, "jvp output");
  const auto fs = grid_.frame_size();
  std::copy(v.begin(), v.begin() + fs, out.begin());
  const double dt = micro_dt();
  const std::size_t m = spec_.micro_steps;
  std::vector<double> s(fs), d(fs), xs(fs), ds(fs), k1(fs), k2(fs);
  for (std::size_t t = 0; t + 1 < grid_.num_steps; ++t) {
    auto ut = u.subspan(t * fs, fs);
    auto un = u.subspan((t + 1) * fs, fs);
    auto vt = v.subspan(t * fs, fs);
    auto vn = v.subspan((t + 1) * fs, fs);
    auto ob = out.subspan((t + 1) * fs, fs);
    if (spec_.scheme == Scheme::bdf1) {
      dyn_->rhs_jvp(un, vn, t0_);
      for (std::size_t i = 0; i < fs; ++i) ob[i] = (vn[i] - vt[i]) / dt - t0_[i];
      continue;
    }
    std::copy(ut.begin(), ut.end(), s.begin());
    std::copy(vt.begin(), vt.end(), d.begin());
    for (std::size_t step = 0; step < m; ++step) {
      const bool advance = step + 1 < m;
      if (spec_.scheme == Scheme::euler) {
        dyn_->rhs_jvp(s, d, t1_);
        if (advance) {
          dyn_->rhs(s, k1);
          for (std::size_t i = 0; i < fs; ++i) s[i] += dt * k1[i];
        }
        for (std::size_t i = 0; i < fs; ++i) d[i] += dt * t1_[i];
      } else {
        dyn_->rhs(s, k1);
        for (std::size_t i = 0; i < fs; ++i) xs[i] = s[i] + dt * k1[i];
        dyn_->rhs_jvp(s, d, t1_);
        for (std::size_t i = 0; i < fs; ++i) ds[i] = d[i] + dt * t1_[i];
        dyn_->rhs_jvp(xs, ds, t2_);
        for (std::size_t i = 0; i < fs; ++i) d[i] += 0.5 * dt * (t1_[i] + t2_[i]);
        if (advance) {
          dyn_->rhs(xs, k2);
          for (std::size_t i = 0; i < fs; ++i) s[i] += 0.5 * dt * (k1[i] + k2[i]);
        }
      }
    }
    for (std::size_t i = 0; i < fs; ++i) ob[i] = vn[i] - d[i];
  }
}

void Constraint::vjp(std::span<const double> u, std::span<const double> w, std::span<double> out) {
  check(u, "vjp point");
  check(w, "vjp cotangent");
  check(out, "vjp output");
  const auto fs = grid_.frame_size();
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < fs; ++i) out[i] = w[i];
  const double dt = micro_dt();
  const std::size_t m = spec_.micro_steps;
  // Heun keeps (state, predictor) per micro-step; Euler only the state.
  const std::size_t per_step = spec_.scheme == Scheme::heun ? 2 : 1;
  if (spec_.scheme != Scheme::bdf1 && chain_.size() != m * per_step)
    chain_.assign(m * per_step, std::vector<double>(fs));
  std::vector<double> lam(fs), a(fs), k1(fs), k2(fs);
  for (std::size_t t = 0; t + 1 < grid_.num_steps; ++t) {
    auto ut = u.subspan(t * fs, fs);
    auto un = u.subspan((t + 1) * fs, fs);
    auto wb = w.subspan((t + 1) * fs, fs);
    auto ot = out.subspan(t * fs, fs);
    auto on = out.subspan((t + 1) * fs, fs);
    if (spec_.scheme == Scheme::bdf1) {
      dyn_->rhs_vjp(un, wb, t0_);
      for (std::size_t i = 0; i < fs; ++i) {
        on[i] += wb[i] / dt - t0_[i];
        ot[i] -= wb[i] / dt;
      }
      continue;
    }
    for (std::size_t i = 0; i < fs; ++i) on[i] += wb[i];

    // Forward sweep through the micro-steps recording the chain.
    std::copy(ut.begin(), ut.end(), chain_[0].begin());
    for (std::size_t step = 0; step < m; ++step) {
      auto& s = chain_[step * per_step];
      const bool advance = step + 1 < m;
      if (spec_.scheme == Scheme::euler) {
        if (advance) {
          dyn_->rhs(s, k1);
          auto& next = chain_[(step + 1) * per_step];
          for (std::size_t i = 0; i < fs; ++i) next[i] = s[i] + dt * k1[i];
        }
      } else {
        auto& xs = chain_[step * per_step + 1];
        dyn_->rhs(s, k1);
        for (std::size_t i = 0; i < fs; ++i) xs[i] = s[i] + dt * k1[i];
        if (advance) {
          dyn_->rhs(xs, k2);
          auto& next = chain_[(step + 1) * per_step];
          for (std::size_t i = 0; i < fs; ++i) next[i] = s[i] + 0.5 * dt * (k1[i] + k2[i]);
        }
      }
    }

    // Reverse sweep.
    std::copy(wb.begin(), wb.end(), lam.begin());
    for (std::size_t step = m; step-- > 0;) {
      const auto& s = chain_[step * per_step];
      if (spec_.scheme == Scheme::euler) {
        dyn_->rhs_vjp(s, lam, t1_);
        for (std::size_t i = 0; i < fs; ++i) lam[i] += dt * t1_[i];
      } else {
        const auto& xs = chain_[step * per_step + 1];
        dyn_->rhs_vjp(xs, lam, t1_);
        for (std::size_t i = 0; i < fs; ++i) {
          a[i] = 0.5 * dt * t1_[i];
          t2_[i] = 0.5 * dt * lam[i] + dt * a[i];
        }
        dyn_->rhs_vjp(s, t2_, t3_);
        for (std::size_t i = 0; i < fs; ++i) lam[i] += a[i] + t3_[i];
      }
    }
    for (std::size_t i = 0; i < fs; ++i) ot[i] -= lam[i];
  }
}

ResidualVector Constraint::residual(const Trajectory& u) {
  require_same_grid(u.grid, grid_, "residual");
  ResidualVector r(grid_);
  residual(std::span<const double>(u.values), std::span<double>(r.values));
  return r;
}

ResidualVector Constraint::jvp(const Trajectory& u, const Trajectory& v) {
  require_same_grid(u.grid, grid_, "residual_jvp");
  require_same_grid(v.grid, grid_, "residual_jvp");
  ResidualVector r(grid_);
  jvp(std::span<const double>(u.values), std::span<const double>(v.values), std::span<double>(r.values));
  return r;
}

Trajectory Constraint::vjp(const Trajectory& u, const ResidualVector& w) {
  require_same_grid(u.grid, grid_, "residual_vjp");
  require_same_grid(w.grid, grid_, "residual_vjp");
  Trajectory g(grid_);
  vjp(std::span<const double>(u.values), std::span<const double>(w.values), std::span<double>(g.values));
  return g;
}

ResidualVector residual(const Trajectory& u, const ConstraintSpec& spec, const SystemParams& params) {
  Constraint c(u.grid, spec, params);
  return c.residual(u);
}

ResidualVector residual_jvp(const Trajectory& u, const Trajectory& v, const ConstraintSpec& spec,
                            const SystemParams& params) {
  Constraint c(u.grid, spec, params);
  return c.jvp(u, v);
}

Trajectory residual_vjp(const Trajectory& u, const ResidualVector& w, const ConstraintSpec& spec,
                        const SystemParams& params) {
  Constraint c(u.grid, spec, params);
  return c.vjp(u, w);
}

}  // namespace trajproj

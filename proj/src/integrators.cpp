#include "trajproj/integrators.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "trajproj/errors.hpp"
#include "trajproj/krylov.hpp"

namespace trajproj {

namespace {

bool finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

Trajectory explicit_integrate(Scheme scheme, Dynamics& f, const GridSpec& grid, std::span<const double> u0,
                              std::size_t micro_steps) {
  grid.validate();
  if (scheme == Scheme::bdf1) throw ConfigError("explicit_integrate: scheme must be euler or heun");
  if (micro_steps < 1) throw ConfigError("explicit_integrate: micro-steps must be >= 1");
  if (u0.size() != grid.frame_size()) throw ShapeError("explicit_integrate: initial state size mismatch");
  Trajectory out(grid);
  std::copy(u0.begin(), u0.end(), out.frame(0).begin());
  const double dt = grid.dt / static_cast<double>(micro_steps);
  for (std::size_t t = 0; t + 1 < grid.num_steps; ++t) {
    step_map(scheme, f, out.frame(t), dt, micro_steps, out.frame(t + 1));
    if (!finite(out.frame(t + 1))) throw DivergenceError(t + 1, "non-finite state");
  }
  return out;
}

Trajectory euler_integrate(const std::array<double, 3>& u0, const LorenzParams& p, double dt, std::size_t steps) {
  if (!(dt > 0.0)) throw ConfigError("euler_integrate: dt must be positive");
  LorenzDynamics f(p);
  return explicit_integrate(Scheme::euler, f, GridSpec::lorenz(dt, steps), u0, 1);
}

Trajectory bdf1_integrate(Dynamics& f, const GridSpec& grid, std::span<const double> u0, const NewtonConfig& newton) {
  grid.validate();
  if (!(newton.abs_tolerance > 0.0)) throw ConfigError("newton: tolerance must be positive");
  if (u0.size() != grid.frame_size()) throw ShapeError("bdf1_integrate: initial state size mismatch");
  const std::size_t n = grid.frame_size();
  const double dt = grid.dt;
  Trajectory out(grid);
  std::copy(u0.begin(), u0.end(), out.frame(0).begin());

  std::vector<double> x(n), fx(n), g(n), rhs(n), tmp(n);
  LinearOperator jac;
  jac.in_dim = jac.out_dim = n;
  jac.apply = [&](std::span<const double> v, std::span<double> y) {
    f.rhs_jvp(x, v, tmp);
    for (std::size_t i = 0; i < n; ++i) y[i] = v[i] / dt - tmp[i];
  };

  for (std::size_t t = 0; t + 1 < grid.num_steps; ++t) {
    auto ut = out.frame(t);
    std::copy(ut.begin(), ut.end(), x.begin());
    double gnorm = 0.0;
    bool done = false;
    for (std::size_t it = 0; it <= newton.max_iters; ++it) {
      // Same arithmetic as the bdf1 residual block.
      f.rhs(x, fx);
      for (std::size_t i = 0; i < n; ++i) g[i] = (x[i] - ut[i]) / dt - fx[i];
      gnorm = std::sqrt(norm2(g));
      if (!std::isfinite(gnorm)) throw DivergenceError(t + 1, "non-finite newton residual");
      if (gnorm <= newton.abs_tolerance) {
        done = true;
        break;
      }
      if (it == newton.max_iters) break;
      for (std::size_t i = 0; i < n; ++i) rhs[i] = -g[i];
      const double rel = std::max(0.01 * newton.abs_tolerance / gnorm, 1e-13);
      auto sol = gmres(jac, rhs, rel, 20 * n, newton.gmres_restart);
      for (std::size_t i = 0; i < n; ++i) x[i] += sol.x[i];
    }
    if (!done) throw ConvergenceError(t + 1, gnorm);
    std::copy(x.begin(), x.end(), out.frame(t + 1).begin());
  }
  return out;
}

Trajectory bdf1_integrate(std::span<const double> u0, const KSParams& p, double dt, std::size_t steps,
                          const NewtonConfig& newton) {
  KSDynamics f(u0.size(), p);
  return bdf1_integrate(f, GridSpec::ks(u0.size(), dt, steps, p.domain_length), u0, newton);
}

Trajectory heun_integrate(std::span<const double> w0, std::size_t nx, std::size_t ny, const NSParams& p, double dt,
                          std::size_t micro_steps, std::size_t record_every) {
  if (record_every == 0 || micro_steps % record_every != 0)
    throw ConfigError("heun_integrate: record-every must divide micro-steps");
  if (!(dt > 0.0)) throw ConfigError("heun_integrate: dt must be positive");
  NSDynamics f(nx, ny, p);
  const auto grid = GridSpec::ns(nx, ny, dt * static_cast<double>(record_every), micro_steps / record_every);
  return explicit_integrate(Scheme::heun, f, grid, w0, record_every);
}

// ---------------------------------------------------------------------------
// Initial conditions

std::array<double, 3> sample_lorenz_ic(std::uint64_t seed, double stddev) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  std::array<double, 3> x{};
  for (auto& v : x) v = normal(rng);
  return x;
}

std::vector<CosineMode> sample_ks_modes(const KSInitSpec& spec) {
  if (spec.num_modes < 1) throw ConfigError("ks init: num-modes must be >= 1");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> amp(spec.amplitude_min, spec.amplitude_max);
  std::uniform_real_distribution<double> freq(spec.frequency_min, spec.frequency_max);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::vector<CosineMode> modes(static_cast<std::size_t>(spec.num_modes));
  for (auto& m : modes) {
    m.amplitude = amp(rng);
    m.frequency = freq(rng);
    m.phase = phase(rng);
  }
  return modes;
}

std::vector<double> ks_cosine_sum(const std::vector<CosineMode>& modes, std::size_t nx, double length) {
  std::vector<double> u(nx, 0.0);
  for (std::size_t j = 0; j < nx; ++j) {
    const double x = length * static_cast<double>(j) / static_cast<double>(nx);
    for (const auto& m : modes) u[j] += m.amplitude * std::cos(2.0 * std::numbers::pi * m.frequency * x / length + m.phase);
  }
  return u;
}

std::vector<double> sample_ks_ic(const KSInitSpec& spec, const GridSpec& grid) {
  if (grid.resolution.size() != 1) throw ShapeError("sample_ks_ic: grid must be 1-D");
  return ks_cosine_sum(sample_ks_modes(spec), grid.resolution[0], grid.length[0]);
}

double GrfSpec::effective_amplitude() const { return amplitude > 0.0 ? amplitude : std::pow(tau, alpha - 1.0); }

std::vector<double> sample_ns_ic(const GrfSpec& spec, const GridSpec& grid) {
  if (grid.resolution.size() != 2) throw ShapeError("sample_ns_ic: grid must be 2-D");
  if (!(spec.alpha > 1.0)) throw ConfigError("grf: alpha must be > 1");
  if (!(spec.tau > 0.0)) throw ConfigError("grf: tau must be positive");
  const std::size_t s = spec.sample_resolution;
  if (s < 2 || s % 2 != 0) throw ConfigError("grf: sample resolution must be even and >= 2");
  const std::size_t half = s / 2 + 1;
  const double amp = spec.effective_amplitude();
  const double two_pi = 2.0 * std::numbers::pi;

  // Coefficients c_k of w(x) = sum c_k exp(i k.x) on the sample grid.
  std::vector<Complex> c(s * half);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto mode = [s](std::size_t i) { return 2 * i < s ? static_cast<long>(i) : static_cast<long>(i) - static_cast<long>(s); };
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < half; ++j) {
      const double re = normal(rng);
      const double im = normal(rng);
      const double kx = two_pi / grid.length[0] * static_cast<double>(mode(i));
      const double ky = two_pi / grid.length[1] * static_cast<double>(j);
      const double scale = amp * std::pow(kx * kx + ky * ky + spec.tau * spec.tau, -0.5 * spec.alpha);
      c[i * half + j] = scale * Complex(re, im) / std::numbers::sqrt2;
    }
  // Hermitian symmetry on the self-conjugate columns; mean removed.
  for (std::size_t j : {std::size_t{0}, s / 2}) {
    for (std::size_t i = s / 2 + 1; i < s; ++i) c[i * half + j] = std::conj(c[(s - i) * half + j]);
    c[0 * half + j] = c[0 * half + j].real();
    c[(s / 2) * half + j] = c[(s / 2) * half + j].real();
  }
  c[0] = 0.0;

  // Truncate (or pad) onto the target grid, dropping Nyquist modes.
  SpectralWorkspace ws(grid.resolution, grid.length, false);
  const std::size_t nx = grid.resolution[0], ny = grid.resolution[1];
  const std::size_t thalf = ny / 2 + 1;
  const double ntot = static_cast<double>(nx * ny);
  std::vector<Complex> spec_out(ws.spectral_size(), Complex(0.0));
  const long lim_x = static_cast<long>(std::min(s, nx));
  const long lim_y = static_cast<long>(std::min(s, ny));
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < thalf; ++j) {
      const long mx = 2 * i < nx ? static_cast<long>(i) : static_cast<long>(i) - static_cast<long>(nx);
      const long my = static_cast<long>(j);
      if (2 * std::labs(mx) >= lim_x || 2 * my >= lim_y) continue;
      const std::size_t si = static_cast<std::size_t>(mx >= 0 ? mx : mx + static_cast<long>(s));
      spec_out[i * thalf + j] = ntot * c[si * half + static_cast<std::size_t>(my)];
    }
  std::vector<double> w(nx * ny);
  ws.inverse(spec_out, w);
  return w;
}

// ---------------------------------------------------------------------------

SystemConfig SystemConfig::defaults(SystemKind kind) {
  SystemConfig c;
  c.scheme = default_scheme(kind);
  c.micro_steps = default_micro_steps(kind);
  switch (kind) {
    case SystemKind::lorenz: c.grid = GridSpec::lorenz(1.0 / 512.0, 512); break;
    case SystemKind::ks:
      c.grid = GridSpec::ks(64, 0.1, 256);
      c.window_start = 256;
      break;
    case SystemKind::ns: c.grid = GridSpec::ns(64, 64, 16 * 2e-3, 256); break;
  }
  return c;
}

void SystemConfig::validate() const {
  grid.validate();
  if (micro_steps < 1) throw ConfigError("system: micro-steps must be >= 1");
  if (scheme == Scheme::bdf1 && micro_steps != 1) throw ConfigError("system: bdf1 requires micro-steps = 1");
  if (!(newton.abs_tolerance > 0.0)) throw ConfigError("system: newton tolerance must be positive");
  if (!(lorenz_ic_std >= 0.0)) throw ConfigError("system: lorenz initial std must be non-negative");
  if (!(params.ns.reynolds > 0.0)) throw ConfigError("system: reynolds number must be positive");
  if (!(grf.alpha > 1.0)) throw ConfigError("system: grf alpha must be > 1");
  if (ks_init.num_modes < 1) throw ConfigError("system: ks num-modes must be >= 1");
}

GridSpec SystemConfig::run_grid() const { return grid.with_steps(grid.num_steps + window_start); }

Trajectory generate_trajectory(const SystemConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const GridSpec run = cfg.run_grid();
  auto dyn = make_dynamics(run, cfg.params);
  std::vector<double> u0;
  switch (cfg.grid.system) {
    case SystemKind::lorenz: {
      const auto x = sample_lorenz_ic(seed, cfg.lorenz_ic_std);
      u0.assign(x.begin(), x.end());
      break;
    }
    case SystemKind::ks: {
      KSInitSpec spec = cfg.ks_init;
      spec.seed = seed;
      u0 = sample_ks_ic(spec, run);
      break;
    }
    case SystemKind::ns: {
      GrfSpec spec = cfg.grf;
      spec.seed = seed;
      u0 = sample_ns_ic(spec, run);
      break;
    }
  }
  Trajectory full = cfg.scheme == Scheme::bdf1 ? bdf1_integrate(*dyn, run, u0, cfg.newton)
                                               : explicit_integrate(cfg.scheme, *dyn, run, u0, cfg.micro_steps);
  if (cfg.window_start == 0) return full;
  const auto fs = cfg.grid.frame_size();
  std::vector<double> v(full.values.begin() + static_cast<std::ptrdiff_t>(cfg.window_start * fs), full.values.end());
  return Trajectory(cfg.grid, std::move(v));
}

Constraint make_constraint(const SystemConfig& cfg, const Trajectory& u_gt) {
  return Constraint(u_gt.grid, ConstraintSpec::from_ground_truth(u_gt, cfg.scheme, cfg.micro_steps), cfg.params);
}

}  // namespace trajproj

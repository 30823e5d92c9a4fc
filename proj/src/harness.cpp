#include "trajproj/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "trajproj/config.hpp"
#include "trajproj/errors.hpp"
#include "trajproj/io.hpp"

namespace trajproj {

std::string to_string(DegradeKind k) {
  switch (k) {
    case DegradeKind::spectral_truncate: return "spectral-truncate";
    case DegradeKind::gaussian_noise: return "gaussian-noise";
    case DegradeKind::coarse_time: return "coarse-time";
    case DegradeKind::blend: return "blend";
  }
  return "unknown";
}

DegradeKind parse_degrade_kind(const std::string& name) {
  if (name == "spectral-truncate") return DegradeKind::spectral_truncate;
  if (name == "gaussian-noise") return DegradeKind::gaussian_noise;
  if (name == "coarse-time") return DegradeKind::coarse_time;
  if (name == "blend") return DegradeKind::blend;
  throw ConfigError("unknown degradation kind '" + name +
                    "' (expected spectral-truncate, gaussian-noise, coarse-time or blend)");
}

void DegradeSpec::validate() const {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
    throw ConfigError("degrade: keep-fraction must lie in (0, 1], got " + std::to_string(keep_fraction));
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
    throw ConfigError("degrade: noise-sigma must be a finite value >= 0");
  if (coarse_factor < 1) throw ConfigError("degrade: coarse-factor must be >= 1");
  if (!(blend_weight >= 0.0 && blend_weight <= 1.0)) throw ConfigError("degrade: blend-weight must lie in [0, 1]");
}

Trajectory spectral_truncate(const Trajectory& u, double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) throw ConfigError("spectral-truncate: keep-fraction must lie in (0, 1]");
  if (!u.grid.periodic || u.grid.resolution.empty())
    throw UnsupportedOperation("spectral-truncate needs a periodic spatial grid");
  if (keep_fraction == 1.0) return u;
  SpectralWorkspace ws(u.grid, false);
  std::vector<char> drop(ws.spectral_size(), 0);
  for (std::size_t a = 0; a < ws.rank(); ++a) {
    const double cutoff = keep_fraction * static_cast<double>(u.grid.resolution[a]) / 2.0;
    const auto& m = ws.mode_index(a);
    for (std::size_t s = 0; s < drop.size(); ++s)
      if (static_cast<double>(std::abs(m[s])) > cutoff) drop[s] = 1;
  }
  Trajectory out = u;
  std::vector<Complex> spec(ws.spectral_size());
  for (std::size_t t = 0; t < u.grid.num_steps; ++t) {
    ws.forward(u.frame(t), spec);
    for (std::size_t s = 0; s < spec.size(); ++s)
      if (drop[s]) spec[s] = 0.0;
    ws.inverse(spec, out.frame(t));
  }
  return out;
}

namespace {

Trajectory coarse_time(const Trajectory& u_gt, std::size_t factor, const SystemConfig& sys) {
  if (factor == 1) return u_gt;
  const GridSpec& g = u_gt.grid;
  const std::size_t intervals = g.num_steps - 1;
  const std::size_t coarse_intervals = (intervals + factor - 1) / factor;
  GridSpec cg = g.with_steps(coarse_intervals + 1);
  cg.dt = g.dt * static_cast<double>(factor);
  auto dyn = make_dynamics(cg, sys.params);
  const auto u0 = u_gt.frame(0);
  Trajectory coarse = sys.scheme == Scheme::bdf1 ? bdf1_integrate(*dyn, cg, u0, sys.newton)
                                                 : explicit_integrate(sys.scheme, *dyn, cg, u0, sys.micro_steps);
  Trajectory out(g);
  for (std::size_t k = 0; k < g.num_steps; ++k) {
    const std::size_t i = k / factor;
    const double w = static_cast<double>(k % factor) / static_cast<double>(factor);
    auto dst = out.frame(k);
    const auto a = coarse.frame(i);
    if (w == 0.0) {
      std::copy(a.begin(), a.end(), dst.begin());
      continue;
    }
    const auto b = coarse.frame(i + 1);
    for (std::size_t q = 0; q < dst.size(); ++q) dst[q] = (1.0 - w) * a[q] + w * b[q];
  }
  return out;
}

// Neumaier-compensated sum of squares.
double sum_squares(std::span<const double> v) {
  double s = 0.0, c = 0.0;
  for (double x : v) {
    const double y = x * x;
    const double t = s + y;
    c += std::abs(s) >= y ? (s - t) + y : (y - t) + s;
    s = t;
  }
  return s + c;
}

}  // namespace

Trajectory degrade(const Trajectory& u_gt, const DegradeSpec& spec, const SystemConfig& system) {
  spec.validate();
  u_gt.validate();
  Trajectory out;
  switch (spec.kind) {
    case DegradeKind::spectral_truncate: out = spectral_truncate(u_gt, spec.keep_fraction); break;
    case DegradeKind::gaussian_noise: {
      out = u_gt;
      if (spec.noise_sigma == 0.0) break;
      std::mt19937_64 rng(spec.seed);
      std::normal_distribution<double> noise(0.0, spec.noise_sigma);
      const std::size_t fs = u_gt.grid.frame_size();
      for (std::size_t i = fs; i < out.values.size(); ++i) out.values[i] += noise(rng);
      break;
    }
    case DegradeKind::coarse_time: out = coarse_time(u_gt, spec.coarse_factor, system); break;
    case DegradeKind::blend: {
      out = u_gt;
      if (spec.blend_weight == 0.0) break;
      const Trajectory other = generate_trajectory(system, spec.seed);
      require_same_grid(u_gt.grid, other.grid, "blend");
      const double w = spec.blend_weight;
      for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = (1.0 - w) * u_gt.values[i] + w * other.values[i];
      break;
    }
  }
  const auto f0 = u_gt.frame(0);
  std::copy(f0.begin(), f0.end(), out.frame(0).begin());
  return out;
}

double mean_squared_error(std::span<const double> u, std::span<const double> u_gt) {
  if (u.size() != u_gt.size()) throw ShapeError("mse: size mismatch");
  if (u.empty()) return 0.0;
  double s = 0.0, c = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - u_gt[i];
    const double y = d * d;
    const double t = s + y;
    c += std::abs(s) >= y ? (s - t) + y : (y - t) + s;
    s = t;
  }
  return (s + c) / static_cast<double>(u.size());
}

MetricsRow evaluate(const Trajectory& u, const Trajectory& u_gt, Constraint& h) {
  require_same_grid(u.grid, u_gt.grid, "evaluate");
  require_same_grid(u.grid, h.grid(), "evaluate");
  MetricsRow row;
  row.resolution = u.grid.resolution.empty() ? 0 : u.grid.resolution[0];
  row.mse = mean_squared_error(u.values, u_gt.values);
  row.residual = sum_squares(h.residual(u).values);
  return row;
}

MetricsRow evaluate(const Trajectory& u, const Trajectory& u_gt, const ConstraintSpec& spec,
                    const SystemParams& params) {
  require_same_grid(u.grid, u_gt.grid, "evaluate");
  Constraint h(u.grid, spec, params);
  return evaluate(u, u_gt, h);
}

std::string to_string(SecondOrderMode m) { return m == SecondOrderMode::gauss_newton ? "gauss-newton" : "secant-fd"; }

SecondOrderMode parse_second_order_mode(const std::string& name) {
  if (name == "gauss-newton") return SecondOrderMode::gauss_newton;
  if (name == "secant-fd") return SecondOrderMode::secant_fd;
  throw ConfigError("unknown second-order mode '" + name + "' (expected gauss-newton or secant-fd)");
}

LandscapeCurve taylor_landscape(const OptimTrace& trace, Constraint& h, SecondOrderMode mode) {
  if (trace.iterates.empty()) throw ConfigError("landscape: the trace has no recorded iterates (enable record-path)");
  const std::size_t n = h.size();
  for (const auto& it : trace.iterates)
    if (it.size() != n) throw ShapeError("landscape: iterate size does not match the constraint");

  const auto& u0 = trace.iterates.front();
  std::vector<double> r0(n), r(n), jd(n), delta(n), probe(n);
  h.residual(u0, r0);
  const double v0 = sum_squares(r0);
  auto violation = [&](std::span<const double> u) {
    h.residual(u, r);
    return sum_squares(r);
  };
  constexpr double eps = 1e-3;

  LandscapeCurve c;
  double d = 0.0;
  for (std::size_t k = 0; k < trace.iterates.size(); ++k) {
    const auto& uk = trace.iterates[k];
    if (k > 0) {
      const auto& prev = trace.iterates[k - 1];
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += (uk[i] - prev[i]) * (uk[i] - prev[i]);
      d += std::sqrt(s);
    }
    for (std::size_t i = 0; i < n; ++i) delta[i] = uk[i] - u0[i];
    h.jvp(u0, delta, jd);
    const double lin = v0 + 2.0 * dot(r0, jd);
    double quad = lin;
    if (mode == SecondOrderMode::gauss_newton) {
      quad += sum_squares(jd);
    } else {
      for (std::size_t i = 0; i < n; ++i) probe[i] = u0[i] + eps * delta[i];
      const double vp = violation(probe);
      for (std::size_t i = 0; i < n; ++i) probe[i] = u0[i] - eps * delta[i];
      const double vm = violation(probe);
      quad += 0.5 * (vp - 2.0 * v0 + vm) / (eps * eps);
    }
    c.d.push_back(d);
    c.v_true.push_back(k == 0 ? v0 : violation(uk));
    c.v_linear.push_back(lin);
    c.v_quadratic.push_back(quad);
  }
  return c;
}

void write_landscape_csv(std::ostream& out, const LandscapeCurve& curve) {
  out << "k,d,v_true,v_linear,v_quadratic\n" << std::setprecision(17);
  for (std::size_t k = 0; k < curve.size(); ++k)
    out << k << ',' << curve.d[k] << ',' << curve.v_true[k] << ',' << curve.v_linear[k] << ','
        << curve.v_quadratic[k] << '\n';
}

void write_landscape_csv(const std::filesystem::path& path, const LandscapeCurve& curve) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_landscape_csv(out, curve);
}

void ExperimentConfig::validate() const {
  system.validate();
  degrade.validate();
  if (seeds.empty()) throw ConfigError("experiment: at least one seed is required");
  for (const auto& m : methods) {
    if (m.name.empty() || m.name == "baseline") throw ConfigError("experiment: method names must be non-empty and not 'baseline'");
    m.config.validate();
  }
  for (std::size_t i = 0; i < methods.size(); ++i)
    for (std::size_t j = i + 1; j < methods.size(); ++j)
      if (methods[i].name == methods[j].name) throw ConfigError("experiment: duplicate method name '" + methods[i].name + "'");
  if (!resolutions.empty() && system.grid.system == SystemKind::lorenz)
    throw ConfigError("experiment: resolutions apply to spatial systems only");
  if (system.grid.system != SystemKind::lorenz) {
    const std::size_t base = system.grid.resolution[0];
    for (auto r : resolutions)
      if (r < base) throw ConfigError("experiment: evaluation resolution " + std::to_string(r) + " is below the generation resolution");
  }
  if (threads < 1) throw ConfigError("experiment: threads must be >= 1");
}

const AggregateRow* ExperimentReport::find(const std::string& method, std::size_t resolution) const {
  for (const auto& r : table)
    if (r.method == method && r.resolution == resolution) return &r;
  return nullptr;
}

std::uint64_t degrade_seed(std::uint64_t base, std::uint64_t trajectory_seed) {
  // splitmix64 finalizer over the pair
  std::uint64_t z = base * 0x9E3779B97F4A7C15ULL + trajectory_seed + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

EvaluationCase make_case(const ExperimentConfig& cfg, const Trajectory& u_gt_base, const Trajectory& u_hat_base,
                         std::size_t resolution) {
  EvaluationCase c;
  const GridSpec& g = u_gt_base.grid;
  if (g.resolution.empty() || resolution == g.resolution[0]) {
    c.u_gt = u_gt_base;
    c.u_hat = u_hat_base;
  } else {
    const std::vector<std::size_t> res(g.resolution.size(), resolution);
    c.u_gt = resample_trajectory(u_gt_base, res);
    c.u_hat = resample_trajectory(u_hat_base, res);
  }
  c.spec = ConstraintSpec::from_ground_truth(c.u_gt, cfg.system.scheme, cfg.system.micro_steps);
  return c;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Trajectory load_ground_truth(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (!cfg.dataset_dir) return generate_trajectory(cfg.system, seed);
  Trajectory t = read_trajectory(*cfg.dataset_dir / dataset_file_name(seed));
  if (!(t.grid.system == cfg.system.grid.system && t.grid.resolution == cfg.system.grid.resolution &&
        t.grid.num_steps == cfg.system.grid.num_steps))
    throw ConfigError("dataset file for seed " + std::to_string(seed) + " does not match the configured grid");
  t.grid = cfg.system.grid;
  return t;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  std::vector<std::size_t> resolutions = cfg.resolutions;
  if (resolutions.empty())
    resolutions.push_back(cfg.system.grid.resolution.empty() ? 0 : cfg.system.grid.resolution[0]);
  const std::size_t per_res = cfg.methods.size() + 1;
  const std::size_t per_seed = resolutions.size() * per_res;
  std::vector<TrajectoryRecord> records(cfg.seeds.size() * per_seed);

  std::mutex log_mutex;
  auto log = [&](const std::string& msg) {
    if (!progress) return;
    std::lock_guard<std::mutex> lock(log_mutex);
    progress(msg);
  };

  auto run_seed = [&](std::size_t si) {
    const std::uint64_t seed = cfg.seeds[si];
    TrajectoryRecord* slot = &records[si * per_seed];
    for (std::size_t q = 0; q < per_seed; ++q) {
      slot[q].seed = seed;
      slot[q].row.method = q % per_res == 0 ? "baseline" : cfg.methods[q % per_res - 1].name;
      slot[q].row.resolution = resolutions[q / per_res];
      slot[q].row.converged = false;
    }
    Trajectory gt, hat;
    try {
      gt = load_ground_truth(cfg, seed);
      DegradeSpec ds = cfg.degrade;
      ds.seed = degrade_seed(cfg.degrade.seed, seed);
      hat = degrade(gt, ds, cfg.system);
    } catch (const std::exception& e) {
      for (std::size_t q = 0; q < per_seed; ++q) slot[q].error = e.what();
      log("seed " + std::to_string(seed) + ": " + e.what());
      return;
    }
    for (std::size_t ri = 0; ri < resolutions.size(); ++ri) {
      TrajectoryRecord* rs = slot + ri * per_res;
      try {
        EvaluationCase c = make_case(cfg, gt, hat, resolutions[ri]);
        Constraint h(c.u_gt.grid, c.spec, cfg.system.params);
        MetricsRow base = evaluate(c.u_hat, c.u_gt, h);
        base.method = "baseline";
        base.converged = true;
        rs[0].row = base;
        for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
          TrajectoryRecord& rec = rs[mi + 1];
          try {
            const auto t0 = std::chrono::steady_clock::now();
            ProjectionResult p = project(c.u_hat, h, cfg.methods[mi].config);
            const double elapsed = seconds_since(t0);
            MetricsRow row = evaluate(p.u, c.u_gt, h);
            row.method = cfg.methods[mi].name;
            row.wall_time_s = elapsed;
            row.iterations = p.iterations;
            row.converged = p.converged;
            rec.row = row;
            rec.note = p.note;
          } catch (const std::exception& e) {
            rec.error = e.what();
          }
          log("seed " + std::to_string(seed) + " res " + std::to_string(resolutions[ri]) + " " +
              cfg.methods[mi].name + (rec.error.empty() ? "" : " failed: " + rec.error));
        }
      } catch (const std::exception& e) {
        for (std::size_t q = 0; q < per_res; ++q) rs[q].error = e.what();
        log("seed " + std::to_string(seed) + " res " + std::to_string(resolutions[ri]) + ": " + e.what());
      }
    }
  };

  const std::size_t workers = std::min(cfg.threads, cfg.seeds.size());
  if (workers <= 1) {
    for (std::size_t si = 0; si < cfg.seeds.size(); ++si) run_seed(si);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t si; (si = next.fetch_add(1)) < cfg.seeds.size();) run_seed(si);
      });
    for (auto& t : pool) t.join();
  }

  ExperimentReport report;
  report.system = to_string(cfg.system.grid.system);
  report.config_json = experiment_config_to_json(cfg);
  for (std::size_t ri = 0; ri < resolutions.size(); ++ri)
    for (std::size_t q = 0; q < per_res; ++q) {
      AggregateRow agg;
      agg.method = q == 0 ? "baseline" : cfg.methods[q - 1].name;
      agg.resolution = resolutions[ri];
      for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
        const auto& rec = records[si * per_seed + ri * per_res + q];
        ++agg.trajectories;
        if (!rec.error.empty()) {
          ++agg.failures;
          continue;
        }
        agg.mse += rec.row.mse;
        agg.residual += rec.row.residual;
        agg.wall_time_s += rec.row.wall_time_s;
        agg.iterations += static_cast<double>(rec.row.iterations);
        if (rec.row.converged) ++agg.converged;
      }
      const std::size_t ok = agg.trajectories - agg.failures;
      if (ok > 0) {
        const double inv = 1.0 / static_cast<double>(ok);
        agg.mse *= inv;
        agg.residual *= inv;
        agg.wall_time_s *= inv;
        agg.iterations *= inv;
      } else {
        agg.mse = agg.residual = std::numeric_limits<double>::quiet_NaN();
      }
      report.table.push_back(agg);
    }
  report.records = std::move(records);
  return report;
}

void write_report_csv(std::ostream& out, const ExperimentReport& report) {
  out << "system,resolution,method,mse,residual,wall_time_s,iterations,converged\n";
  out << std::setprecision(9);
  for (const auto& r : report.table) {
    out << report.system << ',' << r.resolution << ',' << r.method << ',' << r.mse << ',' << r.residual << ','
        << r.wall_time_s << ',' << r.iterations << ',' << r.converged << '/' << r.trajectories
        << (r.partial() ? " (partial)" : "") << '\n';
  }
}

void write_report_csv(const std::filesystem::path& path, const ExperimentReport& report) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_report_csv(out, report);
}

std::string format_report_table(const ExperimentReport& report) {
  std::ostringstream os;
  auto sci = [](double v) {
    std::ostringstream s;
    s << std::scientific << std::setprecision(3) << v;
    return s.str();
  };
  os << std::left << std::setw(8) << "system" << std::setw(6) << "res" << std::setw(14) << "method" << std::right
     << std::setw(12) << "mse" << std::setw(12) << "residual" << std::setw(11) << "time[s]" << std::setw(10)
     << "iters" << std::setw(12) << "converged" << '\n';
  for (const auto& r : report.table) {
    std::ostringstream conv;
    conv << r.converged << '/' << r.trajectories;
    if (r.partial()) conv << '*';
    std::ostringstream it;
    it << std::fixed << std::setprecision(1) << r.iterations;
    std::ostringstream tm;
    tm << std::fixed << std::setprecision(3) << r.wall_time_s;
    os << std::left << std::setw(8) << report.system << std::setw(6) << r.resolution << std::setw(14) << r.method
       << std::right << std::setw(12) << sci(r.mse) << std::setw(12) << sci(r.residual) << std::setw(11) << tm.str()
       << std::setw(10) << it.str() << std::setw(12) << conv.str() << '\n';
  }
  bool any_partial = false;
  for (const auto& r : report.table) any_partial = any_partial || r.partial();
  if (any_partial) os << "* row is partial: some trajectories failed, see the per-trajectory records\n";
  return os.str();
}

}  // namespace trajproj

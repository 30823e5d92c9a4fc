#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "trajproj/field_core.hpp"
#include "trajproj/systems.hpp"

namespace trajproj {

inline constexpr const char* kGeneratorVersion = "trajproj-gen-1";

struct KSInitSpec {
  int num_modes = 10;
  double amplitude_min = 0.0, amplitude_max = 1.0;
  double frequency_min = 1.0, frequency_max = 5.0;
  std::uint64_t seed = 0;
};

struct CosineMode {
  double amplitude;
  double frequency;
  double phase;
};

/// Zero-mean Gaussian random field with spectral density
/// amplitude^2 * (|k|^2 + tau^2)^(-alpha) per Fourier mode.
struct GrfSpec {
  double alpha = 2.5;
  double tau = 7.0;
  /// Defaults to tau^(alpha - 1) when not set explicitly (<= 0).
  double amplitude = 0.0;
  std::size_t sample_resolution = 256;
  std::uint64_t seed = 0;

  double effective_amplitude() const;
};

struct NewtonConfig {
  std::size_t max_iters = 50;
  double abs_tolerance = 1e-10;
  /// Inner GMRES restart length.
  std::size_t gmres_restart = 50;
};

/// Explicit Euler for the Lorenz system; `steps` frames including u0.
Trajectory euler_integrate(const std::array<double, 3>& u0, const LorenzParams& p, double dt, std::size_t steps);

/// Generic explicit integration of any dynamics: frames are spaced by
/// `grid.dt` and each interval composes `micro_steps` steps of size
/// grid.dt / micro_steps. Uses the same step map as the residual.
Trajectory explicit_integrate(Scheme scheme, Dynamics& f, const GridSpec& grid, std::span<const double> u0,
                              std::size_t micro_steps);

/// Backward Euler: each step solves (x - u_t)/dt - F(x) = 0 by Newton with
/// matrix-free GMRES inner solves.
Trajectory bdf1_integrate(Dynamics& f, const GridSpec& grid, std::span<const double> u0, const NewtonConfig& newton);

/// KS backward-Euler run on a periodic 1-D grid.
Trajectory bdf1_integrate(std::span<const double> u0, const KSParams& p, double dt, std::size_t steps,
                          const NewtonConfig& newton);

/// Heun integration of NS vorticity. Records every `record_every` micro-steps;
/// frame 0 is w0, so the result has micro_steps / record_every frames.
Trajectory heun_integrate(std::span<const double> w0, std::size_t nx, std::size_t ny, const NSParams& p, double dt,
                          std::size_t micro_steps, std::size_t record_every);

std::array<double, 3> sample_lorenz_ic(std::uint64_t seed, double stddev = 0.31622776601683794);

std::vector<CosineMode> sample_ks_modes(const KSInitSpec& spec);
/// u0(x) = sum a_k cos(2 pi w_k x / L + phi_k) sampled on the grid.
std::vector<double> ks_cosine_sum(const std::vector<CosineMode>& modes, std::size_t nx, double length);
std::vector<double> sample_ks_ic(const KSInitSpec& spec, const GridSpec& grid);

/// Sampled on a sample_resolution^2 grid, mean removed, truncated to the
/// grid resolution.
std::vector<double> sample_ns_ic(const GrfSpec& spec, const GridSpec& grid);

/// Everything needed to produce ground-truth trajectories for one system.
struct SystemConfig {
  GridSpec grid;
  SystemParams params;
  Scheme scheme = Scheme::euler;
  std::size_t micro_steps = 1;
  double lorenz_ic_std = 0.31622776601683794;
  KSInitSpec ks_init;
  GrfSpec grf;
  NewtonConfig newton;
  /// Frames dropped from the start of every generated run (KS: 256).
  std::size_t window_start = 0;

  /// Full-size defaults for each system.
  static SystemConfig defaults(SystemKind kind);
  void validate() const;
  /// Grid of the unwindowed run.
  GridSpec run_grid() const;
};

/// Ground truth for one seed; deterministic in (config, seed).
Trajectory generate_trajectory(const SystemConfig& cfg, std::uint64_t seed);

/// The constraint whose feasible set contains `u_gt`.
Constraint make_constraint(const SystemConfig& cfg, const Trajectory& u_gt);

struct DatasetManifest {
  SystemConfig config;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> files;
  std::string generator_version = kGeneratorVersion;
};

/// "traj_<seed>.utrj"
std::string dataset_file_name(std::uint64_t seed);

/// Writes one trajectory file per seed plus `manifest.json`.
DatasetManifest generate_dataset(const SystemConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                 const std::filesystem::path& out_dir);

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::filesystem::path& path);

}  // namespace trajproj

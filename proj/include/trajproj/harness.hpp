#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "trajproj/field_core.hpp"
#include "trajproj/integrators.hpp"
#include "trajproj/lbfgs.hpp"
#include "trajproj/projections.hpp"
#include "trajproj/systems.hpp"

namespace trajproj {

enum class DegradeKind { spectral_truncate, gaussian_noise, coarse_time, blend };

std::string to_string(DegradeKind k);
DegradeKind parse_degrade_kind(const std::string& name);

/// Deterministic corruption of a ground-truth trajectory.
struct DegradeSpec {
  DegradeKind kind = DegradeKind::gaussian_noise;
  /// Fraction of the lowest spatial modes kept on every axis, in (0, 1].
  double keep_fraction = 1.0;
  double noise_sigma = 0.0;
  std::size_t coarse_factor = 1;
  /// Weight of the partner trajectory, in [0, 1].
  double blend_weight = 0.0;
  /// Noise seed; for blend, the seed of the partner trajectory.
  std::uint64_t seed = 0;

  void validate() const;
};

/// Frame 0 of the result is always u_gt's frame 0. `system` supplies the
/// dynamics for coarse-time and the generator for blend.
Trajectory degrade(const Trajectory& u_gt, const DegradeSpec& spec, const SystemConfig& system);

/// Zero every mode with |m| > keep * n/2 on any axis, frame by frame.
Trajectory spectral_truncate(const Trajectory& u, double keep_fraction);

struct MetricsRow {
  std::string method;
  std::size_t resolution = 0;
  double mse = 0.0;
  /// ||h(u) - c||^2
  double residual = 0.0;
  double wall_time_s = 0.0;
  std::size_t iterations = 0;
  bool converged = true;
};

MetricsRow evaluate(const Trajectory& u, const Trajectory& u_gt, Constraint& h);
MetricsRow evaluate(const Trajectory& u, const Trajectory& u_gt, const ConstraintSpec& spec,
                    const SystemParams& params);

/// Per-entry mean of (u - u_gt)^2.
double mean_squared_error(std::span<const double> u, std::span<const double> u_gt);

enum class SecondOrderMode { gauss_newton, secant_fd };

std::string to_string(SecondOrderMode m);
SecondOrderMode parse_second_order_mode(const std::string& name);

/// True violation along an optimizer path with its first and second order
/// models about the path's first point.
struct LandscapeCurve {
  std::vector<double> d;
  std::vector<double> v_true;
  std::vector<double> v_linear;
  std::vector<double> v_quadratic;

  std::size_t size() const { return d.size(); }
};

LandscapeCurve taylor_landscape(const OptimTrace& trace, Constraint& h, SecondOrderMode mode);

void write_landscape_csv(std::ostream& out, const LandscapeCurve& curve);
void write_landscape_csv(const std::filesystem::path& path, const LandscapeCurve& curve);

/// Named projection entry of an experiment.
struct MethodEntry {
  std::string name;
  ProjectionConfig config;
};

struct ExperimentConfig {
  SystemConfig system;
  std::vector<std::uint64_t> seeds;
  DegradeSpec degrade;
  std::vector<MethodEntry> methods;
  /// Evaluation resolutions; empty means the generation resolution only.
  std::vector<std::size_t> resolutions;
  std::size_t threads = 1;
  /// Ground truth read from here when set (files named by dataset_file_name).
  std::optional<std::filesystem::path> dataset_dir;

  void validate() const;
};

/// One (trajectory, resolution, method) outcome.
struct TrajectoryRecord {
  std::uint64_t seed = 0;
  MetricsRow row;
  std::string note;
  /// Non-empty when the pipeline failed for this entry.
  std::string error;
};

/// Mean of MetricsRow over the trajectories of one table cell.
struct AggregateRow {
  std::string method;
  std::size_t resolution = 0;
  double mse = 0.0;
  double residual = 0.0;
  double wall_time_s = 0.0;
  double iterations = 0.0;
  std::size_t trajectories = 0;
  std::size_t converged = 0;
  std::size_t failures = 0;

  bool partial() const { return failures > 0; }
};

struct ExperimentReport {
  std::string system;
  std::vector<AggregateRow> table;
  std::vector<TrajectoryRecord> records;
  /// The full configuration as JSON text.
  std::string config_json;

  const AggregateRow* find(const std::string& method, std::size_t resolution) const;
};

using ProgressFn = std::function<void(const std::string&)>;

ExperimentReport run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress = {});

/// Columns: system,resolution,method,mse,residual,wall_time_s,iterations,converged
void write_report_csv(std::ostream& out, const ExperimentReport& report);
void write_report_csv(const std::filesystem::path& path, const ExperimentReport& report);
std::string format_report_table(const ExperimentReport& report);

/// Ground truth at base resolution, degraded copy, both resampled to the
/// requested resolution. The constraint's initial state is the resampled
/// truth's first frame.
struct EvaluationCase {
  Trajectory u_gt;
  Trajectory u_hat;
  ConstraintSpec spec;
};

EvaluationCase make_case(const ExperimentConfig& cfg, const Trajectory& u_gt_base, const Trajectory& u_hat_base,
                         std::size_t resolution);

/// Seed of the degradation for one trajectory.
std::uint64_t degrade_seed(std::uint64_t base, std::uint64_t trajectory_seed);

}  // namespace trajproj

#include "trajproj/field_core.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "trajproj/errors.hpp"

namespace trajproj {

std::string to_string(SystemKind kind) {
  switch (kind) {
    case SystemKind::lorenz: return "lorenz";
    case SystemKind::ks: return "ks";
    case SystemKind::ns: return "ns";
  }
  return "unknown";
}

SystemKind parse_system_kind(const std::string& name) {
  if (name == "lorenz") return SystemKind::lorenz;
  if (name == "ks") return SystemKind::ks;
  if (name == "ns") return SystemKind::ns;
  throw ConfigError("unknown system '" + name + "' (expected lorenz, ks or ns)");
}

GridSpec GridSpec::lorenz(double dt, std::size_t num_steps) {
  GridSpec g;
  g.system = SystemKind::lorenz;
  g.dt = dt;
  g.num_steps = num_steps;
  g.state_dim = 3;
  g.periodic = false;
  return g;
}

GridSpec GridSpec::ks(std::size_t nx, double dt, std::size_t num_steps, double length) {
  GridSpec g;
  g.system = SystemKind::ks;
  g.resolution = {nx};
  g.length = {length};
  g.dt = dt;
  g.num_steps = num_steps;
  return g;
}

GridSpec GridSpec::ns(std::size_t nx, std::size_t ny, double dt, std::size_t num_steps) {
  GridSpec g;
  g.system = SystemKind::ns;
  g.resolution = {nx, ny};
  g.length = {2.0 * std::numbers::pi, 2.0 * std::numbers::pi};
  g.dt = dt;
  g.num_steps = num_steps;
  return g;
}

std::size_t GridSpec::spatial_points() const {
  std::size_t n = 1;
  for (auto r : resolution) n *= r;
  return n;
}

std::size_t GridSpec::frame_size() const { return state_dim * spatial_points(); }

std::size_t GridSpec::size() const { return num_steps * frame_size(); }

void GridSpec::validate() const {
  if (num_steps == 0) throw ConfigError("grid: num-steps must be positive");
  if (state_dim == 0) throw ConfigError("grid: state-dim must be positive");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("grid: dt must be positive and finite");
  if (resolution.size() != length.size())
    throw ConfigError("grid: resolution and domain-length must have one entry per axis");
  std::size_t n = state_dim;
  for (std::size_t a = 0; a < resolution.size(); ++a) {
    if (resolution[a] == 0) throw ConfigError("grid: resolution must be positive");
    if (!(length[a] > 0.0)) throw ConfigError("grid: domain-length must be positive");
    if (n > std::numeric_limits<std::size_t>::max() / resolution[a])
      throw ConfigError("grid: total size overflows");
    n *= resolution[a];
  }
  if (n > std::numeric_limits<std::size_t>::max() / num_steps)
    throw ConfigError("grid: total size overflows");
  switch (system) {
    case SystemKind::lorenz:
      if (!resolution.empty() || state_dim != 3)
        throw ConfigError("grid: lorenz grids have no spatial axes and state-dim 3");
      break;
    case SystemKind::ks:
      if (resolution.size() != 1 || state_dim != 1 || !periodic)
        throw ConfigError("grid: ks grids are periodic, 1-D, state-dim 1");
      break;
    case SystemKind::ns:
      if (resolution.size() != 2 || state_dim != 1 || !periodic)
        throw ConfigError("grid: ns grids are periodic, 2-D, state-dim 1");
      break;
  }
}

GridSpec GridSpec::with_steps(std::size_t steps) const {
  GridSpec g = *this;
  g.num_steps = steps;
  return g;
}

GridSpec GridSpec::with_resolution(std::vector<std::size_t> res) const {
  GridSpec g = *this;
  g.resolution = std::move(res);
  return g;
}

Trajectory::Trajectory(GridSpec g) : grid(std::move(g)), values(grid.size(), 0.0) {}

Trajectory::Trajectory(GridSpec g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
  if (values.size() != grid.size())
    throw ShapeError("trajectory: expected " + std::to_string(grid.size()) + " values, got " +
                     std::to_string(values.size()));
}

std::span<double> Trajectory::frame(std::size_t t) {
  const auto fs = grid.frame_size();
  return std::span<double>(values).subspan(t * fs, fs);
}

std::span<const double> Trajectory::frame(std::size_t t) const {
  const auto fs = grid.frame_size();
  return std::span<const double>(values).subspan(t * fs, fs);
}

bool Trajectory::all_finite() const {
  for (double x : values)
    if (!std::isfinite(x)) return false;
  return true;
}

void Trajectory::validate() const {
  if (values.size() != grid.size())
    throw ShapeError("trajectory: length " + std::to_string(values.size()) +
                     " does not match grid size " + std::to_string(grid.size()));
  if (!all_finite()) throw ShapeError("trajectory: contains non-finite values");
}

void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what) {
  if (!(a == b)) throw ShapeError(std::string(what) + ": grid mismatch");
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  const std::size_t n = a.size();
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

double norm2(std::span<const double> a) { return dot(a, a); }

double dot(const Trajectory& a, const Trajectory& b) {
  require_same_grid(a.grid, b.grid, "dot");
  return dot(std::span<const double>(a.values), std::span<const double>(b.values));
}

double norm2(const Trajectory& a) { return norm2(std::span<const double>(a.values)); }

}  // namespace trajproj

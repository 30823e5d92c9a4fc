#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>
#include <numbers>

#include "trajproj/errors.hpp"
#include "trajproj/field_core.hpp"

namespace trajproj {

namespace {

// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

long signed_mode(std::size_t i, std::size_t n) {
  // Standard order: 0..n/2-1 non-negative, n/2 is Nyquist (reported as -n/2
  // for even n), upper half negative.
  const long li = static_cast<long>(i);
  const long ln = static_cast<long>(n);
  return (2 * li < ln) ? li : li - ln;
}

bool is_nyquist(long m, std::size_t n) { return n % 2 == 0 && std::labs(m) * 2 == static_cast<long>(n); }

}  // namespace

struct SpectralWorkspace::Plans {
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;

  ~Plans() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (inv) fftw_destroy_plan(inv);
    if (real) fftw_free(real);
    if (spec) fftw_free(spec);
  }
};

SpectralWorkspace::SpectralWorkspace(std::vector<std::size_t> resolution, std::vector<double> length,
                                     bool dealias)
    : resolution_(std::move(resolution)), length_(std::move(length)), dealias_(dealias) {
  if (resolution_.empty() || resolution_.size() > 2)
    throw UnsupportedOperation("spectral workspace: only 1-D and 2-D periodic grids are supported");
  if (length_.size() != resolution_.size())
    throw ConfigError("spectral workspace: one domain length per axis required");
  for (std::size_t a = 0; a < resolution_.size(); ++a) {
    if (resolution_[a] < 2) throw ConfigError("spectral workspace: resolution must be >= 2");
    if (!(length_[a] > 0.0)) throw ConfigError("spectral workspace: domain length must be positive");
  }

  const std::size_t r = rank();
  real_size_ = 1;
  for (auto n : resolution_) real_size_ *= n;
  const std::size_t half = resolution_.back() / 2 + 1;
  spectral_size_ = real_size_ / resolution_.back() * half;

  wavenumbers_.resize(r);
  modes_.resize(r);
  for (std::size_t a = 0; a < r; ++a) {
    const std::size_t n = resolution_[a];
    const double scale = 2.0 * std::numbers::pi / length_[a];
    wavenumbers_[a].resize(n);
    for (std::size_t i = 0; i < n; ++i) wavenumbers_[a][i] = scale * static_cast<double>(signed_mode(i, n));
  }
  // Per-axis mode index over the spectral layout.
  for (std::size_t a = 0; a < r; ++a) modes_[a].resize(spectral_size_);
  for (std::size_t s = 0; s < spectral_size_; ++s) {
    if (r == 1) {
      modes_[0][s] = static_cast<long>(s);
      if (is_nyquist(static_cast<long>(s), resolution_[0])) modes_[0][s] = -static_cast<long>(s);
    } else {
      const std::size_t i = s / half;
      const std::size_t j = s % half;
      modes_[0][s] = signed_mode(i, resolution_[0]);
      long mj = static_cast<long>(j);
      if (is_nyquist(mj, resolution_[1])) mj = -mj;
      modes_[1][s] = mj;
    }
  }
  mask_.assign(spectral_size_, 1.0);
  for (std::size_t s = 0; s < spectral_size_; ++s)
    for (std::size_t a = 0; a < r; ++a)
      if (3 * std::labs(modes_[a][s]) > static_cast<long>(resolution_[a])) mask_[s] = 0.0;

  plans_ = std::make_unique<Plans>();
  std::lock_guard<std::mutex> lock(planner_mutex());
  plans_->real = fftw_alloc_real(real_size_);
  plans_->spec = fftw_alloc_complex(spectral_size_);
  // FFTW_ESTIMATE keeps plan selection, and therefore results, deterministic.
  if (r == 1) {
    const int n = static_cast<int>(resolution_[0]);
    plans_->fwd = fftw_plan_dft_r2c_1d(n, plans_->real, plans_->spec, FFTW_ESTIMATE);
    plans_->inv = fftw_plan_dft_c2r_1d(n, plans_->spec, plans_->real, FFTW_ESTIMATE);
  } else {
    const int n0 = static_cast<int>(resolution_[0]);
    const int n1 = static_cast<int>(resolution_[1]);
    plans_->fwd = fftw_plan_dft_r2c_2d(n0, n1, plans_->real, plans_->spec, FFTW_ESTIMATE);
    plans_->inv = fftw_plan_dft_c2r_2d(n0, n1, plans_->spec, plans_->real, FFTW_ESTIMATE);
  }
  if (!plans_->fwd || !plans_->inv) throw Error("spectral workspace: FFTW planning failed");
}

namespace {
void require_periodic_spatial(const GridSpec& grid) {
  if (!grid.periodic || grid.resolution.empty())
    throw UnsupportedOperation("spectral operations require a periodic grid with spatial axes");
}
}  // namespace

SpectralWorkspace::SpectralWorkspace(const GridSpec& grid)
    : SpectralWorkspace(grid, grid.system == SystemKind::ns) {}

SpectralWorkspace::SpectralWorkspace(const GridSpec& grid, bool dealias)
    : SpectralWorkspace((require_periodic_spatial(grid), grid.resolution), grid.length, dealias) {}

SpectralWorkspace::~SpectralWorkspace() = default;

std::vector<Complex> SpectralWorkspace::derivative_symbol(unsigned order, std::size_t axis) const {
  if (axis >= rank()) throw ShapeError("derivative_symbol: axis out of range");
  const double scale = 2.0 * std::numbers::pi / length_[axis];
  std::vector<Complex> sym(spectral_size_);
  for (std::size_t s = 0; s < spectral_size_; ++s) {
    const long m = modes_[axis][s];
    if (order % 2 == 1 && is_nyquist(m, resolution_[axis])) {
      sym[s] = 0.0;
      continue;
    }
    const double k = scale * static_cast<double>(m);
    // (ik)^order
    Complex v = 1.0;
    for (unsigned p = 0; p < order; ++p) v *= Complex(0.0, k);
    sym[s] = v;
  }
  return sym;
}

void SpectralWorkspace::forward(std::span<const double> field, std::span<Complex> spectrum) {
  if (field.size() != real_size_ || spectrum.size() != spectral_size_)
    throw ShapeError("spectral forward: size mismatch");
  std::memcpy(plans_->real, field.data(), real_size_ * sizeof(double));
  fftw_execute(plans_->fwd);
  std::memcpy(static_cast<void*>(spectrum.data()), plans_->spec, spectral_size_ * sizeof(Complex));
}

void SpectralWorkspace::inverse(std::span<const Complex> spectrum, std::span<double> field) {
  if (field.size() != real_size_ || spectrum.size() != spectral_size_)
    throw ShapeError("spectral inverse: size mismatch");
  std::memcpy(plans_->spec, static_cast<const void*>(spectrum.data()), spectral_size_ * sizeof(Complex));
  fftw_execute(plans_->inv);
  const double norm = 1.0 / static_cast<double>(real_size_);
  for (std::size_t i = 0; i < real_size_; ++i) field[i] = plans_->real[i] * norm;
}

std::vector<double> spectral_derivative(std::span<const double> field, unsigned order, std::size_t axis,
                                        SpectralWorkspace& ws) {
  if (field.size() != ws.real_size()) throw ShapeError("spectral_derivative: field size mismatch");
  if (axis >= ws.rank()) throw ShapeError("spectral_derivative: axis out of range");
  if (order == 0) return std::vector<double>(field.begin(), field.end());
  std::vector<Complex> spec(ws.spectral_size());
  ws.forward(field, spec);
  const auto sym = ws.derivative_symbol(order, axis);
  for (std::size_t s = 0; s < spec.size(); ++s) spec[s] *= sym[s];
  std::vector<double> out(field.size());
  ws.inverse(spec, out);
  return out;
}

std::vector<Complex> dealias_23(std::span<const Complex> spectrum, const SpectralWorkspace& ws) {
  if (spectrum.size() != ws.spectral_size()) throw ShapeError("dealias_23: spectrum size mismatch");
  std::vector<Complex> out(spectrum.begin(), spectrum.end());
  const auto& mask = ws.dealias_mask();
  for (std::size_t s = 0; s < out.size(); ++s)
    if (mask[s] == 0.0) out[s] = 0.0;
  return out;
}

namespace {

struct Target {
  std::size_t index;
  double weight;
};

// Where each source spectral index lands on one axis. `half` marks the
// real-to-complex axis whose negative modes are implicit.
std::vector<std::vector<Target>> axis_map(std::size_t n_from, std::size_t n_to, bool half) {
  const std::size_t count = half ? n_from / 2 + 1 : n_from;
  std::vector<std::vector<Target>> map(count);
  for (std::size_t i = 0; i < count; ++i) {
    const long m = half ? static_cast<long>(i) : signed_mode(i, n_from);
    const long am = std::labs(m);
    auto place = [&](long mm) {
      return static_cast<std::size_t>(mm >= 0 ? mm : mm + static_cast<long>(n_to));
    };
    if (n_to == n_from) {
      map[i].push_back({i, 1.0});
    } else if (is_nyquist(m, n_from) && n_to > n_from) {
      if (half) {
        map[i].push_back({static_cast<std::size_t>(am), 0.5});
      } else {
        map[i].push_back({place(am), 0.5});
        map[i].push_back({place(-am), 0.5});
      }
    } else if (2 * am < static_cast<long>(n_to)) {
      map[i].push_back({half ? static_cast<std::size_t>(am) : place(m), 1.0});
    }
  }
  return map;
}

}  // namespace

std::vector<double> spectral_resample(std::span<const double> field, const std::vector<std::size_t>& from,
                                      const std::vector<std::size_t>& to) {
  if (from.size() != to.size() || from.empty() || from.size() > 2)
    throw ShapeError("spectral_resample: axis count mismatch");
  std::size_t n_from = 1, n_to = 1;
  for (auto n : from) n_from *= n;
  for (auto n : to) n_to *= n;
  if (field.size() != n_from) throw ShapeError("spectral_resample: field size mismatch");
  if (from == to) return std::vector<double>(field.begin(), field.end());

  // Only resolutions matter for resampling; unit lengths are placeholders.
  std::vector<double> unit(from.size(), 1.0);
  SpectralWorkspace src(from, unit, false);
  SpectralWorkspace dst(to, unit, false);
  std::vector<Complex> a(src.spectral_size());
  std::vector<Complex> b(dst.spectral_size(), Complex(0.0));
  src.forward(field, a);
  const double scale = static_cast<double>(n_to) / static_cast<double>(n_from);

  if (from.size() == 1) {
    const auto map = axis_map(from[0], to[0], true);
    for (std::size_t i = 0; i < map.size(); ++i)
      for (const auto& t : map[i]) b[t.index] += scale * t.weight * a[i];
  } else {
    const auto map0 = axis_map(from[0], to[0], false);
    const auto map1 = axis_map(from[1], to[1], true);
    const std::size_t h_from = from[1] / 2 + 1;
    const std::size_t h_to = to[1] / 2 + 1;
    for (std::size_t i = 0; i < map0.size(); ++i)
      for (std::size_t j = 0; j < map1.size(); ++j)
        for (const auto& ti : map0[i])
          for (const auto& tj : map1[j])
            b[ti.index * h_to + tj.index] += scale * ti.weight * tj.weight * a[i * h_from + j];
  }
  std::vector<double> out(n_to);
  dst.inverse(b, out);
  return out;
}

Trajectory resample_trajectory(const Trajectory& u, const std::vector<std::size_t>& to) {
  if (u.grid.resolution.empty()) throw UnsupportedOperation("resample_trajectory: grid has no spatial axes");
  if (u.grid.state_dim != 1) throw UnsupportedOperation("resample_trajectory: state-dim must be 1");
  Trajectory out(u.grid.with_resolution(to));
  for (std::size_t t = 0; t < u.grid.num_steps; ++t) {
    auto f = spectral_resample(u.frame(t), u.grid.resolution, to);
    std::copy(f.begin(), f.end(), out.frame(t).begin());
  }
  return out;
}

}  // namespace trajproj

#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace trajproj {

enum class SystemKind : std::uint8_t { lorenz = 0, ks = 1, ns = 2 };

std::string to_string(SystemKind kind);
SystemKind parse_system_kind(const std::string& name);

/// Space-time discretization of one trajectory.
///
/// `dt` is the spacing between stored frames. Schemes that take several
/// micro-steps per frame interval divide it further (see ConstraintSpec).
struct GridSpec {
  SystemKind system = SystemKind::lorenz;
  std::vector<std::size_t> resolution;  ///< spatial points per axis, empty for ODEs
  std::vector<double> length;           ///< domain length per axis
  double dt = 1.0;
  std::size_t num_steps = 1;  ///< number of stored frames, including the initial one
  std::size_t state_dim = 1;
  bool periodic = true;

  static GridSpec lorenz(double dt, std::size_t num_steps);
  static GridSpec ks(std::size_t nx, double dt, std::size_t num_steps, double length = 64.0);
  static GridSpec ns(std::size_t nx, std::size_t ny, double dt, std::size_t num_steps);

  std::size_t spatial_points() const;
  /// Values per frame: state_dim * prod(resolution).
  std::size_t frame_size() const;
  /// Total flattened size N.
  std::size_t size() const;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;

  GridSpec with_steps(std::size_t steps) const;
  GridSpec with_resolution(std::vector<std::size_t> res) const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Flattened space-time state, time outermost, then space (row-major),
/// then state components.
struct Trajectory {
  GridSpec grid;
  std::vector<double> values;

  Trajectory() = default;
  explicit Trajectory(GridSpec g);
  Trajectory(GridSpec g, std::vector<double> v);

  std::span<double> frame(std::size_t t);
  std::span<const double> frame(std::size_t t) const;

  bool all_finite() const;
  /// Throws ShapeError on length mismatch or non-finite entries.
  void validate() const;
};

void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
/// Euclidean inner product of two trajectories on the same grid.
double dot(const Trajectory& a, const Trajectory& b);
/// Squared Euclidean norm.
double norm2(const Trajectory& a);

using Complex = std::complex<double>;

/// FFT plans, scratch buffers, wavenumbers and the 2/3 mask for one periodic
/// grid. Spectra use the real-to-complex half layout: the last axis keeps
/// n/2+1 entries, other axes keep all n in standard FFT order.
///
/// Not thread safe: one workspace per worker.
class SpectralWorkspace {
 public:
  SpectralWorkspace(std::vector<std::size_t> resolution, std::vector<double> length,
                    bool dealias);
  /// Throws UnsupportedOperation for non-periodic grids or grids without
  /// spatial axes. De-aliasing defaults to the system convention (NS only).
  explicit SpectralWorkspace(const GridSpec& grid);
  SpectralWorkspace(const GridSpec& grid, bool dealias);
  ~SpectralWorkspace();

  SpectralWorkspace(const SpectralWorkspace&) = delete;
  SpectralWorkspace& operator=(const SpectralWorkspace&) = delete;

  std::size_t rank() const { return resolution_.size(); }
  const std::vector<std::size_t>& resolution() const { return resolution_; }
  const std::vector<double>& length() const { return length_; }
  std::size_t real_size() const { return real_size_; }
  std::size_t spectral_size() const { return spectral_size_; }
  bool dealias_enabled() const { return dealias_; }

  /// k = 2*pi*m/L in standard FFT order (full length, Nyquist as -n/2).
  const std::vector<double>& wavenumbers(std::size_t axis) const { return wavenumbers_.at(axis); }
  /// Signed integer mode index of every spectral entry along `axis`.
  const std::vector<long>& mode_index(std::size_t axis) const { return modes_.at(axis); }
  /// 1 for retained modes, 0 for |m| > n/3 on any axis; spectral layout.
  const std::vector<double>& dealias_mask() const { return mask_; }

  /// Symbol of d^order/dx_axis^order in spectral layout. Odd orders zero the
  /// Nyquist mode.
  std::vector<Complex> derivative_symbol(unsigned order, std::size_t axis) const;

  /// Unnormalized forward transform.
  void forward(std::span<const double> field, std::span<Complex> spectrum);
  /// Normalized inverse transform (forward then inverse is the identity).
  void inverse(std::span<const Complex> spectrum, std::span<double> field);

 private:
  struct Plans;
  std::vector<std::size_t> resolution_;
  std::vector<double> length_;
  bool dealias_;
  std::size_t real_size_ = 0;
  std::size_t spectral_size_ = 0;
  std::vector<std::vector<double>> wavenumbers_;
  std::vector<std::vector<long>> modes_;
  std::vector<double> mask_;
  std::unique_ptr<Plans> plans_;
};

/// order-th spectral derivative along `axis`; order 0 returns the input.
std::vector<double> spectral_derivative(std::span<const double> field, unsigned order,
                                        std::size_t axis, SpectralWorkspace& ws);

/// Zero every mode with |m| > n/3 on any axis.
std::vector<Complex> dealias_23(std::span<const Complex> spectrum, const SpectralWorkspace& ws);

/// Band-limited resampling of a periodic field between resolutions by
/// spectral zero padding (upsampling) or truncation (downsampling). The
/// Nyquist mode of the coarser grid is split evenly between +n/2 and -n/2
/// when padding and dropped when truncating.
std::vector<double> spectral_resample(std::span<const double> field,
                                      const std::vector<std::size_t>& from,
                                      const std::vector<std::size_t>& to);

/// Applies spectral_resample to every frame of a trajectory.
Trajectory resample_trajectory(const Trajectory& u, const std::vector<std::size_t>& to);

}  // namespace trajproj

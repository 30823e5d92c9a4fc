#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "trajproj/field_core.hpp"

namespace trajproj {

struct LorenzParams {
  double sigma = 10.0;
  double rho = 28.0;
  double beta = 8.0 / 3.0;
};

struct KSParams {
  double domain_length = 64.0;
};

/// Vorticity-form Navier-Stokes with forcing
/// forcing_amplitude * cos(forcing_wavenumber * y) + drag * omega.
struct NSParams {
  double reynolds = 1000.0;
  double forcing_amplitude = -4.0;
  int forcing_wavenumber = 4;
  double drag = -0.1;
};

struct SystemParams {
  LorenzParams lorenz;
  KSParams ks;
  NSParams ns;
};

/// Pointwise right-hand side F of du/dt = F(u) on one frame, with its exact
/// tangent and adjoint. Spectral implementations hold a workspace, so an
/// instance must not be shared between threads; use clone().
class Dynamics {
 public:
  virtual ~Dynamics() = default;
  virtual std::size_t state_size() const = 0;
  virtual void rhs(std::span<const double> x, std::span<double> out) = 0;
  /// out = F'(x) dx
  virtual void rhs_jvp(std::span<const double> x, std::span<const double> dx, std::span<double> out) = 0;
  /// out = F'(x)^T w
  virtual void rhs_vjp(std::span<const double> x, std::span<const double> w, std::span<double> out) = 0;
  virtual std::unique_ptr<Dynamics> clone() const = 0;
};

std::array<double, 3> lorenz_rhs(const std::array<double, 3>& state, const LorenzParams& p);

class LorenzDynamics final : public Dynamics {
 public:
  explicit LorenzDynamics(LorenzParams p = {}) : p_(p) {}
  std::size_t state_size() const override { return 3; }
  void rhs(std::span<const double> x, std::span<double> out) override;
  void rhs_jvp(std::span<const double> x, std::span<const double> dx, std::span<double> out) override;
  void rhs_vjp(std::span<const double> x, std::span<const double> w, std::span<double> out) override;
  std::unique_ptr<Dynamics> clone() const override { return std::make_unique<LorenzDynamics>(p_); }
  const LorenzParams& params() const { return p_; }

 private:
  LorenzParams p_;
};

/// F(u) = -(u_xx + u_xxxx + u u_x), no de-aliasing.
class KSDynamics final : public Dynamics {
 public:
  KSDynamics(std::size_t nx, KSParams p = {});
  std::size_t state_size() const override { return ws_.real_size(); }
  void rhs(std::span<const double> x, std::span<double> out) override;
  void rhs_jvp(std::span<const double> x, std::span<const double> dx, std::span<double> out) override;
  void rhs_vjp(std::span<const double> x, std::span<const double> w, std::span<double> out) override;
  std::unique_ptr<Dynamics> clone() const override;
  SpectralWorkspace& workspace() { return ws_; }

 private:
  KSParams p_;
  SpectralWorkspace ws_;
  std::vector<Complex> ik_;
  std::vector<double> linear_;  // k^2 - k^4
  std::vector<Complex> spec_, spec2_;
  std::vector<double> a_, b_;
};

/// F(w) = -u.grad(w) + lap(w)/Re + A cos(k_f y) + drag w, with
/// lap(psi) = w (psi zero mode set to 0), u = (psi_y, -psi_x) and the 2/3
/// rule applied to the advected field and the product.
class NSDynamics final : public Dynamics {
 public:
  NSDynamics(std::size_t nx, std::size_t ny, NSParams p = {});
  std::size_t state_size() const override { return ws_.real_size(); }
  void rhs(std::span<const double> x, std::span<double> out) override;
  void rhs_jvp(std::span<const double> x, std::span<const double> dx, std::span<double> out) override;
  void rhs_vjp(std::span<const double> x, std::span<const double> w, std::span<double> out) override;
  std::unique_ptr<Dynamics> clone() const override;
  SpectralWorkspace& workspace() { return ws_; }

 private:
  // Velocity and vorticity gradient fields of x: u, v, wx, wy.
  void velocity_fields(std::span<const double> x, std::array<std::vector<double>, 4>& f,
                       std::vector<Complex>& xhat);

  NSParams p_;
  std::size_t nx_, ny_;
  SpectralWorkspace ws_;
  // Symbols of the four linear maps vorticity -> (u, v, wx, wy), masked.
  std::array<std::vector<Complex>, 4> sym_;
  std::vector<double> lap_over_re_;
  std::vector<double> forcing_;
  std::array<std::vector<double>, 4> f0_, f1_;
  std::vector<Complex> spec_, acc_, xhat_, what_, grad_;
  std::vector<double> tmp_;
};

/// F(x) = A x for a dense row-major matrix A. Used to exercise schemes on
/// problems with analytic solutions.
class LinearDynamics final : public Dynamics {
 public:
  LinearDynamics(std::size_t n, std::vector<double> matrix);
  static LinearDynamics scalar(std::size_t n, double lambda);
  std::size_t state_size() const override { return n_; }
  void rhs(std::span<const double> x, std::span<double> out) override;
  void rhs_jvp(std::span<const double> x, std::span<const double> dx, std::span<double> out) override;
  void rhs_vjp(std::span<const double> x, std::span<const double> w, std::span<double> out) override;
  std::unique_ptr<Dynamics> clone() const override { return std::make_unique<LinearDynamics>(*this); }

 private:
  std::size_t n_;
  std::vector<double> a_;
};

/// Pointwise right-hand sides on a whole frame; convenience wrappers around
/// the dynamics classes.
std::vector<double> ks_rhs(std::span<const double> field, const KSParams& p, std::size_t nx);
std::vector<double> ns_rhs(std::span<const double> vorticity, const NSParams& p, std::size_t nx, std::size_t ny);

std::unique_ptr<Dynamics> make_dynamics(const GridSpec& grid, const SystemParams& params);

enum class Scheme : std::uint8_t { euler = 0, bdf1 = 1, heun = 2 };

std::string to_string(Scheme s);
Scheme parse_scheme(const std::string& name);
Scheme default_scheme(SystemKind kind);
std::size_t default_micro_steps(SystemKind kind);

/// Right-hand sides c of the discretized system h(u) = c. Only the initial
/// block of c is non-zero; forcing lives inside the scheme.
struct ConstraintSpec {
  std::vector<double> initial_state;
  Scheme scheme = Scheme::euler;
  std::size_t micro_steps = 1;  ///< m micro-steps of size dt/m per frame interval

  /// Spec matching a ground-truth trajectory: u0 is its first frame.
  static ConstraintSpec from_ground_truth(const Trajectory& u_gt, Scheme scheme, std::size_t micro_steps);
  void validate(const GridSpec& grid) const;
};

/// h(u) - c, laid out like a trajectory: block 0 is u[0] - u0, block t+1 is
/// the scheme mismatch between frames t and t+1.
struct ResidualVector {
  GridSpec grid;
  std::vector<double> values;

  ResidualVector() = default;
  explicit ResidualVector(GridSpec g) : grid(std::move(g)), values(grid.size(), 0.0) {}
  ResidualVector(GridSpec g, std::vector<double> v);

  std::span<double> initial_block();
  std::span<const double> initial_block() const;
  /// Block between frames t and t+1, t in [0, num_steps - 1).
  std::span<double> step_block(std::size_t t);
  std::span<const double> step_block(std::size_t t) const;
};

/// Maps of one frame interval. Exposed for the integrators so that generated
/// data is feasible bit for bit.
void explicit_step(Scheme scheme, Dynamics& f, std::span<const double> x, double dt, std::span<double> out);
/// Compose `m` explicit micro-steps.
void step_map(Scheme scheme, Dynamics& f, std::span<const double> x, double dt, std::size_t m,
              std::span<double> out);

/// Trajectory-level constraint h(u) - c with exact JVP and VJP.
class Constraint {
 public:
  Constraint(GridSpec grid, ConstraintSpec spec, std::unique_ptr<Dynamics> dynamics);
  Constraint(GridSpec grid, ConstraintSpec spec, const SystemParams& params);
  Constraint(const Constraint& other);
  Constraint& operator=(const Constraint&) = delete;

  const GridSpec& grid() const { return grid_; }
  const ConstraintSpec& spec() const { return spec_; }
  Dynamics& dynamics() { return *dyn_; }
  std::size_t size() const { return grid_.size(); }

  ResidualVector residual(const Trajectory& u);
  ResidualVector jvp(const Trajectory& u, const Trajectory& v);
  Trajectory vjp(const Trajectory& u, const ResidualVector& w);

  /// Flat-array forms used by the solvers.
  void residual(std::span<const double> u, std::span<double> r);
  void jvp(std::span<const double> u, std::span<const double> v, std::span<double> out);
  void vjp(std::span<const double> u, std::span<const double> w, std::span<double> out);

 private:
  double micro_dt() const { return grid_.dt / static_cast<double>(spec_.micro_steps); }
  void check(std::span<const double> a, const char* what) const;

  GridSpec grid_;
  ConstraintSpec spec_;
  std::unique_ptr<Dynamics> dyn_;
  std::vector<std::vector<double>> chain_;
  std::vector<double> t0_, t1_, t2_, t3_;
};

ResidualVector residual(const Trajectory& u, const ConstraintSpec& spec, const SystemParams& params);
ResidualVector residual_jvp(const Trajectory& u, const Trajectory& v, const ConstraintSpec& spec,
                            const SystemParams& params);
Trajectory residual_vjp(const Trajectory& u, const ResidualVector& w, const ConstraintSpec& spec,
                        const SystemParams& params);

}  // namespace trajproj

#include <cmath>

#include "trajproj/errors.hpp"
#include "trajproj/systems.hpp"

namespace trajproj {

std::array<double, 3> lorenz_rhs(const std::array<double, 3>& s, const LorenzParams& p) {
  return {p.sigma * (s[1] - s[0]), s[0] * (p.rho - s[2]) - s[1], s[0] * s[1] - p.beta * s[2]};
}

void LorenzDynamics::rhs(std::span<const double> x, std::span<double> out) {
  const auto r = lorenz_rhs({x[0], x[1], x[2]}, p_);
  out[0] = r[0];
  out[1] = r[1];
  out[2] = r[2];
}

void LorenzDynamics::rhs_jvp(std::span<const double> x, std::span<const double> dx, std::span<double> out) {
  out[0] = p_.sigma * (dx[1] - dx[0]);
  out[1] = (p_.rho - x[2]) * dx[0] - dx[1] - x[0] * dx[2];
  out[2] = x[1] * dx[0] + x[0] * dx[1] - p_.beta * dx[2];
}

void LorenzDynamics::rhs_vjp(std::span<const double> x, std::span<const double> w, std::span<double> out) {
  out[0] = -p_.sigma * w[0] + (p_.rho - x[2]) * w[1] + x[1] * w[2];
  out[1] = p_.sigma * w[0] - w[1] + x[0] * w[2];
  out[2] = -x[0] * w[1] - p_.beta * w[2];
}

// ---------------------------------------------------------------------------
// Kuramoto-Sivashinsky

KSDynamics::KSDynamics(std::size_t nx, KSParams p) : p_(p), ws_({nx}, {p.domain_length}, false) {
  ik_ = ws_.derivative_symbol(1, 0);
  const auto d2 = ws_.derivative_symbol(2, 0);
  const auto d4 = ws_.derivative_symbol(4, 0);
  linear_.resize(ws_.spectral_size());
  for (std::size_t s = 0; s < linear_.size(); ++s) linear_[s] = -(d2[s].real() + d4[s].real());
  spec_.resize(ws_.spectral_size());
  spec2_.resize(ws_.spectral_size());
  a_.resize(nx);
  b_.resize(nx);
}

std::unique_ptr<Dynamics> KSDynamics::clone() const {
  return std::make_unique<KSDynamics>(ws_.resolution()[0], p_);
}

void KSDynamics::rhs(std::span<const double> x, std::span<double> out) {
  ws_.forward(x, spec_);
  for (std::size_t s = 0; s < spec_.size(); ++s) spec2_[s] = ik_[s] * spec_[s];
  ws_.inverse(spec2_, a_);
  for (std::size_t s = 0; s < spec_.size(); ++s) spec_[s] *= linear_[s];
  ws_.inverse(spec_, out);
  for (std::size_t i = 0; i < a_.size(); ++i) out[i] -= x[i] * a_[i];
}

void KSDynamics::rhs_jvp(std::span<const double> x, std::span<const double> dx, std::span<double> out) {
  ws_.forward(x, spec_);
  for (std::size_t s = 0; s < spec_.size(); ++s) spec_[s] *= ik_[s];
  ws_.inverse(spec_, a_);  // u_x
  ws_.forward(dx, spec_);
  for (std::size_t s = 0; s < spec_.size(); ++s) spec2_[s] = ik_[s] * spec_[s];
  ws_.inverse(spec2_, b_);  // du_x
  for (std::size_t s = 0; s < spec_.size(); ++s) spec_[s] *= linear_[s];
  ws_.inverse(spec_, out);
  for (std::size_t i = 0; i < a_.size(); ++i) out[i] -= dx[i] * a_[i] + x[i] * b_[i];
}

void KSDynamics::rhs_vjp(std::span<const double> x, std::span<const double> w, std::span<double> out) {
  // (u_x v + u D v)^T w = u_x w - D(u w), since D is antisymmetric.
  ws_.forward(x, spec_);
  for (std::size_t s = 0; s < spec_.size(); ++s) spec_[s] *= ik_[s];
  ws_.inverse(spec_, a_);
  for (std::size_t i = 0; i < b_.size(); ++i) b_[i] = x[i] * w[i];
  ws_.forward(b_, spec2_);
  ws_.forward(w, spec_);
  for (std::size_t s = 0; s < spec_.size(); ++s) spec_[s] = linear_[s] * spec_[s] + ik_[s] * spec2_[s];
  ws_.inverse(spec_, out);
  for (std::size_t i = 0; i < a_.size(); ++i) out[i] -= a_[i] * w[i];
}

// ---------------------------------------------------------------------------
// Navier-Stokes, vorticity form

NSDynamics::NSDynamics(std::size_t nx, std::size_t ny, NSParams p)
    : p_(p), nx_(nx), ny_(ny), ws_(GridSpec::ns(nx, ny, 1.0, 1), true) {
  if (!(p.reynolds > 0.0)) throw ConfigError("ns: reynolds number must be positive");
  const std::size_t ns = ws_.spectral_size();
  const auto ikx = ws_.derivative_symbol(1, 0);
  const auto iky = ws_.derivative_symbol(1, 1);
  const auto dxx = ws_.derivative_symbol(2, 0);
  const auto dyy = ws_.derivative_symbol(2, 1);
  const auto& mask = ws_.dealias_mask();
  for (auto& s : sym_) s.resize(ns);
  lap_over_re_.resize(ns);
  for (std::size_t s = 0; s < ns; ++s) {
    const double lap = dxx[s].real() + dyy[s].real();
    const double inv_lap = lap == 0.0 ? 0.0 : 1.0 / lap;
    const double m = ws_.dealias_enabled() ? mask[s] : 1.0;
    sym_[0][s] = m * inv_lap * iky[s];   // u = psi_y
    sym_[1][s] = -m * inv_lap * ikx[s];  // v = -psi_x
    sym_[2][s] = m * ikx[s];             // w_x
    sym_[3][s] = m * iky[s];             // w_y
    lap_over_re_[s] = lap / p.reynolds;
  }
  forcing_.resize(nx * ny);
  const double ly = ws_.length()[1];
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) {
      const double y = ly * static_cast<double>(j) / static_cast<double>(ny);
      forcing_[i * ny + j] = p.forcing_amplitude * std::cos(static_cast<double>(p.forcing_wavenumber) * y);
    }
  for (auto& f : f0_) f.resize(nx * ny);
  for (auto& f : f1_) f.resize(nx * ny);
  spec_.resize(ns);
  acc_.resize(ns);
  xhat_.resize(ns);
  what_.resize(ns);
  grad_.resize(ns);
  tmp_.resize(nx * ny);
}

std::unique_ptr<Dynamics> NSDynamics::clone() const { return std::make_unique<NSDynamics>(nx_, ny_, p_); }

void NSDynamics::velocity_fields(std::span<const double> x, std::array<std::vector<double>, 4>& f,
                                 std::vector<Complex>& xhat) {
  ws_.forward(x, xhat);
  for (std::size_t q = 0; q < 4; ++q) {
    for (std::size_t s = 0; s < xhat.size(); ++s) acc_[s] = sym_[q][s] * xhat[s];
    ws_.inverse(acc_, f[q]);
  }
}

void NSDynamics::rhs(std::span<const double> x, std::span<double> out) {
  auto& xhat = xhat_;
  velocity_fields(x, f0_, xhat);
  for (std::size_t i = 0; i < tmp_.size(); ++i) tmp_[i] = f0_[0][i] * f0_[2][i] + f0_[1][i] * f0_[3][i];
  ws_.forward(tmp_, spec_);
  const bool dealias = ws_.dealias_enabled();
  const auto& mask = ws_.dealias_mask();
  for (std::size_t s = 0; s < spec_.size(); ++s) {
    const double m = dealias ? mask[s] : 1.0;
    acc_[s] = -m * spec_[s] + lap_over_re_[s] * xhat[s];
  }
  ws_.inverse(acc_, out);
  for (std::size_t i = 0; i < tmp_.size(); ++i) out[i] += forcing_[i] + p_.drag * x[i];
}

void NSDynamics::rhs_jvp(std::span<const double> x, std::span<const double> dx, std::span<double> out) {
  auto& xhat = xhat_;
  auto& dxhat = what_;
  velocity_fields(x, f0_, xhat);
  velocity_fields(dx, f1_, dxhat);
  for (std::size_t i = 0; i < tmp_.size(); ++i)
    tmp_[i] = f1_[0][i] * f0_[2][i] + f0_[0][i] * f1_[2][i] + f1_[1][i] * f0_[3][i] + f0_[1][i] * f1_[3][i];
  ws_.forward(tmp_, spec_);
  const bool dealias = ws_.dealias_enabled();
  const auto& mask = ws_.dealias_mask();
  for (std::size_t s = 0; s < spec_.size(); ++s) {
    const double m = dealias ? mask[s] : 1.0;
    acc_[s] = -m * spec_[s] + lap_over_re_[s] * dxhat[s];
  }
  ws_.inverse(acc_, out);
  for (std::size_t i = 0; i < tmp_.size(); ++i) out[i] += p_.drag * dx[i];
}

void NSDynamics::rhs_vjp(std::span<const double> x, std::span<const double> w, std::span<double> out) {
  auto& what = what_;
  auto& grad = grad_;
  velocity_fields(x, f0_, xhat_);
  ws_.forward(w, what);
  const bool dealias = ws_.dealias_enabled();
  const auto& mask = ws_.dealias_mask();
  // z = -P w
  for (std::size_t s = 0; s < what.size(); ++s) acc_[s] = -(dealias ? mask[s] : 1.0) * what[s];
  auto& z = f1_[0];
  ws_.inverse(acc_, z);
  for (std::size_t s = 0; s < grad.size(); ++s) grad[s] = lap_over_re_[s] * what[s];
  // Each map q is paired with the field it multiplies in the product.
  constexpr std::array<std::size_t, 4> partner = {2, 3, 0, 1};
  for (std::size_t q = 0; q < 4; ++q) {
    const auto& other = f0_[partner[q]];
    for (std::size_t i = 0; i < tmp_.size(); ++i) tmp_[i] = z[i] * other[i];
    ws_.forward(tmp_, spec_);
    for (std::size_t s = 0; s < grad.size(); ++s) grad[s] += std::conj(sym_[q][s]) * spec_[s];
  }
  ws_.inverse(grad, out);
  for (std::size_t i = 0; i < tmp_.size(); ++i) out[i] += p_.drag * w[i];
}

// ---------------------------------------------------------------------------

LinearDynamics::LinearDynamics(std::size_t n, std::vector<double> matrix) : n_(n), a_(std::move(matrix)) {
  if (a_.size() != n * n) throw ShapeError("linear dynamics: matrix must be n x n");
}

LinearDynamics LinearDynamics::scalar(std::size_t n, double lambda) {
  std::vector<double> a(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) a[i * n + i] = lambda;
  return LinearDynamics(n, std::move(a));
}

void LinearDynamics::rhs(std::span<const double> x, std::span<double> out) {
  for (std::size_t i = 0; i < n_; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n_; ++j) s += a_[i * n_ + j] * x[j];
    out[i] = s;
  }
}

void LinearDynamics::rhs_jvp(std::span<const double>, std::span<const double> dx, std::span<double> out) {
  rhs(dx, out);
}

void LinearDynamics::rhs_vjp(std::span<const double>, std::span<const double> w, std::span<double> out) {
  for (std::size_t j = 0; j < n_; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i) s += a_[i * n_ + j] * w[i];
    out[j] = s;
  }
}

std::vector<double> ks_rhs(std::span<const double> field, const KSParams& p, std::size_t nx) {
  KSDynamics f(nx, p);
  std::vector<double> out(nx);
  f.rhs(field, out);
  return out;
}

std::vector<double> ns_rhs(std::span<const double> vorticity, const NSParams& p, std::size_t nx, std::size_t ny) {
  NSDynamics f(nx, ny, p);
  std::vector<double> out(nx * ny);
  f.rhs(vorticity, out);
  return out;
}

std::unique_ptr<Dynamics> make_dynamics(const GridSpec& grid, const SystemParams& params) {
  grid.validate();
  switch (grid.system) {
    case SystemKind::lorenz: return std::make_unique<LorenzDynamics>(params.lorenz);
    case SystemKind::ks: {
      KSParams p = params.ks;
      p.domain_length = grid.length[0];
      return std::make_unique<KSDynamics>(grid.resolution[0], p);
    }
    case SystemKind::ns: return std::make_unique<NSDynamics>(grid.resolution[0], grid.resolution[1], params.ns);
  }
  throw ConfigError("make_dynamics: unknown system");
}

}  // namespace trajproj

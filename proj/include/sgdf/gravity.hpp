#pragma once

// Free-space gravitational potential by zero-padded FFT convolution
// (Hockney-Eastwood), softened orbiting external masses, acceleration and
// field energy.
//
// The self potential V_s = G_kernel * rho is evaluated on the box plus one
// ghost layer per side, so the acceleration -grad V uses the true exterior
// values rather than a mirror rule.

#include <sgdf/errors.hpp>
#include <sgdf/grid.hpp>

#include <fftw3.h>

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <numbers>
#include <vector>

namespace sgdf {

/// Softened point mass on a prescribed circular orbit in the x1-x2 plane:
/// p(t) = center + R (cos(w t + phase), sin(w t + phase), 0).
struct ExternalMass {
  double mass = 0.0;
  double orbit_radius = 0.0;
  double angular_rate = 0.0;
  double phase = 0.0;
  double softening = 0.0;
  std::array<double, 3> center{};

  std::array<double, 3> position(double t) const {
    const double a = angular_rate * t + phase;
    return {center[0] + orbit_radius * std::cos(a), center[1] + orbit_radius * std::sin(a), center[2]};
  }

  std::array<double, 3> velocity(double t) const {
    const double a = angular_rate * t + phase;
    return {-orbit_radius * angular_rate * std::sin(a), orbit_radius * angular_rate * std::cos(a), 0.0};
  }

  void validate() const {
    if (!(mass >= 0.0)) throw ConfigError("gravity.external", "external mass must be >= 0");
    if (!(softening > 0.0)) throw ConfigError("gravity.external", "softening length must be > 0");
    if (!std::isfinite(orbit_radius) || !std::isfinite(angular_rate) || !std::isfinite(phase))
      throw ConfigError("gravity.external", "trajectory parameters must be finite");
  }
};

namespace detail {

inline double xlogy(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); }

/// Antiderivative of 1/|x| with d^3F/dx dy dz = 1/r, valid for x, y, z >= 0.
inline double inv_r_antiderivative(double x, double y, double z) {
  const double r = std::sqrt(x * x + y * y + z * z);
  if (r == 0.0) return 0.0;
  auto at = [](double a, double num, double den) {
    // a^2/2 * atan(num / den) with the a -> 0 limit taken as 0
    if (a == 0.0) return 0.0;
    return 0.5 * a * a * std::atan2(num, den);
  };
  return xlogy(x * y, z + r) + xlogy(y * z, x + r) + xlogy(z * x, y + r) - at(x, y * z, x * r) -
         at(y, z * x, y * r) - at(z, x * y, z * r);
}

/// Antiderivative of ln|x| in the plane, valid for x, y >= 0.
inline double log_r_antiderivative(double x, double y) {
  const double r2 = x * x + y * y;
  if (r2 == 0.0) return 0.0;
  double f = 0.5 * xlogy(x * y, r2) - 1.5 * x * y;
  if (x > 0.0) f += 0.5 * x * x * std::atan(y / x);
  if (y > 0.0) f += 0.5 * y * y * std::atan(x / y);
  return f;
}

}  // namespace detail

/// Integral of 1/|x| over the box [-a,a] x [-b,b] x [-c,c].
inline double cell_integral_inv_r(double a, double b, double c) {
  double s = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    const double x = (corner & 1) ? a : 0.0;
    const double y = (corner & 2) ? b : 0.0;
    const double z = (corner & 4) ? c : 0.0;
    const int zeros = !(corner & 1) + !(corner & 2) + !(corner & 4);
    s += (zeros % 2 ? -1.0 : 1.0) * detail::inv_r_antiderivative(x, y, z);
  }
  return 8.0 * s;
}

/// Integral of ln|x| over the rectangle [-a,a] x [-b,b].
inline double cell_integral_log_r(double a, double b) {
  return 4.0 * detail::log_r_antiderivative(a, b);
}

template <int Dim>
struct Potential {
  Field<Dim> self;           ///< V_s on the cells
  Field<Dim> external;       ///< V_e on the cells
  Field<Dim> external_rate;  ///< d/dt V_e on the cells, analytic
  /// V_s + V_e on the box extended by one ghost layer, shape (N_a + 2).
  std::vector<double> halo;
  std::vector<double> self_halo;
  std::uint64_t clipped_cells = 0;

  Field<Dim> total() const { return self + external; }
};

template <int Dim>
class GravitySolver {
 public:
  GravitySolver(const Grid<Dim>& g, double G, int padding = 2, std::vector<ExternalMass> ext = {})
      : grid_(g), G_(G), padding_(padding), external_(std::move(ext)) {
    g.validate();
    if (!(G >= 0.0) || !std::isfinite(G)) throw ConfigError("gravity.G", "must be finite and >= 0");
    if (padding < 2) throw ConfigError("gravity.padding", "padding factor must be >= 2");
    for (const auto& m : external_) m.validate();
    std::size_t total = 1;
    for (int a = 0; a < Dim; ++a) {
      fft_[a] = padding * g.cells[a] + 2;
      total *= fft_[a];
    }
    real_size_ = total;
    complex_size_ = total / fft_[Dim - 1] * (fft_[Dim - 1] / 2 + 1);
    real_.reset(fftw_alloc_real(real_size_));
    spec_.reset(fftw_alloc_complex(complex_size_));
    int n[Dim];
    for (int a = 0; a < Dim; ++a) n[a] = fft_[a];
    forward_ = fftw_plan_dft_r2c(Dim, n, real_.get(), spec_.get(), FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_c2r(Dim, n, spec_.get(), real_.get(), FFTW_ESTIMATE);
    build_kernel();
  }

  GravitySolver(const GravitySolver&) = delete;
  GravitySolver& operator=(const GravitySolver&) = delete;

  ~GravitySolver() {
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }

  const Grid<Dim>& grid() const { return grid_; }
  double G() const { return G_; }
  int padding() const { return padding_; }
  const std::vector<ExternalMass>& external_masses() const { return external_; }
  std::array<int, Dim> fft_shape() const { return fft_; }

  /// Discrete Green convolution of an arbitrary (signed) density on the box
  /// plus one ghost layer. Exactly linear in rho.
  std::vector<double> convolve(const Field<Dim>& rho) const {
    if (!(rho.grid() == grid_) || rho.components() != 1)
      throw ContractViolation("gravity: density does not match the solver grid");
    std::fill(real_.get(), real_.get() + real_size_, 0.0);
    for_each_cell(grid_, [&](const Index<Dim>& idx, std::size_t lin) {
      real_[padded_linear(idx)] = rho(0, lin);
    });
    fftw_execute(forward_);
    for (std::size_t k = 0; k < complex_size_; ++k) {
      const std::complex<double> a(spec_[k][0], spec_[k][1]);
      const std::complex<double> b = a * kernel_hat_[k];
      spec_[k][0] = b.real();
      spec_[k][1] = b.imag();
    }
    fftw_execute(backward_);
    const double scale = 1.0 / static_cast<double>(real_size_);
    std::vector<double> out(halo_size());
    for_each_halo([&](const Index<Dim>& idx, std::size_t hlin) {
      Index<Dim> wrapped{};
      for (int a = 0; a < Dim; ++a) wrapped[a] = (idx[a] + fft_[a]) % fft_[a];
      out[hlin] = real_[padded_linear(wrapped)] * scale;
    });
    return out;
  }

  /// V = V_s + V_e at time t. Negative densities (possible only through
  /// round-off) are clipped to zero for the solve and counted.
  Potential<Dim> solve_potential(const Field<Dim>& rho, double t) const {
    Field<Dim> src = rho;
    std::uint64_t clipped = 0;
    for (double& x : src.data())
      if (x < 0.0) {
        x = 0.0;
        ++clipped;
      }
    Potential<Dim> pot;
    pot.clipped_cells = clipped;
    pot.self_halo = G_ > 0.0 ? convolve(src) : std::vector<double>(halo_size(), 0.0);
    pot.self = Field<Dim>::scalar(grid_);
    pot.external = Field<Dim>::scalar(grid_);
    pot.external_rate = Field<Dim>::scalar(grid_);
    pot.halo = pot.self_halo;
    for_each_halo([&](const Index<Dim>& idx, std::size_t hlin) {
      Vec<Dim> x{};
      for (int a = 0; a < Dim; ++a) x[a] = (idx[a] + 0.5) * grid_.spacing(a);
      double ve = 0.0, rate = 0.0;
      external_at(x, t, ve, rate);
      pot.halo[hlin] += ve;
      bool inside = true;
      Index<Dim> in{};
      for (int a = 0; a < Dim; ++a) {
        inside = inside && idx[a] >= 0 && idx[a] < grid_.cells[a];
        in[a] = idx[a];
      }
      if (inside) {
        const std::size_t lin = grid_.linear(in);
        pot.self(0, lin) = pot.self_halo[hlin];
        pot.external(0, lin) = ve;
        pot.external_rate(0, lin) = rate;
      }
    });
    return pot;
  }

  /// Potential of the external masses only at x and its time derivative.
  void external_at(const Vec<Dim>& x, double t, double& value, double& rate) const {
    value = 0.0;
    rate = 0.0;
    for (const auto& m : external_) {
      const auto p = m.position(t);
      const auto pv = m.velocity(t);
      double d2 = m.softening * m.softening;
      for (int a = 0; a < Dim; ++a) d2 += (x[a] - p[a]) * (x[a] - p[a]);
      double dp = 0.0;  // dV/dp . pdot
      if constexpr (Dim == 3) {
        value += -G_ * m.mass / std::sqrt(d2);
        for (int a = 0; a < Dim; ++a) dp += -G_ * m.mass * (x[a] - p[a]) / (d2 * std::sqrt(d2)) * pv[a];
      } else {
        value += G_ * m.mass * std::log(d2);
        for (int a = 0; a < Dim; ++a) dp += -2.0 * G_ * m.mass * (x[a] - p[a]) / d2 * pv[a];
      }
      rate += dp;
    }
  }

  /// -grad V by centred differences that read the ghost layer of `halo`.
  Field<Dim> acceleration(const std::vector<double>& halo) const {
    Field<Dim> acc = Field<Dim>::vector(grid_);
    for_each_cell(grid_, [&](const Index<Dim>& idx, std::size_t lin) {
      for (int a = 0; a < Dim; ++a) {
        Index<Dim> up = idx, dn = idx;
        ++up[a];
        --dn[a];
        acc(a, lin) = -(halo[halo_linear(up)] - halo[halo_linear(dn)]) / (2.0 * grid_.spacing(a));
      }
    });
    return acc;
  }

  /// integral of |grad V_s|^2 / (8 pi G) over all space: face-difference
  /// quadrature on the box plus the exterior tail -oint V dV/dn / (8 pi G).
  /// In d = 2 the exterior integral diverges for nonzero mass; the planar
  /// mode reports the bounded part -1/2 int rho V_s instead.
  double field_energy(const Potential<Dim>& pot, const Field<Dim>& rho) const {
    if (G_ == 0.0) return 0.0;
    if constexpr (Dim == 2) {
      return -0.5 * inner(rho, pot.self);
    } else {
      const auto& hv = pot.self_halo;
      double inside = 0.0, tail = 0.0;
      for_each_cell(grid_, [&](const Index<Dim>& idx, std::size_t) {
        for (int a = 0; a < Dim; ++a) {
          const double h = grid_.spacing(a);
          const double face_area = grid_.cell_volume() / h;
          Index<Dim> up = idx;
          ++up[a];
          const double v0 = hv[halo_linear(idx)], v1 = hv[halo_linear(up)];
          const double g = (v1 - v0) / h;
          const bool boundary_face = idx[a] + 1 == grid_.cells[a];
          inside += (boundary_face ? 0.5 : 1.0) * g * g * face_area * h;
          if (boundary_face) tail += 0.5 * (v0 + v1) * g * face_area;
          if (idx[a] == 0) {
            Index<Dim> dn = idx;
            --dn[a];
            const double vg = hv[halo_linear(dn)];
            const double gl = (v0 - vg) / h;
            inside += 0.5 * gl * gl * face_area * h;
            tail += 0.5 * (v0 + vg) * (-gl) * face_area;
          }
        }
      });
      return (inside - tail) / (8.0 * std::numbers::pi * G_);
    }
  }

  std::size_t halo_size() const {
    std::size_t s = 1;
    for (int a = 0; a < Dim; ++a) s *= static_cast<std::size_t>(grid_.cells[a] + 2);
    return s;
  }

  /// Linear index into a halo array; idx components range over [-1, N_a].
  std::size_t halo_linear(const Index<Dim>& idx) const {
    std::size_t lin = 0;
    for (int a = 0; a < Dim; ++a) lin = lin * (grid_.cells[a] + 2) + (idx[a] + 1);
    return lin;
  }

 private:
  struct FftwRealDeleter {
    void operator()(double* p) const { fftw_free(p); }
  };
  struct FftwComplexDeleter {
    void operator()(fftw_complex* p) const { fftw_free(p); }
  };

  template <class F>
  void for_each_halo(F&& f) const {
    Index<Dim> ext{};
    for (int a = 0; a < Dim; ++a) ext[a] = grid_.cells[a] + 2;
    const std::size_t n = halo_size();
    Index<Dim> idx{};
    for (int a = 0; a < Dim; ++a) idx[a] = -1;
    for (std::size_t lin = 0; lin < n; ++lin) {
      f(static_cast<const Index<Dim>&>(idx), lin);
      for (int a = Dim - 1; a >= 0; --a) {
        if (++idx[a] < ext[a] - 1) break;
        idx[a] = -1;
      }
    }
  }

  std::size_t padded_linear(const Index<Dim>& idx) const {
    std::size_t lin = 0;
    for (int a = 0; a < Dim; ++a) lin = lin * fft_[a] + idx[a];
    return lin;
  }

  double kernel_value(const Index<Dim>& offset) const {
    bool origin = true;
    double r2 = 0.0;
    for (int a = 0; a < Dim; ++a) {
      const double x = offset[a] * grid_.spacing(a);
      r2 += x * x;
      origin = origin && offset[a] == 0;
    }
    if constexpr (Dim == 3) {
      if (origin)
        return -G_ * cell_integral_inv_r(0.5 * grid_.spacing(0), 0.5 * grid_.spacing(1),
                                         0.5 * grid_.spacing(2));
      return -G_ * grid_.cell_volume() / std::sqrt(r2);
    } else {
      if (origin)
        return 2.0 * G_ * cell_integral_log_r(0.5 * grid_.spacing(0), 0.5 * grid_.spacing(1));
      return G_ * grid_.cell_volume() * std::log(r2);
    }
  }

  void build_kernel() {
    std::fill(real_.get(), real_.get() + real_size_, 0.0);
    Index<Dim> idx{};
    for (std::size_t lin = 0; lin < real_size_; ++lin) {
      Index<Dim> off{};
      for (int a = 0; a < Dim; ++a) off[a] = idx[a] <= fft_[a] / 2 ? idx[a] : idx[a] - fft_[a];
      real_[lin] = kernel_value(off);
      for (int a = Dim - 1; a >= 0; --a) {
        if (++idx[a] < fft_[a]) break;
        idx[a] = 0;
      }
    }
    fftw_execute(forward_);
    kernel_hat_.resize(complex_size_);
    for (std::size_t k = 0; k < complex_size_; ++k) kernel_hat_[k] = {spec_[k][0], spec_[k][1]};
  }

  Grid<Dim> grid_;
  double G_;
  int padding_;
  std::vector<ExternalMass> external_;
  std::array<int, Dim> fft_{};
  std::size_t real_size_ = 0;
  std::size_t complex_size_ = 0;
  std::unique_ptr<double[], FftwRealDeleter> real_;
  std::unique_ptr<fftw_complex[], FftwComplexDeleter> spec_;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
  std::vector<std::complex<double>> kernel_hat_;
};

/// Convenience: -grad of the total potential.
template <int Dim>
Field<Dim> gravitational_acceleration(const GravitySolver<Dim>& solver, const Potential<Dim>& pot) {
  return solver.acceleration(pot.halo);
}

}  // namespace sgdf

#pragma once

// Eulerian kinematics of the return mapping: transport of xi, evolution of
// the Jacobian J = det F = 1 / det(grad xi), and the actual mass density
// rho = rho_ref(xi) / J.

#include <sgdf/errors.hpp>
#include <sgdf/grid.hpp>

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>

namespace sgdf {

enum class Limiter { none, minmod };

struct KinematicOptions {
  Limiter limiter = Limiter::none;
  double j_floor = 1e-6;
};

template <int Dim>
struct KinematicState {
  Field<Dim> xi;  ///< referential coordinates X = xi(t, x)
  Field<Dim> J;   ///< det F, evolved by its own transport equation
  double t = 0.0;

  static KinematicState identity(const Grid<Dim>& g) {
    return {Field<Dim>::coordinates(g), Field<Dim>::scalar(g, 1.0), 0.0};
  }
};

namespace detail {

inline double minmod(double a, double b) {
  if (a * b <= 0.0) return 0.0;
  return std::abs(a) < std::abs(b) ? a : b;
}

}  // namespace detail

/// Upwind approximation of -(v . grad) f, componentwise.
template <int Dim>
Field<Dim> advection_rate(const Field<Dim>& f, const Field<Dim>& v, Limiter limiter) {
  if (v.components() != Dim || !(v.grid() == f.grid()))
    throw ContractViolation("advection_rate: velocity/field shape mismatch");
  const auto& g = f.grid();
  Field<Dim> out(g, f.parities());
  for_each_cell(g, [&](const Index<Dim>& idx, std::size_t lin) {
    for (int c = 0; c < f.components(); ++c) {
      double rate = 0.0;
      for (int a = 0; a < Dim; ++a) {
        const double va = v(a, lin);
        if (va == 0.0) continue;
        const double h = g.spacing(a);
        auto at = [&](int off) { return f.shifted(c, idx, lin, a, off); };
        double d;
        if (limiter == Limiter::none) {
          d = va > 0.0 ? (at(0) - at(-1)) / h : (at(1) - at(0)) / h;
        } else if (va > 0.0) {
          const double fm2 = at(-2), fm1 = at(-1), f0 = at(0), fp1 = at(1);
          const double right = f0 + 0.5 * detail::minmod(f0 - fm1, fp1 - f0);
          const double left = fm1 + 0.5 * detail::minmod(fm1 - fm2, f0 - fm1);
          d = (right - left) / h;
        } else {
          const double fm1 = at(-1), f0 = at(0), fp1 = at(1), fp2 = at(2);
          const double right = fp1 - 0.5 * detail::minmod(fp1 - f0, fp2 - fp1);
          const double left = f0 - 0.5 * detail::minmod(f0 - fm1, fp1 - f0);
          d = (right - left) / h;
        }
        rate -= va * d;
      }
      out(c, lin) = rate;
    }
  });
  return out;
}

/// Courant number dt * sum_a max|v_a| / h_a.
template <int Dim>
double courant_number(const Field<Dim>& v, double dt) {
  double s = 0.0;
  for (int a = 0; a < Dim; ++a) {
    double m = 0.0;
    for (double x : v.component(a)) m = std::max(m, std::abs(x));
    s += m / v.grid().spacing(a);
  }
  return s * dt;
}

/// One SSP-RK2 step of f_t + (v . grad) f = 0 with frozen v.
template <int Dim>
Field<Dim> transport(const Field<Dim>& f, const Field<Dim>& v, double dt, Limiter limiter) {
  const double cfl = courant_number(v, dt);
  if (cfl > 1.0) {
    std::ostringstream os;
    os << "transport: Courant number " << cfl << " exceeds 1";
    throw StabilityRejection(os.str());
  }
  Field<Dim> stage = f;
  stage.axpy(dt, advection_rate(f, v, limiter));
  Field<Dim> second = stage;
  second.axpy(dt, advection_rate(stage, v, limiter));
  Field<Dim> out = f;
  out *= 0.5;
  out.axpy(0.5, second);
  return out;
}

template <int Dim>
KinematicState<Dim> advect_xi(const KinematicState<Dim>& state, const Field<Dim>& v, double dt,
                              const KinematicOptions& opt = {}) {
  KinematicState<Dim> next = state;
  next.xi = transport(state.xi, v, dt, opt.limiter);
  next.t = state.t + dt;
  return next;
}

/// J_t = J div v - v . grad J: upwind transport followed by the exact
/// stretching factor exp(dt div v), which keeps J positive.
template <int Dim>
Field<Dim> evolve_J(const Field<Dim>& J, const Field<Dim>& v, double dt,
                    const KinematicOptions& opt = {}) {
  Field<Dim> out = transport(J, v, dt, opt.limiter);
  const Field<Dim> div = divergence(v);
  double jmin = INFINITY;
  for (std::size_t k = 0; k < out.cells(); ++k) {
    out(0, k) *= std::exp(dt * div(0, k));
    jmin = std::min(jmin, out(0, k));
  }
  if (!(jmin > opt.j_floor)) {
    std::ostringstream os;
    os << "evolve_J: min J = " << jmin << " fell below the floor " << opt.j_floor;
    throw PositivityFailure(os.str());
  }
  return out;
}

/// Determinant of a Dim x Dim row-major matrix.
template <int Dim>
double determinant(const double* m) {
  if constexpr (Dim == 2) {
    return m[0] * m[3] - m[1] * m[2];
  } else {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
  }
}

/// 1 / det(grad xi) by centred differences.
template <int Dim>
Field<Dim> jacobian_from_xi(const Field<Dim>& xi) {
  if (xi.components() != Dim) throw ContractViolation("jacobian_from_xi: expects a vector field");
  const Field<Dim> gx = gradient(xi);
  Field<Dim> J = Field<Dim>::scalar(xi.grid());
  double m[Dim * Dim];
  for (std::size_t lin = 0; lin < xi.cells(); ++lin) {
    for (int k = 0; k < Dim * Dim; ++k) m[k] = gx(k, lin);
    const double det = determinant<Dim>(m);
    if (!(det > 0.0)) throw PositivityFailure("jacobian_from_xi: det(grad xi) <= 0");
    J(0, lin) = 1.0 / det;
  }
  return J;
}

/// Mean |J - 1/det(grad xi)|; a consistency diagnostic between the two routes.
template <int Dim>
double jacobian_consistency(const Field<Dim>& xi, const Field<Dim>& J) {
  const Field<Dim> gx = gradient(xi);
  double m[Dim * Dim];
  double s = 0.0;
  for (std::size_t lin = 0; lin < xi.cells(); ++lin) {
    for (int k = 0; k < Dim * Dim; ++k) m[k] = gx(k, lin);
    s += std::abs(J(0, lin) - 1.0 / determinant<Dim>(m));
  }
  return s / static_cast<double>(xi.cells());
}

/// Referential density sampled on the reference grid (same box as the
/// domain), evaluated at arbitrary X by multilinear interpolation.
template <int Dim>
class ReferenceField {
 public:
  ReferenceField() = default;
  explicit ReferenceField(Field<Dim> values) : values_(std::move(values)) {}

  const Field<Dim>& values() const { return values_; }

  /// Out-of-box points on wall axes are clamped to the box and counted.
  double sample(const Vec<Dim>& X, std::uint64_t* clamps = nullptr) const {
    const auto& g = values_.grid();
    std::array<int, Dim> i0{};
    std::array<double, Dim> w{};
    bool clamped = false;
    for (int a = 0; a < Dim; ++a) {
      const int n = g.cells[a];
      const double h = g.spacing(a);
      const double L = g.length[a];
      double x = X[a];
      if (g.boundary[a] == Boundary::periodic) {
        x = x - L * std::floor(x / L);
        const double s = x / h - 0.5;
        const int lo = static_cast<int>(std::floor(s));
        w[a] = s - lo;
        i0[a] = lo;  // may be -1 or n-1; wrapped below
      } else {
        if (x < 0.0 || x > L) {
          clamped = true;
          x = std::clamp(x, 0.0, L);
        }
        const double s = std::clamp(x / h - 0.5, 0.0, static_cast<double>(n - 1));
        const int lo = std::min(static_cast<int>(std::floor(s)), n - 2);
        w[a] = s - lo;
        i0[a] = lo;
      }
    }
    if (clamped && clamps) ++*clamps;
    double acc = 0.0;
    for (int corner = 0; corner < (1 << Dim); ++corner) {
      double weight = 1.0;
      Index<Dim> idx{};
      for (int a = 0; a < Dim; ++a) {
        const int up = (corner >> a) & 1;
        weight *= up ? w[a] : 1.0 - w[a];
        int i = i0[a] + up;
        const int n = g.cells[a];
        if (g.boundary[a] == Boundary::periodic) i = ((i % n) + n) % n;
        idx[a] = i;
      }
      if (weight != 0.0) acc += weight * values_(0, g.linear(idx));
    }
    return acc;
  }

 private:
  Field<Dim> values_;
};

/// rho(x) = rho_ref(xi(x)) / J(x).
template <int Dim>
Field<Dim> density(const Field<Dim>& xi, const Field<Dim>& J, const ReferenceField<Dim>& rho_ref,
                   std::uint64_t* clamps = nullptr) {
  Field<Dim> rho = Field<Dim>::scalar(xi.grid());
  for (std::size_t lin = 0; lin < xi.cells(); ++lin) {
    if (!(J(0, lin) > 0.0)) throw PositivityFailure("density: J <= 0");
    Vec<Dim> X{};
    for (int a = 0; a < Dim; ++a) X[a] = xi(a, lin);
    rho(0, lin) = rho_ref.sample(X, clamps) / J(0, lin);
  }
  return rho;
}

}  // namespace sgdf

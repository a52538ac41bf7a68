#pragma once

// Material law catalogue for the barotropic Kelvin-Voigt fluid: stored energy
// phi_ref(X, J, c) = phi_0(J) - p_h(X) J + phi_1(c), pressure p = -d_J phi,
// Newtonian and
// hyperviscous (multipolar) stresses and their dissipation rates.

#include <sgdf/errors.hpp>
#include <sgdf/grid.hpp>
#include <sgdf/kinematics.hpp>

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace sgdf {

enum class VolumetricPreset { power_law, double_well };

inline std::string to_string(VolumetricPreset p) {
  return p == VolumetricPreset::power_law ? "power-law" : "double-well";
}

/// phi_0(J) = eps_phi / J^alpha + kappa (J - 1)^2 [+ A (J - Ja)^2 (J - Jb)^2].
///
/// The double-well term models a volumetric phase transition; with A large
/// enough phi_0 loses convexity between Ja and Jb and the pressure becomes
/// non-monotone there.
struct VolumetricEnergy {
  VolumetricPreset preset = VolumetricPreset::power_law;
  double eps_phi = 1.0;
  double alpha = 2.0;
  double kappa = 1.0;
  double well_height = 50.0;
  double well_a = 0.8;
  double well_b = 1.4;

  bool has_well() const { return preset == VolumetricPreset::double_well; }

  double value(double J) const {
    double v = eps_phi / std::pow(J, alpha) + kappa * (J - 1.0) * (J - 1.0);
    if (has_well()) {
      const double g = (J - well_a) * (J - well_b);
      v += well_height * g * g;
    }
    return v;
  }

  double first(double J) const {
    double d = -alpha * eps_phi / std::pow(J, alpha + 1.0) + 2.0 * kappa * (J - 1.0);
    if (has_well()) {
      const double g = (J - well_a) * (J - well_b);
      d += 2.0 * well_height * g * (2.0 * J - well_a - well_b);
    }
    return d;
  }

  double second(double J) const {
    double d = alpha * (alpha + 1.0) * eps_phi / std::pow(J, alpha + 2.0) + 2.0 * kappa;
    if (has_well()) {
      const double g = (J - well_a) * (J - well_b);
      const double dg = 2.0 * J - well_a - well_b;
      d += 2.0 * well_height * (dg * dg + 2.0 * g);
    }
    return d;
  }

  void validate() const {
    if (!(eps_phi > 0.0)) throw ConfigError("material.eps_phi", "must be > 0 (coercivity eps/J^alpha)");
    if (!(alpha > 1.0)) throw ConfigError("material.alpha", "must be > 1 (coercivity eps/J^alpha, alpha > 1)");
    if (!(kappa >= 0.0)) throw ConfigError("material.kappa", "must be >= 0");
    if (has_well()) {
      if (!(well_height >= 0.0)) throw ConfigError("material.well_height", "must be >= 0");
      if (!(well_a > 0.0 && well_b > well_a))
        throw ConfigError("material.well_b", "double-well requires 0 < well_a < well_b");
    }
  }
};

/// phi_1(c) = (modulus / 2) |c - target|^2, uniformly convex in c when
/// modulus > 0.
struct MixingEnergy {
  double modulus = 1.0;
  std::vector<double> target;

  double value(std::span<const double> c) const {
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const double d = c[i] - target_at(i);
      s += d * d;
    }
    return 0.5 * modulus * s;
  }

  /// d phi_1 / d c_i
  double derivative(std::span<const double> c, std::size_t i) const {
    return modulus * (c[i] - target_at(i));
  }

  double target_at(std::size_t i) const { return i < target.size() ? target[i] : 0.0; }
};

/// nu(c, J) = base, or the affine blend sum_i c_i nu_i over species with c
/// clamped to the simplex; optionally scaled by a J-dependent hook.
struct ViscosityLaw {
  double base = 0.0;
  std::vector<double> per_species;
  std::function<double(double)> pressure_hook;

  double at(std::span<const double> c, double J) const {
    double nu = base;
    if (!per_species.empty()) {
      double sum = 0.0, acc = 0.0;
      for (std::size_t i = 0; i < per_species.size() && i < c.size(); ++i) {
        const double ci = std::max(c[i], 0.0);
        sum += ci;
        acc += ci * per_species[i];
      }
      nu = sum > 0.0 ? acc / sum : base;
    }
    if (pressure_hook) nu *= pressure_hook(J);
    return nu;
  }

  double infimum() const {
    if (per_species.empty()) return base;
    double m = per_species.front();
    for (double x : per_species) m = std::min(m, x);
    return m;
  }

  double supremum() const {
    if (per_species.empty()) return base;
    double m = per_species.front();
    for (double x : per_species) m = std::max(m, x);
    return m;
  }
};

template <int Dim>
struct MaterialLaw {
  VolumetricEnergy volumetric;
  MixingEnergy mixing;
  ViscosityLaw nu1;
  ViscosityLaw nu2;
  double q = 4.0;
  ReferenceField<Dim> rho_ref;
  /// Optional referential prestress p_h(X); adds p_h(xi) to the pressure.
  /// Used to start in hydrostatic balance from xi = identity, J = 1.
  ReferenceField<Dim> prestress;

  bool has_prestress() const { return prestress.values().components() > 0; }

  double phi(double J, std::span<const double> c) const {
    return volumetric.value(J) + mixing.value(c);
  }
  double dphi_dJ(double J) const { return volumetric.first(J); }
  double d2phi_dJ2(double J) const { return volumetric.second(J); }

  /// Checks the standing assumptions on the data. q > 2 is accepted here so
  /// the q = 2 debug mode stays reachable from code; configs demand q > 3.
  void validate() const {
    volumetric.validate();
    if (!(nu1.infimum() > 0.0)) throw ConfigError("material.nu1", "must be > 0 (inf nu1 > 0)");
    if (!(nu2.infimum() > 0.0)) throw ConfigError("material.nu2", "must be > 0 (inf nu2 > 0)");
    if (!(q >= 2.0)) throw ConfigError("material.q", "must be >= 2");
    if (!(mixing.modulus >= 0.0)) throw ConfigError("mixture.modulus", "must be >= 0");
    for (double r : rho_ref.values().data())
      if (!(r > 0.0)) throw ConfigError("scenario", "referential density must be > 0 everywhere");
    if (has_prestress() && !prestress.values().all_finite())
      throw ConfigError("scenario", "prestress must be finite");
  }
};

namespace detail {

template <int Dim>
std::span<const double> species_at(const Field<Dim>& c, std::size_t lin, std::vector<double>& buf) {
  buf.resize(c.components());
  for (int i = 0; i < c.components(); ++i) buf[i] = c(i, lin);
  return buf;
}

}  // namespace detail

namespace detail {

template <int Dim>
Vec<Dim> point_at(const Field<Dim>& xi, std::size_t lin) {
  Vec<Dim> X{};
  for (int a = 0; a < Dim; ++a) X[a] = xi(a, lin);
  return X;
}

}  // namespace detail

/// p_h(xi(x)), zero without prestress.
template <int Dim>
Field<Dim> prestress_field(const Field<Dim>& xi, const MaterialLaw<Dim>& law) {
  Field<Dim> out = Field<Dim>::scalar(xi.grid());
  if (!law.has_prestress()) return out;
  for (std::size_t k = 0; k < xi.cells(); ++k) out(0, k) = law.prestress.sample(detail::point_at(xi, k));
  return out;
}

/// p = -d_J phi_ref(xi, J, c).
template <int Dim>
Field<Dim> pressure(const Field<Dim>& J, const Field<Dim>& /*c*/, const Field<Dim>& xi,
                    const MaterialLaw<Dim>& law) {
  Field<Dim> p = prestress_field(xi, law);
  for (std::size_t k = 0; k < J.cells(); ++k) {
    const double j = J(0, k);
    if (!(j > 0.0)) throw PositivityFailure("pressure: J <= 0");
    p(0, k) -= law.dphi_dJ(j);
  }
  return p;
}

/// Squared sound speed J phi''(J) / rho, clipped at zero in spinodal regions.
template <int Dim>
Field<Dim> sound_speed_squared(const Field<Dim>& J, const Field<Dim>& rho,
                               const MaterialLaw<Dim>& law) {
  Field<Dim> cs2 = Field<Dim>::scalar(J.grid());
  for (std::size_t k = 0; k < J.cells(); ++k)
    cs2(0, k) = std::max(0.0, J(0, k) * law.d2phi_dJ2(J(0, k)) / rho(0, k));
  return cs2;
}

/// phi_ref(xi, J, c) / J, the actual stored energy per unit volume.
template <int Dim>
Field<Dim> stored_energy_density(const Field<Dim>& J, const Field<Dim>& c, const Field<Dim>& xi,
                                 const MaterialLaw<Dim>& law) {
  Field<Dim> out = prestress_field(xi, law);
  std::vector<double> buf;
  for (std::size_t k = 0; k < J.cells(); ++k) {
    const double j = J(0, k);
    out(0, k) = law.phi(j, detail::species_at(c, k, buf)) / j - out(0, k);
  }
  return out;
}

template <int Dim>
Field<Dim> viscosity_field(const ViscosityLaw& nu, const Field<Dim>& J, const Field<Dim>& c) {
  Field<Dim> out = Field<Dim>::scalar(J.grid());
  std::vector<double> buf;
  for (std::size_t k = 0; k < J.cells(); ++k) out(0, k) = nu.at(detail::species_at(c, k, buf), J(0, k));
  return out;
}

/// nu1(xi, c) e(v).
template <int Dim>
Field<Dim> newtonian_stress(const Field<Dim>& v, const Field<Dim>& c, const Field<Dim>& J,
                            const MaterialLaw<Dim>& law) {
  Field<Dim> e = sym_grad(v);
  const Field<Dim> nu = viscosity_field(law.nu1, J, c);
  for (int comp = 0; comp < e.components(); ++comp)
    for (std::size_t k = 0; k < e.cells(); ++k) e(comp, k) *= nu(0, k);
  return e;
}

/// div(nu e(v)) for a given viscosity field; the Newtonian force density.
template <int Dim>
Field<Dim> newtonian_force(const Field<Dim>& v, const Field<Dim>& nu) {
  Field<Dim> e = sym_grad(v);
  for (int comp = 0; comp < e.components(); ++comp)
    for (std::size_t k = 0; k < e.cells(); ++k) e(comp, k) *= nu(0, k);
  return divergence(e);
}

/// Pointwise hyperviscous modulus nu2 |grad e(v)|^(q-2).
template <int Dim>
Field<Dim> hyperviscous_coefficient(const Field<Dim>& v, const Field<Dim>& c, const Field<Dim>& J,
                                    const MaterialLaw<Dim>& law) {
  const Field<Dim> ge = grad_of_tensor(sym_grad(v));
  Field<Dim> kappa = viscosity_field(law.nu2, J, c);
  const double expo = law.q - 2.0;
  for (std::size_t k = 0; k < kappa.cells(); ++k) {
    if (expo == 0.0) continue;
    double s = 0.0;
    for (int comp = 0; comp < ge.components(); ++comp) s += ge(comp, k) * ge(comp, k);
    kappa(0, k) *= s > 0.0 ? std::pow(s, 0.5 * expo) : 0.0;
  }
  return kappa;
}

/// -div div(kappa grad e(v)) with a frozen coefficient field kappa. With
/// kappa = nu2 |grad e(v)|^(q-2) this is the hyperviscous force density.
template <int Dim>
Field<Dim> frozen_hyperviscous_force(const Field<Dim>& v, const Field<Dim>& kappa) {
  Field<Dim> h = grad_of_tensor(sym_grad(v));
  for (int comp = 0; comp < h.components(); ++comp)
    for (std::size_t k = 0; k < h.cells(); ++k) h(comp, k) *= kappa(0, k);
  Field<Dim> f = divergence(divergence(h));
  f *= -1.0;
  return f;
}

/// Force contribution -div div(nu2 |grad e(v)|^(q-2) grad e(v)). Tested
/// against v it returns minus the hyperviscous dissipation rate exactly.
template <int Dim>
Field<Dim> hyperviscous_force(const Field<Dim>& v, const Field<Dim>& c, const Field<Dim>& J,
                              const MaterialLaw<Dim>& law) {
  return frozen_hyperviscous_force(v, hyperviscous_coefficient(v, c, J, law));
}

/// integral of nu1 |e(v)|^2.
template <int Dim>
double newtonian_dissipation(const Field<Dim>& v, const Field<Dim>& c, const Field<Dim>& J,
                             const MaterialLaw<Dim>& law) {
  const Field<Dim> e = sym_grad(v);
  const Field<Dim> nu = viscosity_field(law.nu1, J, c);
  double s = 0.0;
  for (std::size_t k = 0; k < e.cells(); ++k) {
    double ee = 0.0;
    for (int comp = 0; comp < e.components(); ++comp) ee += e(comp, k) * e(comp, k);
    s += nu(0, k) * ee;
  }
  return s * v.grid().cell_volume();
}

/// integral of nu2 |grad e(v)|^q.
template <int Dim>
double hyperviscous_dissipation(const Field<Dim>& v, const Field<Dim>& c, const Field<Dim>& J,
                                const MaterialLaw<Dim>& law) {
  const Field<Dim> ge = grad_of_tensor(sym_grad(v));
  const Field<Dim> nu = viscosity_field(law.nu2, J, c);
  double s = 0.0;
  for (std::size_t k = 0; k < ge.cells(); ++k) {
    double g2 = 0.0;
    for (int comp = 0; comp < ge.components(); ++comp) g2 += ge(comp, k) * ge(comp, k);
    if (g2 > 0.0) s += nu(0, k) * std::pow(g2, 0.5 * law.q);
  }
  return s * v.grid().cell_volume();
}

/// Inverts p(J) = -phi_0'(J) = target on the monotone branch J in [lo, hi].
inline double invert_pressure(const VolumetricEnergy& e, double target, double lo = 1e-3,
                              double hi = 1e3) {
  auto f = [&](double J) { return -e.first(J) - target; };
  double flo = f(lo), fhi = f(hi);
  if (flo * fhi > 0.0) throw ContractViolation("invert_pressure: target pressure not bracketed");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace sgdf

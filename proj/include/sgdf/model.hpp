#pragma once

// The coupled model (material law, mixture, gravity) and the full simulation
// state advanced by the integrator.

#include <sgdf/constitutive.hpp>
#include <sgdf/gravity.hpp>
#include <sgdf/grid.hpp>
#include <sgdf/kinematics.hpp>
#include <sgdf/mixture.hpp>

#include <cstdint>
#include <functional>
#include <memory>

namespace sgdf {

template <int Dim>
struct Model {
  Grid<Dim> grid;
  MaterialLaw<Dim> law;
  MixtureSpec mixture;
  std::shared_ptr<GravitySolver<Dim>> gravity;
  KinematicOptions kinematics;
  /// When set, v(t) is imposed and the momentum equation is skipped.
  std::function<Field<Dim>(double)> prescribed_velocity;

  void validate() const {
    grid.validate();
    law.validate();
    mixture.validate();
    if (!gravity) throw ContractViolation("model: gravity solver missing");
    if (!(gravity->grid() == grid)) throw ContractViolation("model: gravity grid differs from model grid");
    if (!(law.rho_ref.values().grid() == grid))
      throw ContractViolation("model: reference density grid differs from model grid");
    if (mixture.mobility != MobilityModel::none && !(law.mixing.modulus > 0.0))
      throw ConfigError("mixture.modulus", "must be > 0 (uniform convexity of phi in c)");
  }
};

template <int Dim>
struct SimState {
  double t = 0.0;
  std::uint64_t step = 0;
  Field<Dim> v;
  KinematicState<Dim> kin;
  SpeciesState<Dim> species;
  // derived, refreshed by refresh_derived
  Field<Dim> rho;
  Field<Dim> p;
  Potential<Dim> potential;
  std::uint64_t clamp_count = 0;  ///< cumulative out-of-box reference samples
};

/// Recomputes rho, V, p and mu from (t, v, xi, J, c).
template <int Dim>
void refresh_derived(SimState<Dim>& s, const Model<Dim>& m) {
  std::uint64_t clamps = 0;
  s.rho = density(s.kin.xi, s.kin.J, m.law.rho_ref, &clamps);
  s.clamp_count += clamps;
  s.potential = m.gravity->solve_potential(s.rho, s.t);
  s.p = pressure(s.kin.J, s.species.c, s.kin.xi, m.law);
  s.species.mu = chemical_potential(s.species.c, s.kin.J, s.kin.xi, m.law, m.mixture);
}

/// State at rest in the identity configuration with the given composition.
template <int Dim>
SimState<Dim> initial_state(const Model<Dim>& m, Field<Dim> c, Field<Dim> v = {}) {
  SimState<Dim> s;
  s.kin = KinematicState<Dim>::identity(m.grid);
  s.v = v.components() == Dim ? std::move(v) : Field<Dim>::vector(m.grid);
  s.species.c = std::move(c);
  refresh_derived(s, m);
  return s;
}

}  // namespace sgdf

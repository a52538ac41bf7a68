#pragma once

// Energy ledger, balance residual and conservation report.
//
// Total energy E = kinetic + stored + penalty + coupling + field + external
// coupling, where coupling = int rho V_s, field = -1/2 int rho V_s (the
// discrete Green identity for int |grad V_s|^2 / 8 pi G), and external
// coupling = int rho V_e. The balance reads dE/dt + dissipation = external
// power with external power = int rho dV_e/dt.

#include <sgdf/constitutive.hpp>
#include <sgdf/mixture.hpp>
#include <sgdf/model.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace sgdf {

struct EnergyLedger {
  double t = 0.0;
  double kinetic = 0.0;
  double stored = 0.0;
  double penalty = 0.0;
  double coupling = 0.0;
  double field = 0.0;
  double field_quadrature = 0.0;  ///< gradient quadrature + exterior tail (cross-check)
  double external_coupling = 0.0;
  double viscous = 0.0;  ///< int nu1 |e|^2 + nu2 |grad e|^q
  double diffusive = 0.0;
  double reactive = 0.0;
  double external_power = 0.0;

  double total() const { return kinetic + stored + penalty + coupling + field + external_coupling; }
  double dissipation() const { return viscous + diffusive + reactive; }
};

template <int Dim>
EnergyLedger ledger(const SimState<Dim>& s, const Model<Dim>& m) {
  EnergyLedger L;
  L.t = s.t;
  const auto dv = s.v.grid().cell_volume();
  double ke = 0.0;
  for (std::size_t k = 0; k < s.v.cells(); ++k) {
    double v2 = 0.0;
    for (int a = 0; a < Dim; ++a) v2 += s.v(a, k) * s.v(a, k);
    ke += 0.5 * s.rho(0, k) * v2;
  }
  L.kinetic = ke * dv;
  L.stored = integrate(stored_energy_density(s.kin.J, s.species.c, s.kin.xi, m.law));
  L.penalty = penalty_energy(s.species.c, m.mixture.eps_pen);
  L.coupling = inner(s.rho, s.potential.self);
  L.field = -0.5 * L.coupling;
  L.field_quadrature = m.gravity->field_energy(s.potential, s.rho);
  L.external_coupling = inner(s.rho, s.potential.external);
  L.external_power = inner(s.rho, s.potential.external_rate);
  if (m.prescribed_velocity) {
    L.viscous = 0.0;
  } else {
    L.viscous = newtonian_dissipation(s.v, s.species.c, s.kin.J, m.law) +
                hyperviscous_dissipation(s.v, s.species.c, s.kin.J, m.law);
  }
  L.diffusive = diffusive_dissipation(s.species.c, s.species.mu, m.mixture);
  L.reactive = reactive_dissipation(s.species.mu, m.mixture);
  return L;
}

struct BalanceResidual {
  double absolute = 0.0;  ///< W (energy units per time)
  double relative = 0.0;  ///< |absolute| / max |term|, 0 when every term vanishes
};

/// [E(next) - E(prev)] / dt + mean dissipation - mean external power.
inline BalanceResidual balance_residual(const EnergyLedger& prev, const EnergyLedger& next, double dt) {
  if (!(dt > 0.0)) throw ContractViolation("balance_residual: dt must be > 0");
  const double dE = (next.total() - prev.total()) / dt;
  const double diss = 0.5 * (prev.dissipation() + next.dissipation());
  const double power = 0.5 * (prev.external_power + next.external_power);
  BalanceResidual r;
  r.absolute = dE + diss - power;
  const double terms[] = {(next.kinetic - prev.kinetic) / dt,
                          (next.stored - prev.stored) / dt,
                          (next.penalty - prev.penalty) / dt,
                          (next.coupling - prev.coupling) / dt,
                          (next.field - prev.field) / dt,
                          (next.external_coupling - prev.external_coupling) / dt,
                          0.5 * (prev.viscous + next.viscous),
                          0.5 * (prev.diffusive + next.diffusive),
                          0.5 * (prev.reactive + next.reactive),
                          power};
  double scale = 0.0;
  for (double x : terms) scale = std::max(scale, std::abs(x));
  r.relative = scale > 0.0 ? std::abs(r.absolute) / scale : 0.0;
  return r;
}

struct ConservationReport {
  double mass = 0.0;
  std::vector<double> species;  ///< int c_i
  double simplex_sum_l2 = 0.0;  ///< || sum_i c_i - 1 ||_L2
  double negative_l2 = 0.0;     ///< || min(0, c) ||_L2 over all species
  double min_J = 0.0;
  double j_consistency = 0.0;   ///< mean |J - 1/det(grad xi)|
  std::uint64_t clamp_count = 0;
};

template <int Dim>
ConservationReport conservation_report(const SimState<Dim>& s) {
  ConservationReport r;
  r.mass = integrate(s.rho);
  const auto& c = s.species.c;
  const int n = c.components();
  for (int i = 0; i < n; ++i) r.species.push_back(integrate(c, i));
  double sum2 = 0.0, neg2 = 0.0;
  for (std::size_t k = 0; k < c.cells(); ++k) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      sum += c(i, k);
      if (c(i, k) < 0.0) neg2 += c(i, k) * c(i, k);
    }
    sum2 += (sum - 1.0) * (sum - 1.0);
  }
  const double dv = c.grid().cell_volume();
  r.simplex_sum_l2 = std::sqrt(sum2 * dv);
  r.negative_l2 = std::sqrt(neg2 * dv);
  r.min_J = s.kin.J.min(0);
  r.j_consistency = jacobian_consistency(s.kin.xi, s.kin.J);
  r.clamp_count = s.clamp_count;
  return r;
}

}  // namespace sgdf

#pragma once

// Scenario presets: model and initial state from a RunConfig.
//
//   static-equilibrium  uniform density and composition, v = 0
//   uniform-sphere      ball of rho_in in a light background (relaxes under
//                       self-gravity unless hydrostatic = 1)
//   two-layer-RT        heavy shell over a light core under self-gravity,
//                       interface r = r_c (1 + a cos(m theta) + noise)
//   mixing-box          reaction-diffusion in a prescribed cellular flow
//   tidal               self-gravitating body with orbiting external masses
//
// Desk units: lengths in box units, G = 1 unless configured.

#include <sgdf/config.hpp>
#include <sgdf/constitutive.hpp>
#include <sgdf/gravity.hpp>
#include <sgdf/integrator.hpp>
#include <sgdf/mixture.hpp>
#include <sgdf/model.hpp>

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <type_traits>

namespace sgdf {

template <int Dim>
struct Scenario {
  Model<Dim> model;
  SimState<Dim> state;
};

template <int Dim>
Grid<Dim> make_grid(const RunConfig& c) {
  Grid<Dim> g;
  for (int a = 0; a < Dim; ++a) {
    g.cells[a] = c.cells.at(a);
    g.length[a] = c.length.at(a);
    g.boundary[a] = c.boundary == "periodic" ? Boundary::periodic : Boundary::slip_wall;
  }
  g.validate();
  return g;
}

inline MixtureSpec make_mixture(const RunConfig& c) {
  MixtureSpec s;
  s.n = c.species;
  s.mobility = c.mobility == "maxwell-stefan" ? MobilityModel::maxwell_stefan
               : c.mobility == "none"         ? MobilityModel::none
                                              : MobilityModel::constant;
  s.mobility_matrix = c.mobility_matrix;
  s.ms_modulus = c.ms_modulus;
  for (std::size_t r = 0; r < c.reaction_directions.size(); ++r)
    s.reactions.push_back({c.reaction_directions[r], c.reaction_rates[r]});
  s.normalize_reactions();
  s.eps_pen = c.eps_pen;
  s.solver = {c.solver_tol, c.solver_max_iter};
  s.validate();
  return s;
}

inline StepControl make_step_control(const RunConfig& c) {
  StepControl s;
  s.dt_max = c.dt_max;
  s.cfl = c.cfl;
  s.c_visc = c.c_visc;
  s.c_hyp = c.c_hyp;
  s.max_steps = c.max_steps;
  s.max_retries = c.max_retries;
  s.explicit_viscosity = c.explicit_viscosity;
  s.implicit_hyperviscosity = c.implicit_hyperviscosity;
  s.fixed_dt = c.fixed_dt;
  s.momentum_solver = {c.momentum_tol, c.momentum_max_iter};
  s.validate();
  return s;
}

inline std::vector<ExternalMass> make_externals(const RunConfig& c) {
  std::vector<ExternalMass> out;
  for (std::size_t i = 0; i < c.external_mass.size(); ++i) {
    ExternalMass e;
    e.mass = c.external_mass[i];
    e.orbit_radius = c.external_orbit_radius[i];
    e.angular_rate = c.external_angular_rate[i];
    e.phase = c.external_phase[i];
    e.softening = c.external_softening[i];
    for (int a = 0; a < 3; ++a) e.center[a] = c.external_center.at(a);
    e.validate();
    out.push_back(e);
  }
  return out;
}

namespace detail {

template <int Dim>
double radius_from_centre(const Grid<Dim>& g, const std::type_identity_t<Index<Dim>>& idx) {
  const auto x = g.center(idx);
  double r2 = 0.0;
  for (int a = 0; a < Dim; ++a) {
    const double d = x[a] - 0.5 * g.length[a];
    r2 += d * d;
  }
  return std::sqrt(r2);
}

template <int Dim>
double polar_angle(const Grid<Dim>& g, const std::type_identity_t<Index<Dim>>& idx) {
  const auto x = g.center(idx);
  return std::atan2(x[1] - 0.5 * g.length[1], x[0] - 0.5 * g.length[0]);
}

/// Smoothed Heaviside of s with width w (w = 0: sharp).
inline double smooth_step(double s, double w) {
  if (w <= 0.0) return s > 0.0 ? 1.0 : 0.0;
  return 0.5 * (1.0 + std::tanh(s / w));
}

/// Hydrostatic pressure excess p_h(r) = int_r^Rmax rho g for a radially
/// symmetric density about the box centre, with g(r) = 2 G M(r) / r in 2D
/// and G M(r) / r^2 in 3D, matching the free-space kernels.
template <int Dim>
Field<Dim> radial_hydrostatic_pressure(const Grid<Dim>& g, double G, const std::function<double(double)>& rho) {
  double rmax = 0.0;
  for (int a = 0; a < Dim; ++a) rmax += 0.25 * g.length[a] * g.length[a];
  rmax = std::sqrt(rmax) * 1.01;
  const int nq = 20000;
  const double dr = rmax / nq;
  constexpr double pi = std::numbers::pi;
  auto shell = [&](double r) { return Dim == 2 ? 2 * pi * r : 4 * pi * r * r; };
  auto grav = [&](double M, double r) {
    if (r == 0.0) return 0.0;
    return Dim == 2 ? 2 * G * M / r : G * M / (r * r);
  };
  std::vector<double> M(nq + 1, 0.0), ph(nq + 1, 0.0);
  for (int i = 1; i <= nq; ++i) {
    const double r0 = (i - 1) * dr, r1 = i * dr;
    M[i] = M[i - 1] + 0.5 * dr * (shell(r0) * rho(r0) + shell(r1) * rho(r1));
  }
  for (int i = nq; i > 0; --i) {
    const double r0 = (i - 1) * dr, r1 = i * dr;
    ph[i - 1] = ph[i] + 0.5 * dr * (rho(r1) * grav(M[i], r1) + rho(r0) * grav(M[i - 1], r0));
  }
  Field<Dim> out = Field<Dim>::scalar(g);
  for_each_cell(g, [&](const Index<Dim>& idx, std::size_t lin) {
    const double u = radius_from_centre(g, idx) / dr;
    const int i = std::min(static_cast<int>(u), nq - 1);
    out(0, lin) = ph[i] + (u - i) * (ph[i + 1] - ph[i]);
  });
  return out;
}

template <int Dim>
MaterialLaw<Dim> make_law(const RunConfig& c, Field<Dim> rho_ref) {
  MaterialLaw<Dim> law;
  law.volumetric.preset = c.volumetric == "double_well" ? VolumetricPreset::double_well : VolumetricPreset::power_law;
  law.volumetric.eps_phi = c.eps_phi;
  law.volumetric.alpha = c.alpha;
  law.volumetric.kappa = c.kappa;
  law.volumetric.well_height = c.well_height;
  law.volumetric.well_a = c.well_a;
  law.volumetric.well_b = c.well_b;
  law.nu1.base = c.nu1;
  law.nu1.per_species = c.nu1_species;
  law.nu2.base = c.nu2;
  law.nu2.per_species = c.nu2_species;
  law.q = c.q;
  law.mixing.modulus = c.modulus;
  law.mixing.target = c.target;
  law.rho_ref = ReferenceField<Dim>(std::move(rho_ref));
  return law;
}

/// Species 1 takes `first`. With n >= 3 and an `air` fraction, species 3
/// takes the air and species 2 the rest; otherwise species 2..n share the
/// remainder equally.
template <int Dim>
Field<Dim> species_split(const Grid<Dim>& g, int n, const Field<Dim>& first, const Field<Dim>* air = nullptr) {
  Field<Dim> c = Field<Dim>::species(g, n);
  for (std::size_t k = 0; k < g.size(); ++k) {
    c(0, k) = first(0, k);
    if (air && n >= 3) {
      c(2, k) = std::min((*air)(0, k), 1.0 - first(0, k));
      c(1, k) = 1.0 - c(0, k) - c(2, k);
      continue;
    }
    for (int i = 1; i < n; ++i) c(i, k) = (1.0 - first(0, k)) / (n - 1);
  }
  return c;
}

inline void require_param_range(const RunConfig& c, const std::string& key, double lo, double hi) {
  const double v = c.params.at(key);
  if (!(v >= lo && v <= hi))
    throw ConfigError("scenario." + key, "must lie in [" + format_double(lo) + ", " + format_double(hi) + "]");
}

}  // namespace detail

/// Builds the model and initial state. The config must be normalized.
template <int Dim>
Scenario<Dim> make_scenario(const RunConfig& raw) {
  const RunConfig c = normalize(raw);
  validate(c);
  if (c.dim != Dim) throw ContractViolation("make_scenario: dimension mismatch");
  const Grid<Dim> g = make_grid<Dim>(c);
  const auto& P = c.params;
  const double h = g.min_spacing();
  constexpr double pi = std::numbers::pi;
  std::mt19937_64 rng(c.seed);

  Field<Dim> rho = Field<Dim>::scalar(g);
  Field<Dim> first = Field<Dim>::scalar(g);  // concentration of species 1
  Field<Dim> air = Field<Dim>::scalar(g);    // atmosphere fraction, used when n >= 3
  bool has_air = false;
  std::function<Field<Dim>(double)> prescribed;
  std::function<double(double)> radial;  // unperturbed profile for hydrostatic balance
  bool hydrostatic = false;

  if (c.scenario != "static-equilibrium" && c.species < 2)
    throw ConfigError("mixture.species", "scenario " + c.scenario + " needs at least 2 species");

  if (c.scenario == "static-equilibrium") {
    detail::require_param_range(c, "rho", 1e-12, 1e300);
    for (std::size_t k = 0; k < g.size(); ++k) {
      rho(0, k) = P.at("rho");
      first(0, k) = c.target[0];
    }
  } else if (c.scenario == "uniform-sphere") {
    detail::require_param_range(c, "radius", 0.0, 1e300);
    detail::require_param_range(c, "rho_in", 1e-12, 1e300);
    detail::require_param_range(c, "rho_out", 1e-12, 1e300);
    detail::require_param_range(c, "perturbation", 0.0, 0.9);
    const double R = P.at("radius"), rin = P.at("rho_in"), rout = P.at("rho_out"), eps = P.at("perturbation");
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for_each_cell(g, [&](const Index<Dim>& idx, std::size_t lin) {
      const bool inside = detail::radius_from_centre(g, idx) < R;
      const double noise = eps > 0.0 ? eps * u(rng) : 0.0;
      rho(0, lin) = inside ? rin * (1.0 + noise) : rout;
      first(0, lin) = inside ? 1.0 : 0.0;
      air(0, lin) = inside ? 0.0 : 1.0;
    });
    radial = [=](double r) { return r < R ? rin : rout; };
    hydrostatic = P.at("hydrostatic") != 0.0;
    has_air = true;
  } else if (c.scenario == "two-layer-RT") {
    detail::require_param_range(c, "core_radius", 0.0, 1e300);
    detail::require_param_range(c, "rho_heavy", 1e-12, 1e300);
    detail::require_param_range(c, "rho_light", 1e-12, 1e300);
    detail::require_param_range(c, "rho_air", 1e-12, 1e300);
    detail::require_param_range(c, "amplitude", 0.0, 0.9);
    detail::require_param_range(c, "noise", 0.0, 0.5);
    detail::require_param_range(c, "mode", 0.0, 1e6);
    detail::require_param_range(c, "interface_width", 0.0, 100.0);
    const double rc = P.at("core_radius"), R = P.at("shell_radius");
    if (!(R > rc)) throw ConfigError("scenario.shell_radius", "must exceed core_radius");
    const double rh = P.at("rho_heavy"), rl = P.at("rho_light"), ra = P.at("rho_air");
    const double amp = P.at("amplitude"), mode = P.at("mode"), w = P.at("interface_width") * h;
    std::array<double, 8> na{}, np{};
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < 8; ++k) {
      na[k] = P.at("noise") * u(rng);
      np[k] = pi * u(rng);
    }
    for_each_cell(g, [&](const Index<Dim>& idx, std::size_t lin) {
      const double r = detail::radius_from_centre(g, idx);
      const double th = detail::polar_angle(g, idx);
      double bump = amp * std::cos(mode * th);
      for (int k = 0; k < 8; ++k) bump += na[k] * std::cos((k + 1) * th + np[k]);
      const double ri = rc * (1.0 + bump);
      const double body = detail::smooth_step(R - r, w);
      const double heavy = body * detail::smooth_step(r - ri, w);
      first(0, lin) = heavy;
      air(0, lin) = 1.0 - body;
      rho(0, lin) = ra + (rl - ra) * body + (rh - rl) * heavy;
    });
    radial = [=](double r) {
      const double body = detail::smooth_step(R - r, w);
      return ra + (rl - ra) * body + (rh - rl) * body * detail::smooth_step(r - rc, w);
    };
    hydrostatic = P.at("hydrostatic") != 0.0;
    has_air = true;
  } else if (c.scenario == "mixing-box") {
    detail::require_param_range(c, "rho", 1e-12, 1e300);
    detail::require_param_range(c, "interface", 0.0, 1.0);
    detail::require_param_range(c, "interface_width", 0.0, 100.0);
    const double U = P.at("velocity"), x0 = P.at("interface") * g.length[0], w = P.at("interface_width") * h;
    for_each_cell(g, [&](const Index<Dim>& idx, std::size_t lin) {
      rho(0, lin) = P.at("rho");
      first(0, lin) = detail::smooth_step(x0 - g.center(idx)[0], w);
    });
    // cellular flow, tangential on the walls x = 0, L and y = 0, L
    Field<Dim> v = Field<Dim>::vector(g);
    for_each_cell(g, [&](const Index<Dim>& idx, std::size_t lin) {
      const auto x = g.center(idx);
      const double a = pi * x[0] / g.length[0], b = pi * x[1] / g.length[1];
      v(0, lin) = U * std::sin(a) * std::cos(b);
      v(1, lin) = -U * std::cos(a) * std::sin(b) * g.length[1] / g.length[0];
    });
    prescribed = [v](double) { return v; };
  } else if (c.scenario == "tidal") {
    detail::require_param_range(c, "radius", 0.0, 1e300);
    detail::require_param_range(c, "rho_body", 1e-12, 1e300);
    detail::require_param_range(c, "rho_out", 1e-12, 1e300);
    const double R = P.at("radius"), rb = P.at("rho_body"), ro = P.at("rho_out");
    const double w = 1.5 * h;
    for_each_cell(g, [&](const Index<Dim>& idx, std::size_t lin) {
      const double s = detail::smooth_step(R - detail::radius_from_centre(g, idx), w);
      rho(0, lin) = ro + (rb - ro) * s;
      first(0, lin) = s;
      air(0, lin) = 1.0 - s;
    });
    radial = [=](double r) { return ro + (rb - ro) * detail::smooth_step(R - r, w); };
    hydrostatic = P.at("hydrostatic") != 0.0;
    has_air = true;
  }

  Scenario<Dim> out;
  Model<Dim>& m = out.model;
  m.grid = g;
  m.law = detail::make_law<Dim>(c, rho);
  if (hydrostatic && c.G > 0.0) m.law.prestress = ReferenceField<Dim>(detail::radial_hydrostatic_pressure(g, c.G, radial));
  m.mixture = make_mixture(c);
  m.gravity = std::make_shared<GravitySolver<Dim>>(g, c.G, c.padding, make_externals(c));
  m.kinematics.limiter = c.limiter == "minmod" ? Limiter::minmod : Limiter::none;
  m.kinematics.j_floor = c.j_floor;
  m.prescribed_velocity = prescribed;
  m.validate();

  Field<Dim> v0 = prescribed ? prescribed(0.0) : Field<Dim>::vector(g);
  out.state = initial_state(m, detail::species_split(g, c.species, first, has_air ? &air : nullptr), std::move(v0));
  return out;
}

}  // namespace sgdf

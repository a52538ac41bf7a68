#pragma once

// One time step of the coupled system by operator splitting:
//   (1) transport xi and J with v^n, (2) rho^{n+1} = rho_ref(xi)/J,
//   (3) V^{n+1}, (4) species advection/diffusion/reaction, (5) momentum,
//   (6) energy ledger.
// The momentum update treats advection, pressure, gravity and (by default)
// hyperviscosity explicitly and Newtonian viscosity implicitly:
//   (rho^{n+1}/dt) v - div(nu1 e(v)) = [rho^n v^n - dt div(rho v v)^n]/dt + f.

#include <sgdf/constitutive.hpp>
#include <sgdf/diagnostics.hpp>
#include <sgdf/errors.hpp>
#include <sgdf/gravity.hpp>
#include <sgdf/kinematics.hpp>
#include <sgdf/linalg.hpp>
#include <sgdf/mixture.hpp>
#include <sgdf/model.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

namespace sgdf {

struct StepControl {
  double dt_max = 1e-2;
  double cfl = 0.4;
  double c_visc = 0.25;  ///< used only with explicit_viscosity
  double c_hyp = 0.1;    ///< used only while hyperviscosity is explicit; blows up near 1
  std::uint64_t max_steps = 100;
  int max_retries = 4;  ///< dt halvings before a rejected step aborts the run
  bool explicit_viscosity = false;
  bool implicit_hyperviscosity = false;
  bool fixed_dt = false;  ///< step with dt_max regardless of the stability bounds
  CgOptions momentum_solver{1e-12, 4000};

  void validate() const {
    if (!(dt_max > 0.0)) throw ConfigError("step.dt_max", "must be > 0");
    if (!(cfl > 0.0 && cfl <= 1.0)) throw ConfigError("step.cfl", "must be in (0, 1]");
    if (!(c_visc > 0.0)) throw ConfigError("step.c_visc", "must be > 0");
    if (!(c_hyp > 0.0)) throw ConfigError("step.c_hyp", "must be > 0");
    if (max_retries < 0) throw ConfigError("step.max_retries", "must be >= 0");
  }
};

/// Which bound set the step size.
enum class DtLimit { dt_max, advective, acoustic, viscous, hyperviscous };

inline std::string to_string(DtLimit l) {
  switch (l) {
    case DtLimit::dt_max: return "dt_max";
    case DtLimit::advective: return "advective";
    case DtLimit::acoustic: return "acoustic";
    case DtLimit::viscous: return "viscous";
    case DtLimit::hyperviscous: return "hyperviscous";
  }
  return "?";
}

struct StepReport {
  double dt = 0.0;
  DtLimit limit = DtLimit::dt_max;
  int retries = 0;
  int momentum_iterations = 0;
  MixtureStepReport mixture;
  EnergyLedger ledger;
};

/// Structured description of an aborted run.
struct StepFailure : std::runtime_error {
  StepFailure(const std::string& monitor, const std::string& what, double t, std::uint64_t step)
      : std::runtime_error(describe(monitor, what, t, step)), monitor(monitor) {}
  std::string monitor;

 private:
  static std::string describe(const std::string& monitor, const std::string& what, double t,
                              std::uint64_t step) {
    std::ostringstream os;
    os << "step " << step << " at t = " << t << " aborted by " << monitor << ": " << what;
    return os.str();
  }
};

namespace detail {

template <int Dim>
double max_abs(const Field<Dim>& f) {
  double m = 0.0;
  for (double x : f.data()) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace detail

/// Largest admissible step and the bound that produced it.
template <int Dim>
std::pair<double, DtLimit> stability_dt_detail(const SimState<Dim>& s, const StepControl& ctl,
                                               const Model<Dim>& m) {
  double dt = ctl.dt_max;
  DtLimit lim = DtLimit::dt_max;
  auto consider = [&](double cand, DtLimit l) {
    if (cand < dt) {
      dt = cand;
      lim = l;
    }
  };
  const auto& g = s.v.grid();
  const double h = g.min_spacing();
  double inv = 0.0;  // sum_a max|v_a| / h_a
  for (int a = 0; a < Dim; ++a) {
    double vm = 0.0;
    for (double x : s.v.component(a)) vm = std::max(vm, std::abs(x));
    inv += vm / g.spacing(a);
  }
  if (inv > 0.0) consider(ctl.cfl / inv, DtLimit::advective);
  if (m.prescribed_velocity) return {dt, lim};

  const Field<Dim> cs2 = sound_speed_squared(s.kin.J, s.rho, m.law);
  double cs_max = 0.0;
  for (double x : cs2.data()) cs_max = std::max(cs_max, std::sqrt(x));
  if (cs_max > 0.0) consider(ctl.cfl * h / (cs_max * std::sqrt(static_cast<double>(Dim))), DtLimit::acoustic);

  const double rho_min = s.rho.min(0);
  if (ctl.explicit_viscosity) {
    const double nu = m.law.nu1.supremum();
    if (nu > 0.0) consider(ctl.c_visc * h * h * rho_min / nu, DtLimit::viscous);
  }
  if (!ctl.implicit_hyperviscosity) {
    const Field<Dim> ge = grad_of_tensor(sym_grad(s.v));
    const double gmax = detail::max_abs(pointwise_norm(ge));
    const double expo = m.law.q - 2.0;
    const double stiff = m.law.nu2.supremum() * (expo == 0.0 ? 1.0 : std::pow(gmax, expo));
    if (stiff > 0.0) consider(ctl.c_hyp * h * h * h * h * rho_min / stiff, DtLimit::hyperviscous);
  }
  return {dt, lim};
}

template <int Dim>
double stability_dt(const SimState<Dim>& s, const StepControl& ctl, const Model<Dim>& m) {
  return stability_dt_detail(s, ctl, m).first;
}

/// Upwind flux-form divergence of rho v (x) v: component i is
/// sum_a d_a(rho v_a v_i). Face velocities are centred averages, so wall
/// faces carry no flux and total momentum telescopes.
template <int Dim>
Field<Dim> momentum_advection(const Field<Dim>& rho, const Field<Dim>& v) {
  const auto& g = v.grid();
  Field<Dim> out = Field<Dim>::vector(g);
  for_each_face(g, [&](std::size_t l, std::size_t r, int a) {
    const double u = 0.5 * (v(a, l) + v(a, r));
    if (u == 0.0) return;
    const std::size_t up = u > 0.0 ? l : r;
    const double h = g.spacing(a);
    for (int i = 0; i < Dim; ++i) {
      const double flux = u * rho(0, up) * v(i, up);
      out(i, l) += flux / h;
      out(i, r) -= flux / h;
    }
  });
  return out;
}

/// Advances v given the already transported (rho^{n+1}, p^{n+1}, V^{n+1})
/// held in `next` and the old state `prev`.
template <int Dim>
Field<Dim> momentum_step(const SimState<Dim>& prev, const SimState<Dim>& next, double dt,
                         const Model<Dim>& m, const GravitySolver<Dim>& grav, const StepControl& ctl,
                         int* iterations = nullptr) {
  const auto& g = prev.v.grid();
  // explicit momentum: rho^n v^n - dt div(rho v v)^n + dt f
  Field<Dim> rhs = prev.v;
  for (int a = 0; a < Dim; ++a)
    for (std::size_t k = 0; k < rhs.cells(); ++k) rhs(a, k) *= prev.rho(0, k);
  rhs.axpy(-dt, momentum_advection(prev.rho, prev.v));

  const Field<Dim> gp = gradient(next.p);
  const Field<Dim> acc = gravitational_acceleration(grav, next.potential);
  for (int a = 0; a < Dim; ++a)
    for (std::size_t k = 0; k < rhs.cells(); ++k)
      rhs(a, k) += dt * (-gp(a, k) + next.rho(0, k) * acc(a, k));

  const Field<Dim> kappa = hyperviscous_coefficient(prev.v, prev.species.c, prev.kin.J, m.law);
  if (!ctl.implicit_hyperviscosity) rhs.axpy(dt, frozen_hyperviscous_force(prev.v, kappa));

  const Field<Dim> nu1 = viscosity_field(m.law.nu1, prev.kin.J, prev.species.c);
  if (ctl.explicit_viscosity) {
    rhs.axpy(dt, newtonian_force(prev.v, nu1));
    Field<Dim> v = rhs;
    for (int a = 0; a < Dim; ++a)
      for (std::size_t k = 0; k < v.cells(); ++k) v(a, k) /= next.rho(0, k);
    if (ctl.implicit_hyperviscosity) {
      throw ContractViolation("momentum_step: implicit hyperviscosity needs implicit viscosity");
    }
    return v;
  }

  // (rho/dt) v - div(nu1 e(v)) [+ div div(kappa grad e(v))] = rhs / dt
  auto apply = [&](const Field<Dim>& w) {
    Field<Dim> y = w;
    for (int a = 0; a < Dim; ++a)
      for (std::size_t k = 0; k < y.cells(); ++k) y(a, k) *= next.rho(0, k) / dt;
    y.axpy(-1.0, newtonian_force(w, nu1));
    if (ctl.implicit_hyperviscosity) y.axpy(-1.0, frozen_hyperviscous_force(w, kappa));
    return y;
  };
  Vec<Dim> inv4h2{};
  double lap = 0.0;
  for (int a = 0; a < Dim; ++a) {
    inv4h2[a] = 0.25 / (g.spacing(a) * g.spacing(a));
    lap += inv4h2[a];
  }
  Field<Dim> diag = Field<Dim>::vector(g);
  for (int a = 0; a < Dim; ++a)
    for (std::size_t k = 0; k < diag.cells(); ++k)
      diag(a, k) = next.rho(0, k) / dt + nu1(0, k) * (lap + inv4h2[a]);
  auto precond = [&](const Field<Dim>& r) {
    Field<Dim> z = r;
    for (std::size_t k = 0; k < z.data().size(); ++k) z.data()[k] /= diag.data()[k];
    return z;
  };
  Field<Dim> b = rhs;
  b *= 1.0 / dt;
  Field<Dim> v = prev.v;
  const CgResult res = conjugate_gradient<Dim>(apply, b, v, precond, ctl.momentum_solver);
  if (iterations) *iterations = res.iterations;
  if (!res.converged) {
    std::ostringstream os;
    os << "momentum: CG stalled after " << res.iterations << " iterations (relative residual "
       << res.residual << ")";
    throw StabilityRejection(os.str());
  }
  return v;
}

/// One full step with the given dt. Throws StabilityRejection,
/// PositivityFailure or ContractViolation; the input state is untouched.
template <int Dim>
SimState<Dim> full_step(const SimState<Dim>& s, double dt, const Model<Dim>& m, const StepControl& ctl,
                        StepReport* report = nullptr) {
  if (!(dt > 0.0)) throw ContractViolation("full_step: dt must be > 0");
  SimState<Dim> next;
  next.t = s.t + dt;
  next.step = s.step + 1;
  next.clamp_count = s.clamp_count;
  // (1) kinematics with v^n
  next.kin = advect_xi(s.kin, s.v, dt, m.kinematics);
  next.kin.J = evolve_J(s.kin.J, s.v, dt, m.kinematics);
  // (2) density
  std::uint64_t clamps = 0;
  next.rho = density(next.kin.xi, next.kin.J, m.law.rho_ref, &clamps);
  next.clamp_count += clamps;
  // (3) gravity
  next.potential = m.gravity->solve_potential(next.rho, next.t);
  next.p = pressure(next.kin.J, s.species.c, next.kin.xi, m.law);
  // (4) mixture
  MixtureStepReport mrep;
  next.species = diffusion_reaction_step(s.species, s.v, next.kin.J, next.kin.xi, dt, m.mixture, m.law,
                                         m.kinematics.limiter, &mrep);
  // (5) momentum
  int iters = 0;
  if (m.prescribed_velocity) {
    next.v = m.prescribed_velocity(next.t);
  } else {
    next.v = momentum_step(s, next, dt, m, *m.gravity, ctl, &iters);
  }
  if (!next.v.all_finite() || !next.rho.all_finite() || !next.kin.xi.all_finite())
    throw ContractViolation("full_step: non-finite field after step");
  // (6) ledger
  if (report) {
    report->dt = dt;
    report->momentum_iterations = iters;
    report->mixture = mrep;
    report->ledger = ledger(next, m);
  }
  return next;
}

/// Steps with dt = stability_dt, halving on StabilityRejection up to
/// ctl.max_retries times. Positivity failures and exhausted retries abort
/// with a StepFailure naming the monitor.
template <int Dim>
SimState<Dim> advance(const SimState<Dim>& s, const Model<Dim>& m, const StepControl& ctl,
                      StepReport* report = nullptr) {
  auto [dt, lim] = ctl.fixed_dt ? std::pair{ctl.dt_max, DtLimit::dt_max} : stability_dt_detail(s, ctl, m);
  for (int attempt = 0;; ++attempt) {
    try {
      SimState<Dim> next = full_step(s, dt, m, ctl, report);
      if (report) {
        report->limit = lim;
        report->retries = attempt;
      }
      return next;
    } catch (const StabilityRejection& e) {
      if (attempt >= ctl.max_retries) throw StepFailure("stability", e.what(), s.t, s.step + 1);
      dt *= 0.5;
    } catch (const PositivityFailure& e) {
      std::ostringstream os;
      os << e.what() << " (min J before step " << s.kin.J.min(0) << ", max |v| "
         << detail::max_abs(s.v) << ")";
      throw StepFailure("positivity", os.str(), s.t, s.step + 1);
    } catch (const ContractViolation& e) {
      throw StepFailure("finiteness", e.what(), s.t, s.step + 1);
    }
  }
}

}  // namespace sgdf

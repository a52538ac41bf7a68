#include <sgdf/integrator.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace sgdf;

namespace {

constexpr double pi = std::numbers::pi;

template <int Dim>
Model<Dim> make_model(const Grid<Dim>& g, double G, const Field<Dim>& rho_ref, double nu1 = 0.1,
                      double nu2 = 1e-6) {
  Model<Dim> m;
  m.grid = g;
  m.law.nu1.base = nu1;
  m.law.nu2.base = nu2;
  m.law.q = 4.0;
  m.law.mixing.modulus = 1.0;
  m.law.mixing.target = {0.5, 0.5};
  m.law.rho_ref = ReferenceField<Dim>(rho_ref);
  m.mixture.n = 2;
  m.mixture.mobility_matrix = {0.01, 0.0, 0.0, 0.01};
  m.gravity = std::make_shared<GravitySolver<Dim>>(g, G);
  m.validate();
  return m;
}

template <int Dim>
Field<Dim> half_half(const Grid<Dim>& g) {
  Field<Dim> c = Field<Dim>::species(g, 2);
  for (std::size_t k = 0; k < g.size(); ++k) c(0, k) = c(1, k) = 0.5;
  return c;
}

double max_abs(const Field<2>& f) {
  double m = 0.0;
  for (double x : f.data()) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST(Integrator, ZeroVelocityEquilibriumIsFixedPoint) {
  const auto g = Grid<2>::cube(16, 1.0, Boundary::slip_wall);
  const auto m = make_model(g, 0.0, Field<2>::scalar(g, 2.0));
  const auto s = initial_state(m, half_half(g));
  StepControl ctl;
  const auto next = full_step(s, 1e-3, m, ctl);
  EXPECT_EQ(max_abs(next.v), 0.0);
  EXPECT_EQ(next.kin.xi.data(), s.kin.xi.data());
  EXPECT_EQ(next.kin.J.data(), s.kin.J.data());
  EXPECT_EQ(next.rho.data(), s.rho.data());
  for (std::size_t k = 0; k < s.species.c.data().size(); ++k)
    EXPECT_NEAR(next.species.c.data()[k], s.species.c.data()[k], 1e-15);
  EXPECT_DOUBLE_EQ(next.t, 1e-3);
  EXPECT_EQ(next.step, 1u);
}

TEST(Integrator, StabilityDtFallsBackToDtMax) {
  const auto g = Grid<2>::cube(16, 1.0, Boundary::slip_wall);
  auto m = make_model(g, 0.0, Field<2>::scalar(g, 1.0), 0.1, 1e-6);
  m.law.volumetric.kappa = 0.0;
  m.law.volumetric.eps_phi = 1e-12;  // negligible sound speed
  const auto s = initial_state(m, half_half(g));
  StepControl ctl;
  ctl.dt_max = 3e-3;
  const auto [dt, lim] = stability_dt_detail(s, ctl, m);
  EXPECT_EQ(dt, 3e-3);
  EXPECT_EQ(lim, DtLimit::dt_max);
}

TEST(Integrator, AdvectiveBoundScalesInverselyWithSpeed) {
  const auto g = Grid<2>::cube(16, 1.0, Boundary::periodic);
  auto m = make_model(g, 0.0, Field<2>::scalar(g, 1.0), 0.1, 1e-6);
  m.prescribed_velocity = [&](double) { return Field<2>::vector(g, 1.0); };
  auto s = initial_state(m, half_half(g), Field<2>::vector(g, 1.0));
  StepControl ctl;
  ctl.dt_max = 1.0;
  const auto [dt1, l1] = stability_dt_detail(s, ctl, m);
  EXPECT_EQ(l1, DtLimit::advective);
  EXPECT_NEAR(dt1, ctl.cfl / (2.0 / g.spacing(0)), 1e-15);
  s.v *= 2.0;
  EXPECT_NEAR(stability_dt(s, ctl, m), 0.5 * dt1, 1e-15);
}

TEST(Integrator, HyperviscousBoundScalesWithFourthPowerOfSpacing) {
  auto dt_for = [](int n) {
    const auto g = Grid<2>::cube(n, 1.0, Boundary::periodic);
    auto m = make_model(g, 0.0, Field<2>::scalar(g, 1.0), 1e-3, 1.0);
    m.law.q = 2.0;  // constant stiffness isolates the h^4 factor
    m.law.volumetric.eps_phi = 1e-12;
    m.law.volumetric.kappa = 0.0;
    Field<2> v = Field<2>::vector(g);
    for_each_cell(g, [&](const Index<2>& idx, std::size_t lin) { v(0, lin) = 1e-6 * std::sin(2 * pi * g.center(idx)[1]); });
    const auto s = initial_state(m, half_half(g), v);
    StepControl ctl;
    ctl.dt_max = 1.0;
    return stability_dt_detail(s, ctl, m);
  };
  const auto [a, la] = dt_for(16);
  const auto [b, lb] = dt_for(32);
  EXPECT_EQ(la, DtLimit::hyperviscous);
  EXPECT_EQ(lb, DtLimit::hyperviscous);
  EXPECT_NEAR(a / b, 16.0, 1e-9);
}

TEST(Integrator, AdvanceRetriesThenReportsMonitor) {
  const auto g = Grid<2>::cube(8, 1.0, Boundary::periodic);
  auto m = make_model(g, 0.0, Field<2>::scalar(g, 1.0));
  const auto s = initial_state(m, half_half(g));
  StepControl ctl;
  ctl.momentum_solver.max_iterations = 0;  // every momentum solve "stalls"
  ctl.max_retries = 2;
  Field<2> v = Field<2>::vector(g);
  for_each_cell(g, [&](const Index<2>& idx, std::size_t lin) { v(0, lin) = std::sin(2 * pi * g.center(idx)[1]); });
  auto moving = s;
  moving.v = v;
  try {
    advance(moving, m, ctl);
    FAIL() << "expected StepFailure";
  } catch (const StepFailure& e) {
    EXPECT_EQ(e.monitor, "stability");
  }
}

TEST(Integrator, PositivityFailureIsReportedByMonitor) {
  const auto g = Grid<2>::cube(8, 1.0, Boundary::periodic);
  auto m = make_model(g, 0.0, Field<2>::scalar(g, 1.0));
  m.kinematics.j_floor = 0.9999;
  auto s = initial_state(m, half_half(g));
  for_each_cell(g, [&](const Index<2>& idx, std::size_t lin) { s.v(0, lin) = 0.3 * std::sin(2 * pi * g.center(idx)[0]); });
  StepControl ctl;
  ctl.dt_max = 0.05;
  try {
    advance(s, m, ctl);
    FAIL() << "expected StepFailure";
  } catch (const StepFailure& e) {
    EXPECT_EQ(e.monitor, "positivity");
  }
}

// Gravity off, v0 = 0, nonuniform J and composition: every accepted step
// must not raise the ledger total beyond round-off.
TEST(Integrator, EnergyIsNonIncreasingWithoutGravity) {
  const auto g = Grid<2>::cube(32, 1.0, Boundary::slip_wall);
  auto m = make_model(g, 0.0, Field<2>::scalar(g, 1.0), 0.05, 1e-5);
  Field<2> c = Field<2>::species(g, 2);
  for_each_cell(g, [&](const Index<2>& idx, std::size_t lin) {
    const auto p = g.center(idx);
    c(0, lin) = 0.5 + 0.3 * std::cos(pi * p[0]) * std::cos(pi * p[1]);
    c(1, lin) = 1.0 - c(0, lin);
  });
  auto s = initial_state(m, c);
  for_each_cell(g, [&](const Index<2>& idx, std::size_t lin) {
    s.kin.J(0, lin) = 1.0 + 0.05 * std::cos(pi * g.center(idx)[0]);
  });
  refresh_derived(s, m);
  StepControl ctl;
  ctl.dt_max = 2e-3;
  double prev = ledger(s, m).total();
  for (int k = 0; k < 50; ++k) {
    StepReport rep;
    s = advance(s, m, ctl, &rep);
    const double now = rep.ledger.total();
    EXPECT_LE(now - prev, 1e-10 * std::abs(prev)) << "step " << k;
    prev = now;
  }
}

// Periodic shear v = (A sin(2 pi y), 0): divergence free and advection free,
// so the kinetic energy decays only through viscosity.
TEST(Integrator, ShearModeKineticDecayMatchesViscousDissipation) {
  const int n = 32;
  const auto g = Grid<2>::cube(n, 1.0, Boundary::periodic);
  const double nu = 0.01;
  auto m = make_model(g, 0.0, Field<2>::scalar(g, 1.0), nu, 1e-12);
  Field<2> v = Field<2>::vector(g);
  for_each_cell(g, [&](const Index<2>& idx, std::size_t lin) { v(0, lin) = 1e-2 * std::sin(2 * pi * g.center(idx)[1]); });
  auto s = initial_state(m, half_half(g), v);
  StepControl ctl;
  ctl.dt_max = 1e-3;
  for (int k = 0; k < 5; ++k) {
    const auto before = ledger(s, m);
    const double d0 = newtonian_dissipation(s.v, s.species.c, s.kin.J, m.law);
    StepReport rep;
    const double dt = stability_dt(s, ctl, m);
    s = full_step(s, dt, m, ctl, &rep);
    const double d1 = newtonian_dissipation(s.v, s.species.c, s.kin.J, m.law);
    const double rate = -(rep.ledger.kinetic - before.kinetic) / dt;
    EXPECT_NEAR(rate, 0.5 * (d0 + d1), 0.02 * 0.5 * (d0 + d1)) << "step " << k;
  }
}

TEST(Integrator, AdvectionTimeReversalReturnsNearStart) {
  const int n = 64;
  const auto g = Grid<2>::cube(n, 1.0, Boundary::periodic);
  Field<2> v = Field<2>::vector(g);
  for_each_cell(g, [&](const Index<2>& idx, std::size_t lin) {
    const auto p = g.center(idx);
    v(0, lin) = std::sin(2 * pi * p[1]);
    v(1, lin) = 0.5 * std::cos(2 * pi * p[0]);
  });
  auto back = v;
  back *= -1.0;
  auto s = KinematicState<2>::identity(g);
  const auto s0 = s;
  const int steps = 20;
  const double dt = 0.4 * g.spacing(0);
  for (int k = 0; k < steps; ++k) s = advect_xi(s, v, dt);
  for (int k = 0; k < steps; ++k) s = advect_xi(s, back, dt);
  double err = 0.0;
  for (std::size_t k = 0; k < s.xi.data().size(); ++k) err = std::max(err, std::abs(s.xi.data()[k] - s0.xi.data()[k]));
  std::printf("time reversal: max |xi - xi0| = %.3e after %d + %d steps (h = %.3e)\n", err, steps, steps,
              g.spacing(0));
  // upwind numerical diffusion bound: O(h * steps * cfl), loosely
  EXPECT_LT(err, g.spacing(0) * steps * 0.4);
}

// A heavy blob off-centre: its centre of mass accelerates toward the mass
// barycentre of the box. Direction checked against direct summation.
TEST(Integrator, HeavyBlobAcceleratesTowardBarycentre) {
  const auto g = Grid<3>::cube(20, 1.0, Boundary::slip_wall);
  Field<3> rho = Field<3>::scalar(g);
  const Vec<3> b{0.3, 0.55, 0.5};
  for_each_cell(g, [&](const Index<3>& idx, std::size_t lin) {
    const auto p = g.center(idx);
    double r2 = 0.0;
    for (int a = 0; a < 3; ++a) r2 += (p[a] - b[a]) * (p[a] - b[a]);
    rho(0, lin) = 1.0 + (r2 < 0.15 * 0.15 ? 9.0 : 0.0);
  });
  auto m = make_model(g, 1.0, rho, 1e-3, 1e-8);
  Field<3> c = Field<3>::species(g, 2);
  for (std::size_t k = 0; k < g.size(); ++k) c(0, k) = c(1, k) = 0.5;
  const auto s = initial_state(m, c);
  StepControl ctl;
  const double dt = 1e-3;
  const auto next = full_step(s, dt, m, ctl);

  Vec<3> bary{}, blob{}, mom{}, oracle{};
  double mtot = 0.0, mblob = 0.0;
  const double dv = g.cell_volume();
  std::vector<std::pair<Vec<3>, double>> cells;
  for_each_cell(g, [&](const Index<3>& idx, std::size_t lin) {
    const auto p = g.center(idx);
    cells.push_back({p, rho(0, lin) * dv});
  });
  for_each_cell(g, [&](const Index<3>& idx, std::size_t lin) {
    const auto p = g.center(idx);
    const double w = rho(0, lin) * dv;
    for (int a = 0; a < 3; ++a) bary[a] += w * p[a];
    mtot += w;
    if (rho(0, lin) > 5.0) {
      mblob += w;
      for (int a = 0; a < 3; ++a) {
        blob[a] += w * p[a];
        mom[a] += w * next.v(a, lin);
      }
      for (const auto& [q, mq] : cells) {
        double r2 = 0.0;
        for (int a = 0; a < 3; ++a) r2 += (q[a] - p[a]) * (q[a] - p[a]);
        if (r2 == 0.0) continue;
        const double r3 = r2 * std::sqrt(r2);
        for (int a = 0; a < 3; ++a) oracle[a] += w * mq * (q[a] - p[a]) / r3;
      }
    }
  });
  double toward = 0.0, agree = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double d = bary[a] / mtot - blob[a] / mblob;
    toward += mom[a] * d;
    agree += mom[a] * oracle[a];
  }
  EXPECT_GT(toward, 0.0);
  EXPECT_GT(agree, 0.0);
}

// Hydrostatic disk: a smooth radial density with p(J) chosen so that
// grad p = -rho grad V from radial quadrature. The spurious acceleration in
// the interior shrinks at least linearly in h.
TEST(Integrator, HydrostaticDiskStaysNearRest) {
  const double G = 1.0, R = 0.3, rho0 = 1.0;
  auto profile = [&](double r) { return r < R ? rho0 * std::pow(1.0 - r * r / (R * R), 2) + 1e-3 : 1e-3; };
  // radial oracle: g(r) = 2 G M(r) / r, p(r) = p_out + int_r^R rho g
  const int nq = 4000;
  std::vector<double> rs(nq + 1), pr(nq + 1);
  {
    std::vector<double> M(nq + 1, 0.0);
    const double dr = R / nq;
    for (int i = 1; i <= nq; ++i) {
      const double r0 = (i - 1) * dr, r1 = i * dr;
      M[i] = M[i - 1] + 0.5 * dr * (2 * pi * r0 * profile(r0) + 2 * pi * r1 * profile(r1));
    }
    auto gr = [&](int i) { return i == 0 ? 0.0 : 2 * G * M[i] / (i * dr); };
    pr[nq] = 1.0;
    for (int i = nq; i > 0; --i) {
      rs[i] = i * dr;
      pr[i - 1] = pr[i] + 0.5 * dr * (profile(i * dr) * gr(i) + profile((i - 1) * dr) * gr(i - 1));
    }
  }
  auto p_at = [&](double r) {
    if (r >= R) return pr[nq];
    const double u = r / R * nq;
    const int i = std::min(static_cast<int>(u), nq - 1);
    return pr[i] + (u - i) * (pr[i + 1] - pr[i]);
  };
  auto residual = [&](int n) {
    const auto g = Grid<2>::cube(n, 1.0, Boundary::slip_wall);
    Model<2> proto = make_model(g, G, Field<2>::scalar(g, 1.0), 1e-3, 1e-9);
    Field<2> J = Field<2>::scalar(g), rho_ref = Field<2>::scalar(g);
    for_each_cell(g, [&](const Index<2>& idx, std::size_t lin) {
      const auto x = g.center(idx);
      const double r = std::hypot(x[0] - 0.5, x[1] - 0.5);
      J(0, lin) = invert_pressure(proto.law.volumetric, p_at(r));
      rho_ref(0, lin) = profile(r) * J(0, lin);
    });
    auto m = make_model(g, G, rho_ref, 1e-3, 1e-9);
    auto s = initial_state(m, half_half(g));
    s.kin.J = J;
    refresh_derived(s, m);
    StepControl ctl;
    const double dt = 1e-4;
    const auto next = full_step(s, dt, m, ctl);
    double acc = 0.0;
    for_each_cell(g, [&](const Index<2>& idx, std::size_t lin) {
      const auto x = g.center(idx);
      if (std::hypot(x[0] - 0.5, x[1] - 0.5) < 0.8 * R)
        acc = std::max(acc, std::hypot(next.v(0, lin), next.v(1, lin)) / dt);
    });
    return acc;
  };
  const double a1 = residual(32), a2 = residual(64), a3 = residual(128);
  // reference scale: the gravitational acceleration at r = R/2
  std::printf("hydrostatic residual acceleration: %.3e %.3e %.3e\n", a1, a2, a3);
  EXPECT_GE(std::log2(a1 / a2), 1.0);
  EXPECT_GE(std::log2(a2 / a3), 1.0);
}

// Halving dt over a fixed horizon changes the final state at first order.
TEST(Integrator, TimeSelfConvergence) {
  const auto g = Grid<2>::cube(16, 1.0, Boundary::slip_wall);
  Field<2> rho = Field<2>::scalar(g);
  for_each_cell(g, [&](const Index<2>& idx, std::size_t lin) { rho(0, lin) = g.center(idx)[1] > 0.5 ? 2.0 : 1.0; });
  auto run = [&](double dt) {
    auto m = make_model(g, 0.5, rho, 0.05, 1e-5);
    auto s = initial_state(m, half_half(g));
    StepControl ctl;
    const double T = 0.04;
    const int steps = static_cast<int>(std::lround(T / dt));
    for (int k = 0; k < steps; ++k) s = full_step(s, dt, m, ctl);
    return s.v;
  };
  const auto v1 = run(4e-3), v2 = run(2e-3), v3 = run(1e-3);
  auto diff = [](const Field<2>& a, const Field<2>& b) {
    double d = 0.0;
    for (std::size_t k = 0; k < a.data().size(); ++k) d += (a.data()[k] - b.data()[k]) * (a.data()[k] - b.data()[k]);
    return std::sqrt(d);
  };
  const double order = std::log2(diff(v1, v2) / diff(v2, v3));
  std::printf("self-convergence order in dt: %.3f\n", order);
  EXPECT_GE(order, 0.8);
}

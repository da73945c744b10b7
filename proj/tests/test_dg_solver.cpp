#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "posflow/dg_solver.hpp"
#include "posflow/presets.hpp"

using namespace posflow;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

SolverOptions options_for(const FluxModel& m, int k, int rk) {
  SolverOptions o;
  o.model = m;
  o.degree = k;
  o.rk_order = rk;
  return o;
}

std::vector<FluxModel> all_models() {
  return {FluxModel::advection(1.0), FluxModel::burgers(), FluxModel::shallow_water(1.0), FluxModel::euler(1.4)};
}

// Positive smooth state for each model.
InitialCondition smooth_ic(const FluxModel& m) {
  InitialCondition ic;
  ic.state = [m](double x) {
    const double s = std::sin(kTwoPi * x);
    return m.from_primitive(1.0 + 0.5 * s, 0.3 + 0.2 * std::cos(kTwoPi * x), 1.0 + 0.3 * s);
  };
  return ic;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// Formulas

TEST(TimeStepFormulas, StableStep) {
  EXPECT_DOUBLE_EQ(dt_stable_formula(0.1, 2, 1.0), 0.04);
  EXPECT_DOUBLE_EQ(dt_stable_formula(0.1, 0, 1.0), 0.2);
  EXPECT_EQ(dt_stable_formula(0.1, 2, 0.0, 0.5), 0.5);
}

TEST(TimeStepFormulas, PositivityStep) {
  EXPECT_NEAR(dt_pos_formula(1.0 / 3.0, 0.1, 1.0), 0.1 / 6.0, 1e-16);
  EXPECT_DOUBLE_EQ(dt_pos_formula(1.0, 0.1, 1.0), 0.05);
}

TEST(TimeStepFormulas, OutflowCapScalar) {
  EXPECT_DOUBLE_EQ(0.7 * dt_zero_affine(1.0, 2.0), 0.35);
  EXPECT_EQ(dt_zero_affine(1.0, 0.0), kInf);
  EXPECT_EQ(dt_zero_affine(1.0, -3.0), kInf);
  EXPECT_DOUBLE_EQ(dt_zero_affine(1.0, 2.0, 0.2), 0.4);
}

TEST(TimeStepFormulas, EulerClosedFormMatchesBisection) {
  const double gamma = 1.4, pad_rho = 1e-12, pad_p = 1e-12;
  const FluxModel m = FluxModel::euler(gamma);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0), S(-1.0, 1.0);
  auto ok = [&](const State& bar, const State& q, double t) {
    const State u = bar - t * q;
    return u[0] >= pad_rho && (gamma - 1.0) * (u[0] * u[2] - 0.5 * u[1] * u[1]) >= pad_p * u[0];
  };
  int finite = 0;
  for (int n = 0; n < 1000; ++n) {
    const State bar = m.from_primitive(0.1 + U(rng), 2.0 * S(rng), 0.05 + U(rng));
    const State q{S(rng), 3.0 * S(rng), 4.0 * S(rng)};
    const double t = dt_zero_euler(gamma, bar, q, pad_rho, pad_p);
    if (!std::isfinite(t)) {
      EXPECT_TRUE(ok(bar, q, 1e6));
      continue;
    }
    ++finite;
    ASSERT_TRUE(ok(bar, q, t * (1.0 - 1e-12)));
    double lo = 0.0, hi = 2.0 * t + 1.0;
    while (ok(bar, q, hi)) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (ok(bar, q, mid) ? lo : hi) = mid;
    }
    EXPECT_NEAR(t, lo, 1e-10 * std::max(1.0, lo)) << "cell " << n;
  }
  EXPECT_GT(finite, 500);
}

// ---------------------------------------------------------------------------
// Basis and right-hand side

TEST(DGSolver, BasisMatchesPolySpace) {
  for (int k = 0; k <= 5; ++k) {
    auto space = PolySpace::make(CanonicalCell::interval(), k);
    std::vector<double> phi(k + 1), dphi(k + 1);
    for (double xi : {0.0, 0.13, 0.5, 0.77, 1.0}) {
      DGSolver::basis(k + 1, xi, phi.data(), dphi.data());
      for (int j = 0; j <= k; ++j) {
        Polynomial p(space);
        p.coeffs[j] = 1.0;
        EXPECT_NEAR(phi[j], eval(p, {xi, 0, 0}), 1e-12) << "k=" << k << " j=" << j;
        const double h = 1e-6;
        const double fd = (eval(p, {xi + h, 0, 0}) - eval(p, {xi - h, 0, 0})) / (2 * h);
        EXPECT_NEAR(dphi[j], fd, 1e-5 * (1 + std::abs(fd)));
      }
    }
  }
}

TEST(DGSolver, ConstantStateHasZeroRhs) {
  for (const auto& m : all_models()) {
    DGSolver s(Mesh1D::make(0, 1, 16, Boundary::Periodic), options_for(m, 2, 3));
    const State c = m.from_primitive(0.7, 0.4, 0.9);
    s.set_initial({[c](double) { return c; }, {}});
    auto U = s.coefficients();
    const auto r = s.stage(U);
    EXPECT_LT(max_abs(r.L), 1e-12) << m.name();
  }
}

TEST(DGSolver, SineAverageRateIsThirdOrder) {
  double prev = 0.0;
  for (int n : {40, 80}) {
    SolverOptions o = options_for(FluxModel::advection(1.0), 2, 3);
    o.limiter = LimiterMode::Off;
    o.outflow_cap = false;
    DGSolver s(Mesh1D::make(0, 1, n, Boundary::Periodic), o);
    s.set_initial({[](double x) { return State{2.0 + std::sin(kTwoPi * x), 0, 0}; }, {}});
    auto U = s.coefficients();
    const auto r = s.stage(U);
    const double dx = 1.0 / n;
    double err = 0.0;
    for (int i = 0; i < n; ++i) {
      const double exact = -(std::sin(kTwoPi * (i + 1) * dx) - std::sin(kTwoPi * i * dx)) / dx;
      err = std::max(err, std::abs(r.L[static_cast<std::size_t>(i) * 3] - exact));
    }
    EXPECT_LT(err, 20.0 * std::pow(dx, 3) * std::pow(kTwoPi, 4)) << n;
    if (prev > 0.0) EXPECT_GT(prev / err, 6.0);
    prev = err;
  }
}

TEST(DGSolver, RhsContentTelescopes) {
  for (const auto& m : all_models()) {
    DGSolver s(Mesh1D::make(0, 1, 37, Boundary::Periodic), options_for(m, 3, 3));
    s.set_initial(smooth_ic(m));
    auto U = s.coefficients();
    const auto r = s.stage(U);
    const int nv = m.n_vars(), nm = 4;
    for (int v = 0; v < nv; ++v) {
      double sum = 0.0, scale = 0.0;
      for (int i = 0; i < 37; ++i) {
        sum += r.L[(static_cast<std::size_t>(i) * nv + v) * nm] / 37.0;
        scale += std::abs(r.L[(static_cast<std::size_t>(i) * nv + v) * nm]) / 37.0;
      }
      EXPECT_LT(std::abs(sum), 1e-13 * std::max(1.0, scale)) << m.name() << " var " << v;
    }
  }
}

// ---------------------------------------------------------------------------
// Stepping

TEST(DGSolver, ForwardEulerStepIsOneStage) {
  for (const auto& m : all_models()) {
    const auto mesh = Mesh1D::make(0, 1, 24, Boundary::Periodic);
    DGSolver a(mesh, options_for(m, 2, 1)), b(mesh, options_for(m, 2, 1));
    a.set_initial(smooth_ic(m));
    b.set_initial(smooth_ic(m));
    auto U = b.coefficients();
    const auto r = b.stage(U);
    ASSERT_TRUE(a.step());
    const double dt = a.diagnostics().steps.back().dt;
    for (std::size_t k = 0; k < U.size(); ++k) ASSERT_EQ(a.coefficients()[k], U[k] + dt * r.L[k]) << m.name();
  }
}

TEST(DGSolver, LimiterInactiveOnSmoothPositiveData) {
  for (const auto& m : all_models()) {
    const auto mesh = Mesh1D::make(0, 1, 32, Boundary::Periodic);
    SolverOptions on = options_for(m, 2, 3), off = on;
    off.limiter = LimiterMode::Off;
    DGSolver a(mesh, on), b(mesh, off);
    a.set_initial(smooth_ic(m));
    b.set_initial(smooth_ic(m));
    for (int n = 0; n < 20; ++n) {
      ASSERT_TRUE(a.step());
      ASSERT_TRUE(b.step());
      EXPECT_EQ(a.diagnostics().steps.back().triggers, 0);
    }
    EXPECT_EQ(a.coefficients(), b.coefficients()) << m.name();
  }
}

TEST(DGSolver, MassConservedAndAveragesUntouchedByLimiter) {
  struct Case {
    FluxModel m;
    std::string preset;
  };
  for (const auto& c : std::vector<Case>{{FluxModel::burgers(), "clipped_sine"},
                                         {FluxModel::advection(1.0), "square"},
                                         {FluxModel::shallow_water(1.0), "square"},
                                         {FluxModel::euler(1.4), "sine"}}) {
    const auto mesh = Mesh1D::make(0, 1, 50, Boundary::Periodic);
    SolverOptions o = options_for(c.m, 2, 3);
    if (c.m.is_system()) o.u_cap = 10.0;
    DGSolver s(mesh, o);
    PresetParams p;
    if (c.preset == "square") p = {{"low", {1e-12}}};
    s.set_initial(make_preset(c.m, mesh, c.preset, p));
    const auto m0 = s.mass();
    for (int n = 0; n < 100; ++n) ASSERT_TRUE(s.step());
    const auto m1 = s.mass();
    for (std::size_t v = 0; v < m0.size(); ++v)
      EXPECT_LE(std::abs(m1[v] - m0[v]), 1e-12 * std::max(1.0, std::abs(m0[v]))) << c.m.name() << " var " << v;
    EXPECT_EQ(s.diagnostics().limiter_average_changes, 0);
  }
}

TEST(DGSolver, StepControlsHoldEveryStep) {
  const FluxModel m = FluxModel::burgers();
  const auto mesh = Mesh1D::make(0, 1, 80, Boundary::Periodic);
  DGSolver s(mesh, options_for(m, 2, 3));
  s.set_initial(make_preset(m, mesh, "clipped_sine"));
  s.run(0.2, 0, 0.0);
  ASSERT_TRUE(s.diagnostics().completed);
  EXPECT_TRUE(s.diagnostics().dt_checks_pass);
  for (const auto& r : s.diagnostics().steps) {
    EXPECT_LE(r.dt, r.dt_stable);
    EXPECT_LE(r.dt, 0.8 * r.dt_zero);
    EXPECT_TRUE(r.dt_ok);
  }
}

TEST(DGSolver, PositivityStepBelowOutflowCap) {
  // When the retentional is positive, the positivity step is a lower bound
  // on the time for any average to reach zero.
  const FluxModel m = FluxModel::burgers();
  const auto mesh = Mesh1D::make(0, 1, 60, Boundary::Periodic);
  SolverOptions o = options_for(m, 2, 3);
  o.pad = 0.0;
  DGSolver s(mesh, o);
  s.set_initial(make_preset(m, mesh, "sine", {{"amplitude", {0.5}}}));
  for (int n = 0; n < 30; ++n) ASSERT_TRUE(s.step());
  for (const auto& r : s.diagnostics().steps) EXPECT_LE(r.dt_pos, r.dt_zero);
}

TEST(DGSolver, SnapshotsLandOnInterval) {
  const FluxModel m = FluxModel::advection(1.0);
  const auto mesh = Mesh1D::make(0, 1, 20, Boundary::Periodic);
  DGSolver s(mesh, options_for(m, 1, 2));
  s.set_initial(make_preset(m, mesh, "sine"));
  const auto snaps = s.run(0.25, 0, 0.1);
  ASSERT_EQ(snaps.size(), 4u);
  EXPECT_EQ(snaps[0].t, 0.0);
  EXPECT_NEAR(snaps[1].t, 0.1, 1e-14);
  EXPECT_NEAR(snaps[2].t, 0.2, 1e-14);
  EXPECT_EQ(snaps[3].t, 0.25);
  EXPECT_EQ(snaps[3].x_center.size(), 20u);
  for (int i = 0; i < 20; ++i) EXPECT_LE(snaps[3].minima[i], snaps[3].averages[i] + 1e-14);
}

TEST(DGSolver, MaxStepsStopsEarly) {
  const FluxModel m = FluxModel::advection(1.0);
  const auto mesh = Mesh1D::make(0, 1, 20, Boundary::Periodic);
  DGSolver s(mesh, options_for(m, 1, 2));
  s.set_initial(make_preset(m, mesh, "sine"));
  s.run(1.0, 5, 0.0);
  EXPECT_EQ(s.diagnostics().steps.size(), 5u);
  EXPECT_FALSE(s.diagnostics().completed);
  EXPECT_EQ(s.diagnostics().stop_reason, "max_steps");
}

TEST(DGSolver, ThreadedRunIsBitIdentical) {
  for (const auto& m : all_models()) {
    const auto mesh = Mesh1D::make(0, 1, 64, Boundary::Periodic);
    SolverOptions o = options_for(m, 2, 3);
    DGSolver a(mesh, o);
    o.threads = 4;
    DGSolver b(mesh, o);
    const auto ic = m.kind == ModelKind::Burgers ? make_preset(m, mesh, "clipped_sine") : smooth_ic(m);
    a.set_initial(ic);
    b.set_initial(ic);
    for (int n = 0; n < 25; ++n) {
      ASSERT_TRUE(a.step());
      ASSERT_TRUE(b.step());
    }
    EXPECT_EQ(a.coefficients(), b.coefficients()) << m.name();
    EXPECT_EQ(a.diagnostics().steps.back().dt, b.diagnostics().steps.back().dt);
  }
}

// ---------------------------------------------------------------------------
// Positivity at run time

TEST(DGSolverPositivity, BurgersClippedSine) {
  const FluxModel m = FluxModel::burgers();
  const auto mesh = Mesh1D::make(0, 1, 100, Boundary::Periodic);
  DGSolver s(mesh, options_for(m, 2, 3));
  s.set_initial(make_preset(m, mesh, "clipped_sine"));
  s.run(0.5, 0, 0.0);
  EXPECT_TRUE(s.diagnostics().completed);
  EXPECT_GE(s.diagnostics().min_functionals[0], -1e-12);
}

TEST(DGSolverPositivity, DamBreakLimitedAndControl) {
  const FluxModel m = FluxModel::shallow_water(1.0);
  const auto mesh = Mesh1D::make(-1, 1, 100, Boundary::Outflow);
  SolverOptions o = options_for(m, 2, 3);
  o.u_cap = 10.0;
  DGSolver s(mesh, o);
  s.set_initial(make_preset(m, mesh, "dam_break"));
  s.run(0.25, 0, 0.0);
  EXPECT_TRUE(s.diagnostics().completed);
  EXPECT_GE(s.diagnostics().min_functionals[0], -1e-12);

  o.limiter = LimiterMode::Off;
  o.outflow_cap = false;
  DGSolver c(mesh, o);
  c.set_initial(make_preset(m, mesh, "dam_break"));
  c.run(0.25, 0, 0.0);
  ASSERT_TRUE(c.diagnostics().first_violation.has_value());
  EXPECT_LT(c.diagnostics().min_functionals[0], 0.0);
  EXPECT_FALSE(c.diagnostics().completed);
}

TEST(DGSolverPositivity, DoubleRarefactionLimitedAndControl) {
  const FluxModel m = FluxModel::euler(1.4);
  const auto mesh = Mesh1D::make(0, 1, 100, Boundary::Outflow);
  SolverOptions o = options_for(m, 2, 3);
  DGSolver s(mesh, o);
  s.set_initial(make_preset(m, mesh, "double_rarefaction"));
  s.run(0.1, 0, 0.0);
  EXPECT_TRUE(s.diagnostics().completed);
  EXPECT_GE(s.diagnostics().min_functionals[0], -1e-12);
  EXPECT_GE(s.diagnostics().min_pressure, -1e-12);

  o.limiter = LimiterMode::Off;
  o.outflow_cap = false;
  DGSolver c(mesh, o);
  c.set_initial(make_preset(m, mesh, "double_rarefaction"));
  c.run(0.1, 0, 0.0);
  ASSERT_TRUE(c.diagnostics().first_violation.has_value());
  EXPECT_LT(std::min(c.diagnostics().min_functionals[0], c.diagnostics().min_pressure), 0.0);
}

TEST(DGSolverPositivity, InitialVacuumIsPadded) {
  const FluxModel m = FluxModel::shallow_water(1.0);
  const auto mesh = Mesh1D::make(0, 1, 10, Boundary::Outflow);
  DGSolver s(mesh, options_for(m, 2, 3));
  s.set_initial({[](double) { return State{0.0, 0.0, 0.0}; }, {}});
  for (int i = 0; i < 10; ++i) EXPECT_NEAR(s.average(i, 0), 1e-12, 1e-26);
}

TEST(DGSolverPositivity, MinimalPointSetAlsoPositive) {
  const FluxModel m = FluxModel::euler(1.4);
  const auto mesh = Mesh1D::make(0, 1, 100, Boundary::Outflow);
  SolverOptions o = options_for(m, 2, 3);
  o.points = PointSetKind::Minimal;
  DGSolver s(mesh, o);
  EXPECT_EQ(s.limiter_points().size(), 3u);
  s.set_initial(make_preset(m, mesh, "double_rarefaction"));
  s.run(0.1, 0, 0.0);
  EXPECT_GE(s.diagnostics().min_pressure, -1e-12);
  EXPECT_GE(s.diagnostics().min_functionals[0], -1e-12);
}

// ---------------------------------------------------------------------------
// First-order reduction

namespace {

// Independent first-order finite-volume update with the local Lax-Friedrichs
// flux.
struct FirstOrder {
  FluxModel m;
  bool periodic;

  std::array<double, 3> f(const std::array<double, 3>& u) const {
    switch (m.kind) {
      case ModelKind::Advection: return {m.a * u[0], 0, 0};
      case ModelKind::Burgers: return {0.5 * u[0] * u[0], 0, 0};
      case ModelKind::ShallowWater: return {u[1], u[1] * u[1] / u[0] + 0.5 * m.g * u[0] * u[0], 0};
      case ModelKind::Euler: {
        const double v = u[1] / u[0], p = (m.gamma - 1.0) * (u[2] - 0.5 * u[0] * v * v);
        return {u[1], u[1] * v + p, v * (u[2] + p)};
      }
    }
    return {};
  }
  double speed(const std::array<double, 3>& u) const {
    switch (m.kind) {
      case ModelKind::Advection: return std::abs(m.a);
      case ModelKind::Burgers: return std::abs(u[0]);
      case ModelKind::ShallowWater: return std::abs(u[1] / u[0]) + std::sqrt(m.g * u[0]);
      case ModelKind::Euler: {
        const double v = u[1] / u[0], p = (m.gamma - 1.0) * (u[2] - 0.5 * u[0] * v * v);
        return std::abs(v) + std::sqrt(m.gamma * p / u[0]);
      }
    }
    return 0.0;
  }
  void advance(std::vector<std::array<double, 3>>& u, double dt, double dx) const {
    const int n = static_cast<int>(u.size());
    auto at = [&](int i) { return periodic ? u[(i + n) % n] : u[std::clamp(i, 0, n - 1)]; };
    std::vector<std::array<double, 3>> F(n + 1);
    for (int i = 0; i <= n; ++i) {
      const auto a = at(i - 1), b = at(i);
      const auto fa = f(a), fb = f(b);
      const double s = std::max(speed(a), speed(b));
      for (int v = 0; v < 3; ++v) F[i][v] = 0.5 * (fa[v] + fb[v]) - 0.5 * s * (b[v] - a[v]);
    }
    for (int i = 0; i < n; ++i)
      for (int v = 0; v < 3; ++v) u[i][v] -= dt / dx * (F[i + 1][v] - F[i][v]);
  }
};

}  // namespace

TEST(DGSolver, FirstOrderMatchesIndependentLoop) {
  for (const auto& m : all_models()) {
    for (Boundary bc : {Boundary::Periodic, Boundary::Outflow}) {
      const auto mesh = Mesh1D::make(0, 1, 50, bc);
      SolverOptions o = options_for(m, 0, 1);
      o.flux = FluxKind::LLF;
      DGSolver s(mesh, o);
      InitialCondition ic = smooth_ic(m);
      if (m.kind == ModelKind::Euler) ic = make_preset(m, mesh, "sod");
      s.set_initial(ic);
      const int nv = m.n_vars();
      std::vector<std::array<double, 3>> u(50, {0, 0, 0});
      for (int i = 0; i < 50; ++i)
        for (int v = 0; v < nv; ++v) u[i][v] = s.average(i, v);
      const FirstOrder fo{m, bc == Boundary::Periodic};
      double worst = 0.0;
      for (int n = 0; n < 100; ++n) {
        ASSERT_TRUE(s.step());
        fo.advance(u, s.diagnostics().steps.back().dt, mesh.dx());
        for (int i = 0; i < 50; ++i)
          for (int v = 0; v < nv; ++v) worst = std::max(worst, std::abs(u[i][v] - s.average(i, v)));
      }
      EXPECT_LE(worst, 1e-13) << m.name() << " " << to_string(bc);
    }
  }
}

// ---------------------------------------------------------------------------
// Validation

TEST(DGSolver, RejectsBadOptions) {
  const auto mesh = Mesh1D::make(0, 1, 10, Boundary::Periodic);
  SolverOptions o = options_for(FluxModel::advection(1.0), 2, 3);
  o.rk_order = 4;
  EXPECT_THROW(DGSolver(mesh, o), std::invalid_argument);
  o.rk_order = 3;
  o.alpha_z = 1.0;
  EXPECT_THROW(DGSolver(mesh, o), std::invalid_argument);
  o.alpha_z = 0.8;
  o.M_bar = 0.5;
  EXPECT_THROW(DGSolver(mesh, o), std::invalid_argument);
  EXPECT_THROW(Mesh1D::make(0, 1, 0, Boundary::Periodic), std::invalid_argument);
  EXPECT_THROW(Mesh1D::make(1, 0, 5, Boundary::Periodic), std::invalid_argument);
}

TEST(DGSolver, DefaultWeightFollowsDegree) {
  const auto mesh = Mesh1D::make(0, 1, 10, Boundary::Periodic);
  for (int k = 0; k <= 5; ++k) {
    DGSolver s(mesh, options_for(FluxModel::advection(1.0), k, 3));
    EXPECT_EQ(s.M_bar(), to_double(interval_weight(k)));
  }
}

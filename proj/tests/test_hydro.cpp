/* test_hydro.cpp -- uniform relaxation and the two 1-D solvers */
#include <catch_amalgamated.hpp>

#include <cmath>

#include "vicsek2p/config.hpp"
#include "vicsek2p/hydro.hpp"
#include "vicsek2p/validate.hpp"

using namespace vicsek2p;
using Catch::Matchers::WithinAbs;

namespace {

const ExchangeParams &xp() {
  static const ExchangeParams x = make_exchange_params({1.0, 0.5}, {1.0, 0.5}, 1.0, 2.0, 0.5, 1024);
  return x;
}

const ExchangeTable &table() {
  static const ExchangeTable t(xp(), 4096);
  return t;
}

ClosedField bump(int nx) {
  RunConfig c;
  c.numerics.nx = nx;
  return initial_closed_field(c);
}

// cell averages of a field on a grid twice as fine
std::vector<double> restrict2(const std::vector<double> &fine) {
  std::vector<double> out(fine.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * (fine[2 * i] + fine[2 * i + 1]);
  return out;
}

}  // namespace

TEST_CASE("uniform relaxation reaches an exchange equilibrium and keeps mass") {
  UniformState u0{0.6, 0.2, 0.5, 1.4};
  double delta = 0.05;
  double dt = delta / (10.0 * exchange_rate_scale(xp(), u0.rho0, u0.rho1, 1e-10));
  auto traj = relax_uniform_ode(u0, xp(), delta, 100 * delta, dt);
  MacroState m = traj.back().s.macro();
  CHECK(std::abs(mass_exchange_R(m, xp())) < 1e-8);
  CHECK(std::abs(projected_S(0, m, xp()).perp) < 1e-8);
  for (const auto &p : traj) CHECK_THAT(p.s.rho0 + p.s.rho1, WithinAbs(1.1, 1e-12));
  // the relative angle goes to 0 or pi
  double rel = std::abs(std::remainder(traj.back().s.theta1 - traj.back().s.theta0, kTwoPi));
  CHECK((rel < 1e-6 || std::abs(rel - kPi) < 1e-6));
}

TEST_CASE("table-driven relaxation agrees with direct quadrature") {
  UniformState u0{0.6, 0.2, 0.5, 1.4};
  double delta = 0.05;
  double dt = delta / (10.0 * exchange_rate_scale(xp(), u0.rho0, u0.rho1, 1e-10));
  auto a = relax_uniform_ode(u0, xp(), delta, 2 * delta, dt);
  RelaxOptions opt;
  opt.table = &table();
  auto b = relax_uniform_ode(u0, xp(), delta, 2 * delta, dt, opt);
  CHECK_THAT(a.back().s.theta1, WithinAbs(b.back().s.theta1, 1e-8));
  CHECK_THAT(a.back().s.rho1, WithinAbs(b.back().s.rho1, 1e-12));
}

TEST_CASE("relaxation refuses a step above the stiffness guard") {
  UniformState u0{0.6, 0.0, 0.5, 1.0};
  CHECK_THROWS_AS(relax_uniform_ode(u0, xp(), 1e-3, 1.0, 1e-2), ConfigError);
}

TEST_CASE("closed solver conserves mass and converges at first order") {
  SolverConfig sc = solver_config_for(xp(), 1e-2, 0.5, 0.2);
  std::vector<std::vector<double>> rho;
  for (int nx : {100, 200, 400, 800}) {
    ClosedField f = bump(nx);
    double m0 = mass_total(f);
    double worst = 0.0;
    run_closed(f, xp(), sc, [&](const ClosedField &g) { worst = std::max(worst, std::abs(mass_total(g) - m0)); });
    CHECK(worst < 1e-12);
    rho.push_back(f.rho);
  }
  // Cauchy differences between successive grids
  std::vector<double> diff;
  for (std::size_t k = 0; k + 1 < rho.size(); ++k) {
    std::vector<double> r = restrict2(rho[k + 1]);
    double s = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) s += std::abs(r[i] - rho[k][i]);
    diff.push_back(s / r.size());
  }
  for (std::size_t k = 0; k + 1 < diff.size(); ++k) CHECK(std::log2(diff[k] / diff[k + 1]) > 0.8);
}

TEST_CASE("constant states are stationary for both solvers") {
  SolverConfig sc = solver_config_for(xp(), 1e-2, 0.5, 1.0);
  ClosedField c(64, 1.0);
  std::fill(c.rho.begin(), c.rho.end(), 0.9);
  std::fill(c.theta.begin(), c.theta.end(), -0.4);
  ClosedField c1 = c;
  double h = transport_dt(sc, c.dx);
  step_closed(c1, xp(), sc, h);
  for (int i = 0; i < c.nx; ++i) {
    CHECK_THAT(c1.rho[i], WithinAbs(0.9, 1e-14));
    CHECK_THAT(c1.theta[i], WithinAbs(-0.4, 1e-14));
  }
  for (Branch b : {Branch::aligned, Branch::anti_aligned}) {
    sc.branch = b;
    TwoPhaseField f = project_to_equilibrium(c, xp(), b), g = f;
    step_two_phase(g, xp(), table(), sc, h);
    for (int i = 0; i < f.nx; ++i) {
      CHECK_THAT(g.rho1[i], WithinAbs(f.rho1[i], 1e-9));
      CHECK_THAT(std::remainder(g.theta0[i] - f.theta0[i], kTwoPi), WithinAbs(0.0, 1e-9));
    }
  }
}

TEST_CASE("two-phase solver conserves total mass per step") {
  SolverConfig sc = solver_config_for(xp(), 1e-2, 0.5, 1.0);
  TwoPhaseField f = project_to_equilibrium(bump(100), xp(), Branch::aligned);
  for (int i = 0; i < f.nx; ++i) f.theta1[i] += 0.3 * std::cos(kTwoPi * 2 * i / f.nx);
  double h = transport_dt(sc, f.dx);
  for (int k = 0; k < 30; ++k) {
    double m = mass_total(f);
    step_two_phase(f, xp(), table(), sc, h);
    CHECK(std::abs(mass_total(f) - m) < 1e-12);
  }
}

TEST_CASE("two-phase solution approaches the closed one as delta shrinks") {
  SolverConfig base = solver_config_for(xp(), 1e-2, 0.5, 0.5);
  ClosedField c0 = bump(100);
  ClosedField ref = c0;
  run_closed(ref, xp(), base, [](const ClosedField &) {});
  std::vector<double> l1;
  for (double d : {1e-1, 1e-2, 1e-3}) {
    SolverConfig sc = base;
    sc.delta = d;
    TwoPhaseField f = project_to_equilibrium(c0, xp(), Branch::aligned);
    run_two_phase(f, xp(), table(), sc, [](const TwoPhaseField &) {});
    l1.push_back(l1_distance_rho(f, ref));
  }
  CHECK(l1[1] < l1[0]);
  CHECK(l1[2] < l1[1]);
}

TEST_CASE("CFL guard") {
  SolverConfig sc = solver_config_for(xp(), 1e-2, 0.5, 1.0);
  CHECK_THROWS_AS(check_cfl(sc, 0.01, 1.0), ConfigError);
  CHECK_NOTHROW(check_cfl(sc, 0.01, transport_dt(sc, 0.01)));
  sc.cfl = 1.2;
  CHECK_THROWS_AS(check_cfl(sc, 0.01, 1e-4), ConfigError);
}

/* test_exchange.cpp -- mass and momentum exchange, equilibria, linearization, closure */
#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "vicsek2p/exchange.hpp"
#include "vicsek2p/validate.hpp"

using namespace vicsek2p;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const ExchangeParams &default_xp() {
  static const ExchangeParams xp = make_exchange_params({1.0, 0.5}, {1.0, 0.5}, 1.0, 2.0, 0.5, 1024);
  return xp;
}

const ExchangeParams &mixed_xp() {
  static const ExchangeParams xp = make_exchange_params({1.0, 0.3}, {2.0, 2.4}, 1.7, 0.6, 1.3, 512);
  return xp;
}

}  // namespace

TEST_CASE("density balance: worked example with tau0 / tau1 = 2") {
  ExchangeParams xp = make_exchange_params({1.0, 0.5}, {1.0, 0.5}, 2.0, 1.0, 1.0, 256);
  CHECK_THAT(density_equilibrium_f(1.0, 0.5, xp), WithinAbs(0.4, 1e-15));
  DensitySplit s = invert_total_density_k(1.4, 0.5, xp);
  CHECK_THAT(s.rho1, WithinAbs(1.0, 1e-12));
  // d rho1 / d rho = 1 / (1 + f'(1)), f' = q / den^2 with q = 2, den = 2.5
  CHECK_THAT(s.drho1, WithinRel(1.0 / (1.0 + 2.0 / 6.25), 1e-12));
}

TEST_CASE("R vanishes on the density balance") {
  for (const ExchangeParams *xp : {&default_xp(), &mixed_xp()}) {
    for (double rho1 : {0.05, 0.5, 1.3})
      for (double ang : {0.0, 0.9, 2.0, kPi}) {
        double phi = 0.5 * (1.0 + xp->c(0) * xp->c(1) * std::cos(ang));
        double rho0 = density_equilibrium_f(rho1, phi, *xp);
        CHECK(std::abs(mass_exchange_R(MacroState::from_angles(rho0, 0.4, rho1, 0.4 + ang), *xp)) < 1e-12);
      }
  }
}

TEST_CASE("R closed form against the kernel integral") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 2.0), a(-kPi, kPi);
  for (int i = 0; i < 10; ++i) {
    MacroState st = MacroState::from_angles(u(rng), a(rng), u(rng), a(rng));
    const ExchangeParams &xp = mixed_xp();
    double phi = local_alignment_phi(st, xp.c(0), xp.c(1));
    double ref = xp.tau1() * st.rho1 - xp.tau0() * st.rho0 +
                 xp.alpha * (xp.tau1() - xp.tau0()) * st.rho0 * st.rho1 * phi;
    CHECK_THAT(mass_exchange_R(st, xp), WithinAbs(ref, 1e-13));
    CHECK_THAT(mass_exchange_R_integral(st, xp), WithinAbs(ref, 1e-9));
    CHECK_THAT(mass_exchange_R(st.swapped(), xp.swapped()), WithinAbs(-ref, 1e-13));
  }
}

TEST_CASE("positivity bound on the density balance") {
  const ExchangeParams &xp = default_xp();  // tau1 > tau0 bounds rho1
  auto b = positivity_bound(xp, 0.5);
  REQUIRE(b);
  CHECK(b->phase == 1);
  CHECK_THAT(b->value, WithinRel(1.0 / (0.5 * 0.5 * 1.0), 1e-15));
  CHECK_THROWS_AS(density_equilibrium_f(b->value * 1.01, 0.5, xp), PositivityError);
  CHECK(density_equilibrium_f(b->value * 0.99, 0.5, xp) > 0);
  auto b2 = positivity_bound(mixed_xp(), 0.5);
  REQUIRE(b2);
  CHECK(b2->phase == 0);
  CHECK_FALSE(positivity_bound(make_exchange_params({1, 1}, {1, 1}, 1.0, 1.0, 0.5, 128), 0.5));
}

TEST_CASE("projected S vanishes at aligned and anti-aligned states only") {
  for (const ExchangeParams *xp : {&default_xp(), &mixed_xp()}) {
    for (double ang : {0.0, kPi}) {
      MacroState st = MacroState::from_angles(0.7, 1.1, 0.9, 1.1 + ang);
      CHECK(std::abs(projected_S(0, st, *xp).perp) < 1e-10);
      CHECK(std::abs(projected_S(1, st, *xp).perp) < 1e-10);
    }
    for (double ang : {0.3, 1.5, 2.9}) {
      MacroState st = MacroState::from_angles(0.7, 0.0, 0.9, ang);
      CHECK(std::abs(projected_S(0, st, *xp).perp) > 1e-6);
    }
  }
}

TEST_CASE("scan is odd under phi -> -phi") {
  const ExchangeParams &xp = mixed_xp();
  auto rows = equilibrium_scan(0.8, 0.6, xp, {-2.0, -0.5, 0.5, 2.0});
  CHECK_THAT(rows[0].s0_perp, WithinAbs(-rows[3].s0_perp, 1e-13));
  CHECK_THAT(rows[1].s0_perp, WithinAbs(-rows[2].s0_perp, 1e-13));
  for (const ScanRow &r : rows) CHECK(std::abs(r.gap) < 1e-10);
  CHECK_THROWS_AS(equilibrium_scan(0.0, 0.6, xp, {0.5}), DomainError);
}

TEST_CASE("projected S two ways and the interpolated table") {
  const ExchangeParams &xp = mixed_xp();
  ExchangeTable table(xp, 4096);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.1, 2.0), a(-kPi, kPi);
  for (int i = 0; i < 10; ++i) {
    double t0 = a(rng), t1 = a(rng);
    MacroState st = MacroState::from_angles(u(rng), t0, u(rng), t1);
    ProjectedS p0 = projected_S(0, st, xp), p1 = projected_S(1, st, xp);
    CHECK_THAT(p0.perp, WithinAbs(p0.simplified, 1e-10));
    double s0, s1;
    table.s_perp_pair(st.rho0, t0, st.rho1, t1, s0, s1);
    CHECK_THAT(s0, WithinAbs(p0.perp, 1e-8));
    CHECK_THAT(s1, WithinAbs(p1.perp, 1e-8));
  }
}

TEST_CASE("linearization matches central differences at second order") {
  for (const ExchangeParams *xp : {&default_xp(), &mixed_xp()}) {
    LinearizationOrders o = linearization_orders(*xp, 17);
    CHECK(o.dr_order >= 1.9);
    CHECK(o.ds_order >= 1.9);
    CHECK(o.dr_rel_err < 1e-6);
    CHECK(o.ds_rel_err < 1e-6);
  }
}

TEST_CASE("dropping the h' term breaks the linearization") {
  LinearizationTerms t;
  t.include_hprime = false;
  LinearizationOrders o = linearization_orders(default_xp(), 17, t);
  CHECK(o.ds_rel_err > 1e-4);
}

TEST_CASE("closure identity and cancellation on both branches") {
  for (const ExchangeParams *xp : {&default_xp(), &mixed_xp()}) {
    ClosureSummary s = closure_summary(*xp, 23);
    for (int b = 0; b < 2; ++b) {
      CHECK(s.identity_err[b] < 1e-8);
      CHECK(s.cancellation_err[b] < 1e-8);
    }
    CHECK(s.reduction_err < 1e-10);
  }
}

TEST_CASE("closure coefficients are consistent with the density split") {
  const ExchangeParams &xp = default_xp();
  for (Branch b : {Branch::aligned, Branch::anti_aligned}) {
    ClosureCoefficients c = closure_MNP(b, 1.2, xp);
    double phi = branch_phi(b, xp.c(0), xp.c(1));
    CHECK_THAT(c.rho0, WithinAbs(density_equilibrium_f(c.rho1, phi, xp), 1e-11));
    CHECK_THAT(c.drho0 + c.drho1, WithinAbs(1.0, 1e-15));
    CHECK_THAT(c.m, WithinRel(c.a1 * c.rho0 + c.a0 * c.rho1, 1e-14));
    // d rho1 / d rho by a centered difference of the inversion
    double h = 1e-5;
    double fd = (invert_total_density_k(1.2 + h, phi, xp).rho1 - invert_total_density_k(1.2 - h, phi, xp).rho1) / (2 * h);
    CHECK_THAT(c.drho1, WithinAbs(fd, 1e-6));
  }
}

TEST_CASE("alpha = 0 equal-temperature reduction of the closure weights") {
  ExchangeParams xp = make_exchange_params({1.0, 0.8}, {1.0, 0.8}, 1.3, 0.4, 0.0, 512);
  CHECK_THAT(closure_A(Branch::aligned, 0, 0.7, 1.1, xp), WithinAbs(0.4 * 1.1, 1e-10));
  CHECK_THAT(closure_A(Branch::aligned, 1, 0.7, 1.1, xp), WithinAbs(1.3 * 0.7, 1e-10));
}

TEST_CASE("inputs are checked") {
  const ExchangeParams &xp = default_xp();
  MacroState bad{1.0, 1.0, {2.0, 0.0}, {1.0, 0.0}};
  CHECK_THROWS_AS(momentum_exchange_S(0, bad, xp), DomainError);
  Perturbation p;
  p.domega0 = {1.0, 0.0};
  CHECK_THROWS_AS(linearized_DR(MacroState::from_angles(1, 0, 1, 0), xp, p), DomainError);
  CHECK_THROWS_AS(invert_total_density_k(-1.0, 0.5, xp), DomainError);
}

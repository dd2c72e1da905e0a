/* validate.hpp -- identity, oracle and solver checks behind `vicsek2p validate` */
#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "exchange.hpp"
#include "hydro.hpp"
#include "vonmises.hpp"

namespace vicsek2p {

struct Check {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double tolerance = 0.0;
  double seconds = 0.0;

  bool operator==(const Check &o) const {
    auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
    return name == o.name && pass == o.pass && same(value, o.value) && same(tolerance, o.tolerance) &&
           same(seconds, o.seconds);
  }
};

struct ValidationReport {
  std::vector<Check> checks;
  bool overall = true;

  void add(Check c) {
    overall = overall && c.pass;
    checks.push_back(std::move(c));
  }
  bool operator==(const ValidationReport &o) const { return overall == o.overall && checks == o.checks; }
};

inline nlohmann::json report_to_json(const ValidationReport &r) {
  nlohmann::json j;
  j["overall"] = r.overall;
  j["checks"] = nlohmann::json::array();
  // NaN becomes null, infinities the strings "inf" / "-inf"
  auto num = [](double v) {
    if (std::isnan(v)) return nlohmann::json(nullptr);
    if (std::isinf(v)) return nlohmann::json(v > 0 ? "inf" : "-inf");
    return nlohmann::json(v);
  };
  for (const Check &c : r.checks)
    j["checks"].push_back({{"name", c.name},
                           {"status", c.pass ? "pass" : "fail"},
                           {"value", num(c.value)},
                           {"tolerance", num(c.tolerance)},
                           {"seconds", num(c.seconds)}});
  return j;
}

inline ValidationReport report_from_json(const nlohmann::json &j) {
  ValidationReport r;
  auto num = [](const nlohmann::json &v) {
    if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
    if (v.is_string()) {
      double inf = std::numeric_limits<double>::infinity();
      if (v == "inf") return inf;
      if (v == "-inf") return -inf;
      throw ParseError("report: unexpected value " + v.get<std::string>());
    }
    return v.get<double>();
  };
  for (const auto &c : j.at("checks")) {
    Check k;
    k.name = c.at("name").get<std::string>();
    k.pass = c.at("status").get<std::string>() == "pass";
    k.value = num(c.at("value"));
    k.tolerance = num(c.at("tolerance"));
    k.seconds = num(c.at("seconds"));
    r.checks.push_back(k);
  }
  r.overall = j.at("overall").get<bool>();
  return r;
}

// Test-build fault injection; each fault must trip at least one check.
enum class Fault { none, drop_hprime_term, flip_r_sign, leak_mass };

inline const char *fault_name(Fault f) {
  switch (f) {
    case Fault::drop_hprime_term: return "drop-hprime-term";
    case Fault::flip_r_sign: return "flip-R-sign";
    case Fault::leak_mass: return "leak-mass";
    default: return "none";
  }
}

inline Fault parse_fault(const std::string &s) {
  for (Fault f : {Fault::none, Fault::drop_hprime_term, Fault::flip_r_sign, Fault::leak_mass})
    if (s == fault_name(f)) return f;
  throw ConfigError("unknown fault mode `" + s + "`");
}

inline const std::vector<double> &validation_lambdas() {
  static const std::vector<double> l{0.2, 0.5, 1.0, 2.0, 5.0};
  return l;
}

namespace detail {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }
  void reset() { t0_ = std::chrono::steady_clock::now(); }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

inline Check make_check(std::string name, double value, double tol, bool pass, const Stopwatch &sw) {
  return {std::move(name), pass && std::isfinite(value), value, tol, sw.seconds()};
}

inline Check at_most(std::string name, double value, double tol, const Stopwatch &sw) {
  return make_check(std::move(name), value, tol, value <= tol, sw);
}

inline Check at_least(std::string name, double value, double tol, const Stopwatch &sw) {
  return make_check(std::move(name), value, tol, value >= tol, sw);
}

// smallest observed order over consecutive step pairs; pairs already at rounding level are skipped
inline double observed_order(const std::vector<double> &steps, const std::vector<double> &errs, double floor) {
  double order = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < errs.size(); ++i) {
    if (errs[i] <= floor) continue;
    double e2 = std::max(errs[i + 1], std::numeric_limits<double>::min());
    order = std::min(order, std::log(errs[i] / e2) / std::log(steps[i] / steps[i + 1]));
  }
  return order;
}

// renormalized path omega(h) = (omega + h domega)/|omega + h domega|
inline MacroState perturbed(const MacroState &st, const Perturbation &p, double h) {
  auto path = [h](Vec2 w, Vec2 dw) {
    Vec2 v = w + h * dw;
    return (1.0 / norm(v)) * v;
  };
  return {st.rho0 + h * p.drho0, st.rho1 + h * p.drho1, path(st.omega0, p.domega0), path(st.omega1, p.domega1)};
}

// Extended-precision copies of R and S for the finite-difference oracle. In
// double the central difference at h = 1e-5 sits on the rounding floor
// eps |f| / h ~ 1e-11, above the truncation error it is meant to expose.
struct WideState {
  long double rho0, rho1, ang0, ang1;
};

inline WideState perturbed_wide(const MacroState &st, const Perturbation &p, long double h) {
  auto ang = [h](Vec2 w, Vec2 dw) { return std::atan2(w.y + h * dw.y, w.x + h * dw.x); };
  return {st.rho0 + h * p.drho0, st.rho1 + h * p.drho1, ang(st.omega0, p.domega0), ang(st.omega1, p.domega1)};
}

inline long double wide_R(const WideState &s, const ExchangeParams &xp) {
  long double phi = 0.5L * (1.0L + (long double)xp.c(0) * xp.c(1) * std::cos(s.ang1 - s.ang0));
  return (long double)xp.tau1() * s.rho1 - (long double)xp.tau0() * s.rho0 +
         (long double)xp.alpha * ((long double)xp.tau1() - xp.tau0()) * s.rho0 * s.rho1 * phi;
}

inline std::array<long double, 2> wide_S(int which, const WideState &st, const ExchangeParams &xp_in) {
  WideState s = which == 0 ? st : WideState{st.rho1, st.rho0, st.ang1, st.ang0};
  ExchangeParams swapped;
  if (which == 1) swapped = xp_in.swapped();
  const ExchangeParams &xp = which == 0 ? xp_in : swapped;
  const CircleQuadrature &q = *xp.quad;
  const long double phi = s.ang1 - s.ang0, cp = std::cos(phi), sp = std::sin(phi);
  const long double lam1 = xp.lambda(1), mass1 = xp.shifted_mass[1];
  const long double a = xp.alpha, c0 = xp.c(0), c1 = xp.c(1), t0 = xp.tau0(), t1 = xp.tau1();
  long double par = 0, per = 0;
  for (int k = 0; k < q.n; ++k) {
    long double u0 = q.cos_t[k], v0 = q.sin_t[k];
    long double u1 = u0 * cp + v0 * sp;
    long double m1 = std::exp((u1 - 1.0L) / lam1) / mass1;
    long double g0 = 1.0L + 0.5L * a * s.rho0 * (1.0L + c0 * u0);
    long double g1 = 1.0L + 0.5L * a * s.rho1 * (1.0L + c1 * u1);
    long double e = -t0 * g1 * s.rho0 * xp.m_node[0][k] + t1 * g0 * s.rho1 * m1;
    long double v = e * xp.h_node[0][k];
    par += v * u0;
    per += v * v0;
  }
  par *= q.weight;
  per *= q.weight;
  long double c = std::cos(s.ang0), sn = std::sin(s.ang0);
  return {par * c - per * sn, par * sn + per * c};
}

inline Perturbation random_perturbation(const MacroState &st, std::mt19937_64 &rng, bool with_rho) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Perturbation p;
  if (with_rho) {
    p.drho0 = u(rng);
    p.drho1 = u(rng);
  }
  p.domega0 = u(rng) * perp(st.omega0);
  p.domega1 = u(rng) * perp(st.omega1);
  return p;
}

}  // namespace detail

// Normalization and order parameter against the modified Bessel series.
inline std::vector<Check> check_quadrature_oracle(int nodes) {
  detail::Stopwatch sw;
  double worst_c = 0.0, worst_order = 0.0;
  for (double lam : validation_lambdas()) {
    double i0 = std::cyl_bessel_i(0.0, 1.0 / lam), i1 = std::cyl_bessel_i(1.0, 1.0 / lam);
    double cn = normalization_constant(lam, nodes);
    worst_c = std::max(worst_c, std::abs(cn * kTwoPi * i0 - 1.0));
    worst_order = std::max(worst_order, std::abs(order_parameter_c(lam, nodes) - i1 / i0));
  }
  return {detail::at_most("quadrature.normalization_vs_bessel", worst_c, 1e-10, sw),
          detail::at_most("quadrature.order_parameter_vs_bessel", worst_order, 1e-10, sw)};
}

struct GciSummary {
  double max_residual = 0.0;
  double min_order = std::numeric_limits<double>::infinity();
  double max_interior_i2 = -std::numeric_limits<double>::infinity();
  double max_odd_mean = 0.0;
};

inline GciSummary gci_summary(int nodes) {
  GciSummary s;
  for (double lam : validation_lambdas()) {
    GeneralizedInvariant g = gci_build(lam, nodes);
    EllipticResidual r = elliptic_residual(g);
    EllipticResidual coarse = elliptic_residual(gci_build(lam, nodes / 2));
    s.max_residual = std::max(s.max_residual, r.max_residual);
    s.max_odd_mean = std::max(s.max_odd_mean, std::abs(r.mean_odd_extension));
    s.min_order = std::min(s.min_order, std::log2(coarse.max_residual / r.max_residual));
    for (int j = 1; j < g.intervals(); ++j) s.max_interior_i2 = std::max(s.max_interior_i2, g.i2_values[j]);
  }
  return s;
}

inline std::vector<Check> check_gci(int nodes) {
  detail::Stopwatch sw;
  GciSummary s = gci_summary(nodes);
  return {detail::at_most("gci.elliptic_residual", s.max_residual, 1e-4, sw),
          detail::at_least("gci.residual_order", s.min_order, 1.8, sw),
          detail::at_most("gci.i2_nonpositive_interior", s.max_interior_i2, 0.0, sw),
          detail::at_most("gci.odd_extension_mean", s.max_odd_mean, 1e-12, sw)};
}

// The two integration-by-parts identities, with h' from centered differences of the table.
struct BracketIdentityError {
  double first = 0.0, second = 0.0;
};

inline BracketIdentityError bracket_identity_error(double lam, int nodes) {
  // circle nodes theta_k = 2 pi k / nodes coincide with the invariant grid on [0, pi]
  GeneralizedInvariant g = gci_build(lam, nodes / 2);
  CircleQuadrature q(nodes);
  VonMisesWeights w(lam, q);
  const int n = g.intervals();
  std::vector<double> u(n + 1), h(n + 1), hp(n + 1);
  for (int j = 0; j <= n; ++j) {
    u[j] = j == 0 ? 1.0 : (j == n ? -1.0 : std::cos(g.theta_grid[j]));
    h[j] = g.h_node(j);
  }
  for (int j = 1; j < n; ++j) {
    // three-point derivative on the non-uniform u grid
    double a = u[j - 1] - u[j], b = u[j + 1] - u[j];
    hp[j] = (b * b * (h[j - 1] - h[j]) - a * a * (h[j + 1] - h[j])) / (a * b * (b - a));
  }
  hp[0] = g.h_prime_node(0);
  hp[n] = g.h_prime_node(n);
  auto bracket = [&](auto &&s) {
    double acc = 0.0;
    for (int k = 0; k < q.n; ++k) {
      int j = k <= n ? k : q.n - k;
      acc += w.weights()[k] * s(u[j], h[j], hp[j]);
    }
    return acc;
  };
  double s2h = bracket([](double c, double hh, double) { return (1 - c * c) * hh; });
  double ch = bracket([](double c, double hh, double) { return c * hh; });
  double s2hp = bracket([](double c, double, double d) { return (1 - c * c) * d; });
  double s2ch = bracket([](double c, double hh, double) { return (1 - c * c) * c * hh; });
  double c2h = bracket([](double c, double hh, double) { return c * c * hh; });
  double s2chp = bracket([](double c, double, double d) { return (1 - c * c) * c * d; });
  return {std::abs(s2h / lam - (ch - s2hp)), std::abs(s2ch / lam - (c2h - s2h - s2chp))};
}

inline std::vector<Check> check_bracket_identities(int nodes) {
  detail::Stopwatch sw;
  double e1 = 0.0, e2 = 0.0;
  for (double lam : validation_lambdas()) {
    BracketIdentityError e = bracket_identity_error(lam, nodes);
    e1 = std::max(e1, e.first);
    e2 = std::max(e2, e.second);
  }
  return {detail::at_most("brackets.sin2h_identity", e1, 1e-6, sw),
          detail::at_most("brackets.sin2cosh_identity", e2, 1e-6, sw)};
}

// R analytic vs the integral of E, and projected S two ways, over random states.
inline std::vector<Check> check_exchange_consistency(int nodes, std::uint64_t seed, Fault fault = Fault::none,
                                                     int states = 20) {
  detail::Stopwatch sw;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ulam(std::log(0.2), std::log(5.0)), ual(0.0, 2.0), utau(0.2, 3.0),
      urho(0.05, 2.0), uang(-kPi, kPi);
  double worst_r = 0.0, worst_s = 0.0;
  for (int i = 0; i < states; ++i) {
    double l0 = std::exp(ulam(rng)), l1 = std::exp(ulam(rng));
    ExchangeParams xp = make_exchange_params({1.0, l0}, {1.0, l1}, utau(rng), utau(rng), ual(rng), nodes);
    MacroState st = MacroState::from_angles(urho(rng), uang(rng), urho(rng), uang(rng));
    double r = mass_exchange_R(st, xp);
    if (fault == Fault::flip_r_sign) r = -r;
    worst_r = std::max(worst_r, std::abs(r - mass_exchange_R_integral(st, xp)));
    for (int w = 0; w < 2; ++w) {
      ProjectedS ps = projected_S(w, st, xp, std::numeric_limits<double>::infinity());
      worst_s = std::max(worst_s, std::abs(ps.perp - ps.simplified));
    }
  }
  return {detail::at_most("exchange.R_analytic_vs_integral", worst_r, 1e-8, sw),
          detail::at_most("exchange.projected_S_two_ways", worst_s, 1e-8, sw)};
}

struct EquilibriumSummary {
  double r_at_balance = 0.0;       // max |R| at rho0 = f_Phi(rho1)
  double s_at_equilibria = 0.0;    // max |projected S_w| at phi in {0, pi}
  double min_interior_s = 0.0;     // min |projected S_0| over interior angles
  int opposite_sign_rows = 0;      // interior rows whose two terms have opposite signs
  double max_gap = 0.0;            // decomposition residual
};

inline EquilibriumSummary equilibrium_summary(const ExchangeParams &xp, int interior = 20) {
  EquilibriumSummary s;
  for (double rho1 : {0.1, 0.4, 1.0, 1.7}) {
    for (double phi : {0.0, 0.6, kPi / 2, kPi}) {
      double phiv = 0.5 * (1.0 + xp.c(0) * xp.c(1) * std::cos(phi));
      double rho0 = density_equilibrium_f(rho1, phiv, xp);
      double r = mass_exchange_R(MacroState::from_angles(rho0, 0.0, rho1, phi), xp);
      s.r_at_balance = std::max(s.r_at_balance, std::abs(r));
    }
  }
  const double rho0 = 0.8, rho1 = 0.6;
  for (double phi : {0.0, kPi}) {
    MacroState st = MacroState::from_angles(rho0, 0.3, rho1, 0.3 + phi);
    for (int w = 0; w < 2; ++w) s.s_at_equilibria = std::max(s.s_at_equilibria, std::abs(projected_S(w, st, xp).perp));
  }
  std::vector<double> grid;
  for (int i = 1; i <= interior; ++i) grid.push_back(-kPi + kTwoPi * i / (interior + 1));
  grid.erase(std::remove_if(grid.begin(), grid.end(), [](double p) { return std::abs(std::sin(p)) < 1e-9; }),
             grid.end());
  s.min_interior_s = std::numeric_limits<double>::infinity();
  for (const ScanRow &row : equilibrium_scan(rho0, rho1, xp, grid)) {
    s.min_interior_s = std::min({s.min_interior_s, std::abs(row.s0_perp), std::abs(row.s1_perp)});
    s.max_gap = std::max(s.max_gap, std::abs(row.gap));
    if (!row.same_sign) ++s.opposite_sign_rows;
  }
  return s;
}

inline std::vector<Check> check_equilibria(const ExchangeParams &xp) {
  detail::Stopwatch sw;
  EquilibriumSummary s = equilibrium_summary(xp);
  return {detail::at_most("equilibria.R_at_density_balance", s.r_at_balance, 1e-12, sw),
          detail::at_most("equilibria.projected_S_at_0_and_pi", s.s_at_equilibria, 1e-10, sw),
          detail::at_least("equilibria.projected_S_interior_min", s.min_interior_s, 1e-12, sw),
          detail::at_most("equilibria.decomposition_gap", s.max_gap, 1e-10, sw),
          detail::at_most("equilibria.same_sign_violations", s.opposite_sign_rows, 0.0, sw)};
}

struct LinearizationOrders {
  double dr_order = 0.0, ds_order = 0.0;
  double dr_rel_err = 0.0, ds_rel_err = 0.0;  // at the smallest step
};

inline LinearizationOrders linearization_orders(const ExchangeParams &xp, std::uint64_t seed,
                                                LinearizationTerms terms = {}, int samples = 4) {
  const std::vector<double> steps{1e-3, 1e-4, 1e-5};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> urho(0.3, 1.5), uang(-kPi, kPi);
  LinearizationOrders out;
  out.dr_order = out.ds_order = std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    MacroState st = MacroState::from_angles(urho(rng), uang(rng), urho(rng), uang(rng));
    Perturbation p = detail::random_perturbation(st, rng, true);
    double dr = linearized_DR(st, xp, p);
    std::vector<double> er, es;
    for (double h : steps) {
      detail::WideState a = detail::perturbed_wide(st, p, h), b = detail::perturbed_wide(st, p, -h);
      double fr = static_cast<double>((detail::wide_R(a, xp) - detail::wide_R(b, xp)) / (2.0L * h));
      er.push_back(std::abs(fr - dr) / std::max(1.0, std::abs(dr)));
      double worst = 0.0;
      for (int w = 0; w < 2; ++w) {
        auto sa = detail::wide_S(w, a, xp), sb = detail::wide_S(w, b, xp);
        Vec2 fd{static_cast<double>((sa[0] - sb[0]) / (2.0L * h)), static_cast<double>((sa[1] - sb[1]) / (2.0L * h))};
        Vec2 ds = linearized_DS(w, st, xp, p, terms);
        worst = std::max(worst, norm(fd - ds) / std::max(1.0, norm(ds)));
      }
      es.push_back(worst);
    }
    out.dr_order = std::min(out.dr_order, detail::observed_order(steps, er, 1e-14));
    out.ds_order = std::min(out.ds_order, detail::observed_order(steps, es, 1e-14));
    out.dr_rel_err = std::max(out.dr_rel_err, er.back());
    out.ds_rel_err = std::max(out.ds_rel_err, es.back());
  }
  return out;
}

inline std::vector<Check> check_linearization(const ExchangeParams &xp, std::uint64_t seed, Fault fault = Fault::none) {
  detail::Stopwatch sw;
  LinearizationTerms terms;
  terms.include_hprime = fault != Fault::drop_hprime_term;
  LinearizationOrders o = linearization_orders(xp, seed, terms);
  return {detail::at_least("linearization.DR_fd_order", o.dr_order, 1.9, sw),
          detail::at_least("linearization.DS_fd_order", o.ds_order, 1.9, sw),
          detail::at_most("linearization.DR_rel_err", o.dr_rel_err, 1e-6, sw),
          detail::at_most("linearization.DS_rel_err", o.ds_rel_err, 1e-6, sw)};
}

struct ClosureSummary {
  double identity_err[2] = {0.0, 0.0};      // per branch, max |block - A (dOmega combination)|
  double cancellation_err[2] = {0.0, 0.0};  // per branch, max |A1 b0 + A0 b1| in the Omega_w^perp bases
  double reduction_err = 0.0;               // alpha = 0, lambda0 = lambda1
};

inline ClosureSummary closure_summary(const ExchangeParams &xp, std::uint64_t seed, LinearizationTerms terms = {},
                                      int perturbations = 50) {
  ClosureSummary s;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> urho(0.2, 1.5), uang(-kPi, kPi);
  for (int b = 0; b < 2; ++b) {
    Branch br = b == 0 ? Branch::aligned : Branch::anti_aligned;
    for (int i = 0; i < perturbations; ++i) {
      double th = uang(rng);
      MacroState st = MacroState::from_angles(urho(rng), th, urho(rng), b == 0 ? th : th + kPi);
      Perturbation p = detail::random_perturbation(st, rng, false);
      double a0 = closure_A(br, 0, st.rho0, st.rho1, xp), a1 = closure_A(br, 1, st.rho0, st.rho1, xp);
      ProjectedBlock b0 = projected_linearized_exchange(0, st, xp, p, terms);
      ProjectedBlock b1 = projected_linearized_exchange(1, st, xp, p, terms);
      Vec2 e0 = b == 0 ? a0 * (p.domega1 - p.domega0) : a0 * (p.domega1 + p.domega0);
      Vec2 e1 = b == 0 ? a1 * (p.domega0 - p.domega1) : a1 * (p.domega1 + p.domega0);
      s.identity_err[b] = std::max({s.identity_err[b], norm(b0.vec - e0), norm(b1.vec - e1)});
      s.cancellation_err[b] = std::max(s.cancellation_err[b], std::abs(a1 * b0.perp + a0 * b1.perp));
    }
  }
  ExchangeParams x0 = make_exchange_params({1.0, xp.lambda(0)}, {1.0, xp.lambda(0)}, xp.tau0(), xp.tau1(), 0.0,
                                           xp.quad->n);
  for (double r0 : {0.3, 1.1})
    for (double r1 : {0.5, 1.7}) {
      s.reduction_err = std::max(s.reduction_err, std::abs(closure_A(Branch::aligned, 0, r0, r1, x0) - x0.tau1() * r1));
      s.reduction_err = std::max(s.reduction_err, std::abs(closure_A(Branch::aligned, 1, r0, r1, x0) - x0.tau0() * r0));
    }
  return s;
}

inline std::vector<Check> check_closure(const ExchangeParams &xp, std::uint64_t seed, Fault fault = Fault::none) {
  detail::Stopwatch sw;
  LinearizationTerms terms;
  terms.include_hprime = fault != Fault::drop_hprime_term;
  ClosureSummary s = closure_summary(xp, seed, terms);
  return {detail::at_most("closure.identity_aligned", s.identity_err[0], 1e-8, sw),
          detail::at_most("closure.identity_anti_aligned", s.identity_err[1], 1e-8, sw),
          detail::at_most("closure.cancellation_aligned", s.cancellation_err[0], 1e-8, sw),
          detail::at_most("closure.cancellation_anti_aligned", s.cancellation_err[1], 1e-8, sw),
          detail::at_most("closure.alpha0_reduction", s.reduction_err, 1e-10, sw)};
}

struct SolverSummary {
  double two_phase_mass_step = 0.0;  // max per-step |change in total mass|
  double closed_mass_step = 0.0;
  double equilibrium_step = 0.0;     // max per-step deviation from a uniform equilibrium
  double relax_residual = 0.0;       // max(|R|, |projected S_w|) at the end of a uniform run
  double relax_mass_drift = 0.0;
  std::vector<double> deltas, l1;    // two-phase vs closed at t_end
  double dx = 0.0;
};

inline SolverSummary solver_summary(const RunConfig &cfg, const ExchangeParams &xp, const ExchangeTable &table,
                                    Fault fault = Fault::none, bool with_delta_sweep = true) {
  SolverSummary s;
  ClosedField c0 = initial_closed_field(cfg);
  s.dx = c0.dx;
  SolverConfig sc = solver_config(cfg, xp);

  // per-step mass, both solvers
  {
    TwoPhaseField f = project_to_equilibrium(c0, xp, sc.branch);
    for (int i = 0; i < f.nx; ++i) f.theta0[i] += 0.2 * std::sin(3.0 * kTwoPi * (i + 0.5) / f.nx);
    double h = transport_dt(sc, f.dx);
    for (int k = 0; k < 40; ++k) {
      double m = mass_total(f);
      step_two_phase(f, xp, table, sc, h);
      if (fault == Fault::leak_mass) f.rho1[0] -= 1e-9;
      s.two_phase_mass_step = std::max(s.two_phase_mass_step, std::abs(mass_total(f) - m));
    }
    ClosedField c = c0;
    for (int k = 0; k < 40; ++k) {
      double m = mass_total(c);
      step_closed(c, xp, sc, h);
      s.closed_mass_step = std::max(s.closed_mass_step, std::abs(mass_total(c) - m));
    }
  }
  // uniform equilibrium stays put
  {
    ClosedField u(c0.nx, c0.dx * c0.nx);
    std::fill(u.rho.begin(), u.rho.end(), cfg.macro.rho_mean);
    std::fill(u.theta.begin(), u.theta.end(), cfg.macro.theta_mean);
    TwoPhaseField f = project_to_equilibrium(u, xp, sc.branch);
    double h = transport_dt(sc, f.dx);
    for (int k = 0; k < 5; ++k) {
      TwoPhaseField g = f;
      step_two_phase(g, xp, table, sc, h);
      for (int i = 0; i < f.nx; ++i)
        s.equilibrium_step = std::max({s.equilibrium_step, std::abs(g.rho0[i] - f.rho0[i]),
                                       std::abs(g.rho1[i] - f.rho1[i]), std::abs(g.theta0[i] - f.theta0[i]),
                                       std::abs(g.theta1[i] - f.theta1[i])});
      f = std::move(g);
    }
  }
  // uniform relaxation from a generic start (relative angle pi/3)
  {
    UniformState u0{0.6, 0.2, 0.5, 0.2 + kPi / 3};
    double delta = sc.delta;
    double dt = delta / (10.0 * exchange_rate_scale(xp, u0.rho0, u0.rho1, sc.rho_floor));
    auto traj = relax_uniform_ode(u0, xp, delta, 80.0 * delta, dt, {sc.rho_floor, 1000000});
    const UniformState &z = traj.back().s;
    MacroState m = z.macro();
    s.relax_residual = std::max({std::abs(mass_exchange_R(m, xp)), std::abs(projected_S(0, m, xp).perp),
                                 std::abs(projected_S(1, m, xp).perp)});
    for (const auto &tp : traj)
      s.relax_mass_drift = std::max(s.relax_mass_drift, std::abs(tp.s.rho0 + tp.s.rho1 - u0.rho0 - u0.rho1));
  }
  if (with_delta_sweep) {
    SolverConfig cc = sc;
    cc.t_end = 1.0;
    ClosedField ref = c0;
    run_closed(ref, xp, cc, [](const ClosedField &) {});
    for (double d : {1e-1, 1e-2, 1e-3}) {
      SolverConfig tc = cc;
      tc.delta = d;
      TwoPhaseField f = project_to_equilibrium(c0, xp, tc.branch);
      run_two_phase(f, xp, table, tc, [](const TwoPhaseField &) {});
      s.deltas.push_back(d);
      s.l1.push_back(l1_distance_rho(f, ref));
    }
  }
  return s;
}

inline bool strictly_decreasing(const std::vector<double> &v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return !v.empty();
}

inline std::vector<Check> check_solvers(const RunConfig &cfg, const ExchangeParams &xp, const ExchangeTable &table,
                                        Fault fault = Fault::none) {
  detail::Stopwatch sw;
  SolverSummary s = solver_summary(cfg, xp, table, fault);
  std::vector<Check> out{detail::at_most("solver.two_phase_mass_per_step", s.two_phase_mass_step, 1e-12, sw),
                         detail::at_most("solver.closed_mass_per_step", s.closed_mass_step, 1e-12, sw),
                         detail::at_most("solver.equilibrium_per_step", s.equilibrium_step, 1e-9, sw),
                         detail::at_most("solver.relaxation_residual", s.relax_residual, 1e-8, sw),
                         detail::at_most("solver.relaxation_mass_drift", s.relax_mass_drift, 1e-12, sw)};
  out.push_back(detail::make_check("solver.delta_consistency_monotone", s.l1.empty() ? 0.0 : s.l1.back(),
                                   s.l1.empty() ? 0.0 : s.l1.front(), strictly_decreasing(s.l1), sw));
  double tol = s.deltas.empty() ? 0.0 : s.deltas.back() + s.dx;
  out.push_back(detail::at_most("solver.delta_consistency_l1", s.l1.empty() ? 0.0 : s.l1.back(), tol, sw));
  return out;
}

// Runs every group in order; logs one line per check through `log` when given.
template <class Log>
ValidationReport run_validate(const RunConfig &cfg, Fault fault, Log &&log) {
  ValidationReport r;
  auto add = [&](std::vector<Check> cs) {
    for (Check &c : cs) {
      log(c);
      r.add(std::move(c));
    }
  };
  const int nodes = cfg.numerics.nodes;
  const std::uint64_t seed = cfg.numerics.seed;
  add(check_quadrature_oracle(nodes));
  add(check_gci(nodes));
  add(check_bracket_identities(nodes));
  add(check_exchange_consistency(nodes, seed, fault));
  ExchangeParams xp = exchange_params(cfg);
  add(check_equilibria(xp));
  add(check_linearization(xp, seed, fault));
  add(check_closure(xp, seed, fault));
  ExchangeTable table(xp, cfg.macro.table_cells);
  add(check_solvers(cfg, xp, table, fault));
  return r;
}

inline ValidationReport run_validate(const RunConfig &cfg, Fault fault = Fault::none) {
  return run_validate(cfg, fault, [](const Check &) {});
}

}  // namespace vicsek2p

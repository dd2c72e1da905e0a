/* exchange.hpp -- macroscopic exchange operators R, S0, S1, their equilibria and linearizations */
#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "quadrature.hpp"
#include "vonmises.hpp"

namespace vicsek2p {

enum class Branch { aligned, anti_aligned };

inline const char *branch_name(Branch b) { return b == Branch::aligned ? "aligned" : "anti_aligned"; }

// Everything the exchange operators need, for phases w = 0 (resting) and 1 (moving).
// Arrays are indexed by phase so that swapped() relabels 0 <-> 1 exactly.
struct ExchangeParams {
  std::array<double, 2> tau{1.0, 1.0};
  double alpha = 0.0;
  std::array<PhaseCoefficients, 2> coeffs;
  std::array<std::shared_ptr<const GeneralizedInvariant>, 2> gci;
  std::shared_ptr<const CircleQuadrature> quad;

  // per-node tables on quad: h_w(cos theta_k), h_w'(cos theta_k), M_w(theta_k)
  std::array<std::vector<double>, 2> h_node, hp_node, m_node;
  std::array<double, 2> shifted_mass{1.0, 1.0};
  // cross brackets <s h_a>_{lambda_b}, indexed [a][b]
  std::array<std::array<double, 2>, 2> sin2h{}, sin2cosh{}, sin2h_minus{}, sin2cosh_minus{};

  double tau0() const { return tau[0]; }
  double tau1() const { return tau[1]; }
  double lambda(int w) const { return coeffs[w].lambda; }
  double c(int w) const { return coeffs[w].c; }
  double beta(int w) const { return coeffs[w].beta; }

  ExchangeParams swapped() const {
    ExchangeParams s = *this;
    auto sw = [](auto &a) { std::swap(a[0], a[1]); };
    sw(s.tau);
    sw(s.coeffs);
    sw(s.gci);
    sw(s.h_node);
    sw(s.hp_node);
    sw(s.m_node);
    sw(s.shifted_mass);
    for (auto *t : {&s.sin2h, &s.sin2cosh, &s.sin2h_minus, &s.sin2cosh_minus}) {
      std::swap((*t)[0][0], (*t)[1][1]);
      std::swap((*t)[0][1], (*t)[1][0]);
    }
    return s;
  }
};

inline ExchangeParams make_exchange_params(const PhaseParams &p0, const PhaseParams &p1, double tau0,
                                           double tau1, double alpha, int nodes = kDefaultNodes) {
  if (nodes < 64) throw ConfigError("exchange quadrature needs at least 64 nodes");
  for (double t : {tau0, tau1})
    if (!std::isfinite(t) || t < 0) throw DomainError("jump rates must be finite and non-negative");
  if (!std::isfinite(alpha) || alpha < 0) throw DomainError("alpha must be finite and non-negative");
  ExchangeParams xp;
  xp.tau = {tau0, tau1};
  xp.alpha = alpha;
  xp.quad = std::make_shared<CircleQuadrature>(nodes);
  const CircleQuadrature &q = *xp.quad;
  std::array<PhaseParams, 2> pp{p0, p1};
  std::array<std::unique_ptr<VonMisesWeights>, 2> w;
  for (int a = 0; a < 2; ++a) {
    if (!(pp[a].nu > 0) || !(pp[a].d > 0)) throw DomainError("nu and d must be positive");
    double lam = pp[a].d / pp[a].nu;
    xp.gci[a] = std::make_shared<GeneralizedInvariant>(gci_build(lam, nodes / 2));
    w[a] = std::make_unique<VonMisesWeights>(lam, q);
    xp.coeffs[a] = phase_coefficients_from(*xp.gci[a], *w[a]);
    xp.shifted_mass[a] = w[a]->shifted_mass();
    xp.h_node[a].resize(q.n);
    xp.hp_node[a].resize(q.n);
    xp.m_node[a].resize(q.n);
    for (int k = 0; k < q.n; ++k) {
      xp.h_node[a][k] = xp.gci[a]->h(q.cos_t[k]);
      xp.hp_node[a][k] = xp.gci[a]->h_prime(q.cos_t[k]);
      xp.m_node[a][k] = w[a]->weights()[k] / q.weight;
    }
  }
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const auto &g = *xp.gci[a];
      xp.sin2h[a][b] = w[b]->average([&](double u) { return (1 - u * u) * g.h(u); });
      xp.sin2cosh[a][b] = w[b]->average([&](double u) { return (1 - u * u) * u * g.h(u); });
      xp.sin2h_minus[a][b] = w[b]->average([&](double u) { return (1 - u * u) * g.h(-u); });
      xp.sin2cosh_minus[a][b] = w[b]->average([&](double u) { return (1 - u * u) * u * g.h(-u); });
    }
  return xp;
}

struct MacroState {
  double rho0 = 0.0, rho1 = 0.0;
  Vec2 omega0{1.0, 0.0}, omega1{1.0, 0.0};

  MacroState swapped() const { return {rho1, rho0, omega1, omega0}; }
  static MacroState from_angles(double rho0, double theta0, double rho1, double theta1) {
    return {rho0, rho1, unit(theta0), unit(theta1)};
  }
};

struct Perturbation {
  double drho0 = 0.0, drho1 = 0.0;
  Vec2 domega0{}, domega1{};

  Perturbation swapped() const { return {drho1, drho0, domega1, domega0}; }
};

namespace detail {

inline void require_unit(Vec2 v, const char *name) {
  if (std::abs(norm(v) - 1.0) > 1e-12) {
    std::ostringstream os;
    os << name << " is not a unit vector (|v| = " << norm(v) << ")";
    throw DomainError(os.str());
  }
}

inline void require_orthogonal(Vec2 w, Vec2 dw, const char *name) {
  if (std::abs(dot(w, dw)) > 1e-12 * std::max(1.0, norm(dw))) {
    std::ostringstream os;
    os << name << " is not orthogonal to its direction (dot = " << dot(w, dw) << ")";
    throw DomainError(os.str());
  }
}

// angle of omega1 measured from omega0
inline double relative_angle(const MacroState &st) {
  return std::atan2(dot(st.omega1, perp(st.omega0)), dot(st.omega1, st.omega0));
}

// Components of an integral in the frame (omega0, omega0^perp), back to the plane.
inline Vec2 from_frame(Vec2 omega0, double par, double per) { return par * omega0 + per * perp(omega0); }

}  // namespace detail

// Phi = (1 + c0 c1 Omega0.Omega1) / 2
inline double local_alignment_phi(const MacroState &st, double c0, double c1) {
  return 0.5 * (1.0 + c0 * c1 * dot(st.omega0, st.omega1));
}
inline double phi_min(double c0, double c1) { return 0.5 * (1.0 - c0 * c1); }
inline double phi_max(double c0, double c1) { return 0.5 * (1.0 + c0 * c1); }
inline double branch_phi(Branch b, double c0, double c1) {
  return b == Branch::aligned ? phi_max(c0, c1) : phi_min(c0, c1);
}

inline double mass_exchange_R(double rho0, double rho1, double phi, const ExchangeParams &xp) {
  return xp.tau1() * rho1 - xp.tau0() * rho0 + xp.alpha * (xp.tau1() - xp.tau0()) * rho0 * rho1 * phi;
}

inline double mass_exchange_R(const MacroState &st, const ExchangeParams &xp) {
  return mass_exchange_R(st.rho0, st.rho1, local_alignment_phi(st, xp.c(0), xp.c(1)), xp);
}

// The integrand E(rho0 M0, rho1 M1) evaluated in the frame of omega0 with
// omega1 at relative angle phi. Calls f(k, E_k) for every node.
template <class F>
void for_each_exchange_node(const MacroState &st, double phi, const ExchangeParams &xp, F &&f) {
  const CircleQuadrature &q = *xp.quad;
  const double cp = std::cos(phi), sp = std::sin(phi);
  const double lam1 = xp.lambda(1), inv_mass1 = 1.0 / xp.shifted_mass[1];
  const double a = xp.alpha, c0 = xp.c(0), c1 = xp.c(1);
  for (int k = 0; k < q.n; ++k) {
    double u0 = q.cos_t[k];
    double u1 = u0 * cp + q.sin_t[k] * sp;  // omega . omega1
    double m0 = xp.m_node[0][k];
    double m1 = std::exp((u1 - 1.0) / lam1) * inv_mass1;
    double g0 = 1.0 + 0.5 * a * st.rho0 * (1.0 + c0 * u0);
    double g1 = 1.0 + 0.5 * a * st.rho1 * (1.0 + c1 * u1);
    double e = -xp.tau0() * g1 * st.rho0 * m0 + xp.tau1() * g0 * st.rho1 * m1;
    f(k, e);
  }
}

// R by quadrature of the exchange kernel
inline double mass_exchange_R_integral(const MacroState &st, const ExchangeParams &xp) {
  double acc = 0.0;
  for_each_exchange_node(st, detail::relative_angle(st), xp, [&](int, double e) { acc += e; });
  return acc * xp.quad->weight;
}

namespace detail {

// S0 components (along omega0, along omega0^perp)
inline Vec2 s0_frame(const MacroState &st, const ExchangeParams &xp) {
  const CircleQuadrature &q = *xp.quad;
  double par = 0.0, per = 0.0;
  for_each_exchange_node(st, relative_angle(st), xp, [&](int k, double e) {
    double v = e * xp.h_node[0][k];
    par += v * q.cos_t[k];
    per += v * q.sin_t[k];
  });
  return {par * q.weight, per * q.weight};
}

}  // namespace detail

inline void require_nodes(const ExchangeParams &xp) {
  if (!xp.quad || xp.quad->n < 64) throw ConfigError("exchange quadrature needs at least 64 nodes");
}

// S0 = int E h0(w.Omega0) w dw,  S1 = -int E h1(w.Omega1) w dw
inline Vec2 momentum_exchange_S(int which, const MacroState &st, const ExchangeParams &xp) {
  require_nodes(xp);
  detail::require_unit(st.omega0, "omega0");
  detail::require_unit(st.omega1, "omega1");
  if (which == 1) return momentum_exchange_S(0, st.swapped(), xp.swapped());
  Vec2 f = detail::s0_frame(st, xp);
  return detail::from_frame(st.omega0, f.x, f.y);
}

struct ProjectedS {
  Vec2 vec;              // (Id - Omega_w (x) Omega_w) S_w
  double perp = 0.0;     // component on Omega_w^perp, from the direct projection
  double simplified = 0.0;  // same component from the term-by-term expression
};

namespace detail {

// Term-by-term projection of S0 onto omega0^perp: the M0 h0 term vanishes by
// parity and the second moment splits into <cos^2 h0>, <sin^2 h0> parts.
inline double s0_perp_simplified(const MacroState &st, const ExchangeParams &xp) {
  const CircleQuadrature &q = *xp.quad;
  const double phi = relative_angle(st), cp = std::cos(phi), sp = std::sin(phi);
  const double a = xp.alpha, c0 = xp.c(0), c1 = xp.c(1);
  double j1 = 0.0, j2 = 0.0;
  for (int k = 0; k < q.n; ++k) {
    double u1 = q.cos_t[k] * cp + q.sin_t[k] * sp;
    double m1 = std::exp((u1 - 1.0) / xp.lambda(1)) / xp.shifted_mass[1];
    double v = m1 * xp.h_node[0][k] * q.sin_t[k];
    j1 += v;
    j2 += v * q.cos_t[k];
  }
  j1 *= q.weight;
  j2 *= q.weight;
  return -0.5 * a * c1 * st.rho1 * st.rho0 * xp.tau0() * xp.sin2h[0][0] * sp +
         (1.0 + 0.5 * a * st.rho0) * st.rho1 * xp.tau1() * j1 +
         0.5 * a * c0 * st.rho0 * st.rho1 * xp.tau1() * j2;
}

}  // namespace detail

// Reported in the scalar basis Omega_w^perp.
inline ProjectedS projected_S(int which, const MacroState &st, const ExchangeParams &xp,
                              double tolerance = 1e-8) {
  require_nodes(xp);
  if (which == 1) {
    // relabelling flips the sign of E, which is exactly the sign in S1
    return projected_S(0, st.swapped(), xp.swapped(), tolerance);
  }
  detail::require_unit(st.omega0, "omega0");
  detail::require_unit(st.omega1, "omega1");
  Vec2 f = detail::s0_frame(st, xp);
  ProjectedS r;
  r.perp = f.y;
  r.vec = f.y * perp(st.omega0);
  r.simplified = detail::s0_perp_simplified(st, xp);
  double scale = std::max(1.0, std::abs(r.perp));
  if (std::abs(r.perp - r.simplified) > tolerance * scale) {
    std::ostringstream os;
    os << "projected S" << which << ": direct " << r.perp << " vs simplified " << r.simplified;
    throw ConsistencyError(os.str());
  }
  return r;
}

// rho0 solving R = 0 for given rho1: rho1 / (q + alpha (q - 1) Phi rho1), q = tau0 / tau1
inline double density_equilibrium_f(double rho1, double phi, const ExchangeParams &xp) {
  if (!(xp.tau1() > 0)) throw DomainError("density balance needs tau1 > 0");
  double q = xp.tau0() / xp.tau1();
  double den = q + xp.alpha * (q - 1.0) * phi * rho1;
  if (!(den > 0)) {
    std::ostringstream os;
    os << "density balance denominator " << den << " <= 0 at rho1 = " << rho1
       << "; rho1 exceeds the positivity bound " << 1.0 / (xp.alpha * phi * (1.0 / q - 1.0));
    throw PositivityError(os.str());
  }
  return rho1 / den;
}

inline double density_equilibrium_f_prime(double rho1, double phi, const ExchangeParams &xp) {
  double q = xp.tau0() / xp.tau1();
  double den = q + xp.alpha * (q - 1.0) * phi * rho1;
  return q / (den * den);
}

struct PositivityBound {
  int phase = 1;  // which density is bounded
  double value = 0.0;
};

// Absent when alpha = 0 or tau0 = tau1. tau1 > tau0 bounds rho1, tau1 < tau0 bounds rho0.
inline std::optional<PositivityBound> positivity_bound(const ExchangeParams &xp, double phi) {
  if (xp.alpha == 0.0 || xp.tau0() == xp.tau1()) return std::nullopt;
  double r = xp.tau1() / xp.tau0();
  if (r > 1.0) return PositivityBound{1, 1.0 / (xp.alpha * phi * (r - 1.0))};
  return PositivityBound{0, 1.0 / (xp.alpha * phi * (1.0 / r - 1.0))};
}

struct DensitySplit {
  double rho1 = 0.0;
  double drho1 = 0.0;  // d rho1 / d rho = 1 / k'(rho1)
};

// rho1 = k^{-1}(rho), k(rho1) = rho1 + f_Phi(rho1), by bisection on [0, rho].
inline DensitySplit invert_total_density_k(double rho, double phi, const ExchangeParams &xp) {
  if (!std::isfinite(rho) || rho < 0) throw DomainError("total density must be non-negative");
  DensitySplit out;
  if (rho == 0.0) {
    out.drho1 = 1.0 / (1.0 + density_equilibrium_f_prime(0.0, phi, xp));
    return out;
  }
  double lo = 0.0, hi = rho;
  double r = xp.tau1() / xp.tau0();
  if (r > 1.0 && xp.alpha > 0.0) {
    double bound = 1.0 / (xp.alpha * phi * (r - 1.0));
    if (bound < hi) {
      // k blows up at the bound, so the root is inside whenever k(bound-) > rho
      hi = bound * (1.0 - 1e-15);
    }
  }
  auto k = [&](double x) { return x + density_equilibrium_f(x, phi, xp); };
  if (k(hi) < rho) {
    std::ostringstream os;
    os << "no admissible rho1 for total density " << rho;
    throw PositivityError(os.str());
  }
  int it = 0;
  for (; it < 200 && hi - lo > 1e-12 * std::max(1.0, rho) * 0.5; ++it) {
    double mid = 0.5 * (lo + hi);
    (k(mid) < rho ? lo : hi) = mid;
  }
  if (it == 200) throw NumericalError("k^{-1} bisection did not converge in 200 iterations");
  // one Newton polish keeps the residual at rounding level
  double x = 0.5 * (lo + hi);
  double kp = 1.0 + density_equilibrium_f_prime(x, phi, xp);
  double xn = x - (k(x) - rho) / kp;
  if (xn >= lo && xn <= hi) x = xn;
  out.rho1 = x;
  out.drho1 = 1.0 / (1.0 + density_equilibrium_f_prime(x, phi, xp));
  return out;
}

// Split of the projected S0 at relative angle phi into the sinh-form integral and the remaining term.
struct ScanRow {
  double phi = 0.0;
  double s0_perp = 0.0;      // direct quadrature
  double s1_perp = 0.0;      // direct quadrature
  double integral_term = 0.0;  // sinh-form integral with the (1 + alpha rho0 (1 + c0 cos)/2) weight
  double other_term = 0.0;     // -alpha c1 rho0 rho1 tau0 / 2 <sin^2 h0>_{lambda0} sin phi
  double gap = 0.0;            // s0_perp - (integral_term + other_term)
  bool same_sign = true;       // the two terms do not have strictly opposite signs
};

inline ScanRow equilibrium_scan_row(double rho0, double rho1, double phi, const ExchangeParams &xp) {
  MacroState st = MacroState::from_angles(rho0, 0.0, rho1, phi);
  ScanRow row;
  row.phi = phi;
  row.s0_perp = detail::s0_frame(st, xp).y;
  row.s1_perp = detail::s0_frame(st.swapped(), xp.swapped()).y;
  const CircleQuadrature &q = *xp.quad;
  const double cp = std::cos(phi), sp = std::sin(phi), lam1 = xp.lambda(1);
  // theta in (0, pi): 2 sin e^{cos cos phi / l1} sinh(sin sin phi / l1) h0(cos), shifted by e^{-1/l1}
  double acc = 0.0;
  for (int k = 1; k < q.n / 2; ++k) {
    double cc = q.cos_t[k] * cp, ss = q.sin_t[k] * sp;
    double sh = -0.5 * std::exp((cc + ss - 1.0) / lam1) * std::expm1(-2.0 * ss / lam1);
    double wt = 1.0 + 0.5 * xp.alpha * rho0 * (1.0 + xp.c(0) * q.cos_t[k]);
    acc += 2.0 * wt * q.sin_t[k] * sh * xp.h_node[0][k];
  }
  row.integral_term = rho1 * xp.tau1() * acc * q.weight / xp.shifted_mass[1];
  row.other_term = -0.5 * xp.alpha * xp.c(1) * rho0 * rho1 * xp.tau0() * xp.sin2h[0][0] * sp;
  row.gap = row.s0_perp - (row.integral_term + row.other_term);
  auto sgn = [](double v, double tol) { return std::abs(v) <= tol ? 0 : (v > 0 ? 1 : -1); };
  double tol = 1e-14 * (std::abs(row.integral_term) + std::abs(row.other_term));
  row.same_sign = sgn(row.integral_term, tol) * sgn(row.other_term, tol) >= 0;
  return row;
}

inline std::vector<ScanRow> equilibrium_scan(double rho0, double rho1, const ExchangeParams &xp,
                                             const std::vector<double> &phi_grid) {
  if (!(rho0 > 0) || !(rho1 > 0)) throw DomainError("equilibrium scan needs positive densities");
  std::vector<ScanRow> rows;
  rows.reserve(phi_grid.size());
  for (double phi : phi_grid) rows.push_back(equilibrium_scan_row(rho0, rho1, phi, xp));
  return rows;
}

inline double linearized_DR(const MacroState &st, const ExchangeParams &xp, const Perturbation &p) {
  detail::require_orthogonal(st.omega0, p.domega0, "domega0");
  detail::require_orthogonal(st.omega1, p.domega1, "domega1");
  double phi = local_alignment_phi(st, xp.c(0), xp.c(1));
  double k = xp.alpha * (xp.tau1() - xp.tau0());
  return xp.tau1() * p.drho1 - xp.tau0() * p.drho0 + k * (p.drho0 * st.rho1 + st.rho0 * p.drho1) * phi +
         k * st.rho0 * st.rho1 * 0.5 * xp.c(0) * xp.c(1) *
             (dot(p.domega0, st.omega1) + dot(st.omega0, p.domega1));
}

struct LinearizationTerms {
  bool include_hprime = true;  // the h0'(w.Omega0)(w.dOmega0) contribution
};

struct LinearizedS {
  Vec2 x, y;   // DS0 = tau1 X0 - tau0 Y0
  Vec2 total;
};

namespace detail {

inline LinearizedS ds0(const MacroState &st, const ExchangeParams &xp, const Perturbation &p,
                       LinearizationTerms terms) {
  const CircleQuadrature &q = *xp.quad;
  const double phi = relative_angle(st), cp = std::cos(phi), sp = std::sin(phi);
  const double a0 = dot(p.domega0, perp(st.omega0));
  const double a1 = dot(p.domega1, perp(st.omega1));
  const double lam0 = xp.lambda(0), lam1 = xp.lambda(1);
  const double al = xp.alpha, c0 = xp.c(0), c1 = xp.c(1);
  const double inv_mass1 = 1.0 / xp.shifted_mass[1];
  double xpar = 0, xper = 0, ypar = 0, yper = 0;
  for (int k = 0; k < q.n; ++k) {
    double u0 = q.cos_t[k], v0 = q.sin_t[k];
    double u1 = u0 * cp + v0 * sp;  // cos(theta - phi)
    double v1 = v0 * cp - u0 * sp;  // sin(theta - phi)
    double m0 = xp.m_node[0][k];
    double m1 = std::exp((u1 - 1.0) / lam1) * inv_mass1;
    double g0 = 1.0 + 0.5 * al * st.rho0 * (1.0 + c0 * u0);
    double g1 = 1.0 + 0.5 * al * st.rho1 * (1.0 + c1 * u1);
    double dg0 = 0.5 * al * (p.drho0 * (1.0 + c0 * u0) + st.rho0 * c0 * a0 * v0);
    double dg1 = 0.5 * al * (p.drho1 * (1.0 + c1 * u1) + st.rho1 * c1 * a1 * v1);
    double drm0 = (p.drho0 + st.rho0 * a0 * v0 / lam0) * m0;
    double drm1 = (p.drho1 + st.rho1 * a1 * v1 / lam1) * m1;
    double h = xp.h_node[0][k];
    double hp = terms.include_hprime ? xp.hp_node[0][k] * a0 * v0 : 0.0;
    double xk = (dg0 * st.rho1 * m1 + g0 * drm1) * h + g0 * st.rho1 * m1 * hp;
    double yk = (dg1 * st.rho0 * m0 + g1 * drm0) * h + g1 * st.rho0 * m0 * hp;
    xpar += xk * u0;
    xper += xk * v0;
    ypar += yk * u0;
    yper += yk * v0;
  }
  LinearizedS r;
  r.x = from_frame(st.omega0, xpar * q.weight, xper * q.weight);
  r.y = from_frame(st.omega0, ypar * q.weight, yper * q.weight);
  r.total = xp.tau1() * r.x - xp.tau0() * r.y;
  return r;
}

}  // namespace detail

inline LinearizedS linearized_DS_parts(int which, const MacroState &st, const ExchangeParams &xp,
                                       const Perturbation &p, LinearizationTerms terms = {}) {
  require_nodes(xp);
  detail::require_unit(st.omega0, "omega0");
  detail::require_unit(st.omega1, "omega1");
  detail::require_orthogonal(st.omega0, p.domega0, "domega0");
  detail::require_orthogonal(st.omega1, p.domega1, "domega1");
  if (which == 1) return detail::ds0(st.swapped(), xp.swapped(), p.swapped(), terms);
  return detail::ds0(st, xp, p, terms);
}

inline Vec2 linearized_DS(int which, const MacroState &st, const ExchangeParams &xp,
                          const Perturbation &p, LinearizationTerms terms = {}) {
  return linearized_DS_parts(which, st, xp, p, terms).total;
}

struct ProjectedBlock {
  Vec2 vec;
  double perp = 0.0;  // component on Omega_w^perp
};

// lambda_w beta_w [(Id - Omega_w (x) Omega_w) DS_w - (Omega_w . S_w) dOmega_w]
inline ProjectedBlock projected_linearized_exchange(int which, const MacroState &st,
                                                    const ExchangeParams &xp, const Perturbation &p,
                                                    LinearizationTerms terms = {},
                                                    double equilibrium_tol = 1e-10) {
  double cross = dot(st.omega1, perp(st.omega0));
  if (std::abs(cross) > equilibrium_tol) {
    std::ostringstream os;
    os << "projected linearized exchange requires Omega0 = +-Omega1 (sin phi = " << cross << ")";
    throw DomainError(os.str());
  }
  Vec2 om = which == 0 ? st.omega0 : st.omega1;
  Vec2 dom = which == 0 ? p.domega0 : p.domega1;
  Vec2 ds = linearized_DS(which, st, xp, p, terms);
  Vec2 s = momentum_exchange_S(which, st, xp);
  double lb = xp.lambda(which) * xp.beta(which);
  ProjectedBlock b;
  b.vec = lb * (project_out(om, ds) - dot(om, s) * dom);
  b.perp = dot(b.vec, perp(om));
  return b;
}

inline double closure_A(Branch branch, int which, double rho0, double rho1, const ExchangeParams &xp) {
  if (which == 1) return closure_A(branch, 0, rho1, rho0, xp.swapped());
  const double l0 = xp.lambda(0), l1 = xp.lambda(1), al = xp.alpha;
  const bool plus = branch == Branch::aligned;
  double s2 = plus ? xp.sin2h[0][1] : xp.sin2h_minus[0][1];
  double s2c = plus ? xp.sin2cosh[0][1] : xp.sin2cosh_minus[0][1];
  double sign = plus ? 1.0 : -1.0;
  return l0 * xp.beta(0) *
         (xp.tau1() * (1.0 + 0.5 * al * rho0) * rho1 / l1 * s2 +
          sign * xp.tau1() * 0.5 * al * xp.c(0) * rho0 * rho1 / l1 * s2c -
          xp.tau0() * 0.5 * al * xp.c(1) * rho1 * rho0 * xp.sin2h[0][0]);
}

struct ClosureCoefficients {
  Branch branch = Branch::aligned;
  double rho = 0.0, rho0 = 0.0, rho1 = 0.0;
  double drho0 = 0.0, drho1 = 0.0;
  double a0 = 0.0, a1 = 0.0;
  double m = 0.0, n = 0.0, p = 0.0;
};

inline ClosureCoefficients closure_MNP(Branch branch, double rho, const ExchangeParams &xp) {
  ClosureCoefficients cc;
  cc.branch = branch;
  cc.rho = rho;
  double phi = branch_phi(branch, xp.c(0), xp.c(1));
  DensitySplit ds = invert_total_density_k(rho, phi, xp);
  cc.rho1 = ds.rho1;
  cc.rho0 = rho - ds.rho1;
  cc.drho1 = ds.drho1;
  cc.drho0 = 1.0 - ds.drho1;
  cc.a0 = closure_A(branch, 0, cc.rho0, cc.rho1, xp);
  cc.a1 = closure_A(branch, 1, cc.rho0, cc.rho1, xp);
  cc.m = cc.a1 * cc.rho0 + cc.a0 * cc.rho1;
  cc.n = cc.rho1 * cc.a0;
  cc.p = xp.lambda(0) * cc.a1 * cc.drho0 + xp.lambda(1) * cc.a0 * cc.drho1;
  return cc;
}

// Fast evaluation of the projected momentum exchange for the stiff solvers.
// In the frame of Omega_w the perp component is
//   S_w^perp = rho_v tau_v J1(phi) + rho0 rho1 alpha/2 [tau_v J1 + c_w tau_v J2 - c_v tau_w <sin^2 h_w> sin phi]
// (v the other phase), with J1, J2 tabulated in phi with exact derivatives
// and interpolated by cubic Hermite.
class ExchangeTable {
 public:
  ExchangeTable() = default;
  ExchangeTable(const ExchangeParams &xp, int phi_cells = 4096) : cells_(phi_cells) {
    require_nodes(xp);
    alpha_ = xp.alpha;
    for (int w = 0; w < 2; ++w) {
      ExchangeParams sx = w == 0 ? xp : xp.swapped();
      tau_self_[w] = sx.tau0();
      tau_other_[w] = sx.tau1();
      c_self_[w] = sx.c(0);
      c_other_[w] = sx.c(1);
      sin2h_[w] = sx.sin2h[0][0];
      build(sx, j1_[w], j1p_[w], j2_[w], j2p_[w]);
    }
  }

  // perp component of S_w on Omega_w^perp; phi is the angle of the other
  // phase's direction measured from Omega_w
  double s_perp(int w, double rho_w, double rho_v, double phi) const {
    double j1, j2;
    eval(w, phi, j1, j2);
    return rho_v * tau_other_[w] * j1 +
           rho_w * rho_v * 0.5 * alpha_ *
               (tau_other_[w] * j1 + c_self_[w] * tau_other_[w] * j2 -
                c_other_[w] * tau_self_[w] * sin2h_[w] * std::sin(phi));
  }

  // S0^perp and S1^perp in their own bases for the state (rho0, theta0, rho1, theta1)
  void s_perp_pair(double rho0, double th0, double rho1, double th1, double &s0, double &s1) const {
    double phi = th1 - th0;
    s0 = s_perp(0, rho0, rho1, phi);
    s1 = s_perp(1, rho1, rho0, -phi);
  }

 private:
  void build(const ExchangeParams &sx, std::vector<double> &j1, std::vector<double> &j1p,
             std::vector<double> &j2, std::vector<double> &j2p) {
    const CircleQuadrature &q = *sx.quad;
    j1.assign(cells_ + 1, 0.0);
    j1p.assign(cells_ + 1, 0.0);
    j2.assign(cells_ + 1, 0.0);
    j2p.assign(cells_ + 1, 0.0);
    const double lam1 = sx.lambda(1), inv_mass1 = 1.0 / sx.shifted_mass[1];
    for (int i = 0; i <= cells_ / 2; ++i) {
      double phi = kTwoPi * i / cells_;
      double cp = std::cos(phi), sp = std::sin(phi);
      double a = 0, ap = 0, b = 0, bp = 0;
      // pair theta and -theta: the integrand of J1 is odd in phi
      for (int k = 1; k < q.n / 2; ++k) {
        double u = q.cos_t[k], v = q.sin_t[k];
        double up = u * cp + v * sp, um = u * cp - v * sp;  // cos(theta -+ phi)
        double mp = std::exp((up - 1.0) / lam1), mm = std::exp((um - 1.0) / lam1);
        // d/dphi cos(theta - phi) = sin(theta - phi)
        double sp_ = v * cp - u * sp, sm_ = -v * cp - u * sp;
        double hv = sx.h_node[0][k] * v;
        a += hv * (mp - mm);
        ap += hv * (mp * sp_ - mm * sm_) / lam1;
        b += hv * u * (mp - mm);
        bp += hv * u * (mp * sp_ - mm * sm_) / lam1;
      }
      double s = q.weight * inv_mass1;
      j1[i] = a * s;
      j1p[i] = ap * s;
      j2[i] = b * s;
      j2p[i] = bp * s;
    }
    // J(-phi) = -J(phi), J'(-phi) = J'(phi)
    for (int i = cells_ / 2 + 1; i <= cells_; ++i) {
      int m = cells_ - i;
      j1[i] = -j1[m];
      j1p[i] = j1p[m];
      j2[i] = -j2[m];
      j2p[i] = j2p[m];
    }
    j1[0] = j2[0] = j1[cells_] = j2[cells_] = 0.0;
    j1[cells_ / 2] = j2[cells_ / 2] = 0.0;
  }

  void eval(int w, double phi, double &j1, double &j2) const {
    double x = phi / kTwoPi;
    x -= std::floor(x);
    x *= cells_;
    int i = static_cast<int>(x);
    if (i >= cells_) i = cells_ - 1;
    double t = x - i, h = kTwoPi / cells_;
    double t2 = t * t, t3 = t2 * t;
    double h00 = 2 * t3 - 3 * t2 + 1, h10 = (t3 - 2 * t2 + t) * h, h01 = -2 * t3 + 3 * t2,
           h11 = (t3 - t2) * h;
    j1 = h00 * j1_[w][i] + h10 * j1p_[w][i] + h01 * j1_[w][i + 1] + h11 * j1p_[w][i + 1];
    j2 = h00 * j2_[w][i] + h10 * j2p_[w][i] + h01 * j2_[w][i + 1] + h11 * j2p_[w][i + 1];
  }

  int cells_ = 0;
  double alpha_ = 0.0;
  std::array<double, 2> tau_self_{}, tau_other_{}, c_self_{}, c_other_{}, sin2h_{};
  std::array<std::vector<double>, 2> j1_, j1p_, j2_, j2p_;
};

}  // namespace vicsek2p

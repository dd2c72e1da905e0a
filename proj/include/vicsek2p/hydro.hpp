/* hydro.hpp -- uniform relaxation ODE, 1-D two-phase and closed macroscopic solvers */
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "exchange.hpp"
#include "geometry.hpp"
#include "parallel.hpp"

namespace vicsek2p {

struct UniformState {
  double rho0 = 0.0, theta0 = 0.0, rho1 = 0.0, theta1 = 0.0;

  MacroState macro() const { return MacroState::from_angles(rho0, theta0, rho1, theta1); }
};

struct TrajectoryPoint {
  double t = 0.0;
  UniformState s;
};

struct RelaxOptions {
  double rho_floor = 1e-10;
  int record_every = 1;
  // use the phi-table instead of direct quadrature for S
  const ExchangeTable *table = nullptr;
};

namespace detail {

struct UniformRhs {
  const ExchangeParams &xp;
  const ExchangeTable *table;
  double delta, rho_floor;

  UniformState operator()(const UniformState &s) const {
    double phi = local_alignment_phi(s.macro(), xp.c(0), xp.c(1));
    double r = mass_exchange_R(s.rho0, s.rho1, phi, xp) / delta;
    double s0, s1;
    if (table) {
      table->s_perp_pair(s.rho0, s.theta0, s.rho1, s.theta1, s0, s1);
    } else {
      MacroState m = s.macro();
      s0 = s0_frame(m, xp).y;
      s1 = s0_frame(m.swapped(), xp.swapped()).y;
    }
    UniformState d;
    d.rho0 = r;
    d.rho1 = -r;
    d.theta0 = xp.lambda(0) * xp.beta(0) * s0 / (delta * std::max(s.rho0, rho_floor));
    d.theta1 = xp.lambda(1) * xp.beta(1) * s1 / (delta * std::max(s.rho1, rho_floor));
    return d;
  }
};

inline UniformState axpy(const UniformState &a, double h, const UniformState &d) {
  return {a.rho0 + h * d.rho0, a.theta0 + h * d.theta0, a.rho1 + h * d.rho1, a.theta1 + h * d.theta1};
}

inline bool finite(const UniformState &s) {
  return std::isfinite(s.rho0) && std::isfinite(s.rho1) && std::isfinite(s.theta0) &&
         std::isfinite(s.theta1);
}

// Heun step that leaves rho0 + rho1 untouched up to rounding
inline UniformState heun(const UniformRhs &f, const UniformState &s, double h) {
  UniformState k1 = f(s);
  UniformState k2 = f(axpy(s, h, k1));
  UniformState out;
  double dr = 0.5 * h * (k1.rho0 + k2.rho0);
  out.rho0 = s.rho0 + dr;
  out.rho1 = s.rho1 - dr;
  out.theta0 = s.theta0 + 0.5 * h * (k1.theta0 + k2.theta0);
  out.theta1 = s.theta1 + 0.5 * h * (k1.theta1 + k2.theta1);
  return out;
}

}  // namespace detail

// A bound on the Jacobian of the exchange right-hand side, used to pick substeps.
inline double exchange_rate_scale(const ExchangeParams &xp, double rho0, double rho1, double rho_floor) {
  double mass = (xp.tau0() + xp.tau1()) * (1.0 + 2.0 * xp.alpha * (rho0 + rho1));
  double ang = 0.0;
  for (int w = 0; w < 2; ++w) {
    int v = 1 - w;
    double rw = std::max(w == 0 ? rho0 : rho1, rho_floor), rv = w == 0 ? rho1 : rho0;
    double hmax = 0.0;
    for (double h : xp.h_node[w]) hmax = std::max(hmax, std::abs(h));
    // |dJ/dphi| <= max|h_w| / lambda_v
    double dj = hmax / xp.lambda(v);
    double bound = rv * xp.tau[v] * (1.0 + 0.5 * xp.alpha * rw * (1.0 + std::abs(xp.c(w)))) * dj +
                   0.5 * xp.alpha * rw * rv * std::abs(xp.c(v)) * xp.tau[w] * std::abs(xp.sin2h[w][w]);
    ang = std::max(ang, xp.lambda(w) * std::abs(xp.beta(w)) * bound / rw);
  }
  return std::max(mass, ang);
}

inline std::vector<TrajectoryPoint> relax_uniform_ode(const UniformState &s0, const ExchangeParams &xp,
                                                     double delta, double t_end, double dt,
                                                     const RelaxOptions &opt = {}) {
  if (!(delta > 0) || !(t_end >= 0) || !(dt > 0)) throw ConfigError("relax: delta, t_end, dt must be positive");
  double guard = delta / (10.0 * exchange_rate_scale(xp, s0.rho0, s0.rho1, opt.rho_floor));
  if (dt > guard * (1 + 1e-12)) {
    std::ostringstream os;
    os << "relax: dt = " << dt << " exceeds delta/(10 rate) = " << guard;
    throw ConfigError(os.str());
  }
  detail::UniformRhs f{xp, opt.table, delta, opt.rho_floor};
  std::vector<TrajectoryPoint> traj{{0.0, s0}};
  UniformState s = s0;
  long steps = static_cast<long>(std::ceil(t_end / dt - 1e-12));
  double h = steps > 0 ? t_end / steps : 0.0;
  for (long i = 1; i <= steps; ++i) {
    UniformState next = detail::heun(f, s, h);
    if (!detail::finite(next)) {
      std::ostringstream os;
      os << "relax: non-finite state after t = " << (i - 1) * h;
      throw NumericalError(os.str());
    }
    s = next;
    if (i % std::max(1, opt.record_every) == 0 || i == steps) traj.push_back({i * h, s});
  }
  return traj;
}

struct SolverConfig {
  double delta = 1e-2;
  double cfl = 0.5;
  double t_end = 1.0;
  double rho_floor = 1e-10;
  Branch branch = Branch::aligned;
  double c1 = 0.0;       // flux constant, from the moving phase
  double gamma1 = 0.0;   // advection constant, from the moving phase
  // substep as a fraction of delta / rate in the stiff stage
  double stiff_fraction = 0.1;
};

struct TwoPhaseField {
  int nx = 0;
  double dx = 0.0;
  double t = 0.0;
  std::vector<double> rho0, theta0, rho1, theta1;
  std::vector<unsigned char> flagged;  // angle update skipped for rho below the floor

  TwoPhaseField() = default;
  TwoPhaseField(int n, double length) : nx(n), dx(length / n), rho0(n), theta0(n), rho1(n), theta1(n), flagged(n) {}
};

struct ClosedField {
  int nx = 0;
  double dx = 0.0;
  double t = 0.0;
  std::vector<double> rho, theta;
  std::vector<unsigned char> flagged;

  ClosedField() = default;
  ClosedField(int n, double length) : nx(n), dx(length / n), rho(n), theta(n), flagged(n) {}
};

inline double mass_total(const TwoPhaseField &f) {
  double m = 0.0;
  for (int i = 0; i < f.nx; ++i) m += f.rho0[i] + f.rho1[i];
  return m * f.dx;
}

inline double mass_total(const ClosedField &f) {
  double m = 0.0;
  for (int i = 0; i < f.nx; ++i) m += f.rho[i];
  return m * f.dx;
}

inline SolverConfig solver_config_for(const ExchangeParams &xp, double delta, double cfl, double t_end,
                                      Branch branch = Branch::aligned) {
  SolverConfig c;
  c.delta = delta;
  c.cfl = cfl;
  c.t_end = t_end;
  c.branch = branch;
  c.c1 = xp.c(1);
  c.gamma1 = xp.coeffs[1].gamma1;
  return c;
}

// Transport time step from the CFL number.
inline double transport_dt(const SolverConfig &cfg, double dx) {
  double speed = std::max(std::abs(cfg.c1), std::abs(cfg.gamma1));
  if (!(speed > 0)) speed = 1.0;
  return cfg.cfl * dx / speed;
}

inline void check_cfl(const SolverConfig &cfg, double dx, double dt) {
  if (!(cfg.cfl > 0 && cfg.cfl < 1)) throw ConfigError("cfl must lie in (0, 1)");
  double speed = std::max(std::abs(cfg.c1), std::abs(cfg.gamma1));
  if (speed * dt / dx > cfg.cfl * (1 + 1e-12)) {
    std::ostringstream os;
    os << "CFL violated: max(c1, gamma1) dt/dx = " << speed * dt / dx << " > " << cfg.cfl;
    throw ConfigError(os.str());
  }
}

namespace detail {

inline int wrap_index(int i, int n) { return (i % n + n) % n; }

inline double angle_diff(double a, double b) { return std::remainder(a - b, kTwoPi); }

// Split donor-cell flux differences for d/dx(v q): each cell sends its mass
// downwind of its own velocity, which keeps q >= 0 when max|v| h / dx <= 1.
inline void upwind_flux_update(const std::vector<double> &q, const std::vector<double> &v, double lambda,
                               std::vector<double> &out) {
  const int n = static_cast<int>(q.size());
  std::vector<double> face(n);
  for (int i = 0; i < n; ++i) {
    int r = wrap_index(i + 1, n);
    face[i] = std::max(v[i], 0.0) * q[i] + std::min(v[r], 0.0) * q[r];
  }
  for (int i = 0; i < n; ++i) out[i] = q[i] - lambda * (face[i] - face[wrap_index(i - 1, n)]);
}

// transport stage of the two-phase system over time h
inline void two_phase_transport(TwoPhaseField &f, const ExchangeParams &xp, const SolverConfig &cfg, double h) {
  const int n = f.nx;
  const double dx = f.dx;
  std::vector<double> v(n), rho1_new(n);
  for (int i = 0; i < n; ++i) v[i] = cfg.c1 * std::cos(f.theta1[i]);
  upwind_flux_update(f.rho1, v, h / dx, rho1_new);
  std::vector<double> th0 = f.theta0, th1 = f.theta1;
  for (int i = 0; i < n; ++i) {
    int l = wrap_index(i - 1, n), r = wrap_index(i + 1, n);
    f.flagged[i] = 0;
    if (f.rho0[i] >= cfg.rho_floor) {
      double drho0 = (f.rho0[r] - f.rho0[l]) / (2 * dx);
      th0[i] = f.theta0[i] + h * xp.lambda(0) / f.rho0[i] * std::sin(f.theta0[i]) * drho0;
    } else {
      f.flagged[i] = 1;
    }
    if (f.rho1[i] >= cfg.rho_floor) {
      double a = cfg.gamma1 * std::cos(f.theta1[i]);
      double dth = a >= 0 ? angle_diff(f.theta1[i], f.theta1[l]) : angle_diff(f.theta1[r], f.theta1[i]);
      double drho1 = (f.rho1[r] - f.rho1[l]) / (2 * dx);
      th1[i] = f.theta1[i] + h * (-a * dth / dx + xp.lambda(1) / f.rho1[i] * std::sin(f.theta1[i]) * drho1);
    } else {
      f.flagged[i] = 1;
    }
  }
  f.rho1 = std::move(rho1_new);
  f.theta0 = std::move(th0);
  f.theta1 = std::move(th1);
}

}  // namespace detail

inline constexpr double kMaxStiffSubsteps = 1e5;

// Stiff exchange stage: each cell integrates the uniform ODE over h with substeps.
inline void two_phase_exchange(TwoPhaseField &f, const ExchangeParams &xp, const ExchangeTable &table,
                               const SolverConfig &cfg, double h) {
  detail::UniformRhs rhs{xp, &table, cfg.delta, cfg.rho_floor};
  parallel_for(f.nx, [&](long b, long e) {
    for (long i = b; i < e; ++i) {
      UniformState s{f.rho0[i], f.theta0[i], f.rho1[i], f.theta1[i]};
      double rate = exchange_rate_scale(xp, s.rho0, s.rho1, cfg.rho_floor);
      double sub = cfg.stiff_fraction * cfg.delta / rate;
      double want = std::ceil(h / sub);
      if (!(want <= kMaxStiffSubsteps)) {
        std::ostringstream os;
        os << "two-phase exchange: cell " << i << " needs " << want << " substeps (rho0 = " << s.rho0
           << ", rho1 = " << s.rho1 << "); a density is collapsing";
        throw NumericalError(os.str());
      }
      long m = std::max(1L, static_cast<long>(want));
      double hs = h / m;
      for (long k = 0; k < m; ++k) s = detail::heun(rhs, s, hs);
      if (!detail::finite(s)) {
        std::ostringstream os;
        os << "two-phase exchange: non-finite state in cell " << i;
        throw NumericalError(os.str());
      }
      f.rho0[i] = s.rho0;
      f.rho1[i] = s.rho1;
      f.theta0[i] = s.theta0;
      f.theta1[i] = s.theta1;
    }
  }, 8);
}

// Strang step: transport h/2, exchange h, transport h/2.
inline void step_two_phase(TwoPhaseField &f, const ExchangeParams &xp, const ExchangeTable &table,
                           const SolverConfig &cfg, double h) {
  check_cfl(cfg, f.dx, h);
  detail::two_phase_transport(f, xp, cfg, 0.5 * h);
  two_phase_exchange(f, xp, table, cfg, h);
  detail::two_phase_transport(f, xp, cfg, 0.5 * h);
  f.t += h;
}

// One explicit step of rho_t + (c1 rho1[rho] cos)_x = 0,
// M theta_t + gamma1 N cos theta_x = P sin rho_x.
inline void step_closed(ClosedField &f, const ExchangeParams &xp, const SolverConfig &cfg, double h) {
  check_cfl(cfg, f.dx, h);
  const int n = f.nx;
  const double dx = f.dx;
  std::vector<ClosureCoefficients> cc(n);
  std::vector<double> q(n), v(n);
  for (int i = 0; i < n; ++i) {
    cc[i] = closure_MNP(cfg.branch, f.rho[i], xp);
    v[i] = cfg.c1 * std::cos(f.theta[i]);
    q[i] = cc[i].rho1;
  }
  // conservative split flux on rho1[rho]; rho absorbs the difference
  std::vector<double> rho_new(n), th_new(f.theta);
  detail::upwind_flux_update(q, v, h / dx, rho_new);
  for (int i = 0; i < n; ++i) rho_new[i] += f.rho[i] - q[i];
  for (int i = 0; i < n; ++i) {
    f.flagged[i] = 0;
    if (f.rho[i] < cfg.rho_floor) {
      f.flagged[i] = 1;
      continue;
    }
    double m = cc[i].m;
    if (!(std::abs(m) >= cfg.rho_floor * cfg.rho_floor)) {
      std::ostringstream os;
      os << "closed solver: M = " << m << " below the floor in cell " << i;
      throw NumericalError(os.str());
    }
    int l = detail::wrap_index(i - 1, n), r = detail::wrap_index(i + 1, n);
    double a = cfg.gamma1 * cc[i].n * std::cos(f.theta[i]) / m;
    double dth = a >= 0 ? detail::angle_diff(f.theta[i], f.theta[l]) : detail::angle_diff(f.theta[r], f.theta[i]);
    double drho = (f.rho[r] - f.rho[l]) / (2 * dx);
    th_new[i] = f.theta[i] + h * (-a * dth / dx + cc[i].p / m * std::sin(f.theta[i]) * drho);
  }
  for (int i = 0; i < n; ++i)
    if (!std::isfinite(rho_new[i]) || !std::isfinite(th_new[i])) {
      std::ostringstream os;
      os << "closed solver: non-finite state in cell " << i << " at t = " << f.t;
      throw NumericalError(os.str());
    }
  f.rho = std::move(rho_new);
  f.theta = std::move(th_new);
  f.t += h;
}

// Two-phase field at the branch equilibrium with the given total density and direction.
inline TwoPhaseField project_to_equilibrium(const ClosedField &c, const ExchangeParams &xp, Branch branch) {
  TwoPhaseField f(c.nx, c.dx * c.nx);
  double phi = branch_phi(branch, xp.c(0), xp.c(1));
  for (int i = 0; i < c.nx; ++i) {
    DensitySplit s = invert_total_density_k(c.rho[i], phi, xp);
    f.rho1[i] = s.rho1;
    f.rho0[i] = c.rho[i] - s.rho1;
    f.theta1[i] = c.theta[i];
    f.theta0[i] = branch == Branch::aligned ? c.theta[i] : c.theta[i] + kPi;
  }
  f.t = c.t;
  return f;
}

inline double l1_distance_rho(const TwoPhaseField &a, const ClosedField &b) {
  double s = 0.0;
  for (int i = 0; i < a.nx; ++i) s += std::abs(a.rho0[i] + a.rho1[i] - b.rho[i]);
  return s * a.dx;
}

// Runs either solver to t_end with the CFL step, calling observe(field) after each step.
template <class Observer>
void run_two_phase(TwoPhaseField &f, const ExchangeParams &xp, const ExchangeTable &table,
                   const SolverConfig &cfg, Observer &&observe) {
  double h = transport_dt(cfg, f.dx);
  long steps = static_cast<long>(std::ceil((cfg.t_end - f.t) / h - 1e-12));
  if (steps <= 0) return;
  h = (cfg.t_end - f.t) / steps;
  for (long s = 0; s < steps; ++s) {
    step_two_phase(f, xp, table, cfg, h);
    observe(f);
  }
}

template <class Observer>
void run_closed(ClosedField &f, const ExchangeParams &xp, const SolverConfig &cfg, Observer &&observe) {
  double h = transport_dt(cfg, f.dx);
  long steps = static_cast<long>(std::ceil((cfg.t_end - f.t) / h - 1e-12));
  if (steps <= 0) return;
  h = (cfg.t_end - f.t) / steps;
  for (long s = 0; s < steps; ++s) {
    step_closed(f, xp, cfg, h);
    observe(f);
  }
}

}  // namespace vicsek2p

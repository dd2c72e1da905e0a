/* xscale.hpp -- particle runs compared against the uniform macroscopic equilibrium */
#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "config.hpp"
#include "exchange.hpp"
#include "hydro.hpp"
#include "particle.hpp"

namespace vicsek2p {

inline constexpr long kXscaleMinParticles = 1000;

struct XscaleRow {
  std::string observable;
  double micro = 0.0, macro = 0.0, discrepancy = 0.0;
};

struct XscaleResult {
  std::vector<XscaleRow> rows;
  double moving_fraction = 0.0;        // time average after burn-in
  double moving_fraction_sigma = 0.0;  // binomial sigma of one snapshot
  double macro_fraction = 0.0;
  double ks[2] = {0.0, 0.0};
  long particles[2] = {0, 0};
  double seconds = 0.0;
};

// All-to-all kernel: every particle carries mass 1/N, so the microscopic
// alpha and the macroscopic alpha coincide with rho_w the phase fractions.
inline XscaleResult run_xscale(const RunConfig &cfg) {
  if (cfg.xscale.n < kXscaleMinParticles) {
    std::ostringstream os;
    os << "xscale needs at least " << kXscaleMinParticles << " particles (got " << cfg.xscale.n << ")";
    throw ConfigError(os.str());
  }
  auto t0 = std::chrono::steady_clock::now();
  MicroParams p = micro_params(cfg);
  p.n = cfg.xscale.n;
  p.all_to_all = true;
  const double lam[2] = {cfg.model.d0 / cfg.model.nu0, cfg.model.d1 / cfg.model.nu1};
  InitSpec init;
  init.kind = InitSpec::Kind::von_mises;
  init.lambda = {lam[0], lam[1]};
  ParticleEnsemble e = init_ensemble(p, init, cfg.micro.moving_fraction);
  const double rho1_start = static_cast<double>(e.count(1)) / p.n;

  const long steps = static_cast<long>(std::llround(cfg.xscale.t_end / p.dt));
  const long burn = static_cast<long>(std::llround(cfg.xscale.burn_in / p.dt));
  double acc = 0.0;
  long samples = 0;
  for (long s = 1; s <= steps; ++s) {
    step(e, p);
    if (s > burn && s % cfg.xscale.sample_every == 0) {
      acc += static_cast<double>(e.count(1)) / p.n;
      ++samples;
    }
  }
  XscaleResult r;
  r.moving_fraction = samples ? acc / samples : static_cast<double>(e.count(1)) / p.n;
  r.moving_fraction_sigma = std::sqrt(r.moving_fraction * (1.0 - r.moving_fraction) / p.n);
  MacroFields f = observables(e, p);
  double order[2] = {f.order0, f.order1};
  for (int w = 0; w < 2; ++w) {
    r.particles[w] = f.count[w];
    r.ks[w] = f.count[w] ? heading_ks_distance(e, w, angle_of(f.mean_direction[w]), lam[w]) : 0.0;
  }
  double micro_angle = std::abs(std::remainder(angle_of(f.mean_direction[1]) - angle_of(f.mean_direction[0]), kTwoPi));

  // macroscopic side: c_w from the von Mises law, fraction and angle from the uniform ODE
  double c[2] = {order_parameter_c(lam[0], cfg.numerics.nodes), order_parameter_c(lam[1], cfg.numerics.nodes)};
  double macro_angle = 0.0;
  if (cfg.model.tau0 > 0 && cfg.model.tau1 > 0) {
    ExchangeParams xp = exchange_params(cfg);
    UniformState u0{1.0 - rho1_start, 0.0, rho1_start, 0.0};
    double dt = 1.0 / (10.0 * exchange_rate_scale(xp, u0.rho0, u0.rho1, cfg.macro.rho_floor));
    auto traj = relax_uniform_ode(u0, xp, 1.0, cfg.xscale.t_end, dt, {cfg.macro.rho_floor, 1 << 30});
    const UniformState &z = traj.back().s;
    r.macro_fraction = z.rho1 / (z.rho0 + z.rho1);
    macro_angle = std::abs(std::remainder(z.theta1 - z.theta0, kTwoPi));
  } else {
    // no exchange: the fraction stays at its initial value
    r.macro_fraction = rho1_start;
  }
  auto row = [&](const char *name, double micro, double macro) {
    r.rows.push_back({name, micro, macro, std::abs(micro - macro)});
  };
  row("moving_fraction", r.moving_fraction, r.macro_fraction);
  row("moving_fraction_3sigma", 3.0 * r.moving_fraction_sigma, 0.0);
  row("heading_ks_phase0", r.ks[0], 0.0);
  row("heading_ks_phase1", r.ks[1], 0.0);
  row("order_parameter_phase0", order[0], c[0]);
  row("order_parameter_phase1", order[1], c[1]);
  row("relative_angle", micro_angle, macro_angle);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline void write_xscale_csv(std::ostream &os, const XscaleResult &r) {
  os << "observable,micro,macro,discrepancy\n";
  char buf[256];
  for (const XscaleRow &x : r.rows) {
    std::snprintf(buf, sizeof buf, "%s,%.10g,%.10g,%.10g\n", x.observable.c_str(), x.micro, x.macro, x.discrepancy);
    os << buf;
  }
}

}  // namespace vicsek2p

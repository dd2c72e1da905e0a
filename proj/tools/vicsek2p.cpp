/* vicsek2p.cpp -- command line front end */
#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vicsek2p/config.hpp"
#include "vicsek2p/errors.hpp"
#include "vicsek2p/exchange.hpp"
#include "vicsek2p/hydro.hpp"
#include "vicsek2p/particle.hpp"
#include "vicsek2p/validate.hpp"
#include "vicsek2p/vonmises.hpp"
#include "vicsek2p/xscale.hpp"

using namespace vicsek2p;

namespace {

// First line of every CSV; bump the version whenever a header changes.
constexpr int kCsvVersion = 1;

class Output {
 public:
  explicit Output(const std::string &path) {
    if (path.empty() || path == "-") return;
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw ConfigError("cannot open output file " + path);
  }
  std::ostream &os() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

void csv_banner(std::ostream &os, const char *what) { os << "# vicsek2p " << what << " v" << kCsvVersion << "\n"; }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

RunConfig load(const std::string &path) { return path.empty() ? RunConfig{} : parse_config(path); }

struct CoeffsArgs {
  double lambda_min = 0.1, lambda_max = 10.0;
  int lambda_steps = 21;
  int nodes = kDefaultNodes;
  std::string out;
};

int run_coeffs(const CoeffsArgs &a) {
  if (!(a.lambda_min > 0) || !(a.lambda_max >= a.lambda_min)) throw ConfigError("need 0 < --lambda-min <= --lambda-max");
  if (a.lambda_steps < 1) throw ConfigError("--lambda-steps must be at least 1");
  if (a.nodes < 64 || a.nodes % 4) throw ConfigError("--nodes must be a multiple of 4 and at least 64");
  Output out(a.out);
  std::ostream &os = out.os();
  csv_banner(os, "coeffs");
  os << "lambda,C,c,gamma1,beta,bracket_sin2h,bracket_sin2cosh\n";
  for (int i = 0; i < a.lambda_steps; ++i) {
    // geometric grid
    double t = a.lambda_steps == 1 ? 0.0 : static_cast<double>(i) / (a.lambda_steps - 1);
    double lam = a.lambda_min * std::pow(a.lambda_max / a.lambda_min, t);
    PhaseCoefficients pc = phase_coefficients({1.0, lam}, a.nodes);
    os << fmt(lam) << ',' << fmt(pc.c_norm) << ',' << fmt(pc.c) << ',' << fmt(pc.gamma1) << ',' << fmt(pc.beta)
       << ',' << fmt(pc.bracket_sin2h) << ',' << fmt(pc.bracket_sin2cosh) << '\n';
  }
  return kExitOk;
}

struct MicroArgs {
  std::string config, out;
  std::optional<long> snapshot_every;
};

int run_micro(const MicroArgs &a) {
  RunConfig cfg = load(a.config);
  if (!a.out.empty()) cfg.io.out_dir = a.out;
  if (a.snapshot_every) cfg.io.snapshot_every = *a.snapshot_every;
  validate_config(cfg);
  MicroParams p = micro_params(cfg);
  ParticleEnsemble e = init_ensemble(p, init_spec(cfg), cfg.micro.moving_fraction);
  std::filesystem::create_directories(cfg.io.out_dir);
  const bool ndjson = cfg.io.format == "ndjson";
  std::filesystem::path file = std::filesystem::path(cfg.io.out_dir) / (ndjson ? "snapshots.ndjson" : "fields.csv");
  std::ofstream os(file);
  if (!os) throw ConfigError("cannot open output file " + file.string());
  Bins bins{cfg.micro.bins, cfg.micro.bins};
  auto snapshot = [&] {
    if (ndjson) {
      write_snapshot_ndjson(os, e);
    } else {
      write_fields_csv(os, e.time, observables(e, p, bins));
    }
  };
  if (!ndjson) {
    csv_banner(os, "micro-fields");
    write_fields_csv_header(os);
  }
  const long steps = static_cast<long>(std::llround(cfg.numerics.t_end / p.dt));
  snapshot();
  for (long s = 1; s <= steps; ++s) {
    step(e, p);
    if (s % cfg.io.snapshot_every == 0 || s == steps) snapshot();
  }
  MacroFields f = observables(e, p);
  std::fprintf(stderr, "micro: %ld steps, moving fraction %.6f, order %.6f / %.6f, jumps %ld -> %s\n", steps,
               static_cast<double>(f.count[1]) / p.n, f.order0, f.order1, e.flips, file.string().c_str());
  return kExitOk;
}

struct EquilibriaArgs {
  std::string config, out;
  int phi_steps = 64;
};

int run_equilibria(const EquilibriaArgs &a) {
  RunConfig cfg = load(a.config);
  validate_config(cfg);
  if (a.phi_steps < 2) throw ConfigError("--phi-steps must be at least 2");
  ExchangeParams xp = exchange_params(cfg);
  // densities at the density balance of the chosen branch for the mean total density
  Branch b = branch_of(cfg);
  DensitySplit ds = invert_total_density_k(cfg.macro.rho_mean, branch_phi(b, xp.c(0), xp.c(1)), xp);
  const double rho1 = ds.rho1, rho0 = cfg.macro.rho_mean - ds.rho1;
  std::vector<double> grid(a.phi_steps + 1);
  for (int i = 0; i <= a.phi_steps; ++i) grid[i] = -kPi + kTwoPi * i / a.phi_steps;
  std::vector<ScanRow> rows = equilibrium_scan(rho0, rho1, xp, grid);
  Output out(a.out);
  std::ostream &os = out.os();
  csv_banner(os, "equilibria");
  os << "phi,s0_perp_abs,s0_perp_sign,s1_perp,integral_term,other_term,gap,same_sign\n";
  for (const ScanRow &r : rows) {
    int sign = std::abs(r.s0_perp) <= 1e-12 ? 0 : (r.s0_perp > 0 ? 1 : -1);
    os << fmt(r.phi) << ',' << fmt(std::abs(r.s0_perp)) << ',' << sign << ',' << fmt(r.s1_perp) << ','
       << fmt(r.integral_term) << ',' << fmt(r.other_term) << ',' << fmt(r.gap) << ',' << (r.same_sign ? 1 : 0)
       << '\n';
  }
  return kExitOk;
}

struct ClosureArgs {
  std::string config, out;
  double rho_min = 0.1, rho_max = 2.0;
  int rho_steps = 20;
};

std::string with_suffix(const std::string &path, const char *suffix) {
  if (path.empty() || path == "-") return path;
  std::filesystem::path p(path);
  std::filesystem::path stem = p.parent_path() / p.stem();
  return stem.string() + "_" + suffix + (p.has_extension() ? p.extension().string() : ".csv");
}

int run_closure(const ClosureArgs &a) {
  RunConfig cfg = load(a.config);
  validate_config(cfg);
  if (!(a.rho_min > 0) || !(a.rho_max >= a.rho_min) || a.rho_steps < 1)
    throw ConfigError("need 0 < --rho-min <= --rho-max and --rho-steps >= 1");
  ExchangeParams xp = exchange_params(cfg);
  for (Branch b : {Branch::aligned, Branch::anti_aligned}) {
    Output out(with_suffix(a.out, branch_name(b)));
    std::ostream &os = out.os();
    csv_banner(os, (std::string("closure ") + branch_name(b)).c_str());
    os << "rho,rho1,rho0,A0,A1,M,N,P\n";
    for (int i = 0; i < a.rho_steps; ++i) {
      double rho = a.rho_steps == 1 ? a.rho_min : a.rho_min + (a.rho_max - a.rho_min) * i / (a.rho_steps - 1);
      ClosureCoefficients c;
      try {
        c = closure_MNP(b, rho, xp);
      } catch (const PositivityError &e) {
        std::fprintf(stderr, "closure: %s at rho=%g: %s\n", branch_name(b), rho, e.what());
        break;
      }
      os << fmt(c.rho) << ',' << fmt(c.rho1) << ',' << fmt(c.rho0) << ',' << fmt(c.a0) << ',' << fmt(c.a1) << ','
         << fmt(c.m) << ',' << fmt(c.n) << ',' << fmt(c.p) << '\n';
    }
  }
  return kExitOk;
}

struct MacroArgs {
  std::string config, out;
  std::optional<int> nx;
  std::optional<double> cfl, t_end;
};

RunConfig macro_config(const MacroArgs &a) {
  RunConfig cfg = load(a.config);
  if (a.nx) cfg.numerics.nx = *a.nx;
  if (a.cfl) cfg.numerics.cfl = *a.cfl;
  if (a.t_end) cfg.numerics.t_end = *a.t_end;
  validate_config(cfg);
  return cfg;
}

int run_macro2p(const MacroArgs &a) {
  RunConfig cfg = macro_config(a);
  ExchangeParams xp = exchange_params(cfg);
  SolverConfig sc = solver_config(cfg, xp);
  ExchangeTable table(xp, cfg.macro.table_cells);
  TwoPhaseField f = project_to_equilibrium(initial_closed_field(cfg), xp, sc.branch);
  Output out(a.out);
  std::ostream &os = out.os();
  csv_banner(os, "macro2p");
  os << "t,x,rho0,theta0,rho1,theta1\n";
  auto dump = [&](const TwoPhaseField &g) {
    for (int i = 0; i < g.nx; ++i)
      os << fmt(g.t) << ',' << fmt((i + 0.5) * g.dx) << ',' << fmt(g.rho0[i]) << ',' << fmt(g.theta0[i]) << ','
         << fmt(g.rho1[i]) << ',' << fmt(g.theta1[i]) << '\n';
  };
  dump(f);
  long s = 0;
  run_two_phase(f, xp, table, sc, [&](const TwoPhaseField &g) {
    if (++s % cfg.io.snapshot_every == 0 || g.t >= sc.t_end) dump(g);
  });
  return kExitOk;
}

int run_macroclosed(const MacroArgs &a) {
  RunConfig cfg = macro_config(a);
  ExchangeParams xp = exchange_params(cfg);
  SolverConfig sc = solver_config(cfg, xp);
  ClosedField f = initial_closed_field(cfg);
  Output out(a.out);
  std::ostream &os = out.os();
  csv_banner(os, "macroclosed");
  os << "t,x,rho,theta\n";
  auto dump = [&](const ClosedField &g) {
    for (int i = 0; i < g.nx; ++i)
      os << fmt(g.t) << ',' << fmt((i + 0.5) * g.dx) << ',' << fmt(g.rho[i]) << ',' << fmt(g.theta[i]) << '\n';
  };
  dump(f);
  long s = 0;
  run_closed(f, xp, sc, [&](const ClosedField &g) {
    if (++s % cfg.io.snapshot_every == 0 || g.t >= sc.t_end) dump(g);
  });
  return kExitOk;
}

struct ValidateArgs {
  std::string config, out, fault = "none";
};

int run_validate_cmd(const ValidateArgs &a) {
  RunConfig cfg = load(a.config);
  validate_config(cfg);
  Fault fault = parse_fault(a.fault);
  ValidationReport r = run_validate(cfg, fault, [](const Check &c) {
    std::fprintf(stderr, "%-4s %-44s value=%-12.4g tol=%-10.3g %.2fs\n", c.pass ? "ok" : "FAIL", c.name.c_str(),
                 c.value, c.tolerance, c.seconds);
  });
  Output out(a.out);
  out.os() << report_to_json(r).dump(2) << '\n';
  return r.overall ? kExitOk : kExitValidationFailed;
}

struct XscaleArgs {
  std::string config, out;
  std::optional<long> particles;
  std::optional<std::uint64_t> seed;
};

int run_xscale_cmd(const XscaleArgs &a) {
  RunConfig cfg = load(a.config);
  if (a.particles) cfg.xscale.n = *a.particles;
  if (a.seed) cfg.numerics.seed = *a.seed;
  validate_config(cfg);
  XscaleResult r = run_xscale(cfg);
  Output out(a.out);
  csv_banner(out.os(), "xscale");
  write_xscale_csv(out.os(), r);
  return kExitOk;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"two-speed Vicsek model: particles, exchange operators and macroscopic solvers", "vicsek2p"};
  app.require_subcommand(1);

  CoeffsArgs coeffs;
  auto *sc = app.add_subcommand("coeffs", "von Mises and invariant coefficients on a lambda grid (CSV)");
  sc->add_option("--lambda-min", coeffs.lambda_min);
  sc->add_option("--lambda-max", coeffs.lambda_max);
  sc->add_option("--lambda-steps", coeffs.lambda_steps);
  sc->add_option("--nodes", coeffs.nodes);
  sc->add_option("--out", coeffs.out, "output CSV (stdout if omitted)");

  MicroArgs micro;
  auto *sm = app.add_subcommand("micro", "particle simulation");
  sm->add_option("--config", micro.config);
  sm->add_option("--out", micro.out, "output directory");
  sm->add_option("--snapshot-every", micro.snapshot_every);

  EquilibriaArgs eq;
  auto *se = app.add_subcommand("equilibria", "projected momentum exchange against the relative angle (CSV)");
  se->add_option("--config", eq.config);
  se->add_option("--phi-steps", eq.phi_steps);
  se->add_option("--out", eq.out);

  ClosureArgs cl;
  auto *sl = app.add_subcommand("closure", "closure coefficients on a density grid, one CSV per branch");
  sl->add_option("--config", cl.config);
  sl->add_option("--rho-min", cl.rho_min);
  sl->add_option("--rho-max", cl.rho_max);
  sl->add_option("--rho-steps", cl.rho_steps);
  sl->add_option("--out", cl.out, "output CSV stem; _aligned/_anti_aligned is appended");

  MacroArgs m2, mc;
  auto *s2 = app.add_subcommand("macro2p", "two-phase macroscopic solver (CSV)");
  auto *s1 = app.add_subcommand("macroclosed", "closed macroscopic solver (CSV)");
  for (auto [cmd, args] : {std::pair{s2, &m2}, std::pair{s1, &mc}}) {
    cmd->add_option("--config", args->config);
    cmd->add_option("--nx", args->nx);
    cmd->add_option("--cfl", args->cfl);
    cmd->add_option("--t-end", args->t_end);
    cmd->add_option("--out", args->out);
  }

  ValidateArgs va;
  auto *sv = app.add_subcommand("validate", "run every consistency check and emit a JSON report");
  sv->add_option("--config", va.config);
  sv->add_option("--out", va.out, "report JSON (stdout if omitted)");
#ifdef VICSEK2P_ENABLE_FAULTS
  sv->add_option("--fault", va.fault, "drop-hprime-term, flip-R-sign or leak-mass");
#endif

  XscaleArgs xa;
  auto *sx = app.add_subcommand("xscale", "particle statistics against the uniform macroscopic equilibrium (CSV)");
  sx->add_option("--config", xa.config);
  sx->add_option("--particles", xa.particles);
  sx->add_option("--seed", xa.seed);
  sx->add_option("--out", xa.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return kExitConfigError;
  }

  try {
    if (*sc) return run_coeffs(coeffs);
    if (*sm) return run_micro(micro);
    if (*se) return run_equilibria(eq);
    if (*sl) return run_closure(cl);
    if (*s2) return run_macro2p(m2);
    if (*s1) return run_macroclosed(mc);
    if (*sv) return run_validate_cmd(va);
    if (*sx) return run_xscale_cmd(xa);
  } catch (const Error &e) {
    std::fprintf(stderr, "vicsek2p: %s\n", e.what());
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error &e) {
    std::fprintf(stderr, "vicsek2p: %s\n", e.what());
    return kExitConfigError;
  }
  return kExitOk;
}

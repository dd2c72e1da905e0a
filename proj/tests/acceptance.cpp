/* acceptance.cpp -- one pass/fail line per acceptance criterion */
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "vicsek2p/config.hpp"
#include "vicsek2p/validate.hpp"
#include "vicsek2p/xscale.hpp"

using namespace vicsek2p;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); }
};

int failures = 0;

void report(int id, bool pass, double seconds, double limit, const std::string &detail) {
  bool ok = pass && seconds < limit;
  if (!ok) ++failures;
  std::printf("criterion %d: %s  %s  [%.2f s, limit %.0f s]\n", id, ok ? "PASS" : "FAIL", detail.c_str(), seconds,
              limit);
  std::fflush(stdout);
}

std::string fmt(const char *f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

void criterion1() {
  Timer t;
  GciSummary s = gci_summary(1024);
  bool pass = s.max_residual <= 1e-4 && s.min_order >= 1.8 && s.max_interior_i2 <= 0.0;
  report(1, pass, t.seconds(), 1,
         fmt("residual=%.3g (<=1e-4)", s.max_residual) + fmt(" order=%.3f (>=1.8)", s.min_order) +
             fmt(" max interior I2=%.3g (<=0)", s.max_interior_i2));
}

void criterion2() {
  Timer t;
  double e1 = 0.0, e2 = 0.0;
  for (double lam : validation_lambdas()) {
    BracketIdentityError e = bracket_identity_error(lam, 1024);
    e1 = std::max(e1, e.first);
    e2 = std::max(e2, e.second);
  }
  report(2, e1 <= 1e-6 && e2 <= 1e-6, t.seconds(), 1,
         fmt("sin2h identity=%.3g", e1) + fmt(" sin2cosh identity=%.3g (<=1e-6)", e2));
}

void criterion3(const RunConfig &cfg) {
  Timer t;
  auto cs = check_exchange_consistency(1024, cfg.numerics.seed);
  report(3, cs[0].pass && cs[1].pass, t.seconds(), 5,
         fmt("R analytic vs integral=%.3g", cs[0].value) + fmt(" projected S two ways=%.3g (<=1e-8)", cs[1].value));
}

void criterion4(const ExchangeParams &xp) {
  Timer t;
  EquilibriumSummary s = equilibrium_summary(xp, 20);
  bool pass = s.r_at_balance < 1e-12 && s.s_at_equilibria < 1e-10 && s.min_interior_s > 0 &&
              s.opposite_sign_rows == 0;
  report(4, pass, t.seconds(), 5,
         fmt("|R| at balance=%.3g (<1e-12)", s.r_at_balance) + fmt(" |S| at 0,pi=%.3g (<1e-10)", s.s_at_equilibria) +
             fmt(" min interior |S|=%.3g (>0)", s.min_interior_s) +
             fmt(" same-sign violations=%.0f of 20 (=0)", s.opposite_sign_rows));
}

void criterion5(const ExchangeParams &xp, std::uint64_t seed) {
  Timer t;
  LinearizationOrders o = linearization_orders(xp, seed);
  report(5, o.dr_order >= 1.9 && o.ds_order >= 1.9, t.seconds(), 10,
         fmt("DR order=%.3f", o.dr_order) + fmt(" DS order=%.3f (>=1.9)", o.ds_order));
}

void criterion6(const ExchangeParams &xp, std::uint64_t seed) {
  Timer t;
  ClosureSummary s = closure_summary(xp, seed, {}, 50);
  double id = std::max(s.identity_err[0], s.identity_err[1]);
  double canc = std::max(s.cancellation_err[0], s.cancellation_err[1]);
  report(6, id <= 1e-8 && canc <= 1e-8 && s.reduction_err <= 1e-10, t.seconds(), 10,
         fmt("identity=%.3g", id) + fmt(" cancellation=%.3g (<=1e-8)", canc) +
             fmt(" alpha=0 reduction=%.3g (<=1e-10)", s.reduction_err));
}

void criterion7() {
  Timer t;
  RunConfig single;
  single.model.nu0 = single.model.nu1 = 1.0;
  single.model.d0 = single.model.d1 = 0.25;
  single.model.tau0 = single.model.tau1 = 0.0;
  single.micro.moving_fraction = 1.0;
  single.xscale.n = 10000;
  single.xscale.t_end = 50.0;
  XscaleResult a = run_xscale(single);

  RunConfig two = single;
  two.model.tau0 = 1.0;
  two.model.tau1 = 2.0;
  two.model.alpha = 0.0;
  two.micro.moving_fraction = 0.5;
  XscaleResult b = run_xscale(two);
  double dev = std::abs(b.moving_fraction - 1.0 / 3.0), sigma = b.moving_fraction_sigma;
  report(7, a.ks[1] < 0.05 && dev <= 3.0 * sigma, t.seconds(), 120,
         fmt("heading KS=%.4f (<0.05)", a.ks[1]) + fmt(" moving fraction=%.5f", b.moving_fraction) +
             fmt(" |p-1/3|=%.5f", dev) + fmt(" (<=3 sigma=%.5f)", 3.0 * sigma));
}

void criterion8(const RunConfig &cfg, const ExchangeParams &xp) {
  Timer t;
  RunConfig c = cfg;
  c.numerics.nx = 200;
  ExchangeTable table(xp, c.macro.table_cells);
  SolverSummary s = solver_summary(c, xp, table);
  bool pass = s.two_phase_mass_step <= 1e-12 && s.closed_mass_step <= 1e-12 && s.equilibrium_step <= 1e-9 &&
              strictly_decreasing(s.l1) && s.l1.size() == 3;
  std::string l1;
  for (double v : s.l1) l1 += fmt(" %.4g", v);
  report(8, pass, t.seconds(), 120,
         fmt("mass/step two-phase=%.3g", s.two_phase_mass_step) + fmt(" closed=%.3g (<=1e-12)", s.closed_mass_step) +
             fmt(" equilibrium/step=%.3g (<=1e-9)", s.equilibrium_step) + " L1 over delta 1e-1,1e-2,1e-3:" + l1 +
             (strictly_decreasing(s.l1) ? " (decreasing)" : " (not decreasing)"));
}

struct CliRun {
  int code = -1;
  ValidationReport report;
  double seconds = 0.0;
};

CliRun run_cli(const std::string &exe, const std::string &extra) {
  auto out = std::filesystem::temp_directory_path() / ("vicsek2p_acceptance_" + std::to_string(::getpid()) + ".json");
  std::string cmd = "\"" + exe + "\" validate --out \"" + out.string() + "\" " + extra + " 2>/dev/null";
  Timer t;
  int st = std::system(cmd.c_str());
  CliRun r;
  r.seconds = t.seconds();
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  std::ifstream in(out);
  if (in) r.report = report_from_json(nlohmann::json::parse(in));
  std::filesystem::remove(out);
  return r;
}

std::set<std::string> failed(const ValidationReport &r) {
  std::set<std::string> s;
  for (const Check &c : r.checks)
    if (!c.pass) s.insert(c.name);
  return s;
}

void criterion9(const std::string &exe, const std::string &fault_exe) {
  Timer t;
  CliRun base = run_cli(exe, "");
  std::set<std::string> base_failed = failed(base.report);
  std::string detail = "validate exit=" + std::to_string(base.code) + fmt(" in %.1f s", base.seconds);
  for (const std::string &c : base_failed) detail += " failing:" + c;
  bool all_detected = true;
  for (const char *f : {"drop-hprime-term", "flip-R-sign", "leak-mass"}) {
    CliRun r = run_cli(fault_exe, std::string("--fault ") + f);
    // detected: the run fails and some check fails that passes without the fault
    bool extra = false;
    for (const std::string &c : failed(r.report)) extra = extra || !base_failed.count(c);
    bool detected = r.code == 1 && extra;
    all_detected = all_detected && detected;
    detail += std::string(" ") + f + (detected ? ":detected" : ":missed");
  }
  report(9, base.code == 0 && base.report.overall && base.seconds < 300 && all_detected, t.seconds(), 300 * 4,
         detail);
}

}  // namespace

int main(int argc, char **argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: acceptance <vicsek2p> <vicsek2p_faults>\n");
    return 2;
  }
  RunConfig cfg;
  ExchangeParams xp = exchange_params(cfg);
  criterion1();
  criterion2();
  criterion3(cfg);
  criterion4(xp);
  criterion5(xp, cfg.numerics.seed);
  criterion6(xp, cfg.numerics.seed);
  criterion7();
  criterion8(cfg, xp);
  criterion9(argv[1], argv[2]);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

/* test_cli.cpp -- configuration parsing, validation report and cross-scale harness */
#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "vicsek2p/config.hpp"
#include "vicsek2p/validate.hpp"
#include "vicsek2p/xscale.hpp"

using namespace vicsek2p;
using Catch::Matchers::ContainsSubstring;

namespace {

bool any_failed(const std::vector<Check> &cs) {
  for (const Check &c : cs)
    if (!c.pass) return true;
  return false;
}

}  // namespace

TEST_CASE("minimal config fills defaults") {
  RunConfig c = parse_config_text("{}");
  CHECK(c.numerics.nodes == 1024);
  CHECK(c.numerics.cfl == 0.5);
  CHECK(c.run == "validate");
  RunConfig d = parse_config_text(R"({"model": {"d0": 0.3}, "numerics": {"nx": 64}})");
  CHECK(d.model.d0 == 0.3);
  CHECK(d.model.d1 == 0.5);
  CHECK(d.numerics.nx == 64);
}

TEST_CASE("config errors name the key") {
  CHECK_THROWS_WITH(parse_config_text(R"({"model": {"d0": -1}})"), ContainsSubstring("model.d0"));
  CHECK_THROWS_WITH(parse_config_text(R"({"model": {"dd0": 1}})"), ContainsSubstring("model.dd0"));
  CHECK_THROWS_WITH(parse_config_text(R"({"numerics": {"nx": "many"}})"), ContainsSubstring("numerics.nx"));
  CHECK_THROWS_WITH(parse_config_text(R"({"extra": 1})"), ContainsSubstring("extra"));
  CHECK_THROWS_WITH(parse_config_text(R"({"numerics": {"cfl": 1.5}})"), ContainsSubstring("numerics.cfl"));
  CHECK_THROWS_AS(parse_config_text(R"({"model": {"d0": -1}})"), ConfigError);
}

TEST_CASE("syntax errors report a position") {
  CHECK_THROWS_AS(parse_config_text("{\"model\": {\"d0\": 1,,}}"), ParseError);
  CHECK_THROWS_WITH(parse_config_text("{\"model\": {\"d0\": 1,,}}"), ContainsSubstring("byte"));
  CHECK_THROWS_AS(parse_config("/nonexistent/vicsek2p.json"), ConfigError);
}

TEST_CASE("config round trips through JSON") {
  RunConfig c;
  c.model.alpha = 0.25;
  c.micro.all_to_all = true;
  c.macro.branch = "anti_aligned";
  RunConfig d = config_from_json(config_to_json(c));
  CHECK(config_to_json(d) == config_to_json(c));
}

TEST_CASE("report JSON round trips, including non-finite values") {
  ValidationReport r;
  r.add({"a.b", true, 1e-13, 1e-12, 0.01});
  r.add({"c.d", false, std::nan(""), 1e-8, 0.2});
  r.add({"e.f", true, std::numeric_limits<double>::infinity(), 1.0, 0.0});
  CHECK_FALSE(r.overall);
  ValidationReport back = report_from_json(nlohmann::json::parse(report_to_json(r).dump()));
  CHECK(back.overall == r.overall);
  REQUIRE(back.checks.size() == r.checks.size());
  for (std::size_t i = 0; i < r.checks.size(); ++i) CHECK(back.checks[i] == r.checks[i]);
}

TEST_CASE("fault modes are recognized") {
  CHECK(parse_fault("drop-hprime-term") == Fault::drop_hprime_term);
  CHECK(parse_fault("flip-R-sign") == Fault::flip_r_sign);
  CHECK(parse_fault("leak-mass") == Fault::leak_mass);
  CHECK_THROWS_AS(parse_fault("bogus"), ConfigError);
}

TEST_CASE("each fault is caught by its check group") {
  RunConfig c;
  ExchangeParams xp = exchange_params(c);
  CHECK_FALSE(any_failed(check_closure(xp, 1)));
  CHECK(any_failed(check_closure(xp, 1, Fault::drop_hprime_term)));
  CHECK_FALSE(any_failed(check_exchange_consistency(256, 1)));
  CHECK(any_failed(check_exchange_consistency(256, 1, Fault::flip_r_sign)));
  c.numerics.nx = 50;
  ExchangeTable table(xp, 1024);
  SolverSummary clean = solver_summary(c, xp, table, Fault::none, false);
  SolverSummary leaky = solver_summary(c, xp, table, Fault::leak_mass, false);
  CHECK(clean.two_phase_mass_step < 1e-12);
  CHECK(leaky.two_phase_mass_step > 1e-12);
}

TEST_CASE("cross-scale harness refuses small ensembles") {
  RunConfig c;
  c.xscale.n = 999;
  CHECK_THROWS_AS(run_xscale(c), ConfigError);
}

TEST_CASE("cross-scale harness output") {
  RunConfig c;
  c.model.alpha = 0.0;
  c.xscale.n = 2000;
  c.xscale.t_end = 10.0;
  c.xscale.burn_in = 5.0;
  c.xscale.sample_every = 20;
  XscaleResult r = run_xscale(c);
  CHECK(std::abs(r.macro_fraction - 1.0 / 3.0) < 1e-6);
  std::ostringstream os;
  write_xscale_csv(os, r);
  CHECK(os.str().rfind("observable,micro,macro,discrepancy\nmoving_fraction,", 0) == 0);
}

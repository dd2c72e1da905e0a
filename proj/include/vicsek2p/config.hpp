/* config.hpp -- JSON run configuration with strict schema checks */
#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include <json.hpp>

#include "errors.hpp"
#include "exchange.hpp"
#include "hydro.hpp"
#include "particle.hpp"

namespace vicsek2p {

struct ModelParams {
  double nu0 = 1.0, nu1 = 1.0;
  double d0 = 0.5, d1 = 0.5;
  double tau0 = 1.0, tau1 = 2.0;
  double alpha = 0.5;
  double delta = 1e-2;
  double c = 1.0;   // particle speed
  double R = 1.0;   // interaction radius
  double L = 10.0;  // particle box side
};

struct NumericsConfig {
  int nodes = kDefaultNodes;
  int nx = 200;
  double cfl = 0.5;
  double dt = 0.01;
  double t_end = 1.0;
  std::uint64_t seed = 1;
};

struct IoConfig {
  std::string out_dir = "out";
  long snapshot_every = 100;
  std::string format = "csv";  // csv (binned fields) or ndjson (particles)
};

struct MicroConfig {
  long n = 10000;
  double moving_fraction = 0.5;
  std::string init = "uniform";  // uniform, von_mises, file
  std::string init_file;
  bool all_to_all = false;
  int bins = 1;  // bins per side for the fields CSV
};

struct MacroConfig {
  std::string branch = "aligned";
  double rho_floor = 1e-10;
  double length = 1.0;
  double rho_mean = 1.0, rho_amp = 0.2;
  double theta_mean = 0.5, theta_amp = 0.3;
  int table_cells = 4096;
};

struct XscaleConfig {
  long n = 10000;
  double t_end = 50.0;
  double burn_in = 25.0;
  int sample_every = 50;  // steps between moving-fraction samples
};

struct RunConfig {
  ModelParams model;
  std::string run = "validate";
  NumericsConfig numerics;
  IoConfig io;
  MicroConfig micro;
  MacroConfig macro;
  XscaleConfig xscale;
};

namespace detail {

using json = nlohmann::json;

inline void reject_unknown(const json &obj, const std::string &prefix, std::initializer_list<const char *> keys) {
  if (!obj.is_object()) throw ConfigError("`" + prefix + "` must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char *k : keys) known = known || it.key() == k;
    if (!known) throw ConfigError("unknown key `" + (prefix.empty() ? "" : prefix + ".") + it.key() + "`");
  }
}

template <class T>
void read(const json &obj, const std::string &prefix, const char *key, T &out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->template get<T>();
  } catch (const json::exception &) {
    throw ConfigError("`" + prefix + "." + key + "` has the wrong type");
  }
}

inline void require_positive(double v, const char *key) {
  if (!std::isfinite(v) || v <= 0) {
    std::ostringstream os;
    os << "`" << key << "` must be a positive real (got " << v << ")";
    throw ConfigError(os.str());
  }
}

inline void require_nonneg(double v, const char *key) {
  if (!std::isfinite(v) || v < 0) {
    std::ostringstream os;
    os << "`" << key << "` must be non-negative (got " << v << ")";
    throw ConfigError(os.str());
  }
}

}  // namespace detail

inline bool is_run_name(const std::string &r) {
  for (const char *k : {"coeffs", "micro", "equilibria", "closure", "macro2p", "macroclosed", "validate", "xscale"})
    if (r == k) return true;
  return false;
}

inline void validate_config(const RunConfig &c) {
  using detail::require_nonneg;
  using detail::require_positive;
  const ModelParams &m = c.model;
  require_positive(m.nu0, "model.nu0");
  require_positive(m.nu1, "model.nu1");
  require_positive(m.d0, "model.d0");
  require_positive(m.d1, "model.d1");
  require_nonneg(m.tau0, "model.tau0");
  require_nonneg(m.tau1, "model.tau1");
  require_nonneg(m.alpha, "model.alpha");
  require_positive(m.delta, "model.delta");
  require_positive(m.c, "model.c");
  require_positive(m.R, "model.R");
  require_positive(m.L, "model.L");
  for (auto [l, key] : {std::pair{m.d0 / m.nu0, "model.d0/model.nu0"}, std::pair{m.d1 / m.nu1, "model.d1/model.nu1"}})
    if (l < kLambdaMin || l > kLambdaMax) {
      std::ostringstream os;
      os << "`" << key << "` gives lambda = " << l << " outside [" << kLambdaMin << ", " << kLambdaMax << "]";
      throw ConfigError(os.str());
    }
  if (!is_run_name(c.run)) throw ConfigError("`run` must name a subcommand (got \"" + c.run + "\")");
  const NumericsConfig &n = c.numerics;
  if (n.nodes < 64 || n.nodes % 4 != 0) throw ConfigError("`numerics.nodes` must be a multiple of 4 and >= 64");
  if (n.nx < 3) throw ConfigError("`numerics.nx` must be at least 3");
  if (!(n.cfl > 0 && n.cfl < 1)) throw ConfigError("`numerics.cfl` must lie in (0, 1)");
  require_positive(n.dt, "numerics.dt");
  require_positive(n.t_end, "numerics.t_end");
  if (c.io.snapshot_every < 1) throw ConfigError("`io.snapshot_every` must be at least 1");
  if (c.io.format != "csv" && c.io.format != "ndjson") throw ConfigError("`io.format` must be \"csv\" or \"ndjson\"");
  if (c.micro.n < 1) throw ConfigError("`micro.n` must be at least 1");
  if (!(c.micro.moving_fraction >= 0 && c.micro.moving_fraction <= 1))
    throw ConfigError("`micro.moving_fraction` must lie in [0, 1]");
  if (c.micro.init != "uniform" && c.micro.init != "von_mises" && c.micro.init != "file")
    throw ConfigError("`micro.init` must be uniform, von_mises or file");
  if (c.micro.init == "file" && c.micro.init_file.empty()) throw ConfigError("`micro.init_file` is required for file init");
  if (c.micro.bins < 1) throw ConfigError("`micro.bins` must be at least 1");
  if (c.macro.branch != "aligned" && c.macro.branch != "anti_aligned")
    throw ConfigError("`macro.branch` must be aligned or anti_aligned");
  require_positive(c.macro.rho_floor, "macro.rho_floor");
  require_positive(c.macro.length, "macro.length");
  require_positive(c.macro.rho_mean, "macro.rho_mean");
  require_nonneg(c.macro.rho_amp, "macro.rho_amp");
  if (!(c.macro.rho_amp < c.macro.rho_mean)) throw ConfigError("`macro.rho_amp` must be below `macro.rho_mean`");
  if (c.macro.table_cells < 16) throw ConfigError("`macro.table_cells` must be at least 16");
  require_positive(c.xscale.t_end, "xscale.t_end");
  require_nonneg(c.xscale.burn_in, "xscale.burn_in");
  if (!(c.xscale.burn_in < c.xscale.t_end)) throw ConfigError("`xscale.burn_in` must be below `xscale.t_end`");
  if (c.xscale.sample_every < 1) throw ConfigError("`xscale.sample_every` must be at least 1");
}

inline RunConfig config_from_json(const nlohmann::json &j) {
  using detail::read;
  using detail::reject_unknown;
  RunConfig c;
  reject_unknown(j, "", {"model", "run", "numerics", "io", "micro", "macro", "xscale"});
  read(j, "", "run", c.run);
  if (auto it = j.find("model"); it != j.end()) {
    const auto &o = *it;
    reject_unknown(o, "model", {"nu0", "nu1", "d0", "d1", "tau0", "tau1", "alpha", "delta", "c", "R", "L"});
    ModelParams &m = c.model;
    read(o, "model", "nu0", m.nu0);
    read(o, "model", "nu1", m.nu1);
    read(o, "model", "d0", m.d0);
    read(o, "model", "d1", m.d1);
    read(o, "model", "tau0", m.tau0);
    read(o, "model", "tau1", m.tau1);
    read(o, "model", "alpha", m.alpha);
    read(o, "model", "delta", m.delta);
    read(o, "model", "c", m.c);
    read(o, "model", "R", m.R);
    read(o, "model", "L", m.L);
  }
  if (auto it = j.find("numerics"); it != j.end()) {
    const auto &o = *it;
    reject_unknown(o, "numerics", {"nodes", "nx", "cfl", "dt", "t_end", "seed"});
    read(o, "numerics", "nodes", c.numerics.nodes);
    read(o, "numerics", "nx", c.numerics.nx);
    read(o, "numerics", "cfl", c.numerics.cfl);
    read(o, "numerics", "dt", c.numerics.dt);
    read(o, "numerics", "t_end", c.numerics.t_end);
    read(o, "numerics", "seed", c.numerics.seed);
  }
  if (auto it = j.find("io"); it != j.end()) {
    const auto &o = *it;
    reject_unknown(o, "io", {"out_dir", "snapshot_every", "format"});
    read(o, "io", "out_dir", c.io.out_dir);
    read(o, "io", "snapshot_every", c.io.snapshot_every);
    read(o, "io", "format", c.io.format);
  }
  if (auto it = j.find("micro"); it != j.end()) {
    const auto &o = *it;
    reject_unknown(o, "micro", {"n", "moving_fraction", "init", "init_file", "all_to_all", "bins"});
    read(o, "micro", "n", c.micro.n);
    read(o, "micro", "moving_fraction", c.micro.moving_fraction);
    read(o, "micro", "init", c.micro.init);
    read(o, "micro", "init_file", c.micro.init_file);
    read(o, "micro", "all_to_all", c.micro.all_to_all);
    read(o, "micro", "bins", c.micro.bins);
  }
  if (auto it = j.find("macro"); it != j.end()) {
    const auto &o = *it;
    reject_unknown(o, "macro",
                   {"branch", "rho_floor", "length", "rho_mean", "rho_amp", "theta_mean", "theta_amp", "table_cells"});
    read(o, "macro", "branch", c.macro.branch);
    read(o, "macro", "rho_floor", c.macro.rho_floor);
    read(o, "macro", "length", c.macro.length);
    read(o, "macro", "rho_mean", c.macro.rho_mean);
    read(o, "macro", "rho_amp", c.macro.rho_amp);
    read(o, "macro", "theta_mean", c.macro.theta_mean);
    read(o, "macro", "theta_amp", c.macro.theta_amp);
    read(o, "macro", "table_cells", c.macro.table_cells);
  }
  if (auto it = j.find("xscale"); it != j.end()) {
    const auto &o = *it;
    reject_unknown(o, "xscale", {"n", "t_end", "burn_in", "sample_every"});
    read(o, "xscale", "n", c.xscale.n);
    read(o, "xscale", "t_end", c.xscale.t_end);
    read(o, "xscale", "burn_in", c.xscale.burn_in);
    read(o, "xscale", "sample_every", c.xscale.sample_every);
  }
  validate_config(c);
  return c;
}

inline nlohmann::json config_to_json(const RunConfig &c) {
  const ModelParams &m = c.model;
  return {
      {"model",
       {{"nu0", m.nu0}, {"nu1", m.nu1}, {"d0", m.d0}, {"d1", m.d1}, {"tau0", m.tau0}, {"tau1", m.tau1},
        {"alpha", m.alpha}, {"delta", m.delta}, {"c", m.c}, {"R", m.R}, {"L", m.L}}},
      {"run", c.run},
      {"numerics",
       {{"nodes", c.numerics.nodes}, {"nx", c.numerics.nx}, {"cfl", c.numerics.cfl}, {"dt", c.numerics.dt},
        {"t_end", c.numerics.t_end}, {"seed", c.numerics.seed}}},
      {"io", {{"out_dir", c.io.out_dir}, {"snapshot_every", c.io.snapshot_every}, {"format", c.io.format}}},
      {"micro",
       {{"n", c.micro.n}, {"moving_fraction", c.micro.moving_fraction}, {"init", c.micro.init},
        {"init_file", c.micro.init_file}, {"all_to_all", c.micro.all_to_all}, {"bins", c.micro.bins}}},
      {"macro",
       {{"branch", c.macro.branch}, {"rho_floor", c.macro.rho_floor}, {"length", c.macro.length},
        {"rho_mean", c.macro.rho_mean}, {"rho_amp", c.macro.rho_amp}, {"theta_mean", c.macro.theta_mean},
        {"theta_amp", c.macro.theta_amp}, {"table_cells", c.macro.table_cells}}},
      {"xscale",
       {{"n", c.xscale.n}, {"t_end", c.xscale.t_end}, {"burn_in", c.xscale.burn_in},
        {"sample_every", c.xscale.sample_every}}},
  };
}

inline RunConfig parse_config_text(const std::string &text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error &e) {
    std::ostringstream os;
    os << "JSON syntax error at byte " << e.byte << ": " << e.what();
    throw ParseError(os.str());
  }
  return config_from_json(j);
}

inline RunConfig parse_config(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

inline Branch branch_of(const RunConfig &c) {
  return c.macro.branch == "anti_aligned" ? Branch::anti_aligned : Branch::aligned;
}

inline ExchangeParams exchange_params(const RunConfig &c) {
  const ModelParams &m = c.model;
  if (!(m.tau0 > 0) || !(m.tau1 > 0)) throw ConfigError("macroscopic runs need `model.tau0` and `model.tau1` > 0");
  return make_exchange_params({m.nu0, m.d0}, {m.nu1, m.d1}, m.tau0, m.tau1, m.alpha, c.numerics.nodes);
}

inline MicroParams micro_params(const RunConfig &c) {
  const ModelParams &m = c.model;
  MicroParams p;
  p.n = c.micro.n;
  p.speed = m.c;
  p.radius = m.R;
  p.phase0 = {m.nu0, m.d0};
  p.phase1 = {m.nu1, m.d1};
  p.tau0 = m.tau0;
  p.tau1 = m.tau1;
  p.alpha = m.alpha;
  p.box = m.L;
  p.dt = c.numerics.dt;
  p.seed = c.numerics.seed;
  p.all_to_all = c.micro.all_to_all;
  return p;
}

inline InitSpec init_spec(const RunConfig &c) {
  InitSpec s;
  if (c.micro.init == "von_mises") {
    s.kind = InitSpec::Kind::von_mises;
    s.lambda = {c.model.d0 / c.model.nu0, c.model.d1 / c.model.nu1};
  } else if (c.micro.init == "file") {
    s.kind = InitSpec::Kind::file;
    s.path = c.micro.init_file;
  }
  return s;
}

inline SolverConfig solver_config(const RunConfig &c, const ExchangeParams &xp) {
  SolverConfig s = solver_config_for(xp, c.model.delta, c.numerics.cfl, c.numerics.t_end, branch_of(c));
  s.rho_floor = c.macro.rho_floor;
  return s;
}

// rho = rho_mean + rho_amp sin(2 pi x / length), theta = theta_mean + theta_amp cos(2 pi x / length)
inline ClosedField initial_closed_field(const RunConfig &c) {
  ClosedField f(c.numerics.nx, c.macro.length);
  for (int i = 0; i < f.nx; ++i) {
    double s = kTwoPi * (i + 0.5) / f.nx;
    f.rho[i] = c.macro.rho_mean + c.macro.rho_amp * std::sin(s);
    f.theta[i] = c.macro.theta_mean + c.macro.theta_amp * std::cos(s);
  }
  return f;
}

}  // namespace vicsek2p

/* particle.hpp -- two-speed Vicsek particle simulator on a periodic square */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "vonmises.hpp"

namespace vicsek2p {

struct MicroParams {
  long n = 1000;
  double speed = 1.0;   // c
  double radius = 1.0;  // R
  PhaseParams phase0{1.0, 0.25}, phase1{1.0, 0.25};
  double tau0 = 1.0, tau1 = 1.0;
  double alpha = 0.0;
  double box = 10.0;  // L
  double dt = 0.01;
  std::uint64_t seed = 1;
  // every particle interacts with every other one (kernel = whole box)
  bool all_to_all = false;

  const PhaseParams &phase(int w) const { return w == 0 ? phase0 : phase1; }
  double tau(int w) const { return w == 0 ? tau0 : tau1; }
};

inline void validate_micro_params(const MicroParams &p) {
  auto pos = [](double v, const char *name) {
    if (!std::isfinite(v) || v <= 0) throw ConfigError(std::string(name) + " must be positive");
  };
  if (p.n < 1) throw ConfigError("micro.n must be at least 1");
  pos(p.speed, "model.c");
  pos(p.box, "model.L");
  pos(p.dt, "numerics.dt");
  pos(p.phase0.nu, "model.nu0");
  pos(p.phase1.nu, "model.nu1");
  pos(p.phase0.d, "model.d0");
  pos(p.phase1.d, "model.d1");
  if (!p.all_to_all) {
    pos(p.radius, "model.R");
    if (!(p.radius < 0.5 * p.box)) throw ConfigError("model.R must be below L/2");
  }
  if (!(p.tau0 >= 0) || !(p.tau1 >= 0)) throw ConfigError("jump rates must be non-negative");
  if (!(p.alpha >= 0)) throw ConfigError("model.alpha must be non-negative");
  double nu = std::max(p.phase0.nu, p.phase1.nu);
  double d = std::max(p.phase0.d, p.phase1.d);
  double rate = std::max(p.tau0, p.tau1) * (1.0 + p.alpha);
  if (!(p.dt * nu < 0.5) || !(p.dt < 0.1 / std::max({nu, d, rate}))) {
    std::ostringstream os;
    os << "time step " << p.dt << " violates the stability guard dt < 0.1/max(nu, d, tau(1+alpha)) = "
       << 0.1 / std::max({nu, d, rate});
    throw ConfigError(os.str());
  }
}

// Uniform cells of side >= R; falls back to a single cell when the box is
// too small for a 3x3 stencil to be distinct.
struct CellGrid {
  int m = 1;
  double cell = 0.0;
  std::vector<int> start;  // m*m + 1 offsets into index
  std::vector<int> index;

  void build(const std::vector<double> &x, const std::vector<double> &y, double box, double radius) {
    m = std::max(1, static_cast<int>(std::floor(box / radius)));
    if (m < 3) m = 1;
    cell = box / m;
    int cells = m * m;
    std::vector<int> cell_of(x.size());
    start.assign(cells + 1, 0);
    for (std::size_t k = 0; k < x.size(); ++k) {
      int c = cell_id(x[k], y[k]);
      cell_of[k] = c;
      ++start[c + 1];
    }
    for (int c = 0; c < cells; ++c) start[c + 1] += start[c];
    index.resize(x.size());
    std::vector<int> fill(start.begin(), start.end() - 1);
    for (std::size_t k = 0; k < x.size(); ++k) index[fill[cell_of[k]]++] = static_cast<int>(k);
  }

  int cell_id(double x, double y) const {
    int i = std::min(m - 1, static_cast<int>(x / cell));
    int j = std::min(m - 1, static_cast<int>(y / cell));
    return i * m + j;
  }

  // calls f(j) for every particle in the 3x3 block around (x, y)
  template <class F>
  void for_each_candidate(double x, double y, F &&f) const {
    if (m == 1) {
      for (int j : index) f(j);
      return;
    }
    int ci = std::min(m - 1, static_cast<int>(x / cell));
    int cj = std::min(m - 1, static_cast<int>(y / cell));
    for (int di = -1; di <= 1; ++di)
      for (int dj = -1; dj <= 1; ++dj) {
        int c = ((ci + di + m) % m) * m + (cj + dj + m) % m;
        for (int s = start[c]; s < start[c + 1]; ++s) f(index[s]);
      }
  }
};

struct ParticleEnsemble {
  std::vector<double> x, y, theta;
  std::vector<std::uint8_t> eta;
  CellGrid grid;
  double time = 0.0;
  long step = 0;
  long flips = 0;  // total speed jumps so far

  std::size_t size() const { return theta.size(); }
  long count(int phase) const {
    return static_cast<long>(std::count(eta.begin(), eta.end(), static_cast<std::uint8_t>(phase)));
  }
};

inline double wrap_box(double v, double box) {
  v = std::fmod(v, box);
  if (v < 0) v += box;
  if (v >= box) v = 0.0;
  return v;
}

inline double min_image(double d, double box) { return d - box * std::round(d / box); }

inline double periodic_distance2(const ParticleEnsemble &e, std::size_t a, std::size_t b, double box) {
  double dx = min_image(e.x[a] - e.x[b], box), dy = min_image(e.y[a] - e.y[b], box);
  return dx * dx + dy * dy;
}

inline void rebuild_grid(ParticleEnsemble &e, const MicroParams &p) {
  e.grid.build(e.x, e.y, p.box, p.all_to_all ? p.box : p.radius);
}

struct InitSpec {
  enum class Kind { uniform, von_mises, file } kind = Kind::uniform;
  std::array<double, 2> lambda{1.0, 1.0};  // per phase, von_mises only
  std::array<double, 2> mean{0.0, 0.0};
  std::string path;  // file only: lines "x,y,theta,eta"
};

namespace detail {
inline constexpr std::uint64_t kInitSalt = 0x1A2B3C4D5E6F7788ull;
inline constexpr std::uint64_t kNoiseSalt = 0x5DEECE66DA3B9F11ull;
inline constexpr std::uint64_t kJumpSalt = 0x2545F4914F6CDD1Dull;
}  // namespace detail

inline ParticleEnsemble load_ensemble_file(const std::string &path, const MicroParams &p) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open particle file " + path);
  ParticleEnsemble e;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double v[4];
    char sep;
    bool ok = static_cast<bool>(ls >> v[0] >> sep >> v[1] >> sep >> v[2] >> sep >> v[3]);
    if (!ok || (v[3] != 0.0 && v[3] != 1.0) || !std::isfinite(v[0]) || !std::isfinite(v[1]) ||
        !std::isfinite(v[2])) {
      std::ostringstream os;
      os << path << ":" << lineno << ": expected x,y,theta,eta with eta in {0,1}";
      throw ParseError(os.str());
    }
    e.x.push_back(wrap_box(v[0], p.box));
    e.y.push_back(wrap_box(v[1], p.box));
    e.theta.push_back(wrap_angle(v[2]));
    e.eta.push_back(static_cast<std::uint8_t>(v[3]));
  }
  if (e.x.empty()) throw ParseError(path + ": no particles");
  return e;
}

inline ParticleEnsemble init_ensemble(const MicroParams &p, const InitSpec &init, double moving_fraction) {
  validate_micro_params(p);
  if (!(moving_fraction >= 0 && moving_fraction <= 1))
    throw ConfigError("moving_fraction must lie in [0, 1]");
  ParticleEnsemble e;
  if (init.kind == InitSpec::Kind::file) {
    e = load_ensemble_file(init.path, p);
  } else {
    e.x.resize(p.n);
    e.y.resize(p.n);
    e.theta.resize(p.n);
    e.eta.resize(p.n);
    for (long k = 0; k < p.n; ++k) {
      CounterRng rng(p.seed ^ detail::kInitSalt, static_cast<std::uint64_t>(k));
      e.x[k] = wrap_box(rng.uniform() * p.box, p.box);
      e.y[k] = wrap_box(rng.uniform() * p.box, p.box);
      e.eta[k] = rng.uniform() < moving_fraction ? 1 : 0;
      if (init.kind == InitSpec::Kind::uniform)
        e.theta[k] = wrap_angle(kPi * (2.0 * rng.uniform() - 1.0));
      else
        e.theta[k] = sample_von_mises(init.lambda[e.eta[k]], init.mean[e.eta[k]], rng);
    }
  }
  rebuild_grid(e, p);
  return e;
}

// Sum of neighbour headings and opposite-phase coupling for one particle.
struct NeighbourSums {
  Vec2 j;                  // same-phase headings within R, k included
  double coupling = 0.0;   // sum over opposite-phase neighbours of (1 + w_k.w_j)/2
};

namespace detail {

// Phase totals used by the all-to-all mode.
struct PhaseTotals {
  std::array<Vec2, 2> sum{};
  std::array<long, 2> count{0, 0};
};

inline PhaseTotals phase_totals(const ParticleEnsemble &e) {
  PhaseTotals t;
  for (std::size_t k = 0; k < e.size(); ++k) {
    t.sum[e.eta[k]] += unit(e.theta[k]);
    ++t.count[e.eta[k]];
  }
  return t;
}

inline NeighbourSums neighbour_sums(const ParticleEnsemble &e, const MicroParams &p, std::size_t k,
                                   const PhaseTotals *totals) {
  NeighbourSums s;
  const int me = e.eta[k];
  const Vec2 wk = unit(e.theta[k]);
  if (p.all_to_all) {
    const PhaseTotals &t = *totals;
    s.j = t.sum[me];
    s.coupling = 0.5 * (t.count[1 - me] + dot(wk, t.sum[1 - me]));
    return s;
  }
  const double r2 = p.radius * p.radius;
  e.grid.for_each_candidate(e.x[k], e.y[k], [&](int j) {
    if (periodic_distance2(e, k, j, p.box) > r2) return;
    Vec2 wj = unit(e.theta[j]);
    if (e.eta[j] == me)
      s.j += wj;
    else
      s.coupling += 0.5 * (1.0 + dot(wk, wj));
  });
  return s;
}

}  // namespace detail

inline NeighbourSums neighbour_sums(const ParticleEnsemble &e, const MicroParams &p, std::size_t k) {
  if (p.all_to_all) {
    auto t = detail::phase_totals(e);
    return detail::neighbour_sums(e, p, k, &t);
  }
  return detail::neighbour_sums(e, p, k, nullptr);
}

// J_k / |J_k|, or nothing when the neighbour headings cancel exactly
inline std::optional<Vec2> neighbor_mean_direction(const ParticleEnsemble &e, const MicroParams &p,
                                                   std::size_t k) {
  Vec2 j = neighbour_sums(e, p, k).j;
  double n = norm(j);
  if (n == 0.0) return std::nullopt;
  return (1.0 / n) * j;
}

inline double jump_rate(const ParticleEnsemble &e, const MicroParams &p, std::size_t k) {
  double tau = p.tau(e.eta[k]);
  if (p.alpha == 0.0) return tau;
  return tau * (1.0 + p.alpha / static_cast<double>(e.size()) * neighbour_sums(e, p, k).coupling);
}

// Frozen pre-step quantities for every particle.
struct StepPlan {
  std::vector<double> target;  // NaN when J_k = 0
  std::vector<double> rate;
};

inline StepPlan plan_step(const ParticleEnsemble &e, const MicroParams &p) {
  StepPlan plan;
  const long n = static_cast<long>(e.size());
  plan.target.assign(n, 0.0);
  plan.rate.assign(n, 0.0);
  detail::PhaseTotals totals;
  if (p.all_to_all) totals = detail::phase_totals(e);
  const double inv_n = 1.0 / static_cast<double>(n);
  parallel_for(n, [&](long b, long end) {
    for (long k = b; k < end; ++k) {
      NeighbourSums s = detail::neighbour_sums(e, p, k, p.all_to_all ? &totals : nullptr);
      plan.target[k] = (s.j.x == 0.0 && s.j.y == 0.0) ? std::nan("") : angle_of(s.j);
      double tau = p.tau(e.eta[k]);
      plan.rate[k] = tau * (1.0 + p.alpha * inv_n * s.coupling);
    }
  }, 256);
  return plan;
}

inline void apply_orientations(ParticleEnsemble &e, const MicroParams &p, const StepPlan &plan) {
  const long n = static_cast<long>(e.size());
  parallel_for(n, [&](long b, long end) {
    for (long k = b; k < end; ++k) {
      const PhaseParams &ph = p.phase(e.eta[k]);
      CounterRng rng(p.seed ^ detail::kNoiseSalt, static_cast<std::uint64_t>(k),
                     static_cast<std::uint64_t>(e.step));
      double th = e.theta[k];
      double drift = std::isnan(plan.target[k]) ? 0.0 : ph.nu * std::sin(plan.target[k] - th) * p.dt;
      e.theta[k] = wrap_angle(th + drift + std::sqrt(2.0 * ph.d * p.dt) * rng.normal());
    }
  }, 256);
}

inline long apply_jumps(ParticleEnsemble &e, const MicroParams &p, const StepPlan &plan) {
  long flips = 0;
  for (std::size_t k = 0; k < e.size(); ++k) {
    if (plan.rate[k] <= 0.0) continue;
    CounterRng rng(p.seed ^ detail::kJumpSalt, k, static_cast<std::uint64_t>(e.step));
    if (rng.uniform() < -std::expm1(-plan.rate[k] * p.dt)) {
      e.eta[k] = static_cast<std::uint8_t>(1 - e.eta[k]);
      ++flips;
    }
  }
  e.flips += flips;
  return flips;
}

inline void step_positions(ParticleEnsemble &e, const MicroParams &p) {
  for (std::size_t k = 0; k < e.size(); ++k) {
    if (!e.eta[k]) continue;
    e.x[k] = wrap_box(e.x[k] + p.speed * std::cos(e.theta[k]) * p.dt, p.box);
    e.y[k] = wrap_box(e.y[k] + p.speed * std::sin(e.theta[k]) * p.dt, p.box);
  }
  rebuild_grid(e, p);
}

inline void step_orientations(ParticleEnsemble &e, const MicroParams &p) {
  apply_orientations(e, p, plan_step(e, p));
}

inline long step_speed_jumps(ParticleEnsemble &e, const MicroParams &p) {
  return apply_jumps(e, p, plan_step(e, p));
}

// One full step: targets and rates from the pre-step state, then headings,
// speed flags, and finally positions with the pre-step velocities.
inline void step(ParticleEnsemble &e, const MicroParams &p) {
  StepPlan plan = plan_step(e, p);
  std::vector<std::uint8_t> eta_old = e.eta;
  std::vector<double> theta_old = e.theta;
  apply_orientations(e, p, plan);
  apply_jumps(e, p, plan);
  for (std::size_t k = 0; k < e.size(); ++k) {
    if (!eta_old[k]) continue;
    e.x[k] = wrap_box(e.x[k] + p.speed * std::cos(theta_old[k]) * p.dt, p.box);
    e.y[k] = wrap_box(e.y[k] + p.speed * std::sin(theta_old[k]) * p.dt, p.box);
  }
  rebuild_grid(e, p);
  ++e.step;
  e.time = e.step * p.dt;
}

struct Bins {
  int nx = 1, ny = 1;
};

// Densities use the empirical measure: each particle carries mass 1/N, so
// sum over bins of (rho0 + rho1) * bin_area = 1.
struct MacroFields {
  Bins bins;
  double bin_area = 0.0;
  std::vector<double> rho0, rho1;
  std::vector<Vec2> j0, j1;
  std::vector<std::optional<Vec2>> omega0, omega1;
  double order0 = 0.0, order1 = 0.0;
  std::array<long, 2> count{0, 0};
  std::array<Vec2, 2> mean_direction{};
};

inline MacroFields observables(const ParticleEnsemble &e, const MicroParams &p, Bins bins = {}) {
  if (bins.nx < 1 || bins.ny < 1) throw ConfigError("bins must be positive");
  MacroFields f;
  f.bins = bins;
  const int nb = bins.nx * bins.ny;
  f.bin_area = p.box * p.box / nb;
  f.rho0.assign(nb, 0.0);
  f.rho1.assign(nb, 0.0);
  f.j0.assign(nb, {});
  f.j1.assign(nb, {});
  std::array<Vec2, 2> total{};
  const double mass = 1.0 / static_cast<double>(e.size());
  for (std::size_t k = 0; k < e.size(); ++k) {
    int bx = std::min(bins.nx - 1, static_cast<int>(e.x[k] / p.box * bins.nx));
    int by = std::min(bins.ny - 1, static_cast<int>(e.y[k] / p.box * bins.ny));
    int b = bx * bins.ny + by;
    Vec2 w = unit(e.theta[k]);
    if (e.eta[k]) {
      f.rho1[b] += mass / f.bin_area;
      f.j1[b] += (mass / f.bin_area) * w;
    } else {
      f.rho0[b] += mass / f.bin_area;
      f.j0[b] += (mass / f.bin_area) * w;
    }
    total[e.eta[k]] += w;
    ++f.count[e.eta[k]];
  }
  auto dir = [](Vec2 j) -> std::optional<Vec2> {
    double n = norm(j);
    if (n == 0.0) return std::nullopt;
    return (1.0 / n) * j;
  };
  f.omega0.resize(nb);
  f.omega1.resize(nb);
  for (int b = 0; b < nb; ++b) {
    f.omega0[b] = dir(f.j0[b]);
    f.omega1[b] = dir(f.j1[b]);
  }
  f.order0 = f.count[0] ? norm(total[0]) / f.count[0] : 0.0;
  f.order1 = f.count[1] ? norm(total[1]) / f.count[1] : 0.0;
  for (int w = 0; w < 2; ++w) {
    auto d = dir(total[w]);
    f.mean_direction[w] = d ? *d : Vec2{1.0, 0.0};
  }
  return f;
}

// Kolmogorov-Smirnov distance between the headings of one phase, measured
// from the given mean angle, and the von Mises law at lambda.
inline double heading_ks_distance(const ParticleEnsemble &e, int phase, double mean_angle, double lambda) {
  std::vector<double> d;
  for (std::size_t k = 0; k < e.size(); ++k)
    if (e.eta[k] == phase || phase < 0) d.push_back(wrap_angle(e.theta[k] - mean_angle));
  if (d.empty()) return 0.0;
  std::sort(d.begin(), d.end());
  VonMisesCdf cdf(lambda);
  double n = static_cast<double>(d.size()), ks = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    double f = cdf(d[i]);
    ks = std::max({ks, std::abs(f - i / n), std::abs((i + 1) / n - f)});
  }
  return ks;
}

inline void write_snapshot_ndjson(std::ostream &os, const ParticleEnsemble &e) {
  char buf[160];
  for (std::size_t k = 0; k < e.size(); ++k) {
    std::snprintf(buf, sizeof buf, "{\"t\":%.10g,\"k\":%zu,\"x\":%.10g,\"y\":%.10g,\"theta\":%.10g,\"eta\":%d}\n",
                  e.time, k, e.x[k], e.y[k], e.theta[k], static_cast<int>(e.eta[k]));
    os << buf;
  }
}

inline void write_fields_csv_header(std::ostream &os) { os << "t,bin,rho0,rho1,jx0,jy0,jx1,jy1\n"; }

inline void write_fields_csv(std::ostream &os, double t, const MacroFields &f) {
  char buf[256];
  for (std::size_t b = 0; b < f.rho0.size(); ++b) {
    std::snprintf(buf, sizeof buf, "%.10g,%zu,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n", t, b, f.rho0[b],
                  f.rho1[b], f.j0[b].x, f.j0[b].y, f.j1[b].x, f.j1[b].y);
    os << buf;
  }
}

}  // namespace vicsek2p

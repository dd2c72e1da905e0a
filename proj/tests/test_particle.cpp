/* test_particle.cpp -- neighbour search, stepping and jump statistics */
#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vicsek2p/particle.hpp"

using namespace vicsek2p;
using Catch::Matchers::WithinAbs;

namespace {

MicroParams small_params(long n, double box, double radius) {
  MicroParams p;
  p.n = n;
  p.box = box;
  p.radius = radius;
  p.tau0 = 1.0;
  p.tau1 = 2.0;
  p.alpha = 0.7;
  p.seed = 11;
  return p;
}

// O(N^2) reference with explicit periodic images
NeighbourSums brute_force(const ParticleEnsemble &e, const MicroParams &p, std::size_t k) {
  NeighbourSums s;
  Vec2 wk = unit(e.theta[k]);
  for (std::size_t j = 0; j < e.size(); ++j) {
    double best = 1e300;
    for (int a = -1; a <= 1; ++a)
      for (int b = -1; b <= 1; ++b) {
        double dx = e.x[j] + a * p.box - e.x[k], dy = e.y[j] + b * p.box - e.y[k];
        best = std::min(best, dx * dx + dy * dy);
      }
    if (best > p.radius * p.radius) continue;
    Vec2 wj = unit(e.theta[j]);
    if (e.eta[j] == e.eta[k])
      s.j += wj;
    else
      s.coupling += 0.5 * (1.0 + dot(wk, wj));
  }
  return s;
}

}  // namespace

TEST_CASE("cell-grid neighbour sums equal the brute-force sums") {
  for (auto [n, box, radius] : {std::tuple{500L, 10.0, 1.0}, std::tuple{300L, 4.0, 1.3}, std::tuple{200L, 2.5, 1.0}}) {
    MicroParams p = small_params(n, box, radius);
    ParticleEnsemble e = init_ensemble(p, {}, 0.5);
    for (std::size_t k = 0; k < e.size(); ++k) {
      NeighbourSums a = neighbour_sums(e, p, k), b = brute_force(e, p, k);
      REQUIRE_THAT(a.j.x, WithinAbs(b.j.x, 1e-12));
      REQUIRE_THAT(a.j.y, WithinAbs(b.j.y, 1e-12));
      REQUIRE_THAT(a.coupling, WithinAbs(b.coupling, 1e-12));
    }
  }
}

TEST_CASE("all-to-all sums cover the whole ensemble") {
  MicroParams p = small_params(400, 10.0, 1.0);
  p.all_to_all = true;
  ParticleEnsemble e = init_ensemble(p, {}, 0.4);
  MicroParams q = p;
  q.all_to_all = false;
  q.radius = 4.99;
  q.box = 10.0;
  // with every particle packed into a disc of radius < R/2 the local and global sums agree
  for (std::size_t k = 0; k < e.size(); ++k) {
    e.x[k] = 5.0 + 2.0 * std::cos(e.theta[k] * 3.0) * 0.5;
    e.y[k] = 5.0 + 2.0 * std::sin(e.theta[k] * 5.0) * 0.5;
  }
  rebuild_grid(e, q);
  for (std::size_t k = 0; k < e.size(); k += 37) {
    NeighbourSums a = neighbour_sums(e, p, k), b = neighbour_sums(e, q, k);
    CHECK_THAT(a.j.x, WithinAbs(b.j.x, 1e-10));
    CHECK_THAT(a.coupling, WithinAbs(b.coupling, 1e-10));
  }
}

TEST_CASE("jump rate follows the coupling") {
  MicroParams p = small_params(300, 6.0, 1.0);
  ParticleEnsemble e = init_ensemble(p, {}, 0.5);
  for (std::size_t k = 0; k < 20; ++k) {
    double expect = p.tau(e.eta[k]) * (1.0 + p.alpha / e.size() * brute_force(e, p, k).coupling);
    CHECK_THAT(jump_rate(e, p, k), WithinAbs(expect, 1e-12));
  }
}

TEST_CASE("same seed gives identical trajectories") {
  MicroParams p = small_params(500, 8.0, 1.0);
  ParticleEnsemble a = init_ensemble(p, {}, 0.5), b = init_ensemble(p, {}, 0.5);
  for (int s = 0; s < 30; ++s) {
    step(a, p);
    step(b, p);
  }
  CHECK(a.x == b.x);
  CHECK(a.theta == b.theta);
  CHECK(a.eta == b.eta);
  p.seed = 12;
  ParticleEnsemble c = init_ensemble(p, {}, 0.5);
  for (int s = 0; s < 30; ++s) step(c, p);
  CHECK(c.theta != a.theta);
}

TEST_CASE("positions stay in the box and resting particles do not move") {
  MicroParams p = small_params(300, 3.0, 1.0);
  p.tau0 = p.tau1 = 0.0;
  ParticleEnsemble e = init_ensemble(p, {}, 0.5);
  ParticleEnsemble start = e;
  for (int s = 0; s < 200; ++s) step(e, p);
  for (std::size_t k = 0; k < e.size(); ++k) {
    CHECK(e.x[k] >= 0.0);
    CHECK(e.x[k] < p.box);
    if (e.eta[k] == 0) CHECK(e.x[k] == start.x[k]);
  }
  CHECK(e.flips == 0);
}

TEST_CASE("alpha = 0 moving fraction relaxes to tau0 / (tau0 + tau1)") {
  MicroParams p = small_params(4000, 10.0, 1.0);
  p.alpha = 0.0;
  p.all_to_all = true;
  ParticleEnsemble e = init_ensemble(p, {}, 0.9);
  double acc = 0.0;
  int samples = 0;
  for (int s = 1; s <= 1500; ++s) {
    step(e, p);
    if (s > 500 && s % 50 == 0) {
      acc += double(e.count(1)) / p.n;
      ++samples;
    }
  }
  double frac = acc / samples, sigma = std::sqrt(frac * (1 - frac) / p.n);
  CHECK(std::abs(frac - 1.0 / 3.0) < 3.0 * sigma);
}

TEST_CASE("all-to-all alignment relaxes headings to von Mises") {
  MicroParams p;
  p.n = 3000;
  p.phase0 = p.phase1 = {1.0, 0.5};
  p.tau0 = p.tau1 = 0.0;
  p.all_to_all = true;
  p.seed = 5;
  ParticleEnsemble e = init_ensemble(p, {}, 1.0);
  for (int s = 0; s < 2000; ++s) step(e, p);
  MacroFields f = observables(e, p);
  double ks = heading_ks_distance(e, 1, angle_of(f.mean_direction[1]), 0.5);
  CHECK(ks < 1.63 / std::sqrt(double(p.n)) + 0.01);
  CHECK_THAT(f.order1, WithinAbs(order_parameter_c(0.5), 0.03));
}

TEST_CASE("observables: densities integrate to one and currents add up") {
  MicroParams p = small_params(500, 5.0, 1.0);
  ParticleEnsemble e = init_ensemble(p, {}, 0.5);
  MacroFields f = observables(e, p, Bins{4, 4});
  double mass = 0.0;
  Vec2 j{};
  for (std::size_t b = 0; b < f.rho0.size(); ++b) {
    mass += (f.rho0[b] + f.rho1[b]) * f.bin_area;
    j += f.bin_area * f.j1[b];
  }
  CHECK_THAT(mass, WithinAbs(1.0, 1e-12));
  Vec2 ref{};
  for (std::size_t k = 0; k < e.size(); ++k)
    if (e.eta[k] == 1) ref += (1.0 / p.n) * unit(e.theta[k]);
  CHECK_THAT(j.x, WithinAbs(ref.x, 1e-12));
  CHECK_THAT(j.y, WithinAbs(ref.y, 1e-12));
}

TEST_CASE("parameter validation names the offending key") {
  MicroParams p = small_params(100, 10.0, 6.0);
  CHECK_THROWS_WITH(init_ensemble(p, {}, 0.5), Catch::Matchers::ContainsSubstring("model.R"));
  p.radius = 1.0;
  p.dt = 0.5;
  CHECK_THROWS_WITH(init_ensemble(p, {}, 0.5), Catch::Matchers::ContainsSubstring("stability guard"));
  p.dt = 0.01;
  CHECK_THROWS_AS(init_ensemble(p, {}, 1.5), ConfigError);
}

TEST_CASE("ensemble file round trip") {
  MicroParams p = small_params(50, 10.0, 1.0);
  ParticleEnsemble e = init_ensemble(p, {}, 0.5);
  auto path = std::filesystem::temp_directory_path() / "vicsek2p_init_test.csv";
  {
    std::ofstream os(path);
    os.precision(17);
    for (std::size_t k = 0; k < e.size(); ++k)
      os << e.x[k] << ',' << e.y[k] << ',' << e.theta[k] << ',' << int(e.eta[k]) << '\n';
  }
  InitSpec init;
  init.kind = InitSpec::Kind::file;
  init.path = path.string();
  ParticleEnsemble g = init_ensemble(p, init, 0.5);
  CHECK(g.x == e.x);
  CHECK(g.eta == e.eta);
  std::filesystem::remove(path);
}

TEST_CASE("NDJSON snapshot has one record per particle") {
  MicroParams p = small_params(20, 10.0, 1.0);
  ParticleEnsemble e = init_ensemble(p, {}, 0.5);
  std::ostringstream os;
  write_snapshot_ndjson(os, e);
  std::string s = os.str();
  CHECK(std::count(s.begin(), s.end(), '\n') == 20);
  CHECK(s.rfind("{\"t\":0,\"k\":0,", 0) == 0);
}

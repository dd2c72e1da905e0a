/* vonmises.hpp -- von Mises equilibria, brackets and generalized collisional invariants */
#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "interp.hpp"
#include "quadrature.hpp"
#include "rng.hpp"

namespace vicsek2p {

inline constexpr double kLambdaMin = 1e-3;
inline constexpr double kLambdaMax = 1e3;

inline void require_lambda(double lambda) {
  if (!std::isfinite(lambda) || lambda <= 0) {
    std::ostringstream os;
    os << "lambda must be finite and positive, got " << lambda;
    throw DomainError(os.str());
  }
  if (lambda < kLambdaMin || lambda > kLambdaMax) {
    std::ostringstream os;
    os << "lambda = " << lambda << " outside the supported range [" << kLambdaMin << ", "
       << kLambdaMax << "]";
    throw RangeError(os.str());
  }
}

struct PhaseParams {
  double nu = 1.0;  // alignment intensity
  double d = 1.0;   // angular diffusion
};

struct PhaseCoefficients {
  double lambda = 1.0;
  double c_norm = 0.0;      // C_lambda; may underflow to 0 for lambda < ~1.4e-3
  double log_c_norm = 0.0;  // log C_lambda, always representable
  double c = 0.0;           // <cos theta>
  double gamma1 = 0.0;
  double beta = 0.0;        // 1 / <sin^2 h>; negative since h < 0
  double bracket_sin2h = 0.0;
  double bracket_sin2cosh = 0.0;
};

// Probability weights of M_lambda on the trapezoid nodes: w_k = M(theta_k) 2pi/n.
class VonMisesWeights {
 public:
  VonMisesWeights(double lambda, const CircleQuadrature &q) : lambda_(lambda), q_(&q) {
    require_lambda(lambda);
    w_.resize(q.n);
    double z = 0.0;
    for (int k = 0; k < q.n; ++k) {
      w_[k] = std::exp((q.cos_t[k] - 1.0) / lambda);
      z += w_[k];
    }
    shifted_mass_ = z * q.weight;
    for (auto &w : w_) w /= z;
  }

  double lambda() const { return lambda_; }
  const CircleQuadrature &quadrature() const { return *q_; }
  const std::vector<double> &weights() const { return w_; }
  // integral of exp((cos - 1)/lambda) over the circle
  double shifted_mass() const { return shifted_mass_; }
  double log_c_norm() const { return -1.0 / lambda_ - std::log(shifted_mass_); }

  // <s> for s a function of u = cos theta
  template <class S>
  double average(S &&s) const {
    double acc = 0.0;
    for (int k = 0; k < q_->n; ++k) {
      double v = s(q_->cos_t[k]);
      check(v, k);
      acc += w_[k] * v;
    }
    return acc;
  }

  // <f> for f a function of the angle theta
  template <class F>
  double average_theta(F &&f) const {
    double acc = 0.0;
    for (int k = 0; k < q_->n; ++k) {
      double v = f(q_->theta[k]);
      check(v, k);
      acc += w_[k] * v;
    }
    return acc;
  }

 private:
  void check(double v, int k) const {
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "bracket integrand is " << v << " at node " << k << " (theta = " << q_->theta[k]
         << ")";
      throw EvaluationError(os.str());
    }
  }

  double lambda_;
  const CircleQuadrature *q_;
  std::vector<double> w_;
  double shifted_mass_ = 0.0;
};

inline double log_normalization_constant(double lambda, int nodes = kDefaultNodes) {
  CircleQuadrature q(nodes);
  return VonMisesWeights(lambda, q).log_c_norm();
}

inline double normalization_constant(double lambda, int nodes = kDefaultNodes) {
  double c = std::exp(log_normalization_constant(lambda, nodes));
  if (!(c > 0) || !std::isfinite(c)) {
    std::ostringstream os;
    os << "C_lambda is not representable in double precision at lambda = " << lambda
       << "; use log_normalization_constant";
    throw RangeError(os.str());
  }
  return c;
}

template <class S>
double bracket_average(S &&s, double lambda, int nodes = kDefaultNodes) {
  CircleQuadrature q(nodes);
  return VonMisesWeights(lambda, q).average(std::forward<S>(s));
}

inline double order_parameter_c(double lambda, int nodes = kDefaultNodes) {
  return bracket_average([](double u) { return u; }, lambda, nodes);
}

// I_2(theta) = h(cos theta) sin theta tabulated on theta_j = j pi / n, j = 0..n.
struct GeneralizedInvariant {
  double lambda = 1.0;
  std::vector<double> theta_grid;
  std::vector<double> i2_values;
  std::vector<double> i2_prime;  // closed form derivative at the nodes
  std::pair<double, double> h_endpoint_limits{0.0, 0.0};  // h(+1), h(-1)
  MonotoneCubic h_table;  // on ascending u = cos theta

  int intervals() const { return static_cast<int>(theta_grid.size()) - 1; }

  double h(double u) const { return h_table(clamp_u(u)); }
  double h_prime(double u) const { return h_table.derivative(clamp_u(u)); }
  // odd, 2pi-periodic extension
  double i2(double theta) const { return h(std::cos(theta)) * std::sin(theta); }

  // h and h' at the tabulated nodes, indexed by theta_j
  double h_node(int j) const { return h_table.y()[intervals() - j]; }
  double h_prime_node(int j) const { return h_table.slopes()[intervals() - j]; }

 private:
  static double clamp_u(double u) { return u < -1.0 ? -1.0 : (u > 1.0 ? 1.0 : u); }
};

inline GeneralizedInvariant gci_build(double lambda, int n_nodes = kDefaultNodes) {
  require_lambda(lambda);
  if (n_nodes < 64) throw ConfigError("gci_build needs at least 64 nodes");
  const int n = n_nodes;
  GeneralizedInvariant g;
  g.lambda = lambda;
  g.theta_grid.resize(n + 1);
  for (int j = 0; j <= n; ++j) g.theta_grid[j] = j == n ? kPi : kPi * j / n;

  // G(theta) = exp(-1/lambda) F(theta); the integrand stays in [e^{-2/lambda}, 1]
  auto integrand = [lambda](double p) { return std::exp((-std::cos(p) - 1.0) / lambda); };
  std::vector<double> G(n + 1, 0.0);
  for (int j = 0; j < n; ++j)
    G[j + 1] = G[j] + gauss_legendre8(integrand, g.theta_grid[j], g.theta_grid[j + 1]);
  const double Gpi = G[n];
  if (!(Gpi > 0) || !std::isfinite(Gpi))
    throw RangeError("gci_build: F(pi) not representable; keep lambda in [1e-3, 1e3]");

  g.i2_values.resize(n + 1);
  g.i2_prime.resize(n + 1);
  for (int j = 0; j <= n; ++j) {
    double th = g.theta_grid[j];
    g.i2_values[j] = lambda * (kPi * G[j] / Gpi - th);
    g.i2_prime[j] = lambda * (kPi * integrand(th) / Gpi - 1.0);
  }
  g.i2_values[0] = 0.0;
  g.i2_values[n] = 0.0;

  const double e2 = std::exp(-2.0 / lambda);
  const double h_plus = lambda * (kPi * e2 / Gpi - 1.0);
  const double h_minus = -lambda * (kPi / Gpi - 1.0);
  g.h_endpoint_limits = {h_plus, h_minus};

  // values and slopes in theta order, then reversed onto ascending u
  std::vector<double> hv(n + 1), hd(n + 1), u(n + 1);
  hv[0] = h_plus;
  hd[0] = -(kPi * e2 / Gpi + h_plus) / 3.0;
  hv[n] = h_minus;
  hd[n] = (kPi / Gpi + h_minus) / 3.0;
  for (int j = 1; j < n; ++j) {
    double s = std::sin(g.theta_grid[j]), c = std::cos(g.theta_grid[j]);
    hv[j] = g.i2_values[j] / s;
    hd[j] = (g.i2_values[j] * c - g.i2_prime[j] * s) / (s * s * s);
  }
  std::vector<double> ua(n + 1), ha(n + 1), da(n + 1);
  for (int j = 0; j <= n; ++j) {
    int k = n - j;
    ua[k] = j == 0 ? 1.0 : (j == n ? -1.0 : std::cos(g.theta_grid[j]));
    ha[k] = hv[j];
    da[k] = hd[j];
  }
  g.h_table = MonotoneCubic(std::move(ua), std::move(ha), std::move(da));
  return g;
}

struct EllipticResidual {
  double max_residual = 0.0;  // max |d/dθ(e^{cos/λ} dI/dθ) - sin e^{cos/λ}| over interior nodes
  double mean_odd_extension = 0.0;  // trapezoid mean of the odd extension of I
};

// Centered differences on a uniform theta grid over [0, pi]. The flux
// derivative is expanded by the product rule so the coefficient is
// differentiated exactly and only I is differenced.
inline EllipticResidual elliptic_residual(double lambda, const std::vector<double> &theta,
                                          const std::vector<double> &values) {
  require_lambda(lambda);
  const int n = static_cast<int>(theta.size()) - 1;
  if (n < 2 || values.size() != theta.size())
    throw DomainError("elliptic_residual: grid and values disagree");
  const double dth = theta[1] - theta[0];
  const double scale = std::exp(1.0 / lambda);
  if (!std::isfinite(scale)) throw RangeError("elliptic_residual: e^{1/lambda} overflows");
  EllipticResidual r;
  for (int j = 1; j < n; ++j) {
    double s = std::sin(theta[j]), a = std::exp((std::cos(theta[j]) - 1.0) / lambda);
    double d1 = (values[j + 1] - values[j - 1]) / (2 * dth);
    double d2 = (values[j + 1] - 2 * values[j] + values[j - 1]) / (dth * dth);
    double res = std::abs(a * (d2 - s * d1 / lambda - s)) * scale;
    if (!(res <= r.max_residual)) r.max_residual = res;
  }
  // odd extension on theta in (-pi, pi]: the pairs cancel node by node
  double acc = 0.0;
  for (int j = 1; j < n; ++j) acc += values[j] + (-values[j]);
  acc += values[n];
  r.mean_odd_extension = acc * dth / kTwoPi;
  return r;
}

inline EllipticResidual elliptic_residual(const GeneralizedInvariant &g) {
  if (g.intervals() < 256) throw ConfigError("elliptic_residual needs a GCI with >= 256 nodes");
  return elliptic_residual(g.lambda, g.theta_grid, g.i2_values);
}

inline PhaseCoefficients phase_coefficients_from(const GeneralizedInvariant &g,
                                                 const VonMisesWeights &w) {
  PhaseCoefficients pc;
  pc.lambda = g.lambda;
  pc.log_c_norm = w.log_c_norm();
  pc.c_norm = std::exp(pc.log_c_norm);
  pc.c = w.average([](double u) { return u; });
  pc.bracket_sin2h = w.average([&](double u) { return (1 - u * u) * g.h(u); });
  pc.bracket_sin2cosh = w.average([&](double u) { return (1 - u * u) * u * g.h(u); });
  if (!(pc.bracket_sin2h < 0))
    throw ConsistencyError("<sin^2 h> is not negative; the invariant table is corrupt");
  pc.gamma1 = pc.bracket_sin2cosh / pc.bracket_sin2h;
  pc.beta = 1.0 / pc.bracket_sin2h;
  return pc;
}

inline PhaseCoefficients phase_coefficients(const PhaseParams &p, int n_nodes = kDefaultNodes) {
  if (!std::isfinite(p.nu) || p.nu <= 0) throw DomainError("nu must be positive");
  if (!std::isfinite(p.d) || p.d <= 0) throw DomainError("d must be positive");
  double lambda = p.d / p.nu;
  GeneralizedInvariant g = gci_build(lambda, n_nodes);
  CircleQuadrature q(n_nodes);
  return phase_coefficients_from(g, VonMisesWeights(lambda, q));
}

// Rejection sampling against a uniform proposal, envelope e^{(cos-1)/lambda}.
template <class Rng>
double sample_von_mises(double lambda, double mean_angle, Rng &rng, long max_draws = 1000000) {
  require_lambda(lambda);
  for (long i = 0; i < max_draws; ++i) {
    double t = kPi * (2.0 * rng.uniform() - 1.0);
    if (rng.uniform() < std::exp((std::cos(t) - 1.0) / lambda)) return wrap_angle(mean_angle + t);
  }
  std::ostringstream os;
  os << "von Mises sampler exceeded " << max_draws << " draws at lambda = " << lambda;
  throw SamplingError(os.str());
}

// cumulative distribution of M_lambda on (-pi, pi], by trapezoid on a fine grid
class VonMisesCdf {
 public:
  explicit VonMisesCdf(double lambda, int cells = 1 << 14) : cells_(cells) {
    require_lambda(lambda);
    cdf_.assign(cells + 1, 0.0);
    auto f = [lambda](double t) { return std::exp((std::cos(t) - 1.0) / lambda); };
    double h = kTwoPi / cells;
    for (int i = 0; i < cells; ++i) {
      double a = -kPi + i * h;
      cdf_[i + 1] = cdf_[i] + gauss_legendre8(f, a, a + h);
    }
    for (auto &v : cdf_) v /= cdf_.back();
  }

  double operator()(double t) const {
    t = wrap_angle(t);
    double x = (t + kPi) / kTwoPi * cells_;
    int i = static_cast<int>(x);
    if (i >= cells_) return 1.0;
    double f = x - i;
    return cdf_[i] + f * (cdf_[i + 1] - cdf_[i]);
  }

 private:
  int cells_;
  std::vector<double> cdf_;
};

}  // namespace vicsek2p

/* quadrature.hpp -- periodic trapezoid nodes on the circle, Gauss-Legendre cells */
#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"

namespace vicsek2p {

inline constexpr int kDefaultNodes = 1024;

// Uniform nodes theta_k = 2 pi k / n. cos/sin tables are filled from the
// first quadrant and mirrored, so even/odd symmetries hold bit for bit.
struct CircleQuadrature {
  int n = 0;
  double weight = 0.0;
  std::vector<double> theta, cos_t, sin_t;

  CircleQuadrature() = default;
  explicit CircleQuadrature(int nodes) : n(nodes) {
    if (n < 8 || n % 4 != 0)
      throw ConfigError("circle quadrature needs a multiple of 4 nodes (>= 8), got " +
                        std::to_string(n));
    weight = kTwoPi / n;
    theta.resize(n);
    cos_t.resize(n);
    sin_t.resize(n);
    const int q = n / 4;
    for (int k = 0; k <= q; ++k) {
      double a = kTwoPi * k / n;
      double c = k == q ? 0.0 : std::cos(a);
      double s = k == 0 ? 0.0 : (k == q ? 1.0 : std::sin(a));
      put(k, c, s);
      put(2 * q - k, -c, s);
      put(2 * q + k, -c, -s);
      if (k > 0) put(n - k, c, -s);
    }
    for (int k = 0; k < n; ++k) theta[k] = kTwoPi * k / n;
  }

  // index of the node reflected through the vertical axis (theta -> pi - theta)
  int mirror(int k) const { return ((n / 2 - k) % n + n) % n; }
  // index of -theta_k
  int negate(int k) const { return (n - k) % n; }

 private:
  void put(int k, double c, double s) {
    cos_t[k] = c;
    sin_t[k] = s;
  }
};

// 8-point Gauss-Legendre on [-1, 1]
inline constexpr std::array<double, 8> kGL8Nodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
inline constexpr std::array<double, 8> kGL8Weights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

template <class F>
double gauss_legendre8(F &&f, double a, double b) {
  double m = 0.5 * (a + b), r = 0.5 * (b - a), s = 0.0;
  for (int i = 0; i < 8; ++i) s += kGL8Weights[i] * f(m + r * kGL8Nodes[i]);
  return r * s;
}

}  // namespace vicsek2p

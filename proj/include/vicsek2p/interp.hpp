/* interp.hpp -- monotone piecewise cubic Hermite interpolation */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "errors.hpp"

namespace vicsek2p {

// Cubic Hermite interpolant through (x_i, y_i) with node slopes d_i. The
// slopes are passed through the Fritsch-Carlson limiter, so monotone data
// gives a monotone interpolant. x must be strictly ascending.
class MonotoneCubic {
 public:
  MonotoneCubic() = default;
  MonotoneCubic(std::vector<double> x, std::vector<double> y, std::vector<double> d)
      : x_(std::move(x)), y_(std::move(y)), d_(std::move(d)) {
    if (x_.size() < 2 || y_.size() != x_.size() || d_.size() != x_.size())
      throw DomainError("MonotoneCubic: inconsistent table sizes");
    for (std::size_t i = 0; i + 1 < x_.size(); ++i)
      if (!(x_[i + 1] > x_[i])) throw DomainError("MonotoneCubic: abscissae not ascending");
    limit();
  }

  // slopes from the weighted harmonic mean of neighbouring secants
  static MonotoneCubic pchip(std::vector<double> x, std::vector<double> y) {
    std::size_t n = x.size();
    std::vector<double> d(n, 0.0);
    if (n >= 2) {
      std::vector<double> h(n - 1), del(n - 1);
      for (std::size_t i = 0; i + 1 < n; ++i) {
        h[i] = x[i + 1] - x[i];
        del[i] = (y[i + 1] - y[i]) / h[i];
      }
      d[0] = del[0];
      d[n - 1] = del[n - 2];
      for (std::size_t i = 1; i + 1 < n; ++i) {
        if (del[i - 1] * del[i] <= 0) continue;
        double w1 = 2 * h[i] + h[i - 1], w2 = h[i] + 2 * h[i - 1];
        d[i] = (w1 + w2) / (w1 / del[i - 1] + w2 / del[i]);
      }
    }
    return MonotoneCubic(std::move(x), std::move(y), std::move(d));
  }

  double operator()(double x) const {
    std::size_t i = locate(x);
    double h = x_[i + 1] - x_[i], t = (x - x_[i]) / h;
    double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y_[i] + (t3 - 2 * t2 + t) * h * d_[i] +
           (-2 * t3 + 3 * t2) * y_[i + 1] + (t3 - t2) * h * d_[i + 1];
  }

  double derivative(double x) const {
    std::size_t i = locate(x);
    double h = x_[i + 1] - x_[i], t = (x - x_[i]) / h;
    double t2 = t * t;
    return (6 * t2 - 6 * t) / h * y_[i] + (3 * t2 - 4 * t + 1) * d_[i] +
           (-6 * t2 + 6 * t) / h * y_[i + 1] + (3 * t2 - 2 * t) * d_[i + 1];
  }

  const std::vector<double> &x() const { return x_; }
  const std::vector<double> &y() const { return y_; }
  const std::vector<double> &slopes() const { return d_; }

 private:
  std::size_t locate(double x) const {
    if (x <= x_.front()) return 0;
    if (x >= x_.back()) return x_.size() - 2;
    auto it = std::upper_bound(x_.begin(), x_.end(), x);
    return static_cast<std::size_t>(it - x_.begin()) - 1;
  }

  void limit() {
    for (std::size_t i = 0; i + 1 < x_.size(); ++i) {
      double del = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
      if (del == 0.0) {
        d_[i] = d_[i + 1] = 0.0;
        continue;
      }
      double a = d_[i] / del, b = d_[i + 1] / del;
      if (a < 0) d_[i] = 0.0, a = 0.0;
      if (b < 0) d_[i + 1] = 0.0, b = 0.0;
      double r = a * a + b * b;
      if (r > 9.0) {
        double tau = 3.0 / std::sqrt(r);
        d_[i] = tau * a * del;
        d_[i + 1] = tau * b * del;
      }
    }
  }

  std::vector<double> x_, y_, d_;
};

}  // namespace vicsek2p

/* geometry.hpp -- plane vectors and angle helpers */
#pragma once

#include <cmath>
#include <numbers>

namespace vicsek2p {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Vec2 {
  double x = 0.0, y = 0.0;

  Vec2 &operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  Vec2 &operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
  Vec2 &operator*=(double s) { x *= s; y *= s; return *this; }
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
// counter-clockwise quarter turn
inline Vec2 perp(Vec2 a) { return {-a.y, a.x}; }
inline Vec2 unit(double angle) { return {std::cos(angle), std::sin(angle)}; }
inline double angle_of(Vec2 a) { return std::atan2(a.y, a.x); }

// (Id - w (x) w) v
inline Vec2 project_out(Vec2 w, Vec2 v) { return v - dot(w, v) * w; }

// wrap into (-pi, pi]
inline double wrap_angle(double a) {
  double r = std::remainder(a, kTwoPi);
  if (r <= -kPi) r += kTwoPi;
  return r;
}

}  // namespace vicsek2p

// Copyright 2026 The Funnel Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "funnel/error.hpp"

// Right-handed, +Y up. Cameras and the avatar head look along local -Z.
namespace funnel::geom {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator-() const { return {-x, -y, -z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
  constexpr bool operator==(const Vec3&) const = default;
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double length(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline Vec3 normalize(const Vec3& v) {
  const double len = length(v);
  if (!(len > 0.0) || !std::isfinite(len)) {
    fail(ErrorKind::kInputDomain, "cannot normalize a zero or non-finite vector");
  }
  return v / len;
}

constexpr Vec3 lerp(const Vec3& a, const Vec3& b, double t) { return a + (b - a) * t; }

inline Vec3 min(const Vec3& a, const Vec3& b) {
  return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}

inline Vec3 max(const Vec3& a, const Vec3& b) {
  return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}

inline bool is_finite(const Vec3& v) {
  return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

// Unit quaternion. Construction goes through `normalized` or `identity`, so a
// UnitQuat in circulation always has |q| = 1 within 1e-9.
class UnitQuat {
 public:
  constexpr UnitQuat() = default;

  static constexpr UnitQuat identity() { return UnitQuat(); }

  static UnitQuat normalized(double w, double x, double y, double z) {
    const double n2 = w * w + x * x + y * y + z * z;
    if (!(n2 > 0.0) || !std::isfinite(n2)) {
      fail(ErrorKind::kInputDomain, "quaternion must have non-zero finite norm");
    }
    // Already unit to rounding: keep the bits so serialisation round-trips.
    if (std::abs(n2 - 1.0) <= 8 * std::numeric_limits<double>::epsilon()) {
      return UnitQuat(w, x, y, z);
    }
    const double n = std::sqrt(n2);
    return UnitQuat(w / n, x / n, y / n, z / n);
  }

  static UnitQuat from_axis_angle(const Vec3& axis, double radians) {
    const Vec3 a = normalize(axis);
    const double h = 0.5 * radians;
    const double s = std::sin(h);
    return normalized(std::cos(h), a.x * s, a.y * s, a.z * s);
  }

  // Rotation whose local -Z maps to `forward` and local +Y lies in the plane
  // of `forward` and `up`.
  static UnitQuat look_rotation(const Vec3& forward, const Vec3& up) {
    const Vec3 back = -normalize(forward);
    const Vec3 right = normalize(cross(up, back));
    const Vec3 true_up = cross(back, right);
    return from_basis(right, true_up, back);
  }

  // Columns of the rotation matrix: images of local X, Y, Z.
  static UnitQuat from_basis(const Vec3& cx, const Vec3& cy, const Vec3& cz) {
    const double m00 = cx.x, m10 = cx.y, m20 = cx.z;
    const double m01 = cy.x, m11 = cy.y, m21 = cy.z;
    const double m02 = cz.x, m12 = cz.y, m22 = cz.z;
    const double trace = m00 + m11 + m22;
    if (trace > 0.0) {
      const double s = 0.5 / std::sqrt(trace + 1.0);
      return normalized(0.25 / s, (m21 - m12) * s, (m02 - m20) * s, (m10 - m01) * s);
    }
    if (m00 > m11 && m00 > m22) {
      const double s = 2.0 * std::sqrt(1.0 + m00 - m11 - m22);
      return normalized((m21 - m12) / s, 0.25 * s, (m01 + m10) / s, (m02 + m20) / s);
    }
    if (m11 > m22) {
      const double s = 2.0 * std::sqrt(1.0 + m11 - m00 - m22);
      return normalized((m02 - m20) / s, (m01 + m10) / s, 0.25 * s, (m12 + m21) / s);
    }
    const double s = 2.0 * std::sqrt(1.0 + m22 - m00 - m11);
    return normalized((m10 - m01) / s, (m02 + m20) / s, (m12 + m21) / s, 0.25 * s);
  }

  constexpr double w() const { return w_; }
  constexpr double x() const { return x_; }
  constexpr double y() const { return y_; }
  constexpr double z() const { return z_; }

  constexpr UnitQuat conjugate() const { return UnitQuat(w_, -x_, -y_, -z_); }

  // Hamilton product renormalized to keep drift out of long compositions.
  UnitQuat operator*(const UnitQuat& o) const {
    return normalized(w_ * o.w_ - x_ * o.x_ - y_ * o.y_ - z_ * o.z_,
                      w_ * o.x_ + x_ * o.w_ + y_ * o.z_ - z_ * o.y_,
                      w_ * o.y_ - x_ * o.z_ + y_ * o.w_ + z_ * o.x_,
                      w_ * o.z_ + x_ * o.y_ - y_ * o.x_ + z_ * o.w_);
  }

  constexpr Vec3 rotate(const Vec3& v) const {
    const Vec3 u{x_, y_, z_};
    const Vec3 t = cross(u, v) * 2.0;
    return v + t * w_ + cross(u, t);
  }

  constexpr Vec3 right() const { return rotate({1.0, 0.0, 0.0}); }
  constexpr Vec3 up() const { return rotate({0.0, 1.0, 0.0}); }
  constexpr Vec3 forward() const { return rotate({0.0, 0.0, -1.0}); }

  constexpr double norm_squared() const { return w_ * w_ + x_ * x_ + y_ * y_ + z_ * z_; }

  constexpr bool operator==(const UnitQuat&) const = default;

 private:
  constexpr UnitQuat(double w, double x, double y, double z) : w_(w), x_(x), y_(y), z_(z) {}

  double w_ = 1.0;
  double x_ = 0.0;
  double y_ = 0.0;
  double z_ = 0.0;
};

// Shortest-arc spherical interpolation. t = 0 and t = 1 return the endpoints
// exactly.
inline UnitQuat slerp(const UnitQuat& a, const UnitQuat& b, double t) {
  if (t <= 0.0) return a;
  if (t >= 1.0) return b;
  double cos_theta = a.w() * b.w() + a.x() * b.x() + a.y() * b.y() + a.z() * b.z();
  double sign = 1.0;
  if (cos_theta < 0.0) {
    cos_theta = -cos_theta;
    sign = -1.0;
  }
  double wa;
  double wb;
  if (cos_theta > 0.9995) {
    wa = 1.0 - t;
    wb = t;
  } else {
    const double theta = std::acos(std::min(1.0, cos_theta));
    const double s = std::sin(theta);
    wa = std::sin((1.0 - t) * theta) / s;
    wb = std::sin(t * theta) / s;
  }
  wb *= sign;
  return UnitQuat::normalized(wa * a.w() + wb * b.w(), wa * a.x() + wb * b.x(),
                              wa * a.y() + wb * b.y(), wa * a.z() + wb * b.z());
}

// Angle in radians between two orientations.
inline double angle_between(const UnitQuat& a, const UnitQuat& b) {
  const double d = std::abs(a.w() * b.w() + a.x() * b.x() + a.y() * b.y() + a.z() * b.z());
  return 2.0 * std::acos(std::min(1.0, d));
}

struct Pose {
  Vec3 position;
  UnitQuat orientation;

  // Pose composition: (this * local) maps local-frame points through `local`
  // and then through this pose.
  Pose operator*(const Pose& local) const {
    return {position + orientation.rotate(local.position), orientation * local.orientation};
  }

  Pose inverse() const {
    const UnitQuat inv = orientation.conjugate();
    return {inv.rotate(-position), inv};
  }

  Vec3 to_local(const Vec3& world) const {
    return orientation.conjugate().rotate(world - position);
  }

  Vec3 to_world(const Vec3& local) const { return position + orientation.rotate(local); }

  bool operator==(const Pose&) const = default;
};

}  // namespace funnel::geom

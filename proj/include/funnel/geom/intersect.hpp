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

#include <array>
#include <cmath>
#include <limits>
#include <optional>

#include "funnel/geom/camera.hpp"
#include "funnel/geom/vec.hpp"

namespace funnel::geom {

// Hits closer than this are ignored so rays leaving a surface or the camera
// centre do not re-hit their origin.
inline constexpr double kMinHitDistance = 1e-6;

struct Triangle {
  std::array<Vec3, 3> v;

  Vec3 centroid() const { return (v[0] + v[1] + v[2]) / 3.0; }
  // Unnormalized face normal following the winding (v0, v1, v2).
  Vec3 face_normal() const { return cross(v[1] - v[0], v[2] - v[0]); }
};

struct Aabb {
  Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity()};
  Vec3 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
          -std::numeric_limits<double>::infinity()};

  void grow(const Vec3& p) {
    lo = min(lo, p);
    hi = max(hi, p);
  }
  void grow(const Aabb& b) {
    lo = min(lo, b.lo);
    hi = max(hi, b.hi);
  }
  void grow(const Triangle& t) {
    for (const Vec3& p : t.v) grow(p);
  }
  bool empty() const { return lo.x > hi.x; }
  Vec3 extent() const { return hi - lo; }
  double surface_area() const {
    if (empty()) return 0.0;
    const Vec3 e = extent();
    return 2.0 * (e.x * e.y + e.y * e.z + e.z * e.x);
  }
};

// Two-sided Moller-Trumbore. Returns the ray parameter of the hit when it is
// at least kMinHitDistance; degenerate triangles never hit.
inline std::optional<double> intersect(const Ray& ray, const Triangle& tri) {
  const Vec3 e1 = tri.v[1] - tri.v[0];
  const Vec3 e2 = tri.v[2] - tri.v[0];
  const Vec3 p = cross(ray.direction(), e2);
  const double det = dot(e1, p);
  if (std::abs(det) < 1e-14) return std::nullopt;
  const double inv_det = 1.0 / det;
  const Vec3 s = ray.origin() - tri.v[0];
  const double u = dot(s, p) * inv_det;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 q = cross(s, e1);
  const double v = dot(ray.direction(), q) * inv_det;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = dot(e2, q) * inv_det;
  if (!(t >= kMinHitDistance)) return std::nullopt;
  return t;
}

// Slab test. Returns the entry distance (clamped at 0) when the ray meets the
// box no farther than `t_max`.
inline std::optional<double> intersect(const Ray& ray, const Aabb& box, double t_max) {
  double t0 = 0.0;
  double t1 = t_max;
  for (int axis = 0; axis < 3; ++axis) {
    const double o = ray.origin()[axis];
    const double d = ray.direction()[axis];
    const double lo = box.lo[axis];
    const double hi = box.hi[axis];
    if (std::abs(d) < 1e-300) {
      if (o < lo || o > hi) return std::nullopt;
      continue;
    }
    const double inv = 1.0 / d;
    double near = (lo - o) * inv;
    double far = (hi - o) * inv;
    if (near > far) std::swap(near, far);
    // Widen slightly so hits on box faces are never culled by rounding.
    far *= 1.0 + 4.0 * std::numeric_limits<double>::epsilon();
    t0 = std::max(t0, near);
    t1 = std::min(t1, far);
    if (t0 > t1) return std::nullopt;
  }
  return t0;
}

}  // namespace funnel::geom

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

#include <cmath>
#include <numbers>
#include <optional>

#include "funnel/error.hpp"
#include "funnel/geom/vec.hpp"

namespace funnel::geom {

// Pinhole camera. Pixel coordinates are continuous with the origin at the
// top-left corner of the image, x right and y down; pixel (i, j) covers
// [i, i+1) x [j, j+1).
class CameraIntrinsics {
 public:
  CameraIntrinsics(double vertical_fov, int width_px, int height_px, double near = 0.05,
                   double far = 500.0)
      : vertical_fov_(vertical_fov), width_(width_px), height_(height_px), near_(near), far_(far) {
    if (!(vertical_fov > 0.0 && vertical_fov < std::numbers::pi)) {
      fail(ErrorKind::kInputDomain, "vertical_fov must be in (0, pi)", "vertical_fov");
    }
    if (width_px <= 0 || height_px <= 0) {
      fail(ErrorKind::kInputDomain, "viewport must be non-empty", "width_px");
    }
    if (!(near > 0.0) || !(far > near)) {
      fail(ErrorKind::kInputDomain, "need 0 < near < far", "near");
    }
    focal_ = 1.0 / std::tan(0.5 * vertical_fov_);
  }

  double vertical_fov() const { return vertical_fov_; }
  int width() const { return width_; }
  int height() const { return height_; }
  double near() const { return near_; }
  double far() const { return far_; }
  double aspect() const { return static_cast<double>(width_) / height_; }
  // cot(fov/2): NDC units per unit of tangent.
  double focal() const { return focal_; }

  CameraIntrinsics with_size(int width_px, int height_px) const {
    return CameraIntrinsics(vertical_fov_, width_px, height_px, near_, far_);
  }

 private:
  double vertical_fov_;
  int width_;
  int height_;
  double near_;
  double far_;
  double focal_ = 1.0;
};

class Ray {
 public:
  Ray(const Vec3& origin, const Vec3& direction)
      : origin_(origin), direction_(normalize(direction)) {}

  const Vec3& origin() const { return origin_; }
  const Vec3& direction() const { return direction_; }
  Vec3 at(double t) const { return origin_ + direction_ * t; }

 private:
  Vec3 origin_;
  Vec3 direction_;
};

struct Projection {
  double x_px = 0.0;
  double y_px = 0.0;
  double depth = 0.0;  // camera-space distance along the view axis
};

// Camera-space point (camera looks along -Z) to continuous pixel coordinates.
// No frustum test.
inline Projection project_camera_space(const Vec3& pc, const CameraIntrinsics& intr) {
  const double depth = -pc.z;
  const double ndc_x = intr.focal() / intr.aspect() * pc.x / depth;
  const double ndc_y = intr.focal() * pc.y / depth;
  return {(ndc_x + 1.0) * 0.5 * intr.width(), (1.0 - ndc_y) * 0.5 * intr.height(), depth};
}

// Absent when the point is behind the camera, outside [near, far] or lands
// outside the image.
inline std::optional<Projection> project(const Vec3& point, const Pose& camera,
                                         const CameraIntrinsics& intr) {
  const Vec3 pc = camera.to_local(point);
  const double depth = -pc.z;
  if (!(depth >= intr.near() && depth <= intr.far())) return std::nullopt;
  Projection p = project_camera_space(pc, intr);
  if (p.x_px < 0.0 || p.x_px >= intr.width() || p.y_px < 0.0 || p.y_px >= intr.height()) {
    return std::nullopt;
  }
  return p;
}

// Ray from the camera centre through continuous pixel (x_px, y_px).
inline Ray unproject(double x_px, double y_px, const Pose& camera, const CameraIntrinsics& intr) {
  if (!(x_px >= 0.0 && x_px < intr.width() && y_px >= 0.0 && y_px < intr.height())) {
    fail(ErrorKind::kInputDomain, "pixel outside the viewport", "pixel");
  }
  const double ndc_x = 2.0 * x_px / intr.width() - 1.0;
  const double ndc_y = 1.0 - 2.0 * y_px / intr.height();
  const Vec3 dir_cam{ndc_x * intr.aspect() / intr.focal(), ndc_y / intr.focal(), -1.0};
  return Ray(camera.position, camera.orientation.rotate(dir_cam));
}

}  // namespace funnel::geom

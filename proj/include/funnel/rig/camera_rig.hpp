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
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "funnel/error.hpp"
#include "funnel/geom/vec.hpp"
#include "funnel/scene/scenario.hpp"

namespace funnel::rig {

using geom::Pose;
using geom::UnitQuat;
using geom::Vec3;
using scene::AvatarState;

enum class RigMode : std::uint8_t {
  kFree = 0,
  kFirstPerson = 1,
  kOverShoulder = 2,
  kThirdFollow = 3,
  kMapView = 4,
};

inline constexpr std::array<RigMode, 5> kAllModes = {RigMode::kFree, RigMode::kFirstPerson,
                                                     RigMode::kOverShoulder, RigMode::kThirdFollow,
                                                     RigMode::kMapView};

inline std::string_view to_string(RigMode m) {
  switch (m) {
    case RigMode::kFree:
      return "free";
    case RigMode::kFirstPerson:
      return "first_person";
    case RigMode::kOverShoulder:
      return "over_shoulder";
    case RigMode::kThirdFollow:
      return "third_follow";
    case RigMode::kMapView:
      return "map_view";
  }
  return "free";
}

inline std::optional<RigMode> parse_rig_mode(std::string_view s) {
  for (RigMode m : kAllModes) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

// Tunables shared by all rigs of a session.
struct RigConfig {
  double arm_min = 0.5;
  double arm_max = 20.0;
  double smoothing_tau = 0.25;
  double shoulder_right = 0.35;
  double shoulder_up = 0.25;
  double follow_elevation = 0.3;  // fraction of arm length
  double grab_reach = 0.5;
  double pitch_margin = 0.01;  // radians kept clear of straight up/down
  double default_arm = 3.0;
};

struct CameraRig {
  RigMode mode = RigMode::kFree;
  Pose pose;
  double arm_length = 3.0;
  bool grabbed_by_vr = false;
  double smoothing_tau = 0.25;
  double arm_min = 0.5;
  double arm_max = 20.0;
  // Camera pose in the grabbing hand's frame; meaningful while grabbed.
  Pose grab_offset;

  bool operator==(const CameraRig&) const = default;
};

inline CameraRig make_rig(RigMode mode, const RigConfig& cfg, const Pose& pose = {}) {
  CameraRig r;
  r.mode = mode;
  r.pose = pose;
  r.arm_min = cfg.arm_min;
  r.arm_max = cfg.arm_max;
  r.arm_length = std::clamp(cfg.default_arm, cfg.arm_min, cfg.arm_max);
  r.smoothing_tau = cfg.smoothing_tau;
  return r;
}

struct FreeCamInput {
  double forward = 0.0;  // each axis in [-1, 1]
  double right = 0.0;
  double up = 0.0;
  double yaw_delta = 0.0;
  double pitch_delta = 0.0;
  double dt = 0.0;
};

// Head forward flattened onto the ground plane. Falls back to the head's up
// (or -Z) when looking straight up or down.
inline Vec3 horizontal_forward(const UnitQuat& head) {
  Vec3 f = head.forward();
  f.y = 0.0;
  if (geom::length(f) < 1e-9) {
    f = head.up() * (head.forward().y > 0.0 ? -1.0 : 1.0);
    f.y = 0.0;
    if (geom::length(f) < 1e-9) return {0.0, 0.0, -1.0};
  }
  return geom::normalize(f);
}

// Closed-form pose a follow rig converges to.
inline Pose target_pose(RigMode mode, const AvatarState& avatar, double arm, const RigConfig& cfg) {
  const Pose& head = avatar.head;
  switch (mode) {
    case RigMode::kFirstPerson:
      return head;
    case RigMode::kOverShoulder: {
      const UnitQuat& q = head.orientation;
      const Vec3 pos = head.position + q.right() * cfg.shoulder_right + q.up() * cfg.shoulder_up +
                       q.rotate({0.0, 0.0, 1.0}) * arm;
      return {pos, q};
    }
    case RigMode::kThirdFollow: {
      const Vec3 hf = horizontal_forward(head.orientation);
      const Vec3 pos = head.position - hf * arm + Vec3{0.0, cfg.follow_elevation * arm, 0.0};
      return {pos, UnitQuat::look_rotation(head.position - pos, {0.0, 1.0, 0.0})};
    }
    case RigMode::kMapView: {
      const Vec3 hf = horizontal_forward(head.orientation);
      const Vec3 pos = head.position + Vec3{0.0, arm, 0.0};
      // Local -Z points down, local +Y along the head's heading.
      const Vec3 back{0.0, 1.0, 0.0};
      const Vec3 right = geom::cross(hf, back);
      return {pos, UnitQuat::from_basis(right, hf, back)};
    }
    case RigMode::kFree:
      break;
  }
  fail(ErrorKind::kState, "free camera has no target pose");
}

inline bool follows_avatar(RigMode m) {
  return m == RigMode::kOverShoulder || m == RigMode::kThirdFollow || m == RigMode::kMapView;
}

// One tick of rig motion. Free and grabbed rigs are unchanged.
inline CameraRig update_rig(CameraRig rig, const AvatarState& avatar, double dt,
                            const RigConfig& cfg) {
  if (!(dt > 0.0)) fail(ErrorKind::kInputDomain, "dt must be positive", "dt");
  if (rig.mode == RigMode::kFree || rig.grabbed_by_vr) return rig;
  if (rig.mode == RigMode::kFirstPerson) {
    rig.pose = avatar.head;
    return rig;
  }
  const Pose target = target_pose(rig.mode, avatar, rig.arm_length, cfg);
  if (rig.smoothing_tau <= 0.0) {
    rig.pose = target;
    return rig;
  }
  const double alpha = 1.0 - std::exp(-dt / rig.smoothing_tau);
  rig.pose = {geom::lerp(rig.pose.position, target.position, alpha),
              geom::slerp(rig.pose.orientation, target.orientation, alpha)};
  return rig;
}

inline CameraRig set_arm_length(CameraRig rig, double value) {
  if (std::isnan(value)) fail(ErrorKind::kInputDomain, "arm length is NaN", "value");
  rig.arm_length = std::clamp(value, rig.arm_min, rig.arm_max);
  return rig;
}

// Camera pitch in radians, positive looking up.
inline double pitch_of(const UnitQuat& q) {
  return std::asin(std::clamp(q.forward().y, -1.0, 1.0));
}

// WASD-style motion for the free camera: translation along the camera's local
// axes, yaw about world +Y, pitch about the local right axis with clamping.
inline CameraRig apply_free_input(CameraRig rig, const FreeCamInput& in, double speed,
                                  double pitch_margin = 0.01) {
  if (rig.mode != RigMode::kFree) {
    fail(ErrorKind::kState, "free input only drives the free camera", "mode");
  }
  if (rig.grabbed_by_vr) {
    fail(ErrorKind::kState, "camera is held by the VR user", "grabbed_by_vr");
  }
  if (!(in.dt > 0.0)) fail(ErrorKind::kInputDomain, "dt must be positive", "dt");
  for (double axis : {in.forward, in.right, in.up}) {
    if (!(axis >= -1.0 && axis <= 1.0)) {
      fail(ErrorKind::kInputDomain, "move axes must be in [-1, 1]", "move_axes");
    }
  }
  const UnitQuat& q = rig.pose.orientation;
  const Vec3 move = q.forward() * in.forward + q.right() * in.right + q.up() * in.up;
  rig.pose.position += move * (speed * in.dt);

  UnitQuat orient = q;
  if (in.yaw_delta != 0.0) {
    orient = UnitQuat::from_axis_angle({0.0, 1.0, 0.0}, in.yaw_delta) * orient;
  }
  if (in.pitch_delta != 0.0) {
    const double limit = std::numbers::pi / 2.0 - pitch_margin;
    const double current = pitch_of(orient);
    const double wanted = std::clamp(current + in.pitch_delta, -limit, limit);
    const double applied = wanted - current;
    if (applied != 0.0) {
      orient = orient * UnitQuat::from_axis_angle({1.0, 0.0, 0.0}, applied);
    }
  }
  rig.pose.orientation = orient;
  return rig;
}

struct GrabResult {
  CameraRig rig;
  bool accepted = false;
  std::string reason;
};

inline GrabResult grab_main_camera(CameraRig rig, const Pose& hand, double reach) {
  if (rig.mode != RigMode::kFree) {
    return {rig, false, "only the main camera can be grabbed"};
  }
  if (rig.grabbed_by_vr) return {rig, false, "already grabbed"};
  if (geom::length(hand.position - rig.pose.position) > reach) {
    return {rig, false, "out of reach"};
  }
  rig.grabbed_by_vr = true;
  rig.grab_offset = hand.inverse() * rig.pose;
  return {rig, true, {}};
}

inline CameraRig move_grabbed(CameraRig rig, const Pose& hand) {
  if (!rig.grabbed_by_vr) fail(ErrorKind::kState, "camera is not grabbed", "grabbed_by_vr");
  rig.pose = hand * rig.grab_offset;
  return rig;
}

inline CameraRig release(CameraRig rig) {
  if (!rig.grabbed_by_vr) fail(ErrorKind::kState, "camera is not grabbed", "grabbed_by_vr");
  rig.grabbed_by_vr = false;
  rig.grab_offset = {};
  return rig;
}

}  // namespace funnel::rig

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
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "funnel/error.hpp"
#include "funnel/render/composite.hpp"
#include "funnel/rig/camera_rig.hpp"

namespace funnel::session {

using render::PixelPoint;
using render::PixelPolyline;

namespace cmd {
struct SelectObject {
  int x = 0;
  int y = 0;
  bool operator==(const SelectObject&) const = default;
};
struct AnnotateVr {
  PixelPolyline polyline_px;
  bool operator==(const AnnotateVr&) const = default;
};
struct AnnotateSpec {
  PixelPolyline polyline_px;
  bool operator==(const AnnotateSpec&) const = default;
};
struct AnnotateWindowed {
  std::vector<PixelPolyline> strokes_px;
  int stroke_px = 3;
  bool operator==(const AnnotateWindowed&) const = default;
};
struct PlaceTarget {
  int x = 0;
  int y = 0;
  bool operator==(const PlaceTarget&) const = default;
};
struct RemoveWindowed {
  bool operator==(const RemoveWindowed&) const = default;
};
struct RemoveAllAnnotations {
  bool operator==(const RemoveAllAnnotations&) const = default;
};
struct RemoveTargets {
  bool operator==(const RemoveTargets&) const = default;
};
struct SwitchCamera {
  rig::RigMode mode = rig::RigMode::kFree;
  bool operator==(const SwitchCamera&) const = default;
};
struct SetArm {
  double value = 0.0;
  bool operator==(const SetArm&) const = default;
};
struct FreeCamInput {
  rig::FreeCamInput input;
  bool operator==(const FreeCamInput& o) const {
    const auto& a = input;
    const auto& b = o.input;
    return a.forward == b.forward && a.right == b.right && a.up == b.up &&
           a.yaw_delta == b.yaw_delta && a.pitch_delta == b.pitch_delta && a.dt == b.dt;
  }
};
struct RelayChat {
  std::uint64_t msg_id = 0;
  bool operator==(const RelayChat&) const = default;
};
struct SendPrivateText {
  std::string text;
  bool operator==(const SendPrivateText&) const = default;
};
struct SetOnAir {
  bool on_air = false;
  bool operator==(const SetOnAir&) const = default;
};
}  // namespace cmd

using Command =
    std::variant<cmd::SelectObject, cmd::AnnotateVr, cmd::AnnotateSpec, cmd::AnnotateWindowed,
                 cmd::PlaceTarget, cmd::RemoveWindowed, cmd::RemoveAllAnnotations,
                 cmd::RemoveTargets, cmd::SwitchCamera, cmd::SetArm, cmd::FreeCamInput,
                 cmd::RelayChat, cmd::SendPrivateText, cmd::SetOnAir>;

inline std::string_view command_name(const Command& c) {
  static constexpr std::string_view kNames[] = {
      "select_object",     "annotate_vr",     "annotate_spec",          "annotate_windowed",
      "place_target",      "remove_windowed", "remove_all_annotations", "remove_targets",
      "switch_camera",     "set_arm",         "free_cam_input",         "relay_chat",
      "send_private_text", "set_on_air"};
  static_assert(std::size(kNames) == std::variant_size_v<Command>);
  return kNames[c.index()];
}

namespace detail {

inline const nlohmann::json& param(const nlohmann::json& p, const char* key) {
  const auto it = p.find(key);
  if (it == p.end()) fail(ErrorKind::kValidation, std::string("missing '") + key + "'", key);
  return *it;
}

inline int int_param(const nlohmann::json& p, const char* key) {
  const auto& v = param(p, key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < INT32_MIN ||
      v.get<std::int64_t>() > INT32_MAX) {
    fail(ErrorKind::kValidation, std::string("'") + key + "' must be an integer", key);
  }
  return v.get<int>();
}

inline double number_param(const nlohmann::json& p, const char* key, double fallback,
                           bool required = false) {
  const auto it = p.find(key);
  if (it == p.end()) {
    if (required) fail(ErrorKind::kValidation, std::string("missing '") + key + "'", key);
    return fallback;
  }
  if (!it->is_number()) {
    fail(ErrorKind::kValidation, std::string("'") + key + "' must be a number", key);
  }
  const double v = it->get<double>();
  if (!std::isfinite(v)) {
    fail(ErrorKind::kValidation, std::string("'") + key + "' must be finite", key);
  }
  return v;
}

inline PixelPolyline polyline(const nlohmann::json& v, const char* key) {
  if (!v.is_array()) fail(ErrorKind::kValidation, std::string("'") + key + "' must be a list", key);
  PixelPolyline out;
  for (const auto& pt : v) {
    if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number_integer() ||
        !pt[1].is_number_integer()) {
      fail(ErrorKind::kValidation, std::string("'") + key + "' points must be [x, y] integers",
           key);
    }
    out.push_back({pt[0].get<int>(), pt[1].get<int>()});
  }
  return out;
}

inline nlohmann::json polyline_json(const PixelPolyline& line) {
  nlohmann::json arr = nlohmann::json::array();
  for (const PixelPoint& p : line) arr.push_back({p.x, p.y});
  return arr;
}

}  // namespace detail

// Decodes the `cmd` name plus `params` object of a command request. Errors
// are validation errors whose field names the offending parameter.
inline Command parse_command(std::string_view name, const nlohmann::json& params) {
  static const nlohmann::json kEmpty = nlohmann::json::object();
  const nlohmann::json& p = params.is_null() ? kEmpty : params;
  if (!p.is_object()) fail(ErrorKind::kValidation, "params must be an object", "params");
  using namespace detail;
  if (name == "select_object") return cmd::SelectObject{int_param(p, "x"), int_param(p, "y")};
  if (name == "place_target") return cmd::PlaceTarget{int_param(p, "x"), int_param(p, "y")};
  if (name == "annotate_vr")
    return cmd::AnnotateVr{polyline(param(p, "polyline_px"), "polyline_px")};
  if (name == "annotate_spec") {
    return cmd::AnnotateSpec{polyline(param(p, "polyline_px"), "polyline_px")};
  }
  if (name == "annotate_windowed") {
    const auto& s = param(p, "strokes_px");
    if (!s.is_array()) fail(ErrorKind::kValidation, "'strokes_px' must be a list", "strokes_px");
    cmd::AnnotateWindowed c;
    for (const auto& line : s) c.strokes_px.push_back(polyline(line, "strokes_px"));
    if (p.contains("stroke_px")) c.stroke_px = int_param(p, "stroke_px");
    if (c.stroke_px < 1 || c.stroke_px > 64) {
      fail(ErrorKind::kValidation, "'stroke_px' must be in [1, 64]", "stroke_px");
    }
    return c;
  }
  if (name == "remove_windowed") return cmd::RemoveWindowed{};
  if (name == "remove_all_annotations") return cmd::RemoveAllAnnotations{};
  if (name == "remove_targets") return cmd::RemoveTargets{};
  if (name == "switch_camera") {
    const auto& m = param(p, "mode");
    const auto mode = m.is_string() ? rig::parse_rig_mode(m.get<std::string>()) : std::nullopt;
    if (!mode) fail(ErrorKind::kValidation, "unknown camera mode", "mode");
    return cmd::SwitchCamera{*mode};
  }
  if (name == "set_arm") return cmd::SetArm{number_param(p, "value", 0.0, true)};
  if (name == "free_cam_input") {
    rig::FreeCamInput in;
    in.forward = number_param(p, "forward", 0.0);
    in.right = number_param(p, "right", 0.0);
    in.up = number_param(p, "up", 0.0);
    in.yaw_delta = number_param(p, "yaw_delta", 0.0);
    in.pitch_delta = number_param(p, "pitch_delta", 0.0);
    in.dt = number_param(p, "dt", 0.0, true);
    for (const auto& [key, v] :
         {std::pair{"forward", in.forward}, std::pair{"right", in.right}, std::pair{"up", in.up}}) {
      if (v < -1.0 || v > 1.0) {
        fail(ErrorKind::kValidation, std::string("'") + key + "' must be in [-1, 1]", key);
      }
    }
    if (!(in.dt > 0.0 && in.dt <= 1.0)) {
      fail(ErrorKind::kValidation, "'dt' must be in (0, 1]", "dt");
    }
    return cmd::FreeCamInput{in};
  }
  if (name == "relay_chat") {
    const auto& v = param(p, "msg_id");
    if (!v.is_number_integer() || v.get<std::int64_t>() < 1) {
      fail(ErrorKind::kValidation, "'msg_id' must be a positive integer", "msg_id");
    }
    return cmd::RelayChat{v.get<std::uint64_t>()};
  }
  if (name == "send_private_text") {
    const auto& v = param(p, "text");
    if (!v.is_string()) fail(ErrorKind::kValidation, "'text' must be a string", "text");
    return cmd::SendPrivateText{v.get<std::string>()};
  }
  if (name == "set_on_air") {
    const auto& v = param(p, "on_air");
    if (!v.is_boolean()) fail(ErrorKind::kValidation, "'on_air' must be a boolean", "on_air");
    return cmd::SetOnAir{v.get<bool>()};
  }
  fail(ErrorKind::kValidation, "unknown command '" + std::string(name) + "'", "cmd");
}

inline nlohmann::json command_params(const Command& c) {
  return std::visit(
      [](const auto& b) -> nlohmann::json {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, cmd::SelectObject> || std::is_same_v<T, cmd::PlaceTarget>) {
          return {{"x", b.x}, {"y", b.y}};
        } else if constexpr (std::is_same_v<T, cmd::AnnotateVr> ||
                             std::is_same_v<T, cmd::AnnotateSpec>) {
          return {{"polyline_px", detail::polyline_json(b.polyline_px)}};
        } else if constexpr (std::is_same_v<T, cmd::AnnotateWindowed>) {
          nlohmann::json strokes = nlohmann::json::array();
          for (const auto& line : b.strokes_px) strokes.push_back(detail::polyline_json(line));
          return {{"strokes_px", strokes}, {"stroke_px", b.stroke_px}};
        } else if constexpr (std::is_same_v<T, cmd::SwitchCamera>) {
          return {{"mode", rig::to_string(b.mode)}};
        } else if constexpr (std::is_same_v<T, cmd::SetArm>) {
          return {{"value", b.value}};
        } else if constexpr (std::is_same_v<T, cmd::FreeCamInput>) {
          const auto& in = b.input;
          return {{"forward", in.forward},
                  {"right", in.right},
                  {"up", in.up},
                  {"yaw_delta", in.yaw_delta},
                  {"pitch_delta", in.pitch_delta},
                  {"dt", in.dt}};
        } else if constexpr (std::is_same_v<T, cmd::RelayChat>) {
          return {{"msg_id", b.msg_id}};
        } else if constexpr (std::is_same_v<T, cmd::SendPrivateText>) {
          return {{"text", b.text}};
        } else if constexpr (std::is_same_v<T, cmd::SetOnAir>) {
          return {{"on_air", b.on_air}};
        } else {
          return nlohmann::json::object();
        }
      },
      c);
}

}  // namespace funnel::session

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
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "funnel/error.hpp"
#include "funnel/geom/vec.hpp"
#include "funnel/scene/scene.hpp"

namespace funnel::scene {

struct AvatarState {
  Pose head;
  Pose left_hand;
  Pose right_hand;
  double t = 0.0;  // seconds since session start

  bool operator==(const AvatarState&) const = default;
};

// Avatar standing at `spawn` with hands in front of the hips.
inline AvatarState avatar_at(const Pose& spawn) {
  AvatarState a;
  a.head = {spawn.position + Vec3{0.0, 1.6, 0.0}, spawn.orientation};
  a.left_hand = {spawn.position + spawn.orientation.rotate({-0.25, 1.0, -0.3}), spawn.orientation};
  a.right_hand = {spawn.position + spawn.orientation.rotate({0.25, 1.0, -0.3}), spawn.orientation};
  return a;
}

enum class Hand { kLeft, kRight };

struct SetAvatar {
  AvatarState state;
  bool operator==(const SetAvatar&) const = default;
};
struct GrabMainCamera {
  Hand hand = Hand::kRight;
  bool operator==(const GrabMainCamera&) const = default;
};
struct MoveGrabbedCamera {
  Pose hand;
  bool operator==(const MoveGrabbedCamera&) const = default;
};
struct ReleaseMainCamera {
  bool operator==(const ReleaseMainCamera&) const = default;
};
struct Speak {
  std::string text;
  double duration = 0.0;
  bool operator==(const Speak&) const = default;
};
struct TouchObject {
  std::string object_id;
  bool operator==(const TouchObject&) const = default;
};

using EventBody = std::variant<SetAvatar, GrabMainCamera, MoveGrabbedCamera, ReleaseMainCamera,
                               Speak, TouchObject>;

struct ScenarioEvent {
  double t = 0.0;
  EventBody body;
  bool operator==(const ScenarioEvent&) const = default;
};

// Timestamped VR-user behaviour. Events are sorted by time and camera grabs
// strictly alternate Grab, Release, Grab, ... with moves only while held.
class ScenarioScript {
 public:
  ScenarioScript() = default;

  explicit ScenarioScript(std::vector<ScenarioEvent> events) : events_(std::move(events)) {
    bool held = false;
    for (std::size_t i = 0; i < events_.size(); ++i) {
      const ScenarioEvent& e = events_[i];
      const std::string where = "event " + std::to_string(i);
      if (!(e.t >= 0.0)) fail(ErrorKind::kValidation, where + ": negative time", "t");
      if (i > 0 && e.t < events_[i - 1].t) {
        fail(ErrorKind::kValidation, where + ": events out of time order", "t");
      }
      if (std::holds_alternative<GrabMainCamera>(e.body)) {
        if (held) fail(ErrorKind::kValidation, where + ": grab while already grabbed", "type");
        held = true;
      } else if (std::holds_alternative<ReleaseMainCamera>(e.body)) {
        if (!held) fail(ErrorKind::kValidation, where + ": release without grab", "type");
        held = false;
      } else if (std::holds_alternative<MoveGrabbedCamera>(e.body)) {
        if (!held) fail(ErrorKind::kValidation, where + ": move without grab", "type");
      }
      if (const auto* s = std::get_if<SetAvatar>(&e.body)) {
        keyframes_.push_back(s->state);
        keyframes_.back().t = e.t;
      }
    }
  }

  const std::vector<ScenarioEvent>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  double end_time() const { return events_.empty() ? 0.0 : events_.back().t; }

  // Interpolated avatar at time t: linear positions, slerped orientations,
  // clamped to the first/last keyframe. A query exactly at a keyframe time
  // returns that keyframe unchanged.
  AvatarState avatar_at_time(double t, const AvatarState& fallback) const {
    AvatarState out;
    if (keyframes_.empty()) {
      out = fallback;
    } else if (t <= keyframes_.front().t) {
      out = keyframes_.front();
    } else if (t >= keyframes_.back().t) {
      out = keyframes_.back();
    } else {
      // First keyframe with time >= t.
      const auto hi = std::lower_bound(keyframes_.begin(), keyframes_.end(), t,
                                       [](const AvatarState& k, double v) { return k.t < v; });
      if (hi->t == t) {
        out = *hi;
      } else {
        const auto lo = hi - 1;
        const double alpha = (t - lo->t) / (hi->t - lo->t);
        out.head = interpolate(lo->head, hi->head, alpha);
        out.left_hand = interpolate(lo->left_hand, hi->left_hand, alpha);
        out.right_hand = interpolate(lo->right_hand, hi->right_hand, alpha);
      }
    }
    out.t = t;
    return out;
  }

 private:
  static Pose interpolate(const Pose& a, const Pose& b, double alpha) {
    return {geom::lerp(a.position, b.position, alpha),
            geom::slerp(a.orientation, b.orientation, alpha)};
  }

  std::vector<ScenarioEvent> events_;
  std::vector<AvatarState> keyframes_;
};

struct AdvanceResult {
  AvatarState avatar;
  std::vector<ScenarioEvent> events;
};

// Events with from_t < t <= to_t, in script order. The window starting at 0
// also includes events stamped exactly 0, so consecutive windows
// [0, t1], (t1, t2], ... partition the script.
inline AdvanceResult advance(const ScenarioScript& script, double from_t, double to_t,
                             const AvatarState& fallback = {}) {
  if (!(from_t <= to_t)) {
    fail(ErrorKind::kInputDomain, "advance window must have from_t <= to_t", "from_t");
  }
  AdvanceResult r;
  r.avatar = script.avatar_at_time(to_t, fallback);
  for (const ScenarioEvent& e : script.events()) {
    const bool after_start = from_t == 0.0 ? e.t >= 0.0 : e.t > from_t;
    if (after_start && e.t <= to_t) r.events.push_back(e);
  }
  return r;
}

// Single-owner playback cursor; each event is emitted once.
class Playback {
 public:
  Playback(const ScenarioScript& script, AvatarState initial)
      : script_(&script), initial_(initial) {}

  AdvanceResult advance_to(double to_t) {
    if (to_t < now_) fail(ErrorKind::kInputDomain, "playback cannot go backwards", "to_t");
    AdvanceResult r;
    r.avatar = script_->avatar_at_time(to_t, initial_);
    const auto& ev = script_->events();
    while (next_ < ev.size() && ev[next_].t <= to_t) r.events.push_back(ev[next_++]);
    now_ = to_t;
    return r;
  }

  double now() const { return now_; }
  bool finished() const { return next_ >= script_->size(); }

 private:
  const ScenarioScript* script_;
  AvatarState initial_;
  std::size_t next_ = 0;
  double now_ = 0.0;
};

namespace detail {

inline std::string hand_name(Hand h) { return h == Hand::kLeft ? "left" : "right"; }

inline AvatarState avatar_from_json(const nlohmann::json& j) {
  AvatarState a;
  a.head = pose_from_json(j.at("head"));
  a.left_hand = pose_from_json(j.at("left_hand"));
  a.right_hand = pose_from_json(j.at("right_hand"));
  return a;
}

}  // namespace detail

inline ScenarioEvent parse_event(const nlohmann::json& j) {
  ScenarioEvent e;
  e.t = j.at("t").get<double>();
  const std::string type = j.at("type").get<std::string>();
  if (type == "set_avatar") {
    e.body = SetAvatar{detail::avatar_from_json(j)};
  } else if (type == "grab_main_camera") {
    const std::string hand = j.value("hand", std::string("right"));
    if (hand != "left" && hand != "right") {
      fail(ErrorKind::kFormat, "hand must be left or right", "hand");
    }
    e.body = GrabMainCamera{hand == "left" ? Hand::kLeft : Hand::kRight};
  } else if (type == "move_grabbed_camera") {
    e.body = MoveGrabbedCamera{pose_from_json(j.at("hand"))};
  } else if (type == "release_main_camera") {
    e.body = ReleaseMainCamera{};
  } else if (type == "speak") {
    e.body = Speak{j.at("text").get<std::string>(), j.value("duration", 0.0)};
  } else if (type == "touch_object") {
    e.body = TouchObject{j.at("object_id").get<std::string>()};
  } else {
    fail(ErrorKind::kFormat, "unknown event type '" + type + "'", "type");
  }
  return e;
}

inline nlohmann::json event_to_json(const ScenarioEvent& e) {
  nlohmann::json j{{"t", e.t}};
  std::visit(
      [&](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, SetAvatar>) {
          j["type"] = "set_avatar";
          j["head"] = pose_to_json(b.state.head);
          j["left_hand"] = pose_to_json(b.state.left_hand);
          j["right_hand"] = pose_to_json(b.state.right_hand);
        } else if constexpr (std::is_same_v<T, GrabMainCamera>) {
          j["type"] = "grab_main_camera";
          j["hand"] = detail::hand_name(b.hand);
        } else if constexpr (std::is_same_v<T, MoveGrabbedCamera>) {
          j["type"] = "move_grabbed_camera";
          j["hand"] = pose_to_json(b.hand);
        } else if constexpr (std::is_same_v<T, ReleaseMainCamera>) {
          j["type"] = "release_main_camera";
        } else if constexpr (std::is_same_v<T, Speak>) {
          j["type"] = "speak";
          j["text"] = b.text;
          j["duration"] = b.duration;
        } else {
          j["type"] = "touch_object";
          j["object_id"] = b.object_id;
        }
      },
      e.body);
  return j;
}

// JSON lines, one event per line; blank lines are skipped.
inline ScenarioScript parse_scenario(std::istream& in) {
  std::vector<ScenarioEvent> events;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      events.push_back(parse_event(nlohmann::json::parse(line)));
    } catch (const Error& e) {
      fail(e.kind(), "line " + std::to_string(lineno) + ": " + e.what(), e.field());
    } catch (const std::exception& e) {
      fail(ErrorKind::kFormat, "line " + std::to_string(lineno) + ": " + e.what(),
           "line " + std::to_string(lineno));
    }
  }
  return ScenarioScript(std::move(events));
}

inline ScenarioScript load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    fail(ErrorKind::kNotFound, "cannot open scenario file " + path.string(), path.string());
  }
  return parse_scenario(in);
}

}  // namespace funnel::scene

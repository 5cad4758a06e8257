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
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "funnel/error.hpp"
#include "funnel/geom/bvh.hpp"
#include "funnel/geom/camera.hpp"
#include "funnel/hash.hpp"
#include "funnel/render/composite.hpp"
#include "funnel/render/rasterizer.hpp"
#include "funnel/rig/camera_rig.hpp"
#include "funnel/scene/scenario.hpp"
#include "funnel/scene/scene.hpp"
#include "funnel/session/chat.hpp"
#include "funnel/session/commands.hpp"
#include "funnel/session/signaling.hpp"

namespace funnel::session {

using geom::Pose;
using geom::Vec3;
using render::Audience;
using render::Frame;
using rig::RigMode;

struct SessionConfig {
  int width = 640;
  int height = 360;
  double vertical_fov = std::numbers::pi / 3;
  double tick_hz = 30.0;
  double tablet_hz = 2.0;
  double free_speed = 1.5;      // m/s at full stick
  double fallback_depth = 5.0;  // annotation anchor distance on a miss
  int annotation_stroke_px = 4;
  std::string token_seed = "funnel";
  rig::RigConfig rig;
  bool render_tablet = true;  // replay can skip the 2 Hz snapshot renders

  geom::CameraIntrinsics intrinsics() const {
    return geom::CameraIntrinsics(vertical_fov, width, height);
  }
};

struct TabletItem {
  enum class Kind { kChat, kPrivateText, kWindowed };
  Kind kind = Kind::kChat;
  std::uint64_t msg_id = 0;  // kChat
  std::string text;          // kChat, kPrivateText
  std::string windowed_id;   // kWindowed

  bool operator==(const TabletItem&) const = default;
};

inline std::string_view to_string(TabletItem::Kind k) {
  switch (k) {
    case TabletItem::Kind::kChat:
      return "chat";
    case TabletItem::Kind::kPrivateText:
      return "private_text";
    case TabletItem::Kind::kWindowed:
      return "windowed";
  }
  return "chat";
}

struct WindowedAnnotation {
  std::string windowed_id;
  Frame image;
};

struct TabletState {
  Frame snapshot;  // spectator feed, refreshed at the tablet rate
  bool on_air = false;
  std::vector<TabletItem> history;          // append-only
  std::vector<std::string> shown_windowed;  // windowed annotations still on display
};

// Everything a frame producer needs, copied out of the session so rendering
// can run off the session thread.
struct RenderSnapshot {
  scene::AvatarState avatar;
  std::array<rig::CameraRig, 5> rigs;
  RigMode active = RigMode::kFree;
  render::OverlaySet overlays;
  std::int64_t pts_ms = 0;

  const rig::CameraRig& active_rig() const { return rigs[static_cast<std::size_t>(active)]; }
};

inline Frame render_view(const scene::Scene& scene, const RenderSnapshot& s,
                         const geom::CameraIntrinsics& intr, Audience audience) {
  const rig::CameraRig& r = s.active_rig();
  return render::render(scene, &s.avatar, r.pose, intr, s.overlays, audience, r.mode, s.pts_ms);
}

// The four preset feeds in RigMode order (first person, over shoulder, third
// follow, map view).
inline std::vector<Frame> render_thumbnails(const scene::Scene& scene, const RenderSnapshot& s,
                                            const geom::CameraIntrinsics& intr) {
  std::vector<Frame> out;
  for (RigMode m : rig::kAllModes) {
    if (m == RigMode::kFree) continue;
    out.push_back(render::render_thumbnail(scene, s.avatar, s.rigs[static_cast<std::size_t>(m)],
                                           intr, s.overlays, s.pts_ms));
  }
  return out;
}

struct CommandOutcome {
  bool ok = true;
  nlohmann::json result = nlohmann::json::object();
  ErrorKind error_kind = ErrorKind::kValidation;
  std::string error_message;
  std::string error_field;

  static CommandOutcome success(nlohmann::json result) {
    CommandOutcome o;
    o.result = std::move(result);
    return o;
  }
  // Accepted request that changed nothing (a miss, an unselectable object).
  static CommandOutcome rejected(std::string reason) {
    return success({{"applied", false}, {"reason", std::move(reason)}});
  }
  static CommandOutcome failure(const Error& e) {
    CommandOutcome o;
    o.ok = false;
    o.result = nullptr;
    o.error_kind = e.kind();
    o.error_message = e.what();
    o.error_field = e.field();
    return o;
  }

  nlohmann::json to_json() const {
    if (ok) return {{"ok", true}, {"result", result}};
    nlohmann::json err{{"kind", to_string(error_kind)}, {"message", error_message}};
    if (!error_field.empty()) err["field"] = error_field;
    return {{"ok", false}, {"error", err}};
  }
};

inline nlohmann::json vec_json(const geom::Vec3& v) { return {v.x, v.y, v.z}; }

// Single-writer session state: roles and signaling, the co-host command API,
// chat, the VR tablet and the camera rigs driven by scenario playback. Every
// input is appended to the command log with the tick it was applied at.
class Session {
 public:
  Session(std::shared_ptr<const scene::Scene> scene,
          std::shared_ptr<const scene::ScenarioScript> script, SessionConfig cfg = {})
      : scene_(std::move(scene)),
        script_(script ? std::move(script) : std::make_shared<const scene::ScenarioScript>()),
        cfg_(std::move(cfg)),
        intr_(cfg_.intrinsics()),
        index_(std::make_shared<const geom::SceneIndex>(scene::build_index(*scene_))),
        signaling_(cfg_.token_seed),
        initial_avatar_(scene::avatar_at(scene_->spawn())),
        playback_(*script_, initial_avatar_) {
    if (!(cfg_.tick_hz > 0.0) || !(cfg_.tablet_hz > 0.0)) {
      fail(ErrorKind::kValidation, "tick and tablet rates must be positive", "tick_hz");
    }
    avatar_ = script_->avatar_at_time(0.0, initial_avatar_);
    const Pose& spawn = scene_->spawn();
    const Pose free_start{spawn.position + Vec3{0.0, 1.7, 1.5}, spawn.orientation};
    for (RigMode m : rig::kAllModes) {
      rig::CameraRig r = rig::make_rig(m, cfg_.rig, free_start);
      if (m == RigMode::kFirstPerson) {
        r.pose = avatar_.head;
      } else if (rig::follows_avatar(m)) {
        r.pose = rig::target_pose(m, avatar_, r.arm_length, cfg_.rig);
      }
      rigs_[static_cast<std::size_t>(m)] = r;
    }
    refresh_tablet();
  }

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  std::uint64_t tick_index() const { return tick_; }
  double time_s() const { return static_cast<double>(tick_) / cfg_.tick_hz; }
  std::int64_t time_ms() const { return std::llround(time_s() * 1000.0); }

  // Advances one tick: scenario events (camera grabs included), rig motion,
  // and the tablet snapshot when its period has elapsed.
  void tick() {
    const double dt = 1.0 / cfg_.tick_hz;
    ++tick_;
    const double t = time_s();
    const scene::AdvanceResult r = playback_.advance_to(t);
    for (const scene::ScenarioEvent& e : r.events) apply_event(e);
    avatar_ = r.avatar;
    for (auto& rig : rigs_) rig = rig::update_rig(rig, avatar_, dt, cfg_.rig);
    const auto period = static_cast<std::uint64_t>(std::floor(t * cfg_.tablet_hz));
    if (period != tablet_period_) {
      tablet_period_ = period;
      refresh_tablet();
    }
  }

  void advance_to_tick(std::uint64_t n) {
    while (tick_ < n) tick();
  }

  std::vector<Outbound> handle_signal(const std::string& client_id, const SignalMessage& m) {
    std::vector<Outbound> out = signaling_.handle(client_id, m);
    nlohmann::json sent = nlohmann::json::array();
    for (const Outbound& o : out) sent.push_back({{"to", o.to}, {"msg", to_json(o.message)}});
    record({{"kind", "signal"}, {"client_id", client_id}, {"msg", to_json(m)}},
           {{"ok", true}, {"result", {{"sent", sent}}}});
    return out;
  }

  // Authenticated command entry point used by every transport.
  CommandOutcome command(const std::string& token, const std::string& name,
                         const nlohmann::json& params) {
    CommandOutcome out;
    try {
      const auto who = signaling_.authenticate(token);
      if (!who || who->second != Role::kCoHost) {
        fail(ErrorKind::kAuth, "token does not belong to the co-host", "token");
      }
      out = apply(parse_command(name, params));
    } catch (const Error& e) {
      out = CommandOutcome::failure(e);
    }
    record({{"kind", "command"}, {"token", token}, {"cmd", name}, {"params", params}},
           out.to_json());
    return out;
  }

  CommandOutcome command(const std::string& token, const Command& c) {
    return command(token, std::string(command_name(c)), command_params(c));
  }

  // Public chat. A token identifies the co-host; anyone else is a spectator
  // and is registered on first message.
  CommandOutcome chat(const std::string& client_id, const std::string& text,
                      const std::string& token = {}) {
    CommandOutcome out;
    try {
      out = CommandOutcome::success({{"msg_id", ingest_chat(client_id, text, token)}});
    } catch (const Error& e) {
      out = CommandOutcome::failure(e);
    }
    nlohmann::json entry{{"kind", "chat"}, {"client_id", client_id}, {"text", text}};
    if (!token.empty()) entry["token"] = token;
    record(std::move(entry), out.to_json());
    return out;
  }

  std::vector<AudioDest> route(const AudioPacket& pkt) const { return route_audio(on_air_, pkt); }

  const scene::Scene& scene() const { return *scene_; }
  const geom::SceneIndex& index() const { return *index_; }
  const SessionConfig& config() const { return cfg_; }
  const geom::CameraIntrinsics& intrinsics() const { return intr_; }
  const Signaling& signaling() const { return signaling_; }
  const ChatLedger& chat_ledger() const { return chat_; }
  const render::OverlaySet& overlays() const { return overlays_; }
  const scene::AvatarState& avatar() const { return avatar_; }
  RigMode active_mode() const { return active_; }
  const rig::CameraRig& rig(RigMode m) const { return rigs_[static_cast<std::size_t>(m)]; }
  const rig::CameraRig& active_rig() const { return rig(active_); }
  bool on_air() const { return on_air_; }
  const TabletState& tablet_view() const { return tablet_; }
  const std::set<std::string>& spectators() const { return spectators_; }
  const std::map<std::string, WindowedAnnotation>& windowed() const { return windowed_; }
  const std::vector<nlohmann::json>& log() const { return log_; }
  std::size_t grab_rejections() const { return grab_rejections_; }

  RenderSnapshot snapshot() const { return {avatar_, rigs_, active_, overlays_, time_ms()}; }

  Frame spectator_frame() const {
    return render_view(*scene_, snapshot(), intr_, Audience::kSpectatorOnly);
  }

  // Called with every log entry as it is recorded.
  void set_log_sink(std::function<void(const nlohmann::json&)> sink) { sink_ = std::move(sink); }

  // Canonical JSON of the replayable state. The tablet snapshot image is a
  // pure function of the rest and is left out.
  nlohmann::json state_json() const {
    nlohmann::json clients = nlohmann::json::object();
    for (const auto& [id, c] : signaling_.clients()) {
      clients[id] = {
          {"role", to_string(c.role)}, {"state", to_string(c.state)}, {"token", c.token}};
    }
    nlohmann::json chat = nlohmann::json::array();
    for (const ChatMessage& m : chat_.messages()) chat.push_back(to_json(m));
    nlohmann::json annotations = nlohmann::json::array();
    for (const auto& a : overlays_.annotations) {
      nlohmann::json pts = nlohmann::json::array();
      for (const auto& p : a.points) pts.push_back(vec_json(p));
      annotations.push_back({{"id", a.annotation_id},
                             {"audience", render::to_string(a.audience)},
                             {"points", pts},
                             {"stroke_px", a.stroke_px}});
    }
    nlohmann::json targets = nlohmann::json::array();
    for (const auto& t : overlays_.targets) {
      targets.push_back({{"id", t.target_id},
                         {"position", vec_json(t.position)},
                         {"normal", vec_json(t.normal)},
                         {"radius_m", t.radius_m}});
    }
    nlohmann::json rigs = nlohmann::json::array();
    for (const auto& r : rigs_) {
      rigs.push_back({{"mode", rig::to_string(r.mode)},
                      {"pose", scene::pose_to_json(r.pose)},
                      {"arm_length", r.arm_length},
                      {"grabbed_by_vr", r.grabbed_by_vr},
                      {"grab_offset", scene::pose_to_json(r.grab_offset)}});
    }
    nlohmann::json history = nlohmann::json::array();
    for (const TabletItem& item : tablet_.history) {
      history.push_back({{"kind", to_string(item.kind)},
                         {"msg_id", item.msg_id},
                         {"text", item.text},
                         {"windowed_id", item.windowed_id}});
    }
    nlohmann::json windowed = nlohmann::json::object();
    for (const auto& [id, w] : windowed_) windowed[id] = to_hex(sha256(w.image.pixels));
    return {
        {"tick", tick_},
        {"clients", clients},
        {"spectators", spectators_},
        {"chat", chat},
        {"overlays",
         {{"annotations", annotations}, {"targets", targets}, {"selection", overlays_.selection}}},
        {"rigs", rigs},
        {"active", rig::to_string(active_)},
        {"on_air", on_air_},
        {"tablet", {{"history", history}, {"shown_windowed", tablet_.shown_windowed}}},
        {"windowed", windowed},
        {"next_id", next_id_},
        {"grab_rejections", grab_rejections_}};
  }

  std::string digest() const { return to_hex(sha256(state_json().dump())); }

  // Applies an already-authorised command.
  CommandOutcome apply(const Command& c) {
    return std::visit([this](const auto& b) { return apply_one(b); }, c);
  }

 private:
  std::uint64_t ingest_chat(const std::string& client_id, const std::string& text,
                            const std::string& token) {
    Role role = Role::kSpectator;
    std::string sender = client_id;
    if (!token.empty()) {
      const auto who = signaling_.authenticate(token);
      if (!who) fail(ErrorKind::kAuth, "unknown session token", "token");
      role = who->second;
      sender = who->first;
    } else {
      if (client_id.empty() || client_id.size() > 128) {
        fail(ErrorKind::kValidation, "client_id must be 1..128 bytes", "client_id");
      }
      // A signaling client cannot chat anonymously under its own id.
      const auto& clients = signaling_.clients();
      const auto it = clients.find(client_id);
      if (it != clients.end() && it->second.state != ConnState::kClosed) {
        fail(ErrorKind::kAuth, "joined clients chat with their token", "token");
      }
    }
    const std::uint64_t id = chat_.ingest(sender, role, text, time_ms());
    if (role == Role::kSpectator) spectators_.insert(sender);
    return id;
  }

  void record(nlohmann::json entry, nlohmann::json outcome) {
    entry["tick"] = tick_;
    entry["outcome"] = std::move(outcome);
    if (sink_) sink_(entry);
    log_.push_back(std::move(entry));
  }

  void apply_event(const scene::ScenarioEvent& e) {
    rig::CameraRig& free = rigs_[static_cast<std::size_t>(RigMode::kFree)];
    if (const auto* g = std::get_if<scene::GrabMainCamera>(&e.body)) {
      const scene::AvatarState at = script_->avatar_at_time(e.t, initial_avatar_);
      const Pose& hand = g->hand == scene::Hand::kLeft ? at.left_hand : at.right_hand;
      rig::GrabResult res = rig::grab_main_camera(free, hand, cfg_.rig.grab_reach);
      if (res.accepted) {
        free = res.rig;
      } else {
        ++grab_rejections_;
      }
    } else if (const auto* m = std::get_if<scene::MoveGrabbedCamera>(&e.body)) {
      if (free.grabbed_by_vr) free = rig::move_grabbed(free, m->hand);
    } else if (std::holds_alternative<scene::ReleaseMainCamera>(e.body)) {
      if (free.grabbed_by_vr) free = rig::release(free);
    }
  }

  void refresh_tablet() {
    tablet_.on_air = on_air_;
    if (cfg_.render_tablet) tablet_.snapshot = spectator_frame();
  }

  std::string next_id(const char* prefix) { return prefix + std::to_string(++next_id_); }

  void check_pixel(int x, int y, const char* field) const {
    if (x < 0 || y < 0 || x >= intr_.width() || y >= intr_.height()) {
      fail(ErrorKind::kValidation,
           "pixel (" + std::to_string(x) + ", " + std::to_string(y) + ") is outside the " +
               std::to_string(intr_.width()) + "x" + std::to_string(intr_.height()) + " view",
           field);
    }
  }

  geom::Ray pixel_ray(int x, int y) const {
    return geom::unproject(x + 0.5, y + 0.5, active_rig().pose, intr_);
  }

  CommandOutcome annotate(const PixelPolyline& line, Audience audience) {
    if (line.size() < 2) {
      fail(ErrorKind::kValidation, "annotation needs at least two points", "polyline_px");
    }
    for (const PixelPoint& p : line) check_pixel(p.x, p.y, "polyline_px");
    render::Annotation a;
    a.audience = audience;
    a.stroke_px = cfg_.annotation_stroke_px;
    std::size_t misses = 0;
    for (const PixelPoint& p : line) {
      const geom::Ray ray = pixel_ray(p.x, p.y);
      if (const auto hit = index_->raycast(ray)) {
        a.points.push_back(hit->point);
      } else {
        ++misses;
        a.points.push_back(ray.at(cfg_.fallback_depth));
      }
    }
    a.annotation_id = next_id("ann-");
    a.validate();
    overlays_.annotations.push_back(a);
    return CommandOutcome::success({{"applied", true},
                                    {"annotation_id", a.annotation_id},
                                    {"points", a.points.size()},
                                    {"fallback_points", misses}});
  }

  CommandOutcome apply_one(const cmd::SelectObject& c) {
    check_pixel(c.x, c.y, "x");
    const auto hit = index_->raycast(pixel_ray(c.x, c.y));
    if (!hit) return CommandOutcome::rejected("miss");
    const scene::SceneObject* obj = scene_->find(hit->object_id);
    if (!obj || !obj->selectable) return CommandOutcome::rejected("not_selectable");
    const bool now_selected = !overlays_.selection.erase(hit->object_id);
    if (now_selected) overlays_.selection.insert(hit->object_id);
    return CommandOutcome::success(
        {{"applied", true}, {"object_id", hit->object_id}, {"selected", now_selected}});
  }

  CommandOutcome apply_one(const cmd::AnnotateVr& c) {
    return annotate(c.polyline_px, Audience::kVrOnly);
  }
  CommandOutcome apply_one(const cmd::AnnotateSpec& c) {
    return annotate(c.polyline_px, Audience::kSpectatorOnly);
  }

  CommandOutcome apply_one(const cmd::AnnotateWindowed& c) {
    Frame composed = render::composite_windowed(spectator_frame(), c.strokes_px, c.stroke_px);
    const std::string id = next_id("win-");
    windowed_[id] = {id, std::move(composed)};
    tablet_.shown_windowed.push_back(id);
    tablet_.history.push_back({TabletItem::Kind::kWindowed, 0, {}, id});
    return CommandOutcome::success({{"applied", true}, {"windowed_id", id}});
  }

  CommandOutcome apply_one(const cmd::PlaceTarget& c) {
    check_pixel(c.x, c.y, "x");
    const auto hit = index_->raycast(pixel_ray(c.x, c.y));
    if (!hit) return CommandOutcome::rejected("miss");
    render::Target t;
    t.target_id = next_id("tgt-");
    t.position = hit->point;
    t.normal = hit->normal;
    overlays_.targets.push_back(t);
    return CommandOutcome::success({{"applied", true},
                                    {"target_id", t.target_id},
                                    {"object_id", hit->object_id},
                                    {"position", vec_json(t.position)}});
  }

  CommandOutcome apply_one(const cmd::RemoveWindowed&) {
    const std::size_t n = tablet_.shown_windowed.size();
    tablet_.shown_windowed.clear();
    return CommandOutcome::success({{"applied", true}, {"removed", n}});
  }

  CommandOutcome apply_one(const cmd::RemoveAllAnnotations&) {
    const std::size_t n = overlays_.annotations.size() + tablet_.shown_windowed.size();
    overlays_.annotations.clear();
    tablet_.shown_windowed.clear();
    return CommandOutcome::success({{"applied", true}, {"removed", n}});
  }

  CommandOutcome apply_one(const cmd::RemoveTargets&) {
    const std::size_t n = overlays_.targets.size();
    overlays_.targets.clear();
    return CommandOutcome::success({{"applied", true}, {"removed", n}});
  }

  CommandOutcome apply_one(const cmd::SwitchCamera& c) {
    active_ = c.mode;
    refresh_tablet();
    return CommandOutcome::success({{"applied", true}, {"mode", rig::to_string(active_)}});
  }

  // One slider drives the boom of every follow rig.
  CommandOutcome apply_one(const cmd::SetArm& c) {
    double applied = 0.0;
    for (auto& r : rigs_) {
      r = rig::set_arm_length(r, c.value);
      applied = r.arm_length;
    }
    return CommandOutcome::success({{"applied", true}, {"arm_length", applied}});
  }

  CommandOutcome apply_one(const cmd::FreeCamInput& c) {
    rig::CameraRig& free = rigs_[static_cast<std::size_t>(RigMode::kFree)];
    if (free.grabbed_by_vr) return CommandOutcome::rejected("grabbed_by_vr");
    free = rig::apply_free_input(free, c.input, cfg_.free_speed, cfg_.rig.pitch_margin);
    return CommandOutcome::success({{"applied", true}, {"pose", scene::pose_to_json(free.pose)}});
  }

  CommandOutcome apply_one(const cmd::RelayChat& c) {
    const ChatMessage& m = chat_.mark_relayed(c.msg_id);
    tablet_.history.push_back({TabletItem::Kind::kChat, m.msg_id, m.text, {}});
    return CommandOutcome::success({{"applied", true}, {"msg_id", m.msg_id}});
  }

  CommandOutcome apply_one(const cmd::SendPrivateText& c) {
    const auto len = utf8_length(c.text);
    if (!len || *len == 0 || *len > kMaxChatChars) {
      fail(ErrorKind::kValidation, "text must be 1..500 UTF-8 characters", "text");
    }
    tablet_.history.push_back({TabletItem::Kind::kPrivateText, 0, c.text, {}});
    return CommandOutcome::success({{"applied", true}});
  }

  CommandOutcome apply_one(const cmd::SetOnAir& c) {
    on_air_ = c.on_air;
    tablet_.on_air = on_air_;
    return CommandOutcome::success({{"applied", true}, {"on_air", on_air_}});
  }

  std::shared_ptr<const scene::Scene> scene_;
  std::shared_ptr<const scene::ScenarioScript> script_;
  SessionConfig cfg_;
  geom::CameraIntrinsics intr_;
  std::shared_ptr<const geom::SceneIndex> index_;
  Signaling signaling_;
  ChatLedger chat_;
  render::OverlaySet overlays_;
  std::array<rig::CameraRig, 5> rigs_;
  RigMode active_ = RigMode::kFree;
  bool on_air_ = false;
  TabletState tablet_;
  std::map<std::string, WindowedAnnotation> windowed_;
  std::set<std::string> spectators_;
  scene::AvatarState initial_avatar_;
  scene::AvatarState avatar_;
  scene::Playback playback_;
  std::uint64_t tick_ = 0;
  std::uint64_t tablet_period_ = 0;
  std::uint64_t next_id_ = 0;
  std::size_t grab_rejections_ = 0;
  std::vector<nlohmann::json> log_;
  std::function<void(const nlohmann::json&)> sink_;
};

struct ReplayReport {
  std::string digest;
  std::size_t entries = 0;                 // log entries applied
  std::optional<std::size_t> halted_at;    // index of the first failed entry
  std::optional<std::size_t> diverged_at;  // first outcome differing from the recording
  nlohmann::json halt_error;
};

// Re-applies a command log to a fresh session. Stops at the first entry whose
// outcome is an error; the recorded outcomes are compared but never trusted.
// An {"kind":"end","tick":n} entry runs the clock forward to n.
inline ReplayReport replay(Session& s, std::istream& log) {
  ReplayReport rep;
  std::string line;
  std::size_t index = 0;
  while (std::getline(log, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json e;
    try {
      e = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& ex) {
      fail(ErrorKind::kFormat, "log entry " + std::to_string(index) + ": " + ex.what(), "log");
    }
    if (!e.is_object() || !e.contains("kind") || !e.contains("tick") ||
        !e["tick"].is_number_unsigned()) {
      fail(ErrorKind::kFormat, "log entry " + std::to_string(index) + " lacks kind/tick", "log");
    }
    const auto tick = e["tick"].get<std::uint64_t>();
    if (tick < s.tick_index()) {
      fail(ErrorKind::kFormat, "log entry " + std::to_string(index) + " goes back in time", "tick");
    }
    s.advance_to_tick(tick);
    const std::string kind = e["kind"].get<std::string>();
    nlohmann::json outcome;
    if (kind == "end") {
      ++index;
      continue;
    } else if (kind == "command") {
      outcome = s.command(e.value("token", ""), e.value("cmd", ""),
                          e.contains("params") ? e["params"] : nlohmann::json::object())
                    .to_json();
    } else if (kind == "chat") {
      outcome =
          s.chat(e.value("client_id", ""), e.value("text", ""), e.value("token", "")).to_json();
    } else if (kind == "signal") {
      s.handle_signal(e.value("client_id", ""), signal_from_json(e.at("msg")));
      outcome = s.log().back()["outcome"];
    } else {
      fail(ErrorKind::kFormat, "unknown log entry kind '" + kind + "'", "kind");
    }
    ++rep.entries;
    if (!rep.diverged_at && e.contains("outcome") && e["outcome"] != outcome) {
      rep.diverged_at = index;
    }
    if (!outcome.value("ok", false)) {
      rep.halted_at = index;
      rep.halt_error = outcome.value("error", nlohmann::json());
      break;
    }
    ++index;
  }
  rep.digest = s.digest();
  return rep;
}

// Index of the first failed entry in a recorded log, as seen live.
inline std::optional<std::size_t> first_recorded_failure(std::istream& log) {
  std::string line;
  std::size_t index = 0;
  while (std::getline(log, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto e = nlohmann::json::parse(line);
    if (e.contains("outcome") && !e["outcome"].value("ok", false)) return index;
    ++index;
  }
  return std::nullopt;
}

}  // namespace funnel::session

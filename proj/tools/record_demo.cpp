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

// Writes fixtures/demo_session.jsonl: a scripted co-host session over the
// demo config, in the same log format `funnel serve --command-log` produces.
//
//   record_demo fixtures/demo.toml fixtures/demo_session.jsonl

#include <cmath>
#include <fstream>
#include <iostream>

#include "funnel/server/config.hpp"
#include "funnel/server/server.hpp"

namespace {

using funnel::session::Role;
using nlohmann::json;
namespace msg = funnel::session::msg;

json line(std::initializer_list<std::pair<int, int>> pts) {
  json out = json::array();
  for (const auto& [x, y] : pts) out.push_back({x, y});
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: record_demo CONFIG OUT\n";
    return 2;
  }
  try {
    const auto cfg = funnel::server::load_config(argv[1], {});
    auto scene = std::make_shared<const funnel::scene::Scene>(
        funnel::scene::load_scene(cfg.resolve(cfg.server.scene)));
    auto script = std::make_shared<const funnel::scene::ScenarioScript>(
        funnel::scene::load_scenario(cfg.resolve(cfg.server.scenario)));
    auto scfg = cfg.session_config();
    scfg.render_tablet = false;
    funnel::session::Session s(scene, script, scfg);

    std::ofstream out(argv[2]);
    if (!out) {
      std::cerr << "record_demo: cannot write " << argv[2] << "\n";
      return 1;
    }
    s.set_log_sink([&](const json& e) { out << e.dump() << "\n"; });

    const auto at = [&](double t_s) {
      s.advance_to_tick(static_cast<std::uint64_t>(std::llround(t_s * cfg.render.tick_hz)));
    };
    s.handle_signal(funnel::server::kVrAgentId, msg::Join{Role::kVrHost, "vr-sim"});

    at(1.0);
    std::string token;
    for (const auto& o : s.handle_signal("cohost-1", msg::Join{Role::kCoHost, "cohost-1"})) {
      if (const auto* r = std::get_if<msg::RoleAssigned>(&o.message)) token = r->session_token;
    }
    s.handle_signal(funnel::server::kVrAgentId, msg::Offer{"vr-sim offer 1"});
    s.handle_signal("cohost-1", msg::Answer{"cohost answer"});
    s.handle_signal("cohost-1", msg::Candidate{"cohost candidate 1"});

    const auto cmd = [&](const char* name, json params) {
      s.command(token, name, std::move(params));
    };
    at(2.0);
    cmd("set_on_air", {{"on_air", true}});
    s.chat("viewer-7", "where is the key?");
    s.chat("viewer-12", "check the shelf");
    at(4.0);
    cmd("switch_camera", {{"mode", "third_follow"}});
    cmd("set_arm", {{"value", 3.5}});
    at(6.5);
    cmd("select_object", {{"x", 350}, {"y", 150}});
    cmd("annotate_vr", {{"polyline_px", line({{300, 120}, {360, 140}, {400, 200}})}});
    at(9.0);
    cmd("relay_chat", {{"msg_id", 1}});
    cmd("send_private_text", {{"text", "try the drawer on your left"}});
    at(12.0);
    cmd("switch_camera", {{"mode", "over_shoulder"}});
    cmd("annotate_spec", {{"polyline_px", line({{100, 100}, {540, 100}, {540, 260}})}});
    cmd("place_target", {{"x", 320}, {"y", 240}});
    at(15.0);
    cmd("annotate_windowed", {{"strokes_px", json::array({line({{200, 200}, {260, 230}}),
                                                          line({{420, 80}, {470, 90}})})},
                              {"stroke_px", 4}});
    s.chat("cohost-1", "nice find", token);
    at(20.0);
    cmd("switch_camera", {{"mode", "free"}});
    for (int i = 0; i < 30; ++i) {
      at(20.0 + i / cfg.render.tick_hz);
      cmd("free_cam_input", {{"forward", 0.6},
                             {"right", 0.1 * std::sin(i * 0.3)},
                             {"up", 0.0},
                             {"yaw_delta", 0.01},
                             {"pitch_delta", -0.004},
                             {"dt", 1.0 / 30.0}});
    }
    at(26.0);
    cmd("switch_camera", {{"mode", "map_view"}});
    cmd("remove_windowed", json::object());
    s.chat("viewer-3", "map view!");
    cmd("relay_chat", {{"msg_id", 4}});
    at(32.0);
    cmd("switch_camera", {{"mode", "first_person"}});
    cmd("set_arm", {{"value", 8.0}});
    at(40.0);
    cmd("remove_targets", json::object());
    cmd("remove_all_annotations", json::object());
    cmd("set_on_air", {{"on_air", false}});
    at(48.0);
    cmd("switch_camera", {{"mode", "third_follow"}});
    cmd("select_object", {{"x", 10}, {"y", 10}});
    s.handle_signal("cohost-1", msg::Bye{});

    at(60.0);
    out << json{{"kind", "end"}, {"tick", s.tick_index()}}.dump() << "\n";
    for (const auto& e : s.log()) {
      if (!e["outcome"].value("ok", false)) {
        std::cerr << "record_demo: entry failed: " << e.dump() << "\n";
        return 1;
      }
    }
    std::cout << json{{"digest", s.digest()}, {"entries", s.log().size()}, {"tick", s.tick_index()}}
                     .dump()
              << "\n";
  } catch (const funnel::Error& e) {
    std::cerr << "record_demo: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

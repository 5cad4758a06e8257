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

#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <toml.hpp>
#include <unistd.h>

#include "funnel/error.hpp"
#include "funnel/fanout/segmenter.hpp"
#include "funnel/session/session.hpp"

namespace funnel::server {

struct Config {
  struct Server {
    std::string listen = "127.0.0.1:8640";
    std::string scene;
    std::string scenario;
    std::string token_seed = "funnel";
    std::string chat_ledger = "chat_ledger.jsonl";
    std::string command_log;
    std::int64_t io_threads = 2;
  } server;
  struct Render {
    std::int64_t width = 640;
    std::int64_t height = 360;
    double vertical_fov_deg = 60.0;
    double tick_hz = 30.0;
    double thumbnail_hz = 1.0;
    double tablet_hz = 2.0;
  } render;
  struct Session {
    double free_speed = 1.5;
    double fallback_depth = 5.0;
    std::int64_t annotation_stroke_px = 4;
  } session;
  rig::RigConfig rig;
  struct Fanout {
    double segment_duration_s = 2.0;
    std::int64_t window = 10;
    std::int64_t live_edge_offset = 10;
    bool deflate = true;
    std::int64_t deflate_level = 1;
    std::vector<fanout::LadderRung> rungs = fanout::default_ladder();
  } fanout;

  // Directory relative paths resolve against; not part of the document.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& p) const {
    if (p.empty()) return {};
    const std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  }

  session::SessionConfig session_config() const {
    session::SessionConfig c;
    c.width = static_cast<int>(render.width);
    c.height = static_cast<int>(render.height);
    c.vertical_fov = render.vertical_fov_deg * std::numbers::pi / 180.0;
    c.tick_hz = render.tick_hz;
    c.tablet_hz = render.tablet_hz;
    c.free_speed = session.free_speed;
    c.fallback_depth = session.fallback_depth;
    c.annotation_stroke_px = static_cast<int>(session.annotation_stroke_px);
    c.token_seed = server.token_seed;
    c.rig = rig;
    return c;
  }

  fanout::SegmenterConfig segmenter_config() const {
    fanout::SegmenterConfig c;
    c.segment_duration_ms = std::llround(fanout.segment_duration_s * 1000.0);
    c.nominal_fps = render.tick_hz;
    c.rungs = fanout.rungs;
    c.deflate = fanout.deflate;
    c.deflate_level = static_cast<int>(fanout.deflate_level);
    return c;
  }

  std::pair<std::string, std::uint16_t> listen_endpoint() const;

  bool operator==(const Config& o) const;
};

namespace detail {

using Value = std::variant<std::string, std::int64_t, double, bool>;

enum class Check { kNone, kPositive, kNonNegative };

struct Field {
  std::string section;
  std::string key;
  std::function<Value(const Config&)> get;
  std::function<void(Config&, const Value&)> set;
  Check check = Check::kNone;

  std::string name() const { return section + "." + key; }
  std::string env_name() const {
    std::string s = "SFNL_" + section + "_" + key;
    for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
  }
};

template <typename S, typename T>
Field field(std::string section, std::string key, S Config::*sec, T S::*member,
            Check check = Check::kPositive) {
  Field f;
  f.section = std::move(section);
  f.key = std::move(key);
  f.get = [sec, member](const Config& c) -> Value { return (c.*sec).*member; };
  f.set = [sec, member](Config& c, const Value& v) { (c.*sec).*member = std::get<T>(v); };
  f.check = std::is_same_v<T, std::string> || std::is_same_v<T, bool> ? Check::kNone : check;
  return f;
}

inline const std::vector<Field>& fields() {
  using C = Config;
  static const std::vector<Field> kFields = [] {
    std::vector<Field> f;
    f.push_back(field("server", "listen", &C::server, &C::Server::listen));
    f.push_back(field("server", "scene", &C::server, &C::Server::scene));
    f.push_back(field("server", "scenario", &C::server, &C::Server::scenario));
    f.push_back(field("server", "token_seed", &C::server, &C::Server::token_seed));
    f.push_back(field("server", "chat_ledger", &C::server, &C::Server::chat_ledger));
    f.push_back(field("server", "command_log", &C::server, &C::Server::command_log));
    f.push_back(field("server", "io_threads", &C::server, &C::Server::io_threads));
    f.push_back(field("render", "width", &C::render, &C::Render::width));
    f.push_back(field("render", "height", &C::render, &C::Render::height));
    f.push_back(field("render", "vertical_fov_deg", &C::render, &C::Render::vertical_fov_deg));
    f.push_back(field("render", "tick_hz", &C::render, &C::Render::tick_hz));
    f.push_back(field("render", "thumbnail_hz", &C::render, &C::Render::thumbnail_hz));
    f.push_back(field("render", "tablet_hz", &C::render, &C::Render::tablet_hz));
    f.push_back(field("session", "free_speed", &C::session, &C::Session::free_speed));
    f.push_back(field("session", "fallback_depth", &C::session, &C::Session::fallback_depth));
    f.push_back(
        field("session", "annotation_stroke_px", &C::session, &C::Session::annotation_stroke_px));
    f.push_back(field("rig", "arm_min", &C::rig, &rig::RigConfig::arm_min));
    f.push_back(field("rig", "arm_max", &C::rig, &rig::RigConfig::arm_max));
    f.push_back(field("rig", "default_arm", &C::rig, &rig::RigConfig::default_arm));
    // Zero means the follow rigs snap to their targets.
    f.push_back(field("rig", "smoothing_tau", &C::rig, &rig::RigConfig::smoothing_tau,
                      Check::kNonNegative));
    f.push_back(field("rig", "shoulder_right", &C::rig, &rig::RigConfig::shoulder_right));
    f.push_back(field("rig", "shoulder_up", &C::rig, &rig::RigConfig::shoulder_up));
    f.push_back(field("rig", "follow_elevation", &C::rig, &rig::RigConfig::follow_elevation));
    f.push_back(field("rig", "grab_reach", &C::rig, &rig::RigConfig::grab_reach));
    f.push_back(field("rig", "pitch_margin", &C::rig, &rig::RigConfig::pitch_margin));
    f.push_back(field("fanout", "segment_duration_s", &C::fanout, &C::Fanout::segment_duration_s));
    f.push_back(field("fanout", "window", &C::fanout, &C::Fanout::window));
    f.push_back(field("fanout", "live_edge_offset", &C::fanout, &C::Fanout::live_edge_offset));
    f.push_back(field("fanout", "deflate", &C::fanout, &C::Fanout::deflate));
    f.push_back(field("fanout", "deflate_level", &C::fanout, &C::Fanout::deflate_level));
    return f;
  }();
  return kFields;
}

[[noreturn]] inline void bad(const std::string& field, const std::string& why) {
  fail(ErrorKind::kValidation, "config " + field + ": " + why, field);
}

// Converts a TOML node to the variant alternative `like` holds.
inline Value from_node(const toml::node& n, const Value& like, const std::string& name) {
  if (std::holds_alternative<std::string>(like)) {
    if (auto v = n.value_exact<std::string>()) return *v;
    bad(name, "expected a string");
  }
  if (std::holds_alternative<bool>(like)) {
    if (auto v = n.value_exact<bool>()) return *v;
    bad(name, "expected a boolean");
  }
  if (std::holds_alternative<std::int64_t>(like)) {
    if (auto v = n.value_exact<std::int64_t>()) return *v;
    bad(name, "expected an integer");
  }
  if (n.is_integer()) return static_cast<double>(*n.value_exact<std::int64_t>());
  if (auto v = n.value_exact<double>()) return *v;
  bad(name, "expected a number");
}

inline Value from_text(const std::string& text, const Value& like, const std::string& name) {
  if (std::holds_alternative<std::string>(like)) return text;
  if (std::holds_alternative<bool>(like)) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    bad(name, "expected true or false, got '" + text + "'");
  }
  std::size_t used = 0;
  try {
    if (std::holds_alternative<std::int64_t>(like)) {
      const long long v = std::stoll(text, &used);
      if (used == text.size()) return static_cast<std::int64_t>(v);
    } else {
      const double v = std::stod(text, &used);
      if (used == text.size()) return v;
    }
  } catch (const std::exception&) {
  }
  bad(name, "cannot parse '" + text + "'");
}

inline fanout::LadderRung rung_from_table(const toml::table& t, std::size_t i) {
  const std::string name = "fanout.rungs[" + std::to_string(i) + "]";
  fanout::LadderRung r;
  for (const auto& [k, v] : t) {
    if (k == "name") {
      auto s = v.value_exact<std::string>();
      if (!s) bad(name + ".name", "expected a string");
      r.name = *s;
    } else if (k == "width" || k == "height") {
      auto n = v.value_exact<std::int64_t>();
      if (!n) bad(name + "." + std::string(k.str()), "expected an integer");
      (k == "width" ? r.width : r.height) = static_cast<int>(*n);
    } else {
      bad(name + "." + std::string(k.str()), "unknown key");
    }
  }
  return r;
}

// "full:640x360,half:320x180"
inline std::vector<fanout::LadderRung> rungs_from_text(const std::string& text) {
  std::vector<fanout::LadderRung> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    const auto x = item.find('x', colon == std::string::npos ? 0 : colon);
    if (colon == std::string::npos || x == std::string::npos) {
      bad("fanout.rungs", "expected name:WIDTHxHEIGHT, got '" + item + "'");
    }
    fanout::LadderRung r;
    r.name = item.substr(0, colon);
    r.width = static_cast<int>(std::get<std::int64_t>(
        from_text(item.substr(colon + 1, x - colon - 1), std::int64_t{0}, "fanout.rungs")));
    r.height = static_cast<int>(
        std::get<std::int64_t>(from_text(item.substr(x + 1), std::int64_t{0}, "fanout.rungs")));
    out.push_back(r);
  }
  return out;
}

}  // namespace detail

inline std::pair<std::string, std::uint16_t> Config::listen_endpoint() const {
  const auto colon = server.listen.rfind(':');
  if (colon == std::string::npos || colon == 0) {
    detail::bad("server.listen", "expected host:port, got '" + server.listen + "'");
  }
  const auto port = std::get<std::int64_t>(
      detail::from_text(server.listen.substr(colon + 1), std::int64_t{0}, "server.listen"));
  if (port < 0 || port > 65535) detail::bad("server.listen", "port out of range");
  return {server.listen.substr(0, colon), static_cast<std::uint16_t>(port)};
}

inline bool Config::operator==(const Config& o) const {
  for (const auto& f : detail::fields()) {
    if (f.get(*this) != f.get(o)) return false;
  }
  return fanout.rungs == o.fanout.rungs;
}

// Checks every field; throws a validation error naming the first bad one.
inline void validate(const Config& c) {
  for (const auto& f : detail::fields()) {
    const detail::Value v = f.get(c);
    double x = 0.0;
    if (const auto* i = std::get_if<std::int64_t>(&v)) x = static_cast<double>(*i);
    if (const auto* d = std::get_if<double>(&v)) x = *d;
    if (f.check == detail::Check::kPositive && !(x > 0.0))
      detail::bad(f.name(), "must be positive");
    if (f.check == detail::Check::kNonNegative && !(x >= 0.0)) {
      detail::bad(f.name(), "must not be negative");
    }
    if ((std::holds_alternative<double>(v)) && !std::isfinite(x)) {
      detail::bad(f.name(), "must be finite");
    }
  }
  if (c.render.width > 0xFFFF || c.render.height > 0xFFFF) {
    detail::bad("render.width", "does not fit a frame header");
  }
  if (!(c.render.vertical_fov_deg < 180.0)) detail::bad("render.vertical_fov_deg", "must be < 180");
  if (!(c.rig.arm_min < c.rig.arm_max)) detail::bad("rig.arm_min", "must be below rig.arm_max");
  if (c.rig.default_arm < c.rig.arm_min || c.rig.default_arm > c.rig.arm_max) {
    detail::bad("rig.default_arm", "must lie in [arm_min, arm_max]");
  }
  if (c.fanout.deflate_level > 9) detail::bad("fanout.deflate_level", "must be 1..9");
  if (c.fanout.live_edge_offset > c.fanout.window) {
    detail::bad("fanout.live_edge_offset", "must not exceed fanout.window");
  }
  if (c.fanout.rungs.empty()) detail::bad("fanout.rungs", "need at least one rung");
  for (std::size_t i = 0; i < c.fanout.rungs.size(); ++i) {
    const auto& r = c.fanout.rungs[i];
    const std::string name = "fanout.rungs[" + std::to_string(i) + "]";
    if (r.name.empty() || r.name.find_first_of("/?#:,") != std::string::npos) {
      detail::bad(name + ".name", "must be a non-empty path segment");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (c.fanout.rungs[j].name == r.name) detail::bad(name + ".name", "duplicate rung");
    }
    if (r.width <= 0 || r.height <= 0 || c.render.width % r.width != 0 ||
        c.render.height % r.height != 0) {
      detail::bad(name, "must divide the render resolution");
    }
  }
  c.listen_endpoint();
}

// Reads a TOML document over the defaults. Unknown sections or keys are
// errors; `env` (normally the process environment) overrides with SFNL_*.
inline Config parse_config(std::string_view toml_text,
                           const std::map<std::string, std::string>& env = {},
                           std::filesystem::path base_dir = {}) {
  Config c;
  c.base_dir = std::move(base_dir);
  toml::table doc;
  try {
    doc = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config syntax: " << e.description() << " at line " << e.source().begin.line;
    fail(ErrorKind::kFormat, msg.str(), "config");
  }
  const auto& fs = detail::fields();
  for (const auto& [sec_key, sec_node] : doc) {
    const std::string sec(sec_key.str());
    const toml::table* sec_table = sec_node.as_table();
    bool known = false;
    for (const auto& f : fs) known = known || f.section == sec;
    if (!known || !sec_table) detail::bad(sec, "unknown section");
    for (const auto& [key, node] : *sec_table) {
      const std::string k(key.str());
      if (sec == "fanout" && k == "rungs") {
        const toml::array* arr = node.as_array();
        if (!arr) detail::bad("fanout.rungs", "expected an array of tables");
        c.fanout.rungs.clear();
        for (std::size_t i = 0; i < arr->size(); ++i) {
          const toml::table* t = (*arr)[i].as_table();
          if (!t) detail::bad("fanout.rungs", "expected an array of tables");
          c.fanout.rungs.push_back(detail::rung_from_table(*t, i));
        }
        continue;
      }
      const detail::Field* match = nullptr;
      for (const auto& f : fs) {
        if (f.section == sec && f.key == k) match = &f;
      }
      if (!match) detail::bad(sec + "." + k, "unknown key");
      match->set(c, detail::from_node(node, match->get(c), match->name()));
    }
  }
  for (const auto& [name, text] : env) {
    if (name.rfind("SFNL_", 0) != 0) continue;
    if (name == "SFNL_FANOUT_RUNGS") {
      c.fanout.rungs = detail::rungs_from_text(text);
      continue;
    }
    const detail::Field* match = nullptr;
    for (const auto& f : fs) {
      if (f.env_name() == name) match = &f;
    }
    if (!match) detail::bad(name, "unknown environment override");
    match->set(c, detail::from_text(text, match->get(c), name));
  }
  validate(c);
  return c;
}

inline std::map<std::string, std::string> process_environment() {
  std::map<std::string, std::string> env;
  for (char** e = environ; e && *e; ++e) {
    const std::string kv(*e);
    const auto eq = kv.find('=');
    if (eq != std::string::npos && kv.rfind("SFNL_", 0) == 0)
      env[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return env;
}

inline Config load_config(const std::filesystem::path& path,
                          const std::map<std::string, std::string>& env) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kNotFound, "cannot open config " + path.string(), path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), env, path.parent_path());
}

inline std::string serialize_config(const Config& c) {
  toml::table doc;
  for (const auto& f : detail::fields()) {
    if (!doc.contains(f.section)) doc.insert(f.section, toml::table{});
    toml::table& sec = *doc[f.section].as_table();
    std::visit([&](const auto& v) { sec.insert_or_assign(f.key, v); }, f.get(c));
  }
  toml::array rungs;
  for (const auto& r : c.fanout.rungs) {
    rungs.push_back(toml::table{{"name", r.name}, {"width", r.width}, {"height", r.height}});
  }
  doc["fanout"].as_table()->insert_or_assign("rungs", std::move(rungs));
  std::ostringstream out;
  out << doc << "\n";
  return out.str();
}

}  // namespace funnel::server

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

#include <random>

#include <gtest/gtest.h>

#include "funnel/server/config.hpp"

namespace funnel::server {
namespace {

Error error_of(std::string_view text, const std::map<std::string, std::string>& env = {}) {
  try {
    parse_config(text, env);
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "accepted:\n" << text;
  return Error(ErrorKind::kHarness, "");
}

TEST(Config, EmptyDocumentGivesDefaults) {
  const Config c = parse_config("");
  EXPECT_EQ(c, Config{});
  EXPECT_EQ(c.render.tick_hz, 30.0);
  EXPECT_EQ(c.fanout.segment_duration_s, 2.0);
  EXPECT_EQ(c.fanout.window, 10);
  EXPECT_EQ(c.fanout.live_edge_offset, 10);
  ASSERT_EQ(c.fanout.rungs.size(), 2u);
  EXPECT_EQ(c.fanout.rungs[1], (fanout::LadderRung{"half", 320, 180}));
  EXPECT_EQ(c.rig.arm_min, 0.5);
  EXPECT_EQ(c.rig.arm_max, 20.0);
  EXPECT_EQ(c.segmenter_config().segment_duration_ms, 2000);
}

TEST(Config, DemoFixtureLoadsAndResolvesPaths) {
  const std::filesystem::path path = std::string(FUNNEL_FIXTURES) + "/demo.toml";
  const Config c = load_config(path, {});
  EXPECT_EQ(c.resolve(c.server.scene), path.parent_path() / "escape_room.scene.json");
  EXPECT_TRUE(std::filesystem::exists(c.resolve(c.server.scene)));
  EXPECT_TRUE(std::filesystem::exists(c.resolve(c.server.scenario)));
  EXPECT_EQ(c.listen_endpoint(), std::make_pair(std::string("127.0.0.1"), std::uint16_t{8640}));
}

TEST(Config, UnknownKeysAndSectionsAreRejected) {
  EXPECT_EQ(error_of("[render]\nwidht = 640\n").field(), "render.widht");
  EXPECT_EQ(error_of("[network]\nport = 1\n").field(), "network");
  EXPECT_EQ(error_of("tick_hz = 30\n").field(), "tick_hz");
  EXPECT_EQ(error_of("[fanout]\nrungs = [{name = \"a\", w = 1}]\n").field(), "fanout.rungs[0].w");
  EXPECT_EQ(error_of("", {{"SFNL_RENDER_FPS", "30"}}).field(), "SFNL_RENDER_FPS");
}

TEST(Config, NumericFieldsMustBePositive) {
  for (const auto& f : detail::fields()) {
    const auto v = f.get(Config{});
    if (std::holds_alternative<std::string>(v) || std::holds_alternative<bool>(v)) continue;
    const std::string doc = "[" + f.section + "]\n" + f.key + " = -1\n";
    const Error e = error_of(doc);
    EXPECT_EQ(e.kind(), ErrorKind::kValidation) << f.name();
    EXPECT_EQ(e.field(), f.name());
  }
  // smoothing_tau = 0 is the snap-to-target setting.
  EXPECT_EQ(parse_config("[rig]\nsmoothing_tau = 0.0\n").rig.smoothing_tau, 0.0);
  EXPECT_EQ(error_of("[render]\ntick_hz = 0\n").field(), "render.tick_hz");
}

TEST(Config, TypeMismatchNamesField) {
  EXPECT_EQ(error_of("[render]\nwidth = 640.5\n").field(), "render.width");
  EXPECT_EQ(error_of("[server]\nscene = 3\n").field(), "server.scene");
  EXPECT_EQ(error_of("[fanout]\ndeflate = \"yes\"\n").field(), "fanout.deflate");
  // Integers are accepted where a float is expected.
  EXPECT_EQ(parse_config("[render]\ntick_hz = 60\n").render.tick_hz, 60.0);
}

TEST(Config, CrossFieldChecks) {
  EXPECT_EQ(error_of("[rig]\narm_min = 5.0\narm_max = 4.0\n").field(), "rig.arm_min");
  EXPECT_EQ(error_of("[fanout]\nlive_edge_offset = 11\n").field(), "fanout.live_edge_offset");
  EXPECT_EQ(error_of("[fanout]\nrungs = [{name = \"odd\", width = 300, height = 180}]\n").field(),
            "fanout.rungs[0]");
  EXPECT_EQ(error_of("[fanout]\nrungs = []\n").field(), "fanout.rungs");
  EXPECT_EQ(error_of("[server]\nlisten = \"localhost\"\n").field(), "server.listen");
  EXPECT_EQ(error_of("[server]\nlisten = \"h:70000\"\n").field(), "server.listen");
  EXPECT_EQ(error_of("[render\n").kind(), ErrorKind::kFormat);
}

TEST(Config, EnvironmentOverridesEveryField) {
  const std::map<std::string, std::string> env = {
      {"SFNL_SERVER_LISTEN", "0.0.0.0:9000"},
      {"SFNL_RENDER_TICK_HZ", "24"},
      {"SFNL_FANOUT_WINDOW", "12"},
      {"SFNL_FANOUT_DEFLATE", "false"},
      {"SFNL_FANOUT_RUNGS", "full:640x360,quarter:160x90"},
      {"PATH", "/usr/bin"},
  };
  const Config c = parse_config("[render]\ntick_hz = 60.0\n", env);
  EXPECT_EQ(c.server.listen, "0.0.0.0:9000");
  EXPECT_EQ(c.render.tick_hz, 24.0);
  EXPECT_EQ(c.fanout.window, 12);
  EXPECT_FALSE(c.fanout.deflate);
  ASSERT_EQ(c.fanout.rungs.size(), 2u);
  EXPECT_EQ(c.fanout.rungs[1], (fanout::LadderRung{"quarter", 160, 90}));
  EXPECT_EQ(error_of("", {{"SFNL_FANOUT_WINDOW", "ten"}}).field(), "SFNL_FANOUT_WINDOW");
  for (const auto& f : detail::fields()) {
    EXPECT_EQ(f.env_name().rfind("SFNL_", 0), 0u);
  }
}

// Property: parse -> serialize -> parse is a fixed point, including for
// randomly perturbed configurations.
TEST(Config, RoundTripIsFixedPoint) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.01, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    Config c;
    c.server.scene = "scenes/x" + std::to_string(trial) + ".json";
    c.server.token_seed = "seed \"quoted\" \\ " + std::to_string(rng());
    c.render.vertical_fov_deg = 30.0 + u(rng) * 30.0;
    c.render.thumbnail_hz = u(rng);
    c.rig.smoothing_tau = trial % 3 == 0 ? 0.0 : u(rng) / 7.0;
    c.rig.shoulder_right = u(rng) * 1e-7;
    c.fanout.segment_duration_s = u(rng);
    c.fanout.deflate = trial % 2 == 0;
    c.fanout.window = 10 + trial % 5;
    const std::string text = serialize_config(c);
    const Config once = parse_config(text);
    EXPECT_EQ(once, c) << text;
    EXPECT_EQ(serialize_config(once), text);
  }
}

}  // namespace
}  // namespace funnel::server

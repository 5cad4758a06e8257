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

#include <map>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "funnel/session/session.hpp"
#include "test_oracles.hpp"

namespace funnel::session {
namespace {

using geom::UnitQuat;
using geom::Vec3;

// ---------------------------------------------------------------- signaling

std::string token_of(const std::vector<Outbound>& out) {
  EXPECT_EQ(out.size(), 1u);
  const auto* ra = std::get_if<msg::RoleAssigned>(&out.at(0).message);
  EXPECT_NE(ra, nullptr);
  return ra ? ra->session_token : std::string();
}

TEST(Sha256, KnownAnswer) {
  EXPECT_EQ(to_hex(sha256("abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Signaling, JoinOnEmptySessionAssignsRole) {
  Signaling sig;
  const auto out = sig.handle("cohost", msg::Join{Role::kCoHost, "cohost"});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].to, "cohost");
  const auto& ra = std::get<msg::RoleAssigned>(out[0].message);
  EXPECT_EQ(ra.role, Role::kCoHost);
  // Token: first 16 bytes of SHA-256("funnel\ncohost\n1"), computed offline.
  EXPECT_EQ(ra.session_token, "aafc7d9ea264b367b103cf1b6851584b");
}

TEST(Signaling, SecondCoHostIsRejected) {
  Signaling sig;
  sig.handle("a", msg::Join{Role::kCoHost, "a"});
  const auto out = sig.handle("b", msg::Join{Role::kCoHost, "b"});
  EXPECT_EQ(out.at(0).message, SignalMessage(msg::Rejected{"role_taken"}));
  EXPECT_EQ(sig.active_count(Role::kCoHost), 1u);
}

TEST(Signaling, SpectatorsAreSentToTheFanout) {
  Signaling sig;
  const auto out = sig.handle("s", msg::Join{Role::kSpectator, "s"});
  EXPECT_EQ(out.at(0).message, SignalMessage(msg::Rejected{"use_spectator_endpoint"}));
  EXPECT_TRUE(sig.clients().empty());
}

TEST(Signaling, DoubleJoinIsRejected) {
  Signaling sig;
  sig.handle("a", msg::Join{Role::kCoHost, "a"});
  const auto out = sig.handle("a", msg::Join{Role::kVrHost, "a"});
  EXPECT_EQ(out.at(0).message, SignalMessage(msg::Rejected{"already_joined"}));
}

TEST(Signaling, OfferBeforeJoinIsErrorAndChangesNothing) {
  Signaling sig;
  sig.handle("vr", msg::Join{Role::kVrHost, "vr"});
  const Signaling before = sig;
  const auto out = sig.handle("stranger", msg::Offer{"sdp"});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].to, "stranger");
  EXPECT_TRUE(std::holds_alternative<msg::ErrorMsg>(out[0].message));
  EXPECT_EQ(sig, before);
}

TEST(Signaling, HandshakeReachesConnectedWithVerbatimBlobs) {
  Signaling sig;
  sig.handle("vr", msg::Join{Role::kVrHost, "vr"});
  sig.handle("co", msg::Join{Role::kCoHost, "co"});
  const std::string offer("v=0\r\n\x01\xff binary \0 tail", 22);
  auto out = sig.handle("vr", msg::Offer{offer});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].to, "co");
  EXPECT_EQ(std::get<msg::Offer>(out[0].message).sdp_blob, offer);
  EXPECT_EQ(sig.clients().at("vr").state, ConnState::kNegotiating);

  out = sig.handle("co", msg::Candidate{"cand-1"});
  EXPECT_EQ(out.at(0).to, "vr");
  out = sig.handle("co", msg::Answer{"answer-blob"});
  EXPECT_EQ(out.at(0).to, "vr");
  EXPECT_EQ(std::get<msg::Answer>(out[0].message).sdp_blob, "answer-blob");
  EXPECT_EQ(sig.clients().at("vr").state, ConnState::kConnected);
  EXPECT_EQ(sig.clients().at("co").state, ConnState::kConnected);
}

TEST(Signaling, ByeFreesTheSlotAndNotifiesThePeer) {
  Signaling sig;
  sig.handle("vr", msg::Join{Role::kVrHost, "vr"});
  const std::string token = token_of(sig.handle("co", msg::Join{Role::kCoHost, "co"}));
  sig.handle("vr", msg::Offer{"o"});
  sig.handle("co", msg::Answer{"a"});
  const auto out = sig.handle("co", msg::Bye{});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].to, "vr");
  EXPECT_EQ(out[0].message, SignalMessage(msg::Bye{}));
  EXPECT_EQ(sig.clients().at("co").state, ConnState::kClosed);
  EXPECT_EQ(sig.clients().at("vr").state, ConnState::kJoined);
  EXPECT_FALSE(sig.authenticate(token));
  // The slot is reusable, and the old client may come back.
  EXPECT_TRUE(std::holds_alternative<msg::RoleAssigned>(
      sig.handle("co", msg::Join{Role::kCoHost, "co"}).at(0).message));
}

TEST(Signaling, TokensAreDeterministicPerSeed) {
  Signaling a("s1"), b("s1"), c("s2");
  const auto ta = token_of(a.handle("x", msg::Join{Role::kCoHost, "x"}));
  const auto tb = token_of(b.handle("x", msg::Join{Role::kCoHost, "x"}));
  const auto tc = token_of(c.handle("x", msg::Join{Role::kCoHost, "x"}));
  EXPECT_EQ(ta, tb);
  EXPECT_NE(ta, tc);
  Signaling d;
  d.handle("cohost", msg::Join{Role::kCoHost, "cohost"});
  EXPECT_EQ(token_of(d.handle("vr", msg::Join{Role::kVrHost, "vr"})),
            "e7542cf9139f9c31dc9f206b732a922b");
}

TEST(SignalJson, RoundTripsEveryType) {
  const std::vector<SignalMessage> all = {msg::Join{Role::kVrHost, "c1"},
                                          msg::RoleAssigned{Role::kCoHost, "tok"},
                                          msg::Offer{"o\n"},
                                          msg::Answer{"a"},
                                          msg::Candidate{"c"},
                                          msg::Rejected{"role_taken"},
                                          msg::Bye{},
                                          msg::ErrorMsg{"x"}};
  for (const auto& m : all) {
    const auto j = to_json(m);
    EXPECT_EQ(signal_from_json(nlohmann::json::parse(j.dump())), m) << j.dump();
  }
}

TEST(SignalJson, UnknownTypeNamesField) {
  try {
    signal_from_json({{"type", "hello"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.field(), "type");
  }
  try {
    signal_from_json({{"type", "offer"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.field(), "sdp_blob");
  }
}

// Random Join/Offer/Answer/Candidate/Bye traffic from many clients.
TEST(SignalingFuzz, CardinalityAndVerbatimRelay) {
  std::mt19937_64 rng(2026);
  Signaling sig;
  std::uniform_int_distribution<int> pick_client(0, 19), pick_kind(0, 4), pick_role(0, 2);
  std::uniform_int_distribution<int> byte(0, 255), len(0, 64);
  std::size_t relayed = 0;
  for (int step = 0; step < 10000; ++step) {
    const std::string id = "c" + std::to_string(pick_client(rng));
    std::string blob;
    for (int i = len(rng); i > 0; --i) blob.push_back(static_cast<char>(byte(rng)));
    SignalMessage m;
    switch (pick_kind(rng)) {
      case 0:
        m = msg::Join{static_cast<Role>(pick_role(rng)), id};
        break;
      case 1:
        m = msg::Offer{blob};
        break;
      case 2:
        m = msg::Answer{blob};
        break;
      case 3:
        m = msg::Candidate{blob};
        break;
      default:
        m = msg::Bye{};
        break;
    }
    const auto before = sig.clients();
    const auto out = sig.handle(id, m);
    ASSERT_LE(sig.active_count(Role::kVrHost), 1u);
    ASSERT_LE(sig.active_count(Role::kCoHost), 1u);
    ASSERT_EQ(sig.active_count(Role::kSpectator), 0u);
    for (const Outbound& o : out) {
      if (o.to == id) continue;
      // Anything sent elsewhere is the relayed message itself.
      ++relayed;
      ASSERT_EQ(o.message, m);
    }
    // Closed is terminal for a connection; only a fresh Join reopens the id,
    // and a peer's Bye is the only thing that returns a client to Joined.
    for (const auto& [cid, now] : sig.clients()) {
      const auto it = before.find(cid);
      if (it == before.end()) continue;
      const ConnState was = it->second.state;
      if (was == now.state) continue;
      const bool forward = static_cast<int>(now.state) > static_cast<int>(was);
      const bool rejoin =
          was == ConnState::kClosed && cid == id && std::holds_alternative<msg::Join>(m);
      const bool peer_left =
          now.state == ConnState::kJoined && std::holds_alternative<msg::Bye>(m) && cid != id;
      ASSERT_TRUE(forward || rejoin || peer_left)
          << cid << " " << to_string(was) << " -> " << to_string(now.state);
    }
  }
  EXPECT_GT(relayed, 200u);
}

// -------------------------------------------------------------------- chat

TEST(Utf8, CountsCodePoints) {
  EXPECT_EQ(utf8_length("abc"), 3u);
  EXPECT_EQ(utf8_length("\xc3\xa9t\xc3\xa9"), 3u);       // été
  EXPECT_EQ(utf8_length("\xf0\x9f\x98\x80"), 1u);        // emoji
  EXPECT_EQ(utf8_length("\xc3"), std::nullopt);          // truncated
  EXPECT_EQ(utf8_length("\xc0\xaf"), std::nullopt);      // overlong
  EXPECT_EQ(utf8_length("\xed\xa0\x80"), std::nullopt);  // surrogate
}

TEST(ChatLedger, LimitIsInCharactersNotBytes) {
  ChatLedger ledger;
  std::string five_hundred;
  for (int i = 0; i < 500; ++i) five_hundred += "\xc3\xa9";
  EXPECT_EQ(ledger.ingest("s", Role::kSpectator, five_hundred, 0), 1u);
  try {
    ledger.ingest("s", Role::kSpectator, five_hundred + "x", 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kValidation);
    EXPECT_EQ(e.field(), "text");
  }
}

TEST(ChatLedger, VrHostMayNotChat) {
  ChatLedger ledger;
  EXPECT_THROW(ledger.ingest("vr", Role::kVrHost, "hi", 0), Error);
  EXPECT_TRUE(ledger.messages().empty());
}

TEST(ChatLedger, RelayIsOneShot) {
  ChatLedger ledger;
  ledger.ingest("s", Role::kSpectator, "q", 0);
  ledger.mark_relayed(1);
  EXPECT_THROW(ledger.mark_relayed(1), Error);
  EXPECT_THROW(ledger.mark_relayed(2), Error);
}

// ------------------------------------------------------------------- audio

TEST(Audio, RuleTable) {
  using D = AudioDest;
  const std::map<std::pair<Role, bool>, std::vector<D>> table = {
      {{Role::kVrHost, true}, {D::kCoHost, D::kSpectators}},
      {{Role::kVrHost, false}, {D::kCoHost}},
      {{Role::kCoHost, true}, {D::kVrHost}},
      {{Role::kCoHost, false}, {D::kVrHost}},
      {{Role::kSpectator, true}, {}},
      {{Role::kSpectator, false}, {}},
  };
  for (const auto& [key, want] : table) {
    AudioPacket pkt{key.first, {1, 2, 3}, 0};
    EXPECT_EQ(route_audio(key.second, pkt), want) << to_string(key.first) << key.second;
  }
}

// ------------------------------------------------------------------ session

// A box in front of the free camera on an open floor. Spawn at the origin
// puts the free camera at (0, 1.7, 1.5) looking down -Z.
std::shared_ptr<const scene::Scene> cube_scene(bool crate_selectable = true) {
  std::vector<scene::SceneObject> objects;
  objects.push_back({"crate",
                     "Crate",
                     scene::box_triangles({0, 1.7, -3}, {0.5, 0.5, 0.5}),
                     {200, 80, 40},
                     crate_selectable});
  objects.push_back(
      {"slab", "Slab", scene::box_triangles({0, -0.05, -3}, {4, 0.05, 4}), {120, 120, 120}, false});
  return std::make_shared<const scene::Scene>(std::move(objects), geom::Pose{});
}

std::shared_ptr<const scene::Scene> escape_room() {
  static const auto s = std::make_shared<const scene::Scene>(
      scene::load_scene(FUNNEL_FIXTURES "/escape_room.scene.json"));
  return s;
}

std::shared_ptr<const scene::ScenarioScript> task_a() {
  static const auto s = std::make_shared<const scene::ScenarioScript>(
      scene::load_scenario(FUNNEL_FIXTURES "/task_a.scenario.jsonl"));
  return s;
}

std::string join_cohost(Session& s, const std::string& id = "cohost") {
  return token_of(s.handle_signal(id, msg::Join{Role::kCoHost, id}));
}

SessionConfig fast_config() {
  SessionConfig c;
  c.render_tablet = false;
  return c;
}

TEST(Session, CommandsNeedTheCoHostToken) {
  Session s(cube_scene(), nullptr, fast_config());
  const std::string vr = token_of(s.handle_signal("vr", msg::Join{Role::kVrHost, "vr"}));
  for (const std::string& token : {std::string(), std::string("bogus"), vr}) {
    const auto r = s.command(token, cmd::SetOnAir{true});
    EXPECT_FALSE(r.ok);
    EXPECT_EQ(r.error_kind, ErrorKind::kAuth);
  }
  EXPECT_FALSE(s.on_air());
  EXPECT_TRUE(s.command(join_cohost(s), cmd::SetOnAir{true}).ok);
  EXPECT_TRUE(s.on_air());
}

TEST(Session, MalformedParamsNameTheField) {
  Session s(cube_scene(), nullptr, fast_config());
  const std::string tok = join_cohost(s);
  const std::vector<std::tuple<std::string, nlohmann::json, std::string>> cases = {
      {"place_target", {{"x", 3}}, "y"},
      {"place_target", {{"x", 640}, {"y", 0}}, "x"},
      {"select_object", {{"x", "left"}, {"y", 0}}, "x"},
      {"annotate_spec", {{"polyline_px", {{1, 2}}}}, "polyline_px"},
      {"annotate_vr", {{"polyline_px", {{1, 2}, {1}}}}, "polyline_px"},
      {"switch_camera", {{"mode", "drone"}}, "mode"},
      {"set_arm", nlohmann::json::object(), "value"},
      {"free_cam_input", {{"forward", 2}, {"dt", 0.1}}, "forward"},
      {"relay_chat", {{"msg_id", -1}}, "msg_id"},
      {"set_on_air", {{"on_air", 1}}, "on_air"},
      {"annotate_windowed", {{"strokes_px", 7}}, "strokes_px"},
      {"fly", nlohmann::json::object(), "cmd"},
  };
  const std::string before = s.digest();
  for (const auto& [name, params, field] : cases) {
    const auto r = s.command(tok, name, params);
    EXPECT_FALSE(r.ok) << name;
    EXPECT_EQ(r.error_kind, ErrorKind::kValidation) << name;
    EXPECT_EQ(r.error_field, field) << name;
  }
  EXPECT_EQ(s.digest(), before);
}

TEST(Session, CommandJsonRoundTrip) {
  const std::vector<Command> all = {cmd::SelectObject{1, 2},
                                    cmd::AnnotateVr{{{0, 0}, {5, 6}}},
                                    cmd::AnnotateSpec{{{3, 4}, {7, 8}, {9, 9}}},
                                    cmd::AnnotateWindowed{{{{0, 0}, {10, 0}}, {{4, 4}}}, 2},
                                    cmd::PlaceTarget{320, 180},
                                    cmd::RemoveWindowed{},
                                    cmd::RemoveAllAnnotations{},
                                    cmd::RemoveTargets{},
                                    cmd::SwitchCamera{RigMode::kMapView},
                                    cmd::SetArm{2.5},
                                    cmd::FreeCamInput{{0.5, -1, 0, 0.1, -0.2, 1.0 / 30}},
                                    cmd::RelayChat{7},
                                    cmd::SendPrivateText{"look left"},
                                    cmd::SetOnAir{true}};
  ASSERT_EQ(all.size(), std::variant_size_v<Command>);
  for (const Command& c : all) {
    const auto wire = nlohmann::json::parse(command_params(c).dump());
    EXPECT_EQ(parse_command(command_name(c), wire), c) << command_name(c);
  }
}

TEST(Session, PlaceTargetLandsOnTheCubeFace) {
  Session s(cube_scene(), nullptr, fast_config());
  const std::string tok = join_cohost(s);
  const auto r = s.command(tok, cmd::PlaceTarget{350, 150});
  ASSERT_TRUE(r.ok);
  ASSERT_EQ(s.overlays().targets.size(), 1u);
  const render::Target& t = s.overlays().targets[0];

  // Independent route: brute-force triangle loop along the pixel-centre ray.
  const geom::Ray ray = geom::unproject(350.5, 150.5, s.active_rig().pose, s.intrinsics());
  const auto oracle = oracle::brute_force_raycast(s.scene(), ray);
  ASSERT_TRUE(oracle);
  EXPECT_EQ(oracle->object_id, "crate");
  EXPECT_LT(geom::length(t.position - ray.at(oracle->t)), 1e-9);
  EXPECT_NEAR(t.position.z, -2.5, 1e-9);  // front face of the crate
  EXPECT_NEAR(t.normal.z, 1.0, 1e-12);

  // Visible to both audiences. The avatar's head hides the image centre, so
  // the probe pixel is off to the upper right.
  const auto snap = s.snapshot();
  for (Audience a : {Audience::kSpectatorOnly, Audience::kVrOnly}) {
    const Frame f = render_view(s.scene(), snap, s.intrinsics(), a);
    EXPECT_EQ(f.at(350, 150), colors::kTargetBlue) << render::to_string(a);
  }
}

TEST(Session, PlaceTargetMissIsRejectedWithoutChange) {
  Session s(cube_scene(), nullptr, fast_config());
  const std::string tok = join_cohost(s);
  const std::string before = s.digest();
  const auto r = s.command(tok, cmd::PlaceTarget{320, 0});  // sky
  ASSERT_TRUE(r.ok);
  EXPECT_EQ(r.result["applied"], false);
  EXPECT_EQ(r.result["reason"], "miss");
  EXPECT_EQ(s.digest(), before);
}

TEST(Session, SelectTogglesAndRespectsSelectable) {
  Session s(cube_scene(), nullptr, fast_config());
  const std::string tok = join_cohost(s);
  EXPECT_EQ(s.command(tok, cmd::SelectObject{320, 180}).result["selected"], true);
  EXPECT_EQ(s.overlays().selection, render::SelectionSet{"crate"});
  EXPECT_EQ(s.command(tok, cmd::SelectObject{320, 180}).result["selected"], false);
  EXPECT_TRUE(s.overlays().selection.empty());
  // The slab under the crate is not selectable.
  const auto r = s.command(tok, cmd::SelectObject{320, 350});
  EXPECT_EQ(r.result["reason"], "not_selectable");
  EXPECT_TRUE(s.overlays().selection.empty());
}

TEST(Session, AnnotationsAnchorAtHitDepth) {
  Session s(escape_room(), nullptr, fast_config());
  const std::string tok = join_cohost(s);
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> px(0, 639), py(0, 359);
  const geom::Pose cam = s.active_rig().pose;
  int anchored = 0;
  for (int i = 0; i < 40; ++i) {
    const PixelPolyline line{{px(rng), py(rng)}, {px(rng), py(rng)}};
    ASSERT_TRUE(s.command(tok, cmd::AnnotateSpec{line}).ok);
    const auto& a = s.overlays().annotations.back();
    for (std::size_t k = 0; k < line.size(); ++k) {
      const Vec3& p = a.points[k];
      const auto proj = geom::project(p, cam, s.intrinsics());
      ASSERT_TRUE(proj);
      EXPECT_LE(std::abs(proj->x_px - (line[k].x + 0.5)), 0.5);
      EXPECT_LE(std::abs(proj->y_px - (line[k].y + 0.5)), 0.5);
      const geom::Ray ray = geom::unproject(line[k].x + 0.5, line[k].y + 0.5, cam, s.intrinsics());
      const auto hit = oracle::brute_force_raycast(s.scene(), ray);
      const double dist = geom::length(p - cam.position);
      if (hit) {
        ++anchored;
        EXPECT_NEAR(dist, hit->t, 1e-4);
      } else {
        EXPECT_NEAR(dist, 5.0, 1e-9);
      }
    }
  }
  EXPECT_GT(anchored, 40);
}

TEST(Session, AnnotationMissFallsBackToFiveMetres) {
  Session s(cube_scene(), nullptr, fast_config());
  const std::string tok = join_cohost(s);
  const auto r = s.command(tok, cmd::AnnotateVr{{{0, 0}, {639, 0}}});
  ASSERT_TRUE(r.ok);
  EXPECT_EQ(r.result["fallback_points"], 2);
  for (const Vec3& p : s.overlays().annotations.back().points) {
    EXPECT_NEAR(geom::length(p - s.active_rig().pose.position), 5.0, 1e-12);
  }
  EXPECT_EQ(s.overlays().annotations.back().audience, Audience::kVrOnly);
}

TEST(Session, AnnotationScopesInRenderedFrames) {
  Session s(cube_scene(), nullptr, fast_config());
  const std::string tok = join_cohost(s);
  const Frame bare_spec = s.spectator_frame();
  ASSERT_TRUE(s.command(tok, cmd::AnnotateVr{{{200, 180}, {440, 180}}}).ok);
  EXPECT_EQ(s.spectator_frame(), bare_spec);
  const auto snap = s.snapshot();
  EXPECT_NE(render_view(s.scene(), snap, s.intrinsics(), Audience::kVrOnly), bare_spec);
  ASSERT_TRUE(s.command(tok, cmd::AnnotateSpec{{{200, 100}, {440, 100}}}).ok);
  EXPECT_NE(s.spectator_frame(), bare_spec);
}

TEST(Session, RemovalsClearTheirCollections) {
  Session s(cube_scene(), nullptr, fast_config());
  const std::string tok = join_cohost(s);
  s.command(tok, cmd::AnnotateSpec{{{300, 180}, {340, 180}}});
  s.command(tok, cmd::AnnotateVr{{{300, 170}, {340, 170}}});
  s.command(tok, cmd::PlaceTarget{320, 180});
  s.command(tok, cmd::AnnotateWindowed{{{{0, 0}, {50, 50}}}, 2});
  EXPECT_EQ(s.command(tok, cmd::RemoveTargets{}).result["removed"], 1);
  EXPECT_TRUE(s.overlays().targets.empty());
  EXPECT_EQ(s.overlays().annotations.size(), 2u);
  EXPECT_EQ(s.command(tok, cmd::RemoveWindowed{}).result["removed"], 1);
  EXPECT_TRUE(s.tablet_view().shown_windowed.empty());
  s.command(tok, cmd::AnnotateWindowed{{{{0, 0}, {50, 50}}}, 2});
  EXPECT_EQ(s.command(tok, cmd::RemoveAllAnnotations{}).result["removed"], 3);
  EXPECT_TRUE(s.overlays().annotations.empty());
  EXPECT_TRUE(s.tablet_view().shown_windowed.empty());
  // History keeps both windowed items.
  EXPECT_EQ(s.tablet_view().history.size(), 2u);
}

TEST(Session, WindowedAnnotationIsCompositedSpectatorFrame) {
  Session s(cube_scene(), nullptr, fast_config());
  const std::string tok = join_cohost(s);
  const std::vector<PixelPolyline> strokes = {{{10, 10}, {110, 10}}, {{5, 300}, {600, 20}}};
  const Frame expected = render::composite_windowed(s.spectator_frame(), strokes, 3);
  const auto r = s.command(tok, cmd::AnnotateWindowed{strokes, 3});
  ASSERT_TRUE(r.ok);
  const TabletItem& newest = s.tablet_view().history.back();
  EXPECT_EQ(newest.kind, TabletItem::Kind::kWindowed);
  EXPECT_EQ(s.windowed().at(newest.windowed_id).image, expected);
  // Only the tablet shows it.
  EXPECT_NE(s.spectator_frame(), expected);
}

TEST(Session, SwitchCameraUpdatesTabletSnapshot) {
  Session s(escape_room(), nullptr);
  const std::string tok = join_cohost(s);
  ASSERT_TRUE(s.command(tok, cmd::SwitchCamera{RigMode::kMapView}).ok);
  EXPECT_EQ(s.tablet_view().snapshot.camera_label, RigMode::kMapView);
  EXPECT_EQ(s.active_mode(), RigMode::kMapView);
}

TEST(Session, TabletRefreshesAtTwoHertz) {
  Session s(cube_scene(), nullptr);
  std::vector<std::int64_t> refresh_pts;
  std::int64_t last = s.tablet_view().snapshot.pts_ms;
  for (int i = 0; i < 90; ++i) {
    s.tick();
    if (s.tablet_view().snapshot.pts_ms != last) {
      last = s.tablet_view().snapshot.pts_ms;
      refresh_pts.push_back(last);
    }
  }
  EXPECT_EQ(refresh_pts, (std::vector<std::int64_t>{500, 1000, 1500, 2000, 2500, 3000}));
}

TEST(Session, SetArmClampsForEveryRig) {
  Session s(cube_scene(), nullptr, fast_config());
  const std::string tok = join_cohost(s);
  EXPECT_EQ(s.command(tok, cmd::SetArm{100}).result["arm_length"], 20.0);
  EXPECT_EQ(s.rig(RigMode::kThirdFollow).arm_length, 20.0);
  EXPECT_EQ(s.command(tok, cmd::SetArm{2.5}).result["arm_length"], 2.5);
}

TEST(Session, FreeCamInputMovesTheFreeRig) {
  Session s(cube_scene(), nullptr, fast_config());
  const std::string tok = join_cohost(s);
  const Vec3 start = s.rig(RigMode::kFree).pose.position;
  ASSERT_TRUE(s.command(tok, cmd::FreeCamInput{{1, 0, 0, 0, 0, 0.5}}).ok);
  // 1.5 m/s along -Z for half a second.
  EXPECT_LT(geom::length(s.rig(RigMode::kFree).pose.position - (start + Vec3{0, 0, -0.75})), 1e-12);
}

TEST(Session, ScenarioGrabLocksOutFreeInput) {
  Session s(escape_room(), task_a(), fast_config());
  const std::string tok = join_cohost(s);
  double grab_t = -1;
  for (const auto& e : task_a()->events()) {
    if (std::holds_alternative<scene::GrabMainCamera>(e.body)) grab_t = e.t;
  }
  ASSERT_GT(grab_t, 0);
  const Vec3 before = s.rig(RigMode::kFree).pose.position;
  s.advance_to_tick(static_cast<std::uint64_t>(std::ceil(grab_t * 30)) + 2);
  EXPECT_EQ(s.grab_rejections(), 0u);
  ASSERT_TRUE(s.rig(RigMode::kFree).grabbed_by_vr);
  const auto r = s.command(tok, cmd::FreeCamInput{{1, 0, 0, 0, 0, 0.1}});
  EXPECT_EQ(r.result["reason"], "grabbed_by_vr");
  s.advance_to_tick(static_cast<std::uint64_t>(task_a()->end_time() * 30) + 1);
  EXPECT_FALSE(s.rig(RigMode::kFree).grabbed_by_vr);
  EXPECT_NE(s.rig(RigMode::kFree).pose.position, before);
}

TEST(Session, FirstPersonTracksHeadThroughPlayback) {
  Session s(escape_room(), task_a(), fast_config());
  for (int i = 0; i < 30 * 65; ++i) {
    s.tick();
    ASSERT_EQ(s.rig(RigMode::kFirstPerson).pose, s.avatar().head) << i;
  }
}

TEST(Session, ChatRolesAndTabletIsolation) {
  Session s(escape_room(), nullptr, fast_config());
  const std::string co = join_cohost(s);
  const std::string vr = token_of(s.handle_signal("vr", msg::Join{Role::kVrHost, "vr"}));
  const auto r = s.chat("viewer1", "where did we place the blood pressure cuff?");
  ASSERT_TRUE(r.ok);
  EXPECT_EQ(s.chat_ledger().messages().size(), 1u);
  EXPECT_TRUE(s.tablet_view().history.empty());
  EXPECT_TRUE(s.spectators().count("viewer1"));

  EXPECT_TRUE(s.chat("", "hi", co).ok);
  EXPECT_EQ(s.chat_ledger().messages().back().sender_role, Role::kCoHost);
  const auto host = s.chat("", "hi", vr);
  EXPECT_FALSE(host.ok);
  EXPECT_EQ(host.error_kind, ErrorKind::kAuth);
  // A joined client cannot pose as a spectator under its own id.
  EXPECT_FALSE(s.chat("vr", "hi").ok);
  EXPECT_EQ(s.chat("viewer1", std::string(501, 'x')).error_field, "text");
  EXPECT_EQ(s.chat_ledger().messages().size(), 2u);
}

TEST(Session, HundredMessagesHaveIncreasingIds) {
  Session s(cube_scene(), nullptr, fast_config());
  std::uint64_t last = 0;
  for (int i = 0; i < 100; ++i) {
    const auto r = s.chat("spec" + std::to_string(i % 10), "msg " + std::to_string(i));
    const auto id = r.result["msg_id"].get<std::uint64_t>();
    EXPECT_GT(id, last);
    last = id;
  }
  EXPECT_EQ(s.spectators().size(), 10u);
}

TEST(Session, RelayChatSevenAppendsToTablet) {
  Session s(cube_scene(), nullptr, fast_config());
  const std::string tok = join_cohost(s);
  for (int i = 1; i <= 9; ++i) s.chat("v", "q" + std::to_string(i));
  const std::size_t before = s.tablet_view().history.size();
  ASSERT_TRUE(s.command(tok, cmd::RelayChat{7}).ok);
  EXPECT_EQ(s.tablet_view().history.size(), before + 1);
  EXPECT_TRUE(s.chat_ledger().find(7)->relayed);
  EXPECT_EQ(s.tablet_view().history.back().text, "q7");
  const auto again = s.command(tok, cmd::RelayChat{7});
  EXPECT_FALSE(again.ok);
  EXPECT_EQ(s.tablet_view().history.size(), before + 1);
}

// Tablet text history is exactly the relayed messages and private texts, in
// the order the co-host issued them.
TEST(Session, RelayPurityUnderRandomTraffic) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Session s(cube_scene(), nullptr, fast_config());
    const std::string tok = join_cohost(s);
    std::mt19937_64 rng(seed);
    std::vector<std::string> expected;
    for (int step = 0; step < 200; ++step) {
      const int op = std::uniform_int_distribution<int>(0, 9)(rng);
      if (op < 5) {
        s.chat("s" + std::to_string(op), "m" + std::to_string(step));
      } else if (op < 8 && !s.chat_ledger().messages().empty()) {
        const auto n = s.chat_ledger().messages().size();
        const auto id = std::uniform_int_distribution<std::uint64_t>(1, n)(rng);
        const bool was = s.chat_ledger().find(id)->relayed;
        const auto r = s.command(tok, cmd::RelayChat{id});
        EXPECT_EQ(r.ok, !was);
        if (!was) expected.push_back(s.chat_ledger().find(id)->text);
      } else if (op == 8) {
        const std::string text = "private " + std::to_string(step);
        s.command(tok, cmd::SendPrivateText{text});
        expected.push_back(text);
      } else {
        s.command(tok, cmd::RemoveAllAnnotations{});
      }
    }
    std::vector<std::string> got;
    for (const auto& item : s.tablet_view().history) got.push_back(item.text);
    EXPECT_EQ(got, expected) << seed;
    std::size_t relayed = 0;
    for (const auto& m : s.chat_ledger().messages()) relayed += m.relayed;
    std::size_t chat_items = 0;
    for (const auto& item : s.tablet_view().history) {
      chat_items += item.kind == TabletItem::Kind::kChat;
    }
    EXPECT_EQ(relayed, chat_items);
  }
}

TEST(Session, OnAirDrivesTabletAndAudio) {
  Session s(cube_scene(), nullptr, fast_config());
  const std::string tok = join_cohost(s);
  const AudioPacket pkt{Role::kVrHost, {9}, 0};
  EXPECT_EQ(s.route(pkt), std::vector<AudioDest>{AudioDest::kCoHost});
  s.command(tok, cmd::SetOnAir{true});
  EXPECT_TRUE(s.tablet_view().on_air);
  EXPECT_EQ(s.route(pkt), (std::vector<AudioDest>{AudioDest::kCoHost, AudioDest::kSpectators}));
}

// ------------------------------------------------------------------- replay

void drive_demo(Session& s) {
  s.handle_signal("vr", msg::Join{Role::kVrHost, "vr"});
  const std::string tok = join_cohost(s);
  s.handle_signal("vr", msg::Offer{"offer"});
  s.handle_signal("cohost", msg::Answer{"answer"});
  s.advance_to_tick(20);
  s.chat("viewer", "hello");
  s.command(tok, cmd::PlaceTarget{320, 200});
  s.advance_to_tick(45);
  s.command(tok, cmd::AnnotateSpec{{{100, 100}, {300, 200}, {500, 150}}});
  s.command(tok, cmd::SwitchCamera{RigMode::kThirdFollow});
  s.advance_to_tick(80);
  s.command(tok, cmd::RelayChat{1});
  s.command(tok, cmd::AnnotateWindowed{{{{0, 0}, {40, 40}}}, 2});
  s.command(tok, cmd::SetArm{4.0});
}

std::string dump_log(const Session& s) {
  std::ostringstream out;
  for (const auto& e : s.log()) out << e.dump() << '\n';
  return out.str();
}

TEST(Replay, ReproducesLiveDigest) {
  Session live(escape_room(), task_a(), fast_config());
  drive_demo(live);
  const std::string log = dump_log(live);
  std::istringstream in1(log), in2(log);
  Session a(escape_room(), task_a(), fast_config()), b(escape_room(), task_a(), fast_config());
  const ReplayReport ra = replay(a, in1);
  const ReplayReport rb = replay(b, in2);
  EXPECT_EQ(ra.digest, rb.digest);
  EXPECT_EQ(ra.digest, live.digest());
  EXPECT_EQ(ra.entries, live.log().size());
  EXPECT_FALSE(ra.halted_at);
  EXPECT_FALSE(ra.diverged_at);
}

TEST(Replay, EndEntryRunsTheClock) {
  Session live(escape_room(), task_a(), fast_config());
  drive_demo(live);
  live.advance_to_tick(120);
  std::string log = dump_log(live);
  log += nlohmann::json({{"kind", "end"}, {"tick", live.tick_index()}}).dump() + "\n";
  std::istringstream in(log);
  Session a(escape_room(), task_a(), fast_config());
  const ReplayReport r = replay(a, in);
  EXPECT_EQ(r.digest, live.digest());
}

TEST(Replay, EmptyLogGivesInitialDigest) {
  Session fresh(escape_room(), task_a(), fast_config());
  Session replayed(escape_room(), task_a(), fast_config());
  std::istringstream empty;
  EXPECT_EQ(replay(replayed, empty).digest, fresh.digest());
}

TEST(Replay, HaltsAtTheLiveErrorIndex) {
  Session live(escape_room(), task_a(), fast_config());
  const std::string tok = join_cohost(live);
  live.command(tok, cmd::SetOnAir{true});
  live.command("stolen-token", cmd::SetOnAir{false});
  live.command(tok, cmd::SetOnAir{false});
  const std::string log = dump_log(live);
  std::istringstream scan(log), in(log);
  const auto live_index = first_recorded_failure(scan);
  ASSERT_EQ(live_index, 2u);
  Session a(escape_room(), task_a(), fast_config());
  const ReplayReport r = replay(a, in);
  EXPECT_EQ(r.halted_at, live_index);
  EXPECT_EQ(r.halt_error["kind"], "auth");
  EXPECT_TRUE(a.on_air());  // the entry after the failure was not applied
}

TEST(Replay, DigestIgnoresTheLog) {
  Session a(cube_scene(), nullptr, fast_config());
  Session b(cube_scene(), nullptr, fast_config());
  a.command("nobody", cmd::SetOnAir{true});
  EXPECT_EQ(a.digest(), b.digest());
}

}  // namespace
}  // namespace funnel::session

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

#include <chrono>
#include <deque>
#include <numbers>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "funnel/render/composite.hpp"
#include "funnel/render/rasterizer.hpp"
#include "funnel/scene/scenario.hpp"
#include "test_oracles.hpp"

namespace funnel::render {
namespace {

using geom::CameraIntrinsics;
using geom::Pose;
using geom::Triangle;
using geom::UnitQuat;
using geom::Vec3;

const CameraIntrinsics kIntr(std::numbers::pi / 3, 640, 360);

scene::Scene cube_scene(Vec3 center = {0, 0, -5}, Rgb8 color = {200, 120, 40}) {
  return scene::Scene(
      {{"cube", "Cube", scene::box_triangles(center, {0.5, 0.5, 0.5}), color, true}}, Pose{});
}

std::size_t count_color(const Frame& f, Rgb8 c) {
  std::size_t n = 0;
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) n += f.at(x, y) == c;
  return n;
}

TEST(Render, EmptySceneIsUniformBackground) {
  const Frame f = render(scene::Scene{}, nullptr, Pose{}, kIntr, {}, Audience::kSpectatorOnly);
  EXPECT_EQ(f.width, 640);
  EXPECT_EQ(count_color(f, colors::kBackground), 640u * 360u);
}

TEST(Render, ZeroSizeViewportIsInputError) {
  EXPECT_THROW(CameraIntrinsics(1.0, 0, 360), Error);
  EXPECT_THROW(Frame(0, 10), Error);
}

TEST(Render, CubeCenterMatchesReferenceShade) {
  const scene::Scene s = cube_scene();
  const Frame f = render(s, nullptr, Pose{}, kIntr, {}, Audience::kSpectatorOnly);
  const Rgb8 want = oracle::reference_shade(s.objects()[0].base_color, {0, 0, 1}, {0, 0, -1});
  EXPECT_EQ(f.at(320, 180), want);
  EXPECT_EQ(f.at(2, 2), colors::kBackground);
}

TEST(Render, SingleTriangleMatchesReferenceRasterizer) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1);
  int compared = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const Triangle tri{{Vec3{u(rng) * 2, u(rng) * 1.5, -3 + u(rng)},
                        Vec3{u(rng) * 2, u(rng) * 1.5, -3 + u(rng)},
                        Vec3{u(rng) * 2, u(rng) * 1.5, -3 + u(rng)}}};
    const Pose cam{{u(rng) * 0.2, u(rng) * 0.2, 0},
                   UnitQuat::from_axis_angle({0, 1, 0}, u(rng) * 0.1)};
    FrameBuffers fb(kIntr.width(), kIntr.height());
    Rasterizer r(fb, cam, kIntr);
    r.draw_solid(tri, {255, 255, 255}, 0);
    for (int y = 0; y < kIntr.height(); ++y) {
      for (int x = 0; x < kIntr.width(); ++x) {
        const auto ref = oracle::reference_depth(tri, cam, kIntr, x, y);
        const bool got = fb.ids[fb.index(x, y)] == 0;
        // Skip pixel centres within a hair of an edge: either answer is right.
        const auto tight = [&] {
          for (double dx : {-1e-6, 1e-6})
            for (double dy : {-1e-6, 1e-6}) {
              const double tan_half = std::tan(kIntr.vertical_fov() / 2);
              const double sx = ((x + 0.5 + dx) / 640 * 2 - 1) * tan_half * kIntr.aspect();
              const double sy = (1 - (y + 0.5 + dy) / 360 * 2) * tan_half;
              const Vec3 dir = cam.orientation.rotate(geom::normalize(Vec3{sx, sy, -1}));
              if (oracle::plane_barycentric(geom::Ray(cam.position, dir), tri).has_value() !=
                  ref.has_value())
                return true;
            }
          return false;
        }();
        if (tight) continue;
        ASSERT_EQ(got, ref.has_value()) << "trial " << trial << " at " << x << "," << y;
        if (ref) {
          EXPECT_NEAR(fb.depth[fb.index(x, y)], *ref, 1e-9 * *ref);
          ++compared;
        }
      }
    }
  }
  EXPECT_GT(compared, 10000);
}

TEST(Render, NearerTriangleWinsOnRandomPairs) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1, 1);
  int contested = 0;
  for (int trial = 0; trial < 40; ++trial) {
    Triangle t[2];
    for (auto& tri : t) {
      for (auto& v : tri.v) v = {u(rng) * 1.5, u(rng), -3 + 1.5 * u(rng)};
    }
    FrameBuffers fb(kIntr.width(), kIntr.height());
    Rasterizer r(fb, Pose{}, kIntr);
    // Draw in a random order; the answer may not depend on it.
    const int first = trial % 2;
    r.draw_solid(t[first], {255, 0, 0}, first);
    r.draw_solid(t[1 - first], {0, 255, 0}, 1 - first);
    for (int y = 0; y < 360; y += 2) {
      for (int x = 0; x < 640; x += 2) {
        const auto d0 = oracle::reference_depth(t[0], Pose{}, kIntr, x, y);
        const auto d1 = oracle::reference_depth(t[1], Pose{}, kIntr, x, y);
        if (!d0 || !d1 || std::abs(*d0 - *d1) < 1e-6) continue;
        const int id = fb.ids[fb.index(x, y)];
        if (id < 0) continue;  // centre on an unowned shared edge
        EXPECT_EQ(id, *d0 < *d1 ? 0 : 1) << x << "," << y;
        ++contested;
      }
    }
  }
  EXPECT_GT(contested, 500);
}

TEST(Render, SharedEdgeHasNoGapsOrOverlap) {
  // Two triangles of a quad: every covered pixel is drawn exactly once.
  const Vec3 a{-1, -1, -3}, b{1, -1, -3}, c{1, 1, -3}, d{-1, 1, -3};
  FrameBuffers fb(kIntr.width(), kIntr.height());
  Rasterizer r(fb, Pose{}, kIntr);
  r.draw_solid({{a, b, c}}, {255, 0, 0}, 0);
  const auto after_first = fb.ids;
  r.draw_solid({{a, c, d}}, {0, 255, 0}, 1);
  int both = 0;
  for (std::size_t i = 0; i < fb.ids.size(); ++i) both += after_first[i] == 0 && fb.ids[i] == 1;
  EXPECT_EQ(both, 0);
  // The quad spans a solid rectangle with no holes.
  const auto p0 = geom::project(a, Pose{}, kIntr);
  const auto p1 = geom::project(c, Pose{}, kIntr);
  for (int y = static_cast<int>(p1->y_px) + 1; y < static_cast<int>(p0->y_px) - 1; ++y)
    for (int x = static_cast<int>(p0->x_px) + 1; x < static_cast<int>(p1->x_px) - 1; ++x)
      ASSERT_GE(fb.ids[fb.index(x, y)], 0) << x << "," << y;
}

Annotation annotation(std::string id, Audience aud, std::vector<Vec3> pts) {
  Annotation a;
  a.annotation_id = std::move(id);
  a.audience = aud;
  a.points = std::move(pts);
  return a;
}

TEST(Render, VrOnlyAnnotationInvisibleToSpectators) {
  const scene::Scene s = cube_scene();
  OverlaySet with;
  with.annotations.push_back(
      annotation("a", Audience::kVrOnly, {{-0.3, 0, -4.5}, {0.3, 0.2, -4.5}}));
  const Frame plain = render(s, nullptr, Pose{}, kIntr, {}, Audience::kSpectatorOnly);
  EXPECT_EQ(render(s, nullptr, Pose{}, kIntr, with, Audience::kSpectatorOnly), plain);
  EXPECT_NE(render(s, nullptr, Pose{}, kIntr, with, Audience::kVrOnly), plain);
}

// Random overlay sets over the escape room: adding items of the other
// audience never changes a frame; targets show up for both.
TEST(Render, ScopeExclusionProperty) {
  const scene::Scene s = scene::load_scene(FUNNEL_FIXTURES "/escape_room.scene.json");
  const auto index = scene::build_index(s);
  const scene::AvatarState avatar = scene::avatar_at(s.spawn());
  const Pose cam{{0, 1.6, 4.0}, UnitQuat::from_axis_angle({1, 0, 0}, -0.2)};
  const CameraIntrinsics intr = kIntr.with_size(320, 180);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> px(0, 319.9), py(0, 179.9);
  for (int trial = 0; trial < 20; ++trial) {
    OverlaySet base, vr_extra, spec_extra;
    auto random_line = [&](Audience aud, int k) {
      std::vector<Vec3> pts;
      for (int i = 0; i < 4; ++i) {
        const geom::Ray ray = geom::unproject(px(rng), py(rng), cam, intr);
        const auto hit = geom::raycast(index, ray);
        pts.push_back(hit ? hit->point : ray.at(5.0));
      }
      return annotation(std::to_string(trial) + "-" + std::to_string(k), aud, pts);
    };
    for (int k = 0; k < 3; ++k) {
      base.annotations.push_back(random_line(Audience::kSpectatorOnly, k));
      base.annotations.push_back(random_line(Audience::kVrOnly, 10 + k));
    }
    vr_extra = base;
    spec_extra = base;
    for (int k = 0; k < 3; ++k) {
      vr_extra.annotations.push_back(random_line(Audience::kVrOnly, 20 + k));
      spec_extra.annotations.push_back(random_line(Audience::kSpectatorOnly, 30 + k));
    }
    if (trial % 2) base.selection.insert("cauldron");
    vr_extra.selection = spec_extra.selection = base.selection;
    const Frame spec = render(s, &avatar, cam, intr, base, Audience::kSpectatorOnly);
    const Frame vr = render(s, &avatar, cam, intr, base, Audience::kVrOnly);
    EXPECT_EQ(render(s, &avatar, cam, intr, vr_extra, Audience::kSpectatorOnly), spec);
    EXPECT_EQ(render(s, &avatar, cam, intr, spec_extra, Audience::kVrOnly), vr);

    // Strip all foreign items: the frame must equal the one rendered with them.
    OverlaySet only_spec = base;
    std::erase_if(only_spec.annotations,
                  [](const Annotation& a) { return a.audience != Audience::kSpectatorOnly; });
    EXPECT_EQ(render(s, &avatar, cam, intr, only_spec, Audience::kSpectatorOnly), spec);

    // A target on the floor in front of the camera appears in both.
    OverlaySet with_target = base;
    with_target.targets.push_back({"t", {0.3 * (trial % 3), 0.0, 1.5}, {0, 1, 0}, 0.08});
    for (Audience aud : {Audience::kSpectatorOnly, Audience::kVrOnly}) {
      const Frame f = render(s, &avatar, cam, intr, with_target, aud);
      EXPECT_GT(count_color(f, colors::kTargetBlue), 0u);
    }
  }
}

TEST(Render, DeterministicAcrossCalls) {
  const scene::Scene s = scene::load_scene(FUNNEL_FIXTURES "/escape_room.scene.json");
  const scene::AvatarState a = scene::avatar_at(s.spawn());
  const Pose cam{{1, 1.7, 4}, UnitQuat::from_axis_angle({0, 1, 0}, 0.3)};
  EXPECT_EQ(render(s, &a, cam, kIntr, {}, Audience::kEveryone),
            render(s, &a, cam, kIntr, {}, Audience::kEveryone));
}

std::vector<std::uint8_t> outline_mask(const Frame& with, const Frame& without) {
  std::vector<std::uint8_t> m(static_cast<std::size_t>(with.width) * with.height, 0);
  for (int y = 0; y < with.height; ++y)
    for (int x = 0; x < with.width; ++x)
      m[static_cast<std::size_t>(y) * with.width + x] =
          with.at(x, y) == colors::kOutlineYellow && !(without.at(x, y) == colors::kOutlineYellow);
  return m;
}

TEST(Outline, EmptySelectionLeavesFrameUnchanged) {
  const scene::Scene s = cube_scene();
  FrameBuffers fb = render_buffers(s, nullptr, Pose{}, kIntr, {}, Audience::kEveryone);
  const Frame before = fb.frame;
  outline_pass(fb, {});
  EXPECT_EQ(fb.frame, before);
}

TEST(Outline, SelectedCubeIsEnclosedByClosedLoop) {
  const scene::Scene s = cube_scene({0.2, -0.1, -4}, {90, 90, 200});
  const Pose cam{{0, 0, 0}, UnitQuat::from_axis_angle({0.4, 1, 0}, 0.35)};
  OverlaySet sel;
  sel.selection.insert("cube");
  const FrameBuffers plain = render_buffers(s, nullptr, cam, kIntr, {}, Audience::kEveryone);
  const FrameBuffers lit = render_buffers(s, nullptr, cam, kIntr, sel, Audience::kEveryone);
  const int w = kIntr.width(), h = kIntr.height();
  const auto mask = outline_mask(lit.frame, plain.frame);
  std::size_t outline = 0, region = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    outline += mask[i];
    region += plain.ids[i] == 0;
  }
  ASSERT_GT(region, 100u);
  ASSERT_GT(outline, 0u);

  // Oracle 1: every outline pixel lies within 2 px (Chebyshev) of a region
  // pixel whose 4-neighbourhood leaves the region.
  auto in_region = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < w && y < h && plain.ids[plain.index(x, y)] == 0;
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask[y * w + x]) continue;
      bool near_edge = false;
      for (int oy = -2; oy <= 2 && !near_edge; ++oy)
        for (int ox = -2; ox <= 2 && !near_edge; ++ox) {
          const int bx = x + ox, by = y + oy;
          if (in_region(bx, by) && (!in_region(bx - 1, by) || !in_region(bx + 1, by) ||
                                    !in_region(bx, by - 1) || !in_region(bx, by + 1)))
            near_edge = true;
        }
      ASSERT_TRUE(near_edge) << x << "," << y;
    }
  }

  // Oracle 2: the outline is a single 8-connected component.
  std::vector<std::uint8_t> seen(mask.size(), 0);
  std::deque<int> q;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) {
      q.push_back(static_cast<int>(i));
      seen[i] = 1;
      break;
    }
  std::size_t reached = 0;
  while (!q.empty()) {
    const int i = q.front();
    q.pop_front();
    ++reached;
    const int x = i % w, y = i / w;
    for (int oy = -1; oy <= 1; ++oy)
      for (int ox = -1; ox <= 1; ++ox) {
        const int nx = x + ox, ny = y + oy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const int j = ny * w + nx;
        if (mask[j] && !seen[j]) {
          seen[j] = 1;
          q.push_back(j);
        }
      }
  }
  EXPECT_EQ(reached, outline);

  // Oracle 3: closed. A 4-connected flood from the image border through
  // non-outline pixels never touches the object's interior.
  std::fill(seen.begin(), seen.end(), 0);
  for (int x = 0; x < w; ++x)
    for (int y : {0, h - 1}) q.push_back(y * w + x);
  for (int y = 0; y < h; ++y)
    for (int x : {0, w - 1}) q.push_back(y * w + x);
  while (!q.empty()) {
    const int i = q.front();
    q.pop_front();
    if (seen[i] || mask[i]) continue;
    seen[i] = 1;
    const int x = i % w, y = i / w;
    ASSERT_FALSE(in_region(x, y)) << "flood leaked into the object at " << x << "," << y;
    if (x > 0) q.push_back(i - 1);
    if (x + 1 < w) q.push_back(i + 1);
    if (y > 0) q.push_back(i - w);
    if (y + 1 < h) q.push_back(i + w);
  }
}

TEST(Outline, OccludedObjectHasNoOutline) {
  scene::Scene s(
      {{"cube", "Cube", scene::box_triangles({0, 0, -6}, {0.5, 0.5, 0.5}), {9, 9, 9}, true},
       {"wall", "Wall", scene::box_triangles({0, 0, -3}, {4, 4, 0.1}), {200, 200, 200}, false}},
      Pose{});
  OverlaySet sel;
  sel.selection.insert("cube");
  const Frame f = render(s, nullptr, Pose{}, kIntr, sel, Audience::kEveryone);
  EXPECT_EQ(count_color(f, colors::kOutlineYellow), 0u);
}

TEST(Composite, ZeroStrokesIsIdentity) {
  const Frame snap = render(cube_scene(), nullptr, Pose{}, kIntr, {}, Audience::kSpectatorOnly);
  EXPECT_EQ(composite_windowed(snap, {}), snap);
}

TEST(Composite, HorizontalStrokePixelCount) {
  const Frame snap(640, 360);
  const std::vector<PixelPolyline> strokes{{{0, 10}, {100, 10}}};
  const Frame out = composite_windowed(snap, strokes, 1);
  std::size_t diff = 0;
  for (std::size_t i = 0; i < out.pixels.size(); i += 3)
    diff += out.pixels[i] != snap.pixels[i] || out.pixels[i + 1] != snap.pixels[i + 1] ||
            out.pixels[i + 2] != snap.pixels[i + 2];
  EXPECT_EQ(diff, 101u);
  EXPECT_EQ(count_color(out, colors::kAnnotationRed), 101u);
  EXPECT_EQ(out.width, snap.width);
}

TEST(Composite, OutOfBoundsStrokeIsClipped) {
  const Frame snap(64, 36);
  const Frame copy = snap;
  const std::vector<PixelPolyline> strokes{{{-50, -20}, {100, 50}, {30, 400}}};
  const Frame out = composite_windowed(snap, strokes, 5);
  EXPECT_EQ(snap, copy);
  EXPECT_EQ(out.pixels.size(), snap.pixels.size());
  EXPECT_GT(count_color(out, colors::kAnnotationRed), 0u);
}

TEST(Composite, StrokeWidthScalesPixelCount) {
  const Frame snap(200, 100);
  const std::vector<PixelPolyline> strokes{{{10, 50}, {109, 50}}};
  // 100 centres stamped 3x3: columns 9..110, rows 49..51.
  EXPECT_EQ(count_color(composite_windowed(snap, strokes, 3), colors::kAnnotationRed), 306u);
  EXPECT_EQ(count_color(composite_windowed(snap, strokes, 2), colors::kAnnotationRed), 202u);
}

class Thumbnails : public ::testing::Test {
 protected:
  scene::Scene scene_ = scene::load_scene(FUNNEL_FIXTURES "/escape_room.scene.json");
  scene::AvatarState avatar_ = scene::avatar_at(scene_.spawn());
  rig::RigConfig cfg_;

  rig::CameraRig rig_for(rig::RigMode m) {
    rig::RigConfig c = cfg_;
    c.smoothing_tau = 0;
    auto r = rig::make_rig(m, c, Pose{{0, 1.7, 4.5}, {}});
    return m == rig::RigMode::kFree ? r : rig::update_rig(r, avatar_, 0.1, c);
  }
};

TEST_F(Thumbnails, PresetRigsHaveDistinctLabels) {
  std::set<rig::RigMode> labels;
  for (rig::RigMode m : {rig::RigMode::kFirstPerson, rig::RigMode::kOverShoulder,
                         rig::RigMode::kThirdFollow, rig::RigMode::kMapView}) {
    const Frame t = render_thumbnail(scene_, avatar_, rig_for(m), kIntr, {});
    EXPECT_EQ(t.width, 160);
    EXPECT_EQ(t.height, 90);
    labels.insert(t.camera_label);
  }
  EXPECT_EQ(labels.size(), 4u);
}

TEST_F(Thumbnails, FirstPersonMatchesDownscaledFullRender) {
  const auto rig = rig_for(rig::RigMode::kFirstPerson);
  const Frame thumb = render_thumbnail(scene_, avatar_, rig, kIntr, {});
  const Frame full = render(scene_, &avatar_, rig.pose, kIntr, {}, Audience::kSpectatorOnly);
  // Reference box filter written out longhand.
  for (int y = 0; y < 90; ++y) {
    for (int x = 0; x < 160; ++x) {
      int acc[3] = {0, 0, 0};
      for (int sy = 0; sy < 4; ++sy)
        for (int sx = 0; sx < 4; ++sx) {
          const Rgb8 c = full.at(x * 4 + sx, y * 4 + sy);
          acc[0] += c.r;
          acc[1] += c.g;
          acc[2] += c.b;
        }
      const Rgb8 t = thumb.at(x, y);
      EXPECT_LE(std::abs(t.r - acc[0] / 16.0), 2.0);
      EXPECT_LE(std::abs(t.g - acc[1] / 16.0), 2.0);
      EXPECT_LE(std::abs(t.b - acc[2] / 16.0), 2.0);
    }
  }
}

TEST_F(Thumbnails, StaticSceneIsBitIdentical) {
  const auto rig = rig_for(rig::RigMode::kThirdFollow);
  EXPECT_EQ(render_thumbnail(scene_, avatar_, rig, kIntr, {}),
            render_thumbnail(scene_, avatar_, rig, kIntr, {}));
}

TEST_F(Thumbnails, FirstPersonSkipsTheHeadProxy) {
  // The camera sits inside the head box; the frame must not be filled by it.
  const auto rig = rig_for(rig::RigMode::kFirstPerson);
  const Frame f = render(scene_, &avatar_, rig.pose, kIntr, {}, Audience::kSpectatorOnly);
  std::set<std::tuple<int, int, int>> distinct;
  for (int y = 0; y < f.height; y += 8)
    for (int x = 0; x < f.width; x += 8)
      distinct.insert({f.at(x, y).r, f.at(x, y).g, f.at(x, y).b});
  EXPECT_GT(distinct.size(), 3u);
}

}  // namespace
}  // namespace funnel::render

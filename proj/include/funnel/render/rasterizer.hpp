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
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <tuple>
#include <vector>

#include "funnel/color.hpp"
#include "funnel/geom/camera.hpp"
#include "funnel/geom/intersect.hpp"
#include "funnel/render/frame.hpp"
#include "funnel/render/overlay.hpp"
#include "funnel/rig/camera_rig.hpp"
#include "funnel/scene/scenario.hpp"
#include "funnel/scene/scene.hpp"

namespace funnel::render {

using geom::CameraIntrinsics;
using geom::Pose;
using geom::Triangle;

inline constexpr std::int32_t kNoObject = -1;
inline constexpr std::int32_t kAvatarObject = -2;
// Passed as the id of overlay geometry: depth is written, ids are left alone.
inline constexpr std::int32_t kKeepId = -3;

inline constexpr int kThumbnailWidth = 160;
inline constexpr int kThumbnailHeight = 90;

// Single directional light plus ambient term.
struct Light {
  Vec3 direction = geom::normalize({-1.0, -1.0, -1.0});  // direction light travels
  double ambient = 0.35;
};

// Flat shading of one face. `normal` must face the viewer.
inline Rgb8 shade(Rgb8 base, const Vec3& normal, const Light& light) {
  const double diffuse = std::max(0.0, geom::dot(normal, -light.direction));
  const double k = light.ambient + (1.0 - light.ambient) * diffuse;
  auto channel = [k](std::uint8_t c) {
    return static_cast<std::uint8_t>(std::min(255.0, std::round(c * k)));
  };
  return {channel(base.r), channel(base.g), channel(base.b)};
}

// Colour, camera-space depth and object id per pixel.
struct FrameBuffers {
  Frame frame;
  std::vector<double> depth;
  std::vector<std::int32_t> ids;

  FrameBuffers(int w, int h)
      : frame(w, h),
        depth(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::infinity()),
        ids(static_cast<std::size_t>(w) * h, kNoObject) {}

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * frame.width + x; }
};

// Z-buffered triangle and line rasterizer for one camera. Pixel (x, y) is
// sampled at its centre (x + 0.5, y + 0.5); shared edges are owned by exactly
// one triangle.
class Rasterizer {
 public:
  Rasterizer(FrameBuffers& fb, const Pose& camera, const CameraIntrinsics& intr)
      : fb_(fb), camera_(camera), intr_(intr) {
    if (intr.width() != fb.frame.width || intr.height() != fb.frame.height) {
      fail(ErrorKind::kInputDomain, "intrinsics do not match the frame size", "intr");
    }
  }

  const Pose& camera() const { return camera_; }

  // Flat-lit world triangle; the face normal is flipped toward the camera.
  void draw_lit(const Triangle& tri, Rgb8 base, std::int32_t id, const Light& light) {
    Vec3 n = tri.face_normal();
    const double len = geom::length(n);
    if (!(len > 0.0)) return;
    n = n / len;
    if (geom::dot(n, camera_.position - tri.v[0]) < 0.0) n = -n;
    draw_solid(tri, shade(base, n, light), id);
  }

  void draw_solid(const Triangle& tri, Rgb8 color, std::int32_t id) {
    std::array<Vec3, 3> cam;
    for (int i = 0; i < 3; ++i) cam[i] = camera_.to_local(tri.v[i]);
    // Clip against the near plane (z <= -near) in camera space.
    const double zn = -intr_.near();
    Vec3 poly[4];
    int n = 0;
    for (int i = 0; i < 3; ++i) {
      const Vec3& a = cam[i];
      const Vec3& b = cam[(i + 1) % 3];
      const bool ina = a.z <= zn;
      const bool inb = b.z <= zn;
      if (ina) poly[n++] = a;
      if (ina != inb) {
        const double s = (zn - a.z) / (b.z - a.z);
        Vec3 p = geom::lerp(a, b, s);
        p.z = zn;
        poly[n++] = p;
      }
    }
    if (n < 3) return;
    ScreenVert sv[4];
    for (int i = 0; i < n; ++i) sv[i] = to_screen(poly[i]);
    for (int i = 1; i + 1 < n; ++i) fill(sv[0], sv[i], sv[i + 1], color, id);
  }

  // Constant-width screen-space stroke through world points. Stroke pixels
  // are depth-tested with a tolerance so strokes lying on a surface stay
  // visible; they do not write depth.
  void draw_polyline(std::span<const Vec3> points, Rgb8 color, int stroke_px) {
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
      Vec3 a = camera_.to_local(points[i]);
      Vec3 b = camera_.to_local(points[i + 1]);
      const double zn = -intr_.near();
      if (a.z > zn && b.z > zn) continue;
      if (a.z > zn) a = geom::lerp(b, a, (zn - b.z) / (a.z - b.z));
      if (b.z > zn) b = geom::lerp(a, b, (zn - a.z) / (b.z - a.z));
      a.z = std::min(a.z, zn);
      b.z = std::min(b.z, zn);
      stroke_segment(to_screen(a), to_screen(b), color, stroke_px);
    }
  }

 private:
  struct ScreenVert {
    double x;
    double y;
    double inv_z;
  };

  ScreenVert to_screen(const Vec3& pc) const {
    const geom::Projection p = geom::project_camera_space(pc, intr_);
    return {p.x_px, p.y_px, 1.0 / p.depth};
  }

  // Evaluated with the endpoints in a fixed order so that edge(a, b) is
  // exactly -edge(b, a); otherwise pixel centres on a shared edge can be
  // rejected by both triangles.
  static double edge(const ScreenVert& a, const ScreenVert& b, double px, double py) {
    if (std::tie(a.x, a.y) > std::tie(b.x, b.y)) return -edge(b, a, px, py);
    return (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
  }

  static bool owns_edge(const ScreenVert& a, const ScreenVert& b) {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    return dy > 0.0 || (dy == 0.0 && dx < 0.0);
  }

  void fill(ScreenVert a, ScreenVert b, ScreenVert c, Rgb8 color, std::int32_t id) {
    double area = edge(a, b, c.x, c.y);
    if (area == 0.0 || !std::isfinite(area)) return;
    if (area < 0.0) {
      std::swap(b, c);
      area = -area;
    }
    const int w = fb_.frame.width;
    const int h = fb_.frame.height;
    const double min_x = std::min({a.x, b.x, c.x});
    const double max_x = std::max({a.x, b.x, c.x});
    const double min_y = std::min({a.y, b.y, c.y});
    const double max_y = std::max({a.y, b.y, c.y});
    const int x0 = std::max(0, static_cast<int>(std::floor(min_x - 0.5)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(max_x - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(min_y - 0.5)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(max_y - 0.5)));
    if (x0 > x1 || y0 > y1) return;
    const bool own_bc = owns_edge(b, c);
    const bool own_ca = owns_edge(c, a);
    const bool own_ab = owns_edge(a, b);
    const double inv_area = 1.0 / area;
    const double far = intr_.far();
    for (int y = y0; y <= y1; ++y) {
      const double py = y + 0.5;
      for (int x = x0; x <= x1; ++x) {
        const double px = x + 0.5;
        const double w0 = edge(b, c, px, py);
        const double w1 = edge(c, a, px, py);
        const double w2 = edge(a, b, px, py);
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
        if ((w0 == 0.0 && !own_bc) || (w1 == 0.0 && !own_ca) || (w2 == 0.0 && !own_ab)) {
          continue;
        }
        const double inv_z = (w0 * a.inv_z + w1 * b.inv_z + w2 * c.inv_z) * inv_area;
        const double depth = 1.0 / inv_z;
        const std::size_t i = fb_.index(x, y);
        if (!(depth < fb_.depth[i]) || depth > far) continue;
        fb_.depth[i] = depth;
        if (id != kKeepId) fb_.ids[i] = id;
        fb_.frame.set(x, y, color);
      }
    }
  }

  void stroke_segment(const ScreenVert& a, const ScreenVert& b, Rgb8 color, int stroke_px) {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const int steps =
        std::max(1, static_cast<int>(std::ceil(std::max(std::abs(dx), std::abs(dy)))));
    const int lo = -(stroke_px - 1) / 2;
    const int hi = lo + stroke_px - 1;
    for (int s = 0; s <= steps; ++s) {
      const double t = static_cast<double>(s) / steps;
      const double fx = a.x + dx * t;
      const double fy = a.y + dy * t;
      if (!std::isfinite(fx) || !std::isfinite(fy)) continue;
      if (fx < -stroke_px || fy < -stroke_px || fx > fb_.frame.width + stroke_px ||
          fy > fb_.frame.height + stroke_px) {
        continue;
      }
      const int cx = static_cast<int>(std::floor(fx));
      const int cy = static_cast<int>(std::floor(fy));
      const double depth = 1.0 / (a.inv_z + (b.inv_z - a.inv_z) * t);
      for (int oy = lo; oy <= hi; ++oy) {
        for (int ox = lo; ox <= hi; ++ox) {
          const int x = cx + ox;
          const int y = cy + oy;
          if (!fb_.frame.contains(x, y)) continue;
          const double surface = fb_.depth[fb_.index(x, y)];
          if (depth <= surface * 1.01 + 0.02) fb_.frame.set(x, y, color);
        }
      }
    }
  }

  FrameBuffers& fb_;
  Pose camera_;
  CameraIntrinsics intr_;
};

// Screen-space silhouette of the selected objects: id-buffer boundary pixels
// (a 4-neighbour or the frame edge differs) dilated by two pixels and painted
// outline yellow.
inline void outline_pass(FrameBuffers& fb, std::span<const std::int32_t> selected) {
  if (selected.empty()) return;
  const int w = fb.frame.width;
  const int h = fb.frame.height;
  auto is_selected = [&](std::int32_t id) {
    return id >= 0 && std::find(selected.begin(), selected.end(), id) != selected.end();
  };
  std::vector<std::uint8_t> boundary(static_cast<std::size_t>(w) * h, 0);
  bool any = false;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::int32_t id = fb.ids[fb.index(x, y)];
      if (!is_selected(id)) continue;
      const bool edge = x == 0 || y == 0 || x == w - 1 || y == h - 1 ||
                        fb.ids[fb.index(x - 1, y)] != id || fb.ids[fb.index(x + 1, y)] != id ||
                        fb.ids[fb.index(x, y - 1)] != id || fb.ids[fb.index(x, y + 1)] != id;
      if (edge) {
        boundary[fb.index(x, y)] = 1;
        any = true;
      }
    }
  }
  if (!any) return;
  constexpr int kDilate = 2;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!boundary[fb.index(x, y)]) continue;
      for (int oy = -kDilate; oy <= kDilate; ++oy) {
        for (int ox = -kDilate; ox <= kDilate; ++ox) {
          if (fb.frame.contains(x + ox, y + oy)) {
            fb.frame.set(x + ox, y + oy, colors::kOutlineYellow);
          }
        }
      }
    }
  }
}

inline void draw_box(Rasterizer& r, const Pose& pose, const Vec3& half, Rgb8 color, std::int32_t id,
                     const Light& light) {
  for (const Triangle& t : scene::box_triangles({}, half)) {
    Triangle w{{pose.to_world(t.v[0]), pose.to_world(t.v[1]), pose.to_world(t.v[2])}};
    r.draw_lit(w, color, id, light);
  }
}

inline void draw_target(Rasterizer& r, const Target& target) {
  constexpr int kSegments = 24;
  const Vec3 n = geom::normalize(target.normal);
  const Vec3 helper = std::abs(n.y) < 0.9 ? Vec3{0.0, 1.0, 0.0} : Vec3{1.0, 0.0, 0.0};
  const Vec3 u = geom::normalize(geom::cross(n, helper));
  const Vec3 v = geom::cross(n, u);
  // Lifted slightly off the surface so the disc wins the depth test.
  const Vec3 c = target.position + n * 0.003;
  for (int i = 0; i < kSegments; ++i) {
    const double a0 = 2.0 * std::numbers::pi * i / kSegments;
    const double a1 = 2.0 * std::numbers::pi * (i + 1) / kSegments;
    const Vec3 p0 = c + (u * std::cos(a0) + v * std::sin(a0)) * target.radius_m;
    const Vec3 p1 = c + (u * std::cos(a1) + v * std::sin(a1)) * target.radius_m;
    r.draw_solid({{c, p0, p1}}, colors::kTargetBlue, kKeepId);
  }
}

struct AvatarProxy {
  Vec3 head_half{0.12, 0.12, 0.12};
  Vec3 hand_half{0.05, 0.05, 0.05};
};

namespace detail {

inline bool camera_inside(const Pose& box, const Vec3& half, const Vec3& cam, double margin) {
  const Vec3 l = box.to_local(cam);
  return std::abs(l.x) <= half.x + margin && std::abs(l.y) <= half.y + margin &&
         std::abs(l.z) <= half.z + margin;
}

}  // namespace detail

// Full frame: flat-shaded scene and avatar proxy, targets, selection outlines,
// then the annotations visible to `audience`.
inline FrameBuffers render_buffers(const scene::Scene& scene, const scene::AvatarState* avatar,
                                   const Pose& camera, const CameraIntrinsics& intr,
                                   const OverlaySet& overlays, Audience audience,
                                   const Light& light = {}) {
  FrameBuffers fb(intr.width(), intr.height());
  Rasterizer r(fb, camera, intr);
  const auto& objects = scene.objects();
  for (std::size_t i = 0; i < objects.size(); ++i) {
    for (const Triangle& t : objects[i].triangles) {
      r.draw_lit(t, objects[i].base_color, static_cast<std::int32_t>(i), light);
    }
  }
  if (avatar) {
    const AvatarProxy proxy;
    const double margin = intr.near();
    for (const auto& [pose, half] :
         {std::pair{avatar->head, proxy.head_half}, std::pair{avatar->left_hand, proxy.hand_half},
          std::pair{avatar->right_hand, proxy.hand_half}}) {
      if (detail::camera_inside(pose, half, camera.position, margin)) continue;
      draw_box(r, pose, half, colors::kAvatar, kAvatarObject, light);
    }
  }
  for (const Target& t : overlays.targets) {
    if (visible_to(Target::audience, audience)) draw_target(r, t);
  }
  std::vector<std::int32_t> selected;
  for (const std::string& id : overlays.selection) {
    if (const auto idx = scene.index_of(id)) selected.push_back(static_cast<std::int32_t>(*idx));
  }
  outline_pass(fb, selected);
  for (const Annotation& a : overlays.annotations) {
    if (visible_to(a.audience, audience)) r.draw_polyline(a.points, a.color, a.stroke_px);
  }
  return fb;
}

inline Frame render(const scene::Scene& scene, const scene::AvatarState* avatar, const Pose& camera,
                    const CameraIntrinsics& intr, const OverlaySet& overlays, Audience audience,
                    rig::RigMode label = rig::RigMode::kFree, std::int64_t pts_ms = 0) {
  Frame f = render_buffers(scene, avatar, camera, intr, overlays, audience).frame;
  f.camera_label = label;
  f.pts_ms = pts_ms;
  return f;
}

// 160x90 preview of one rig as spectators would see it. When the full-size
// intrinsics are an integer multiple of the thumbnail size the frame is
// rendered at full size and box-filtered down.
inline Frame render_thumbnail(const scene::Scene& scene, const scene::AvatarState& avatar,
                              const rig::CameraRig& rig, const CameraIntrinsics& full,
                              const OverlaySet& overlays, std::int64_t pts_ms = 0) {
  const bool supersample =
      full.width() % kThumbnailWidth == 0 && full.height() % kThumbnailHeight == 0;
  const CameraIntrinsics intr =
      supersample ? full : full.with_size(kThumbnailWidth, kThumbnailHeight);
  Frame f =
      render(scene, &avatar, rig.pose, intr, overlays, Audience::kSpectatorOnly, rig.mode, pts_ms);
  if (supersample) f = box_downscale(f, kThumbnailWidth, kThumbnailHeight);
  return f;
}

}  // namespace funnel::render

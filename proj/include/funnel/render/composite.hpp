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

#include <cstdlib>
#include <span>
#include <vector>

#include "funnel/color.hpp"
#include "funnel/error.hpp"
#include "funnel/render/frame.hpp"

namespace funnel::render {

struct PixelPoint {
  int x = 0;
  int y = 0;
  bool operator==(const PixelPoint&) const = default;
};

using PixelPolyline = std::vector<PixelPoint>;

namespace detail {

inline void stamp(Frame& f, int x, int y, int lo, int hi, Rgb8 c) {
  for (int oy = lo; oy <= hi; ++oy) {
    for (int ox = lo; ox <= hi; ++ox) {
      if (f.contains(x + ox, y + oy)) f.set(x + ox, y + oy, c);
    }
  }
}

// Integer Bresenham from a to b inclusive.
inline void bresenham(Frame& f, PixelPoint a, PixelPoint b, int lo, int hi, Rgb8 c) {
  const int dx = std::abs(b.x - a.x);
  const int sx = a.x < b.x ? 1 : -1;
  const int dy = -std::abs(b.y - a.y);
  const int sy = a.y < b.y ? 1 : -1;
  int err = dx + dy;
  int x = a.x;
  int y = a.y;
  for (;;) {
    stamp(f, x, y, lo, hi, c);
    if (x == b.x && y == b.y) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
}

}  // namespace detail

// Copies the snapshot and draws each pixel polyline over it in `color`,
// `stroke_px` wide. Writes outside the frame are clipped.
inline Frame composite_windowed(const Frame& snapshot, std::span<const PixelPolyline> strokes,
                                int stroke_px = 1, Rgb8 color = colors::kAnnotationRed) {
  if (stroke_px < 1) fail(ErrorKind::kValidation, "stroke_px must be >= 1", "stroke_px");
  Frame out = snapshot;
  const int lo = -(stroke_px - 1) / 2;
  const int hi = lo + stroke_px - 1;
  for (const PixelPolyline& line : strokes) {
    if (line.empty()) continue;
    if (line.size() == 1) {
      detail::stamp(out, line[0].x, line[0].y, lo, hi, color);
      continue;
    }
    for (std::size_t i = 0; i + 1 < line.size(); ++i) {
      detail::bresenham(out, line[i], line[i + 1], lo, hi, color);
    }
  }
  return out;
}

}  // namespace funnel::render

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

#include <cstddef>
#include <cstdint>
#include <vector>

#include "funnel/color.hpp"
#include "funnel/error.hpp"
#include "funnel/rig/camera_rig.hpp"

namespace funnel::render {

// RGB8, row-major, top row first. This is also the wire layout of frame
// payloads.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
  rig::RigMode camera_label = rig::RigMode::kFree;
  std::int64_t pts_ms = 0;

  Frame() = default;
  Frame(int w, int h, Rgb8 fill = colors::kBackground) : width(w), height(h) {
    if (w <= 0 || h <= 0) fail(ErrorKind::kInputDomain, "zero-size frame", "width");
    pixels.resize(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t i = 0; i < pixels.size(); i += 3) {
      pixels[i] = fill.r;
      pixels[i + 1] = fill.g;
      pixels[i + 2] = fill.b;
    }
  }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  std::size_t offset(int x, int y) const { return (static_cast<std::size_t>(y) * width + x) * 3; }
  Rgb8 at(int x, int y) const {
    const std::size_t o = offset(x, y);
    return {pixels[o], pixels[o + 1], pixels[o + 2]};
  }
  void set(int x, int y, Rgb8 c) {
    const std::size_t o = offset(x, y);
    pixels[o] = c.r;
    pixels[o + 1] = c.g;
    pixels[o + 2] = c.b;
  }

  bool operator==(const Frame&) const = default;
};

// Box-filter downscale by integer factors; each output channel is the rounded
// mean of its source block.
inline Frame box_downscale(const Frame& src, int width, int height) {
  if (width <= 0 || height <= 0 || src.width % width != 0 || src.height % height != 0) {
    fail(ErrorKind::kInputDomain, "downscale needs integer factors", "width");
  }
  const int fx = src.width / width;
  const int fy = src.height / height;
  if (fx == 1 && fy == 1) return src;
  Frame out(width, height);
  out.camera_label = src.camera_label;
  out.pts_ms = src.pts_ms;
  const unsigned n = static_cast<unsigned>(fx * fy);
  std::vector<unsigned> row_acc(static_cast<std::size_t>(width) * 3);
  for (int oy = 0; oy < height; ++oy) {
    std::fill(row_acc.begin(), row_acc.end(), 0u);
    for (int sy = oy * fy; sy < (oy + 1) * fy; ++sy) {
      const std::uint8_t* row = src.pixels.data() + src.offset(0, sy);
      for (int ox = 0; ox < width; ++ox) {
        unsigned* acc = &row_acc[static_cast<std::size_t>(ox) * 3];
        const std::uint8_t* p = row + static_cast<std::size_t>(ox) * fx * 3;
        for (int k = 0; k < fx; ++k, p += 3) {
          acc[0] += p[0];
          acc[1] += p[1];
          acc[2] += p[2];
        }
      }
    }
    std::uint8_t* dst = out.pixels.data() + out.offset(0, oy);
    for (std::size_t i = 0; i < row_acc.size(); ++i) {
      dst[i] = static_cast<std::uint8_t>((row_acc[i] + n / 2) / n);
    }
  }
  return out;
}

}  // namespace funnel::render

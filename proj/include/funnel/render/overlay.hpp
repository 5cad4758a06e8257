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

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "funnel/color.hpp"
#include "funnel/error.hpp"
#include "funnel/geom/vec.hpp"

namespace funnel::render {

using geom::Vec3;

enum class Audience { kVrOnly, kSpectatorOnly, kEveryone };

inline std::string_view to_string(Audience a) {
  switch (a) {
    case Audience::kVrOnly:
      return "vr";
    case Audience::kSpectatorOnly:
      return "spectator";
    case Audience::kEveryone:
      return "everyone";
  }
  return "everyone";
}

// Whether an item scoped to `item` shows up in a frame rendered for `frame`.
// A kEveryone frame is a debug view that shows every item.
constexpr bool visible_to(Audience item, Audience frame) {
  return item == Audience::kEveryone || frame == Audience::kEveryone || item == frame;
}

// Depth-anchored 3D polyline seen by exactly one audience.
struct Annotation {
  std::string annotation_id;
  Audience audience = Audience::kSpectatorOnly;
  std::vector<Vec3> points;
  Rgb8 color = colors::kAnnotationRed;
  int stroke_px = 4;

  void validate() const {
    if (points.size() < 2) {
      fail(ErrorKind::kValidation, "annotation needs at least two points", "points");
    }
    if (audience == Audience::kEveryone) {
      fail(ErrorKind::kValidation, "annotations are scoped to one audience", "audience");
    }
    if (stroke_px < 1) fail(ErrorKind::kValidation, "stroke_px must be >= 1", "stroke_px");
  }

  bool operator==(const Annotation&) const = default;
};

// Surface marker shown to everyone.
struct Target {
  std::string target_id;
  Vec3 position;
  Vec3 normal{0.0, 1.0, 0.0};
  double radius_m = 0.08;

  static constexpr Audience audience = Audience::kEveryone;
  bool operator==(const Target&) const = default;
};

using SelectionSet = std::set<std::string>;

struct OverlaySet {
  std::vector<Annotation> annotations;
  std::vector<Target> targets;
  SelectionSet selection;

  bool operator==(const OverlaySet&) const = default;
};

}  // namespace funnel::render

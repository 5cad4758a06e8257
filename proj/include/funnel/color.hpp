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

#include <cstdint>

namespace funnel {

struct Rgb8 {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  constexpr bool operator==(const Rgb8&) const = default;
};

namespace colors {
inline constexpr Rgb8 kBackground{40, 44, 52};
inline constexpr Rgb8 kAnnotationRed{255, 0, 0};
inline constexpr Rgb8 kTargetBlue{0, 120, 255};
inline constexpr Rgb8 kOutlineYellow{255, 210, 0};
inline constexpr Rgb8 kAvatar{230, 180, 140};
}  // namespace colors

}  // namespace funnel

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

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "funnel/error.hpp"
#include "funnel/fanout/frame_record.hpp"
#include "funnel/hash.hpp"
#include "funnel/render/frame.hpp"

namespace funnel::fanout {

struct LadderRung {
  std::string name;
  int width = 0;
  int height = 0;

  bool operator==(const LadderRung&) const = default;
};

inline std::vector<LadderRung> default_ladder() { return {{"full", 640, 360}, {"half", 320, 180}}; }

struct SegmenterConfig {
  std::int64_t segment_duration_ms = 2000;
  double nominal_fps = 30.0;  // frame interval when a segment holds one frame
  std::vector<LadderRung> rungs = default_ladder();
  bool deflate = true;
  int deflate_level = 1;
};

struct StreamSegment {
  std::uint64_t seq = 0;
  std::int64_t duration_ms = 0;
  std::int64_t first_pts_ms = 0;
  std::size_t frame_count = 0;
  std::vector<std::vector<std::uint8_t>> payloads;  // one per rung
  std::vector<Sha256> hashes;                       // SHA-256 of each payload
};

// Accumulates broadcast frames and cuts fixed-duration segments. Each frame
// is downscaled to every rung and encoded as it arrives, so a cut only
// hashes the finished payloads.
class Segmenter {
 public:
  explicit Segmenter(SegmenterConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.rungs.empty()) fail(ErrorKind::kValidation, "ladder needs a rung", "rungs");
    if (cfg_.segment_duration_ms <= 0) {
      fail(ErrorKind::kValidation, "segment duration must be positive", "segment_duration");
    }
    pending_.resize(cfg_.rungs.size());
  }

  const SegmenterConfig& config() const { return cfg_; }
  std::uint64_t dropped_segments() const { return dropped_; }
  std::uint64_t next_seq() const { return next_seq_; }

  // Returns the finished segment when this frame completes one. A pts that
  // does not advance drops the segment in progress and throws a stream error.
  std::optional<StreamSegment> ingest(const render::Frame& frame) {
    if (seen_any_ && frame.pts_ms <= last_pts_) {
      const std::int64_t was = last_pts_;
      reset_pending();
      ++dropped_;
      last_pts_ = frame.pts_ms;
      fail(ErrorKind::kStream,
           "pts went from " + std::to_string(was) + " to " + std::to_string(frame.pts_ms),
           "pts_ms");
    }
    for (std::size_t r = 0; r < cfg_.rungs.size(); ++r) {
      const LadderRung& rung = cfg_.rungs[r];
      const render::Frame scaled = frame.width == rung.width && frame.height == rung.height
                                       ? frame
                                       : render::box_downscale(frame, rung.width, rung.height);
      append_prefixed(pending_[r],
                      encode_record(scaled, {false, cfg_.deflate, cfg_.deflate_level}));
    }
    if (count_ == 0) first_pts_ = frame.pts_ms;
    last_pts_ = frame.pts_ms;
    seen_any_ = true;
    ++count_;
    const std::int64_t duration = accumulated_ms();
    if (duration < cfg_.segment_duration_ms) return std::nullopt;

    StreamSegment seg;
    seg.seq = next_seq_++;
    seg.duration_ms = duration;
    seg.first_pts_ms = first_pts_;
    seg.frame_count = count_;
    seg.payloads = std::move(pending_);
    for (const auto& p : seg.payloads) seg.hashes.push_back(sha256(p));
    reset_pending();
    return seg;
  }

 private:
  // n frames whose pts span first..last cover (last - first) * n / (n - 1).
  std::int64_t accumulated_ms() const {
    if (count_ < 2) return std::llround(1000.0 / cfg_.nominal_fps);
    const double span = static_cast<double>(last_pts_ - first_pts_);
    return std::llround(span * static_cast<double>(count_) / static_cast<double>(count_ - 1));
  }

  void reset_pending() {
    pending_.assign(cfg_.rungs.size(), {});
    count_ = 0;
  }

  SegmenterConfig cfg_;
  std::vector<std::vector<std::uint8_t>> pending_;
  std::size_t count_ = 0;
  std::int64_t first_pts_ = 0;
  std::int64_t last_pts_ = 0;
  bool seen_any_ = false;
  std::uint64_t next_seq_ = 1;
  std::uint64_t dropped_ = 0;
};

}  // namespace funnel::fanout

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
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "funnel/error.hpp"
#include "funnel/fanout/segmenter.hpp"

namespace funnel::fanout {

struct WindowState {
  std::vector<std::shared_ptr<const StreamSegment>> segments;  // oldest first
  std::uint64_t media_sequence = 1;
};

// Bytes of one (rung, seq) with the segment kept alive for the reader.
struct SegmentBody {
  std::shared_ptr<const StreamSegment> segment;
  std::size_t rung = 0;

  const std::vector<std::uint8_t>& bytes() const { return segment->payloads[rung]; }
  const Sha256& hash() const { return segment->hashes[rung]; }
};

// Sliding window of the last W segments. Publishing swaps in a new immutable
// state; readers hold whatever state they loaded, so eviction never pulls
// bytes out from under an in-flight response.
class SegmentWindow {
 public:
  SegmentWindow(std::vector<LadderRung> rungs, std::size_t window, std::int64_t target_ms)
      : rungs_(std::move(rungs)),
        window_(window),
        target_ms_(target_ms),
        state_(std::make_shared<const WindowState>()) {
    if (window_ == 0) fail(ErrorKind::kValidation, "window must hold a segment", "window");
  }

  void publish(StreamSegment seg) {
    auto next = std::make_shared<WindowState>(*load());
    if (!next->segments.empty() && seg.seq <= next->segments.back()->seq) {
      fail(ErrorKind::kStream, "segment seq must increase", "seq");
    }
    if (seg.payloads.size() != rungs_.size()) {
      fail(ErrorKind::kStream, "segment rung count does not match the ladder", "payloads");
    }
    next->segments.push_back(std::make_shared<const StreamSegment>(std::move(seg)));
    while (next->segments.size() > window_) next->segments.erase(next->segments.begin());
    next->media_sequence = next->segments.front()->seq;
    std::lock_guard lock(mu_);
    state_ = std::move(next);
  }

  std::shared_ptr<const WindowState> load() const {
    std::lock_guard lock(mu_);
    return state_;
  }

  std::optional<std::size_t> rung_index(std::string_view name) const {
    for (std::size_t i = 0; i < rungs_.size(); ++i) {
      if (rungs_[i].name == name) return i;
    }
    return std::nullopt;
  }

  const std::vector<LadderRung>& rungs() const { return rungs_; }
  std::size_t window() const { return window_; }

  nlohmann::ordered_json playlist(std::string_view rung) const {
    if (!rung_index(rung))
      fail(ErrorKind::kNotFound, "no rung '" + std::string(rung) + "'", "rung");
    const auto st = load();
    nlohmann::ordered_json segs = nlohmann::ordered_json::array();
    for (const auto& s : st->segments) {
      nlohmann::ordered_json e;
      e["seq"] = s->seq;
      e["duration_ms"] = s->duration_ms;
      e["url"] = "/live/" + std::string(rung) + "/seg/" + std::to_string(s->seq);
      segs.push_back(std::move(e));
    }
    nlohmann::ordered_json doc;
    doc["version"] = 1;
    doc["target_duration_s"] = static_cast<double>(target_ms_) / 1000.0;
    doc["media_sequence"] = st->media_sequence;
    doc["segments"] = std::move(segs);
    return doc;
  }

  // Segment fetch: evicted seqs are gone, future ones not found.
  SegmentBody segment(std::string_view rung, std::uint64_t seq) const {
    const auto idx = rung_index(rung);
    if (!idx) fail(ErrorKind::kNotFound, "no rung '" + std::string(rung) + "'", "rung");
    const auto st = load();
    if (seq < st->media_sequence) {
      fail(ErrorKind::kGone, "segment " + std::to_string(seq) + " left the window", "seq");
    }
    for (const auto& s : st->segments) {
      if (s->seq == seq) return {s, *idx};
    }
    fail(ErrorKind::kNotFound, "segment " + std::to_string(seq) + " does not exist yet", "seq");
  }

 private:
  std::vector<LadderRung> rungs_;
  std::size_t window_;
  std::int64_t target_ms_;
  mutable std::mutex mu_;
  std::shared_ptr<const WindowState> state_;
};

}  // namespace funnel::fanout

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
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "funnel/error.hpp"
#include "funnel/fanout/frame_record.hpp"
#include "funnel/hash.hpp"

namespace funnel::fanout {

struct LoadSimConfig {
  std::string host = "127.0.0.1";
  int port = 8640;
  int spectators = 1;
  double duration_s = 60.0;
  int live_edge_offset = 10;  // segments behind the newest at start
  std::string rung = "full";
  double poll_interval_s = 0.5;
  int prefetch_segments = 2;        // fetched ahead of the playing segment
  double warmup_timeout_s = 120.0;  // waiting for the window to fill
};

struct SpectatorReport {
  int id = 0;
  double startup_latency_s = 0.0;  // connect to first frame on screen
  int stall_count = 0;
  std::uint64_t start_seq = 0;
  std::size_t segments_played = 0;
  std::vector<double> latency_samples_s;
  double latency_median_s = 0.0;
  double latency_min_s = 0.0;
  double latency_max_s = 0.0;
  std::map<std::uint64_t, std::string> hash_set;  // seq -> SHA-256 hex
  std::string error;
};

struct LoadReport {
  LoadSimConfig config;
  std::int64_t segment_duration_ms = 0;
  std::vector<SpectatorReport> spectators;
  int total_stalls = 0;
  bool hashes_identical = false;
  double latency_median_s = 0.0;  // median of per-spectator medians
  double latency_min_s = 0.0;
  double latency_max_s = 0.0;
  double wall_s = 0.0;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline nlohmann::json to_json(const LoadReport& r) {
  nlohmann::json specs = nlohmann::json::array();
  for (const auto& s : r.spectators) {
    nlohmann::json hashes = nlohmann::json::object();
    for (const auto& [seq, h] : s.hash_set) hashes[std::to_string(seq)] = h;
    specs.push_back({{"id", s.id},
                     {"startup_latency_s", s.startup_latency_s},
                     {"stall_count", s.stall_count},
                     {"start_seq", s.start_seq},
                     {"segments_played", s.segments_played},
                     {"latency_median_s", s.latency_median_s},
                     {"latency_min_s", s.latency_min_s},
                     {"latency_max_s", s.latency_max_s},
                     {"latency_samples", s.latency_samples_s.size()},
                     {"hash_set", hashes},
                     {"error", s.error}});
  }
  const auto& c = r.config;
  return {{"config",
           {{"host", c.host},
            {"port", c.port},
            {"spectators", c.spectators},
            {"duration_s", c.duration_s},
            {"live_edge_offset", c.live_edge_offset},
            {"rung", c.rung},
            {"poll_interval_s", c.poll_interval_s},
            {"prefetch_segments", c.prefetch_segments}}},
          {"segment_duration_ms", r.segment_duration_ms},
          {"total_stalls", r.total_stalls},
          {"hashes_identical", r.hashes_identical},
          {"latency_median_s", r.latency_median_s},
          {"latency_min_s", r.latency_min_s},
          {"latency_max_s", r.latency_max_s},
          {"wall_s", r.wall_s},
          {"spectators", specs}};
}

namespace detail {

using Clock = std::chrono::system_clock;

inline double unix_s() {
  return std::chrono::duration<double>(Clock::now().time_since_epoch()).count();
}

struct PlaylistView {
  std::uint64_t media_sequence = 0;
  std::uint64_t newest = 0;  // 0 when empty
  std::int64_t target_ms = 0;
  std::size_t entries = 0;
};

inline PlaylistView parse_playlist(const std::string& body) {
  const auto j = nlohmann::json::parse(body);
  PlaylistView v;
  v.media_sequence = j.at("media_sequence").get<std::uint64_t>();
  v.target_ms = std::llround(j.at("target_duration_s").get<double>() * 1000.0);
  const auto& segs = j.at("segments");
  v.entries = segs.size();
  if (!segs.empty()) v.newest = segs.back().at("seq").get<std::uint64_t>();
  return v;
}

struct Downloaded {
  std::int64_t duration_ms = 0;
  std::vector<std::uint64_t> pts;  // per frame
};

class Spectator {
 public:
  Spectator(int id, const LoadSimConfig& cfg, double epoch_s, std::int64_t seg_ms,
            std::uint64_t start_seq)
      : cfg_(cfg), epoch_s_(epoch_s), seg_ms_(seg_ms), client_(cfg.host, cfg.port) {
    report_.start_seq = start_seq;
    report_.id = id;
    client_.set_keep_alive(true);
    client_.set_connection_timeout(5, 0);
    client_.set_read_timeout(10, 0);
  }

  SpectatorReport run() {
    try {
      play();
    } catch (const std::exception& e) {
      report_.error = e.what();
    }
    report_.latency_median_s = median(report_.latency_samples_s);
    if (!report_.latency_samples_s.empty()) {
      const auto [lo, hi] =
          std::minmax_element(report_.latency_samples_s.begin(), report_.latency_samples_s.end());
      report_.latency_min_s = *lo;
      report_.latency_max_s = *hi;
    }
    return report_;
  }

 private:
  PlaylistView poll() {
    auto res = client_.Get("/live/" + cfg_.rung + "/playlist.json");
    if (!res || res->status != 200) {
      fail(ErrorKind::kHarness, "playlist request failed", "playlist");
    }
    return parse_playlist(res->body);
  }

  // Fetches segments up to `newest`, staying within the prefetch horizon.
  void fetch_through(std::uint64_t newest, std::uint64_t playing) {
    const auto horizon = playing + static_cast<std::uint64_t>(cfg_.prefetch_segments);
    while (next_fetch_ <= std::min(newest, horizon)) {
      const std::uint64_t seq = next_fetch_++;
      auto res = client_.Get("/live/" + cfg_.rung + "/seg/" + std::to_string(seq));
      if (!res) fail(ErrorKind::kHarness, "segment request failed", "segment");
      if (res->status == 410) continue;  // evicted before we got to it
      if (res->status != 200) {
        fail(ErrorKind::kHarness,
             "segment " + std::to_string(seq) + " returned " + std::to_string(res->status),
             "segment");
      }
      const auto* data = reinterpret_cast<const std::uint8_t*>(res->body.data());
      const std::span<const std::uint8_t> bytes(data, res->body.size());
      if (seq < report_.start_seq + planned_) {
        report_.hash_set[seq] = to_hex(sha256(bytes));
      }
      Downloaded d;
      for (const auto& [h, rec] : split_segment(bytes)) d.pts.push_back(h.pts_ms);
      if (d.pts.empty()) fail(ErrorKind::kHarness, "empty segment", "segment");
      const auto first = d.pts.front();
      const auto last = d.pts.back();
      const auto n = d.pts.size();
      d.duration_ms =
          n > 1 ? std::llround(static_cast<double>(last - first) * n / (n - 1)) : seg_ms_;
      buffer_[seq] = std::move(d);
    }
  }

  void play() {
    const double connect = unix_s();
    PlaylistView pl = poll();
    if (report_.start_seq == 0) {
      const auto offset = static_cast<std::uint64_t>(cfg_.live_edge_offset);
      if (pl.newest < offset) {
        fail(ErrorKind::kHarness, "playlist shorter than the live-edge offset", "playlist");
      }
      report_.start_seq = pl.newest - offset + 1;
    }
    planned_ = static_cast<std::uint64_t>(
        std::max(1.0, std::ceil(cfg_.duration_s * 1000.0 / static_cast<double>(seg_ms_))));
    next_fetch_ = report_.start_seq;
    fetch_through(report_.start_seq, report_.start_seq);

    // Playback clock: segment `playing` started at wall time `seg_start`.
    std::uint64_t playing = report_.start_seq;
    double seg_start = unix_s();
    report_.startup_latency_s = seg_start - connect;
    const std::uint64_t last = report_.start_seq + planned_ - 1;
    std::uint64_t known_newest = pl.newest;
    double last_poll = 0.0;
    while (true) {
      const double now = unix_s();
      if (now - last_poll >= cfg_.poll_interval_s) {
        last_poll = now;
        known_newest = std::max(known_newest, poll().newest);
        fetch_through(std::min(known_newest, last), playing);
      }
      // Advance through finished segments.
      auto it = buffer_.find(playing);
      while (it != buffer_.end() && now - seg_start >= play_ms(it) / 1000.0) {
        seg_start += play_ms(it) / 1000.0;
        ++report_.segments_played;
        buffer_.erase(it);
        if (playing == last) return;
        ++playing;
        it = buffer_.find(playing);
        if (it == buffer_.end()) {
          // Ran dry: count the stall and resume when the segment lands.
          ++report_.stall_count;
          while (!buffer_.count(playing)) {
            std::this_thread::sleep_for(std::chrono::duration<double>(cfg_.poll_interval_s));
            known_newest = std::max(known_newest, poll().newest);
            fetch_through(std::min(known_newest, last), playing);
            if (next_fetch_ > playing && !buffer_.count(playing)) ++playing;  // gone
            if (playing > last) return;
          }
          seg_start = unix_s();
          it = buffer_.find(playing);
        }
      }
      if (it != buffer_.end()) {
        // The frame on screen is the last one whose pts has come due.
        const Downloaded& d = it->second;
        const double due = static_cast<double>(d.pts.front()) + (unix_s() - seg_start) * 1000.0;
        const auto k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(
            0, std::upper_bound(d.pts.begin(), d.pts.end(), due) - d.pts.begin() - 1));
        // Skip the first segment so startup transients stay out of the
        // steady-state figure.
        if (playing > report_.start_seq) {
          report_.latency_samples_s.push_back(unix_s() - (epoch_s_ + d.pts[k] / 1000.0));
        }
      }
      std::this_thread::sleep_for(std::chrono::duration<double>(cfg_.poll_interval_s / 2));
    }
  }

  // Presentation time of a buffered segment: up to the next segment's first
  // frame when that is known, else the advertised duration.
  double play_ms(std::map<std::uint64_t, Downloaded>::const_iterator it) const {
    const auto next = buffer_.find(it->first + 1);
    if (next != buffer_.end() && !next->second.pts.empty() && !it->second.pts.empty()) {
      return static_cast<double>(next->second.pts.front() - it->second.pts.front());
    }
    return static_cast<double>(it->second.duration_ms);
  }

  const LoadSimConfig& cfg_;
  double epoch_s_;
  std::int64_t seg_ms_;
  httplib::Client client_;
  SpectatorReport report_;
  std::map<std::uint64_t, Downloaded> buffer_;
  std::uint64_t next_fetch_ = 0;
  std::uint64_t planned_ = 0;
};

}  // namespace detail

// Runs `spectators` concurrent HTTP clients against a live server. They start
// `live_edge_offset` segments behind the newest playlist entry, play segments
// back to back in real time and measure latency as wall clock minus the pts
// of the frame on screen. The start point is fixed once, just after a
// segment cut, so every client covers the same run of segments.
inline LoadReport simulate_spectators(const LoadSimConfig& cfg) {
  if (cfg.spectators <= 0) fail(ErrorKind::kValidation, "need at least one spectator", "n");
  if (!(cfg.duration_s > 0.0)) fail(ErrorKind::kValidation, "duration must be positive", "t");
  if (cfg.prefetch_segments < 0) {
    fail(ErrorKind::kValidation, "prefetch must not be negative", "prefetch");
  }
  if (cfg.live_edge_offset <= 0) {
    fail(ErrorKind::kValidation, "live-edge offset must be positive", "offset");
  }
  httplib::Client probe(cfg.host, cfg.port);
  probe.set_connection_timeout(2, 0);
  auto clock = probe.Get("/live/clock");
  if (!clock || clock->status != 200) {
    fail(ErrorKind::kHarness, "server unreachable at " + cfg.host + ":" + std::to_string(cfg.port),
         "host");
  }
  const double epoch_s =
      nlohmann::json::parse(clock->body).at("epoch_unix_ms").get<double>() / 1000.0;

  auto playlist = [&] {
    auto res = probe.Get("/live/" + cfg.rung + "/playlist.json");
    if (!res || res->status != 200) {
      fail(ErrorKind::kHarness, "no playlist for rung '" + cfg.rung + "'", "rung");
    }
    return detail::parse_playlist(res->body);
  };
  const double t0 = detail::unix_s();
  detail::PlaylistView pl = playlist();
  LoadReport report;
  report.config = cfg;
  report.segment_duration_ms = pl.target_ms;
  // Wait for enough history, then for the next cut.
  while (pl.newest < static_cast<std::uint64_t>(cfg.live_edge_offset)) {
    if (detail::unix_s() - t0 > cfg.warmup_timeout_s) {
      fail(ErrorKind::kHarness, "stream never reached the live-edge offset", "playlist");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    pl = playlist();
  }
  const std::uint64_t seen = pl.newest;
  while (pl.newest == seen) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    pl = playlist();
  }
  const std::uint64_t start_seq = pl.newest - static_cast<std::uint64_t>(cfg.live_edge_offset) + 1;

  std::vector<SpectatorReport> results(static_cast<std::size_t>(cfg.spectators));
  std::vector<std::thread> threads;
  threads.reserve(results.size());
  for (int i = 0; i < cfg.spectators; ++i) {
    threads.emplace_back([&, i] {
      detail::Spectator s(i, cfg, epoch_s, report.segment_duration_ms, start_seq);
      results[static_cast<std::size_t>(i)] = s.run();
    });
  }
  for (auto& t : threads) t.join();
  report.spectators = std::move(results);

  std::vector<double> medians;
  report.hashes_identical = true;
  report.latency_min_s = 1e300;
  report.latency_max_s = -1e300;
  for (const auto& s : report.spectators) {
    report.total_stalls += s.stall_count;
    if (!s.error.empty() || s.hash_set != report.spectators.front().hash_set) {
      report.hashes_identical = false;
    }
    if (!s.latency_samples_s.empty()) {
      medians.push_back(s.latency_median_s);
      report.latency_min_s = std::min(report.latency_min_s, s.latency_min_s);
      report.latency_max_s = std::max(report.latency_max_s, s.latency_max_s);
    }
  }
  if (medians.empty()) report.latency_min_s = report.latency_max_s = 0.0;
  report.latency_median_s = median(medians);
  report.wall_s = detail::unix_s() - t0;
  return report;
}

}  // namespace funnel::fanout

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
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include <zlib.h>

#include "funnel/error.hpp"
#include "funnel/hash.hpp"
#include "funnel/render/frame.hpp"

namespace funnel::fanout {

// Wire header shared by /media messages and segment payloads. All integers
// are little-endian.
//
//   off size field
//     0    4 magic "SFNL"
//     4    1 camera_id (RigMode value)
//     5    1 flags
//     6    2 width
//     8    2 height
//    10    8 pts_ms
//    18    4 payload_len
//    22    4 crc32 of the payload bytes as sent
inline constexpr std::size_t kHeaderSize = 26;
inline constexpr char kMagic[4] = {'S', 'F', 'N', 'L'};

inline constexpr std::uint8_t kFlagThumbnail = 1u << 0;
inline constexpr std::uint8_t kFlagDeflate = 1u << 1;

struct FrameHeader {
  std::uint8_t camera_id = 0;
  std::uint8_t flags = 0;
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::uint64_t pts_ms = 0;
  std::uint32_t payload_len = 0;
  std::uint32_t crc32 = 0;

  bool operator==(const FrameHeader&) const = default;
};

namespace detail {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename T>
T get_le(const std::uint8_t* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(p[i]) << (8 * i));
  return v;
}

}  // namespace detail

inline void write_header(std::vector<std::uint8_t>& out, const FrameHeader& h) {
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(h.camera_id);
  out.push_back(h.flags);
  detail::put_le(out, h.width);
  detail::put_le(out, h.height);
  detail::put_le(out, h.pts_ms);
  detail::put_le(out, h.payload_len);
  detail::put_le(out, h.crc32);
}

inline FrameHeader read_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) {
    fail(ErrorKind::kFormat, "frame record shorter than its header", "header");
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    fail(ErrorKind::kFormat, "bad frame record magic", "magic");
  }
  const std::uint8_t* p = bytes.data();
  FrameHeader h;
  h.camera_id = p[4];
  h.flags = p[5];
  h.width = detail::get_le<std::uint16_t>(p + 6);
  h.height = detail::get_le<std::uint16_t>(p + 8);
  h.pts_ms = detail::get_le<std::uint64_t>(p + 10);
  h.payload_len = detail::get_le<std::uint32_t>(p + 18);
  h.crc32 = detail::get_le<std::uint32_t>(p + 22);
  return h;
}

inline std::vector<std::uint8_t> deflate_bytes(std::span<const std::uint8_t> in, int level) {
  uLongf cap = compressBound(static_cast<uLong>(in.size()));
  std::vector<std::uint8_t> out(cap);
  if (compress2(out.data(), &cap, in.data(), static_cast<uLong>(in.size()), level) != Z_OK) {
    fail(ErrorKind::kStream, "zlib compression failed", "payload");
  }
  out.resize(cap);
  return out;
}

inline std::vector<std::uint8_t> inflate_bytes(std::span<const std::uint8_t> in,
                                               std::size_t expected) {
  std::vector<std::uint8_t> out(expected);
  uLongf len = static_cast<uLongf>(expected);
  const int rc = uncompress(out.data(), &len, in.data(), static_cast<uLong>(in.size()));
  if (rc != Z_OK || len != expected) {
    fail(ErrorKind::kFormat, "payload does not inflate to width*height*3 bytes", "payload");
  }
  return out;
}

struct EncodeOptions {
  bool thumbnail = false;
  bool deflate = false;
  int level = 1;
};

inline std::vector<std::uint8_t> encode_record(const render::Frame& f, EncodeOptions opt = {}) {
  if (f.width <= 0 || f.height <= 0 || f.width > 0xFFFF || f.height > 0xFFFF) {
    fail(ErrorKind::kInputDomain, "frame dimensions do not fit the header", "width");
  }
  if (f.pts_ms < 0) fail(ErrorKind::kInputDomain, "negative pts", "pts_ms");
  std::vector<std::uint8_t> packed;
  std::span<const std::uint8_t> payload(f.pixels);
  if (opt.deflate) {
    packed = deflate_bytes(payload, opt.level);
    payload = packed;
  }
  FrameHeader h;
  h.camera_id = static_cast<std::uint8_t>(f.camera_label);
  h.flags = static_cast<std::uint8_t>((opt.thumbnail ? kFlagThumbnail : 0) |
                                      (opt.deflate ? kFlagDeflate : 0));
  h.width = static_cast<std::uint16_t>(f.width);
  h.height = static_cast<std::uint16_t>(f.height);
  h.pts_ms = static_cast<std::uint64_t>(f.pts_ms);
  h.payload_len = static_cast<std::uint32_t>(payload.size());
  h.crc32 = crc32_of(payload);
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + payload.size());
  write_header(out, h);
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

struct DecodedRecord {
  FrameHeader header;
  render::Frame frame;
  std::size_t consumed = 0;
};

// Parses one record from the front of `bytes`, verifying length and checksum.
inline DecodedRecord decode_record(std::span<const std::uint8_t> bytes) {
  DecodedRecord d;
  d.header = read_header(bytes);
  const FrameHeader& h = d.header;
  if (bytes.size() - kHeaderSize < h.payload_len) {
    fail(ErrorKind::kFormat, "frame record payload truncated", "payload_len");
  }
  if (h.camera_id > 4) fail(ErrorKind::kFormat, "unknown camera id", "camera_id");
  if (h.flags & ~(kFlagThumbnail | kFlagDeflate)) {
    fail(ErrorKind::kFormat, "unknown flag bits", "flags");
  }
  if (h.width == 0 || h.height == 0) fail(ErrorKind::kFormat, "zero-size frame", "width");
  const auto payload = bytes.subspan(kHeaderSize, h.payload_len);
  if (crc32_of(payload) != h.crc32) fail(ErrorKind::kFormat, "crc32 mismatch", "crc32");
  const std::size_t raw = static_cast<std::size_t>(h.width) * h.height * 3;
  d.frame.width = h.width;
  d.frame.height = h.height;
  d.frame.camera_label = static_cast<rig::RigMode>(h.camera_id);
  d.frame.pts_ms = static_cast<std::int64_t>(h.pts_ms);
  if (h.flags & kFlagDeflate) {
    d.frame.pixels = inflate_bytes(payload, raw);
  } else {
    if (payload.size() != raw) {
      fail(ErrorKind::kFormat, "payload is not width*height*3 bytes", "payload_len");
    }
    d.frame.pixels.assign(payload.begin(), payload.end());
  }
  d.consumed = kHeaderSize + h.payload_len;
  return d;
}

// Segment payloads are a sequence of u32 length prefixes, each followed by
// one frame record.
inline void append_prefixed(std::vector<std::uint8_t>& out, std::span<const std::uint8_t> record) {
  detail::put_le(out, static_cast<std::uint32_t>(record.size()));
  out.insert(out.end(), record.begin(), record.end());
}

// Walks the records of a segment payload, returning each header and the
// record bytes. Cheap: payloads are not decoded.
inline std::vector<std::pair<FrameHeader, std::span<const std::uint8_t>>> split_segment(
    std::span<const std::uint8_t> payload) {
  std::vector<std::pair<FrameHeader, std::span<const std::uint8_t>>> out;
  std::size_t off = 0;
  while (off < payload.size()) {
    if (payload.size() - off < 4) fail(ErrorKind::kFormat, "truncated length prefix", "segment");
    const auto len = detail::get_le<std::uint32_t>(payload.data() + off);
    off += 4;
    if (payload.size() - off < len) fail(ErrorKind::kFormat, "truncated record", "segment");
    const auto rec = payload.subspan(off, len);
    const FrameHeader h = read_header(rec);
    if (kHeaderSize + h.payload_len != len) {
      fail(ErrorKind::kFormat, "record length disagrees with its header", "segment");
    }
    out.emplace_back(h, rec);
    off += len;
  }
  return out;
}

}  // namespace funnel::fanout

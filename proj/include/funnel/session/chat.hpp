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
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "funnel/error.hpp"
#include "funnel/session/signaling.hpp"

namespace funnel::session {

inline constexpr std::size_t kMaxChatChars = 500;

// Number of code points in `s`, or nullopt if it is not well-formed UTF-8.
inline std::optional<std::size_t> utf8_length(std::string_view s) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.size();) {
    const auto b = static_cast<unsigned char>(s[i]);
    int extra;
    std::uint32_t cp;
    if (b < 0x80) {
      extra = 0;
      cp = b;
    } else if ((b & 0xE0) == 0xC0) {
      extra = 1;
      cp = b & 0x1F;
    } else if ((b & 0xF0) == 0xE0) {
      extra = 2;
      cp = b & 0x0F;
    } else if ((b & 0xF8) == 0xF0) {
      extra = 3;
      cp = b & 0x07;
    } else {
      return std::nullopt;
    }
    if (i + extra >= s.size()) return std::nullopt;
    for (int k = 1; k <= extra; ++k) {
      const auto c = static_cast<unsigned char>(s[i + k]);
      if ((c & 0xC0) != 0x80) return std::nullopt;
      cp = (cp << 6) | (c & 0x3F);
    }
    static constexpr std::uint32_t kMin[] = {0, 0x80, 0x800, 0x10000};
    if (cp < kMin[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      return std::nullopt;
    }
    i += extra + 1;
    ++n;
  }
  return n;
}

struct ChatMessage {
  std::uint64_t msg_id = 0;
  std::string sender;
  Role sender_role = Role::kSpectator;
  std::string text;
  std::int64_t t_ms = 0;
  bool relayed = false;

  bool operator==(const ChatMessage&) const = default;
};

inline nlohmann::json to_json(const ChatMessage& m) {
  return {{"msg_id", m.msg_id}, {"sender", m.sender}, {"sender_role", to_string(m.sender_role)},
          {"text", m.text},     {"t_ms", m.t_ms},     {"relayed", m.relayed}};
}

// Public chat, append-only. Ids start at 1 and only grow.
class ChatLedger {
 public:
  std::uint64_t ingest(std::string sender, Role role, std::string text, std::int64_t t_ms) {
    if (role == Role::kVrHost) {
      fail(ErrorKind::kAuth, "the VR host speaks, it does not chat", "sender_role");
    }
    const auto len = utf8_length(text);
    if (!len) fail(ErrorKind::kValidation, "text is not valid UTF-8", "text");
    if (*len == 0) fail(ErrorKind::kValidation, "text is empty", "text");
    if (*len > kMaxChatChars) {
      fail(ErrorKind::kValidation, "text exceeds 500 characters", "text");
    }
    messages_.push_back({++last_id_, std::move(sender), role, std::move(text), t_ms, false});
    return last_id_;
  }

  const ChatMessage* find(std::uint64_t id) const {
    if (id == 0 || id > messages_.size()) return nullptr;
    return &messages_[id - 1];
  }

  // Flags the message relayed. Relaying twice is a state error.
  const ChatMessage& mark_relayed(std::uint64_t id) {
    if (id == 0 || id > messages_.size()) {
      fail(ErrorKind::kValidation, "unknown msg_id " + std::to_string(id), "msg_id");
    }
    ChatMessage& m = messages_[id - 1];
    if (m.relayed) fail(ErrorKind::kState, "message already relayed", "msg_id");
    m.relayed = true;
    return m;
  }

  const std::vector<ChatMessage>& messages() const { return messages_; }

  void write_jsonl(std::ostream& out) const {
    for (const ChatMessage& m : messages_) out << to_json(m).dump() << '\n';
  }

  bool operator==(const ChatLedger&) const = default;

 private:
  std::vector<ChatMessage> messages_;
  std::uint64_t last_id_ = 0;
};

enum class AudioDest { kVrHost, kCoHost, kSpectators };

inline std::string_view to_string(AudioDest d) {
  switch (d) {
    case AudioDest::kVrHost:
      return "vr_host";
    case AudioDest::kCoHost:
      return "co_host";
    case AudioDest::kSpectators:
      return "spectators";
  }
  return "spectators";
}

struct AudioPacket {
  Role source_role = Role::kVrHost;
  std::vector<std::uint8_t> payload;
  std::int64_t t_ms = 0;
};

// Destinations for a packet. The payload is never looked at. Spectators have
// no audio path.
inline std::vector<AudioDest> route_audio(bool on_air, const AudioPacket& pkt) {
  switch (pkt.source_role) {
    case Role::kVrHost:
      if (on_air) return {AudioDest::kCoHost, AudioDest::kSpectators};
      return {AudioDest::kCoHost};
    case Role::kCoHost:
      return {AudioDest::kVrHost};
    case Role::kSpectator:
      return {};
  }
  return {};
}

}  // namespace funnel::session

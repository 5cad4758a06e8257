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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "funnel/error.hpp"
#include "funnel/hash.hpp"

namespace funnel::session {

enum class Role { kVrHost, kCoHost, kSpectator };

inline std::string_view to_string(Role r) {
  switch (r) {
    case Role::kVrHost:
      return "vr_host";
    case Role::kCoHost:
      return "co_host";
    case Role::kSpectator:
      return "spectator";
  }
  return "spectator";
}

inline std::optional<Role> parse_role(std::string_view s) {
  if (s == "vr_host") return Role::kVrHost;
  if (s == "co_host") return Role::kCoHost;
  if (s == "spectator") return Role::kSpectator;
  return std::nullopt;
}

enum class ConnState { kJoined, kNegotiating, kConnected, kClosed };

inline std::string_view to_string(ConnState s) {
  switch (s) {
    case ConnState::kJoined:
      return "joined";
    case ConnState::kNegotiating:
      return "negotiating";
    case ConnState::kConnected:
      return "connected";
    case ConnState::kClosed:
      return "closed";
  }
  return "closed";
}

namespace msg {
struct Join {
  Role requested_role = Role::kCoHost;
  std::string client_id;
  bool operator==(const Join&) const = default;
};
struct RoleAssigned {
  Role role = Role::kCoHost;
  std::string session_token;
  bool operator==(const RoleAssigned&) const = default;
};
struct Offer {
  std::string sdp_blob;
  bool operator==(const Offer&) const = default;
};
struct Answer {
  std::string sdp_blob;
  bool operator==(const Answer&) const = default;
};
struct Candidate {
  std::string blob;
  bool operator==(const Candidate&) const = default;
};
struct Rejected {
  std::string reason;
  bool operator==(const Rejected&) const = default;
};
struct Bye {
  bool operator==(const Bye&) const = default;
};
struct ErrorMsg {
  std::string reason;
  bool operator==(const ErrorMsg&) const = default;
};
}  // namespace msg

using SignalMessage = std::variant<msg::Join, msg::RoleAssigned, msg::Offer, msg::Answer,
                                   msg::Candidate, msg::Rejected, msg::Bye, msg::ErrorMsg>;

inline nlohmann::json to_json(const SignalMessage& m) {
  return std::visit(
      [](const auto& b) -> nlohmann::json {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, msg::Join>) {
          return {{"type", "join"},
                  {"requested_role", to_string(b.requested_role)},
                  {"client_id", b.client_id}};
        } else if constexpr (std::is_same_v<T, msg::RoleAssigned>) {
          return {{"type", "role_assigned"},
                  {"role", to_string(b.role)},
                  {"session_token", b.session_token}};
        } else if constexpr (std::is_same_v<T, msg::Offer>) {
          return {{"type", "offer"}, {"sdp_blob", b.sdp_blob}};
        } else if constexpr (std::is_same_v<T, msg::Answer>) {
          return {{"type", "answer"}, {"sdp_blob", b.sdp_blob}};
        } else if constexpr (std::is_same_v<T, msg::Candidate>) {
          return {{"type", "candidate"}, {"blob", b.blob}};
        } else if constexpr (std::is_same_v<T, msg::Rejected>) {
          return {{"type", "rejected"}, {"reason", b.reason}};
        } else if constexpr (std::is_same_v<T, msg::Bye>) {
          return {{"type", "bye"}};
        } else {
          return {{"type", "error"}, {"reason", b.reason}};
        }
      },
      m);
}

namespace detail {
inline std::string string_field(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    fail(ErrorKind::kValidation, std::string("missing string field '") + key + "'", key);
  }
  return it->get<std::string>();
}
}  // namespace detail

inline SignalMessage signal_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorKind::kFormat, "signal message must be a JSON object", "type");
  const std::string type = detail::string_field(j, "type");
  if (type == "join") {
    const auto role = parse_role(detail::string_field(j, "requested_role"));
    if (!role) fail(ErrorKind::kValidation, "unknown role", "requested_role");
    msg::Join m{*role, detail::string_field(j, "client_id")};
    if (m.client_id.empty() || m.client_id.size() > 128) {
      fail(ErrorKind::kValidation, "client_id must be 1..128 bytes", "client_id");
    }
    return m;
  }
  if (type == "role_assigned") {
    const auto role = parse_role(detail::string_field(j, "role"));
    if (!role) fail(ErrorKind::kValidation, "unknown role", "role");
    return msg::RoleAssigned{*role, detail::string_field(j, "session_token")};
  }
  if (type == "offer") return msg::Offer{detail::string_field(j, "sdp_blob")};
  if (type == "answer") return msg::Answer{detail::string_field(j, "sdp_blob")};
  if (type == "candidate") return msg::Candidate{detail::string_field(j, "blob")};
  if (type == "rejected") return msg::Rejected{detail::string_field(j, "reason")};
  if (type == "bye") return msg::Bye{};
  if (type == "error") return msg::ErrorMsg{detail::string_field(j, "reason")};
  fail(ErrorKind::kValidation, "unknown signal type '" + type + "'", "type");
}

struct Outbound {
  std::string to;  // client id
  SignalMessage message;
  bool operator==(const Outbound&) const = default;
};

struct ClientEntry {
  Role role = Role::kCoHost;
  ConnState state = ConnState::kJoined;
  std::string token;
  bool operator==(const ClientEntry&) const = default;
};

// Role registry plus the offer/answer relay between the VR host and the
// co-host. Pure state machine; transports feed it messages and deliver the
// returned outbound list.
class Signaling {
 public:
  explicit Signaling(std::string token_seed = "funnel") : seed_(std::move(token_seed)) {}

  std::vector<Outbound> handle(const std::string& client_id, const SignalMessage& m) {
    std::vector<Outbound> out;
    if (const auto* join = std::get_if<msg::Join>(&m)) {
      on_join(client_id, *join, out);
      return out;
    }
    ClientEntry* self = active(client_id);
    if (!self) {
      out.push_back({client_id, msg::ErrorMsg{"not_joined"}});
      return out;
    }
    const std::optional<std::string> peer = counterpart(self->role);
    std::visit(
        [&](const auto& b) {
          using T = std::decay_t<decltype(b)>;
          if constexpr (std::is_same_v<T, msg::Offer>) {
            if (!peer) {
              out.push_back({client_id, msg::ErrorMsg{"no_peer"}});
              return;
            }
            if (self->state != ConnState::kJoined) {
              out.push_back({client_id, msg::ErrorMsg{"offer_in_progress"}});
              return;
            }
            self->state = ConnState::kNegotiating;
            clients_.at(*peer).state = ConnState::kNegotiating;
            offerer_ = client_id;
            out.push_back({*peer, b});
          } else if constexpr (std::is_same_v<T, msg::Answer>) {
            if (!peer || self->state != ConnState::kNegotiating || offerer_ == client_id) {
              out.push_back({client_id, msg::ErrorMsg{"unexpected_answer"}});
              return;
            }
            self->state = ConnState::kConnected;
            clients_.at(*peer).state = ConnState::kConnected;
            offerer_.reset();
            out.push_back({*peer, b});
          } else if constexpr (std::is_same_v<T, msg::Candidate>) {
            if (!peer) {
              out.push_back({client_id, msg::ErrorMsg{"no_peer"}});
              return;
            }
            out.push_back({*peer, b});
          } else if constexpr (std::is_same_v<T, msg::Bye>) {
            self->state = ConnState::kClosed;
            self->token.clear();
            if (peer) {
              ClientEntry& p = clients_.at(*peer);
              if (p.state != ConnState::kJoined) p.state = ConnState::kJoined;
              out.push_back({*peer, msg::Bye{}});
            }
            offerer_.reset();
          } else {
            // Server-to-client message types are not accepted from clients.
            out.push_back({client_id, msg::ErrorMsg{"unexpected_message"}});
          }
        },
        m);
    return out;
  }

  // Holder of the active slot for `role`, if any.
  std::optional<std::string> holder(Role role) const {
    for (const auto& [id, c] : clients_) {
      if (c.role == role && c.state != ConnState::kClosed) return id;
    }
    return std::nullopt;
  }

  // Role whose token matches; closed clients hold no token.
  std::optional<std::pair<std::string, Role>> authenticate(std::string_view token) const {
    if (token.empty()) return std::nullopt;
    for (const auto& [id, c] : clients_) {
      if (c.state != ConnState::kClosed && c.token == token) return std::pair{id, c.role};
    }
    return std::nullopt;
  }

  const std::map<std::string, ClientEntry>& clients() const { return clients_; }

  std::size_t active_count(Role role) const {
    std::size_t n = 0;
    for (const auto& [id, c] : clients_) n += c.role == role && c.state != ConnState::kClosed;
    return n;
  }

  bool operator==(const Signaling&) const = default;

 private:
  ClientEntry* active(const std::string& id) {
    const auto it = clients_.find(id);
    if (it == clients_.end() || it->second.state == ConnState::kClosed) return nullptr;
    return &it->second;
  }

  std::optional<std::string> counterpart(Role role) const {
    if (role == Role::kVrHost) return holder(Role::kCoHost);
    if (role == Role::kCoHost) return holder(Role::kVrHost);
    return std::nullopt;
  }

  void on_join(const std::string& client_id, const msg::Join& j, std::vector<Outbound>& out) {
    if (j.client_id != client_id) {
      out.push_back({client_id, msg::Rejected{"client_id_mismatch"}});
      return;
    }
    if (j.requested_role == Role::kSpectator) {
      out.push_back({client_id, msg::Rejected{"use_spectator_endpoint"}});
      return;
    }
    if (active(client_id)) {
      out.push_back({client_id, msg::Rejected{"already_joined"}});
      return;
    }
    if (holder(j.requested_role)) {
      out.push_back({client_id, msg::Rejected{"role_taken"}});
      return;
    }
    const std::string token = make_token(client_id);
    clients_[client_id] = ClientEntry{j.requested_role, ConnState::kJoined, token};
    out.push_back({client_id, msg::RoleAssigned{j.requested_role, token}});
  }

  std::string make_token(const std::string& client_id) {
    const std::string material = seed_ + "\n" + client_id + "\n" + std::to_string(++issued_);
    const Sha256 h = sha256(material);
    return to_hex(std::span(h.data(), 16));
  }

  std::string seed_;
  std::uint64_t issued_ = 0;
  std::map<std::string, ClientEntry> clients_;
  std::optional<std::string> offerer_;
};

}  // namespace funnel::session

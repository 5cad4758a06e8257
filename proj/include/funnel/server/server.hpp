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

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>

#include "funnel/error.hpp"
#include "funnel/fanout/frame_record.hpp"
#include "funnel/fanout/segmenter.hpp"
#include "funnel/fanout/window.hpp"
#include "funnel/scene/scenario.hpp"
#include "funnel/scene/scene.hpp"
#include "funnel/server/config.hpp"
#include "funnel/session/session.hpp"

namespace funnel::server {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

// Client id the in-process VR host simulator signs in with.
inline constexpr const char* kVrAgentId = "vr-sim";

inline std::int64_t unix_ms_now() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

// JSON-lines writer shared by the worker threads; a no-op without a path.
class JsonlWriter {
 public:
  JsonlWriter() = default;
  explicit JsonlWriter(const std::filesystem::path& path) {
    if (path.empty()) return;
    out_.open(path, std::ios::out | std::ios::trunc);
    if (!out_) fail(ErrorKind::kValidation, "cannot write " + path.string(), path.string());
  }
  bool enabled() const { return out_.is_open(); }
  void write(const nlohmann::json& j) {
    if (!out_.is_open()) return;
    const std::string line = j.dump() + "\n";
    std::lock_guard lock(mu_);
    out_ << line;
    out_.flush();
  }

 private:
  std::mutex mu_;
  std::ofstream out_;
};

// One accepted WebSocket. Writes are queued on the connection's strand;
// droppable messages (video) are skipped while the client is backed up.
class WsPeer : public std::enable_shared_from_this<WsPeer> {
 public:
  using MessageFn = std::function<void(WsPeer&, const std::string&)>;
  using CloseFn = std::function<void(WsPeer&)>;

  WsPeer(tcp::socket&& socket, std::uint64_t id, std::string path)
      : ws_(std::move(socket)), id_(id), path_(std::move(path)) {}

  std::uint64_t id() const { return id_; }
  const std::string& path() const { return path_; }
  std::uint64_t dropped() const { return dropped_.load(); }

  void start(http::request<http::string_body> req, MessageFn on_message, CloseFn on_close,
             std::function<void(WsPeer&)> on_open) {
    on_message_ = std::move(on_message);
    on_close_ = std::move(on_close);
    on_open_ = std::move(on_open);
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.read_message_max(1 << 20);
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return self->closed();
      if (self->on_open_) self->on_open_(*self);
      self->do_read();
    });
  }

  void send(std::shared_ptr<const std::string> data, bool binary, bool droppable = false) {
    net::post(ws_.get_executor(), [self = shared_from_this(), data, binary, droppable] {
      if (self->closed_) return;
      if (droppable && self->queue_.size() >= kMaxQueuedDroppable) {
        ++self->dropped_;
        return;
      }
      self->queue_.push_back({data, binary});
      if (self->queue_.size() == 1) self->do_write();
    });
  }

  void send_text(std::string text) {
    send(std::make_shared<const std::string>(std::move(text)), false);
  }

  void close() {
    net::post(ws_.get_executor(), [self = shared_from_this()] {
      if (self->closed_) return;
      self->ws_.async_close(websocket::close_code::normal, [self](beast::error_code) {});
    });
  }

 private:
  static constexpr std::size_t kMaxQueuedDroppable = 4;

  void do_read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->closed();
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      if (self->on_message_) self->on_message_(*self, text);
      self->do_read();
    });
  }

  void do_write() {
    auto& [data, binary] = queue_.front();
    ws_.binary(binary);
    ws_.async_write(net::buffer(*data),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      if (ec) return self->closed();
                      self->queue_.pop_front();
                      if (!self->queue_.empty()) self->do_write();
                    });
  }

  void closed() {
    if (closed_) return;
    closed_ = true;
    queue_.clear();
    if (on_close_) on_close_(*this);
  }

  websocket::stream<beast::tcp_stream> ws_;
  std::uint64_t id_;
  std::string path_;
  beast::flat_buffer buffer_;
  std::deque<std::pair<std::shared_ptr<const std::string>, bool>> queue_;
  bool closed_ = false;
  std::atomic<std::uint64_t> dropped_{0};
  MessageFn on_message_;
  CloseFn on_close_;
  std::function<void(WsPeer&)> on_open_;
};

struct HttpReply {
  http::status status = http::status::ok;
  std::string content_type = "application/json";
  std::string body;
};

inline http::status status_for(const nlohmann::json& outcome) {
  if (outcome.value("ok", false)) return http::status::ok;
  const std::string kind = outcome["error"].value("kind", "");
  if (kind == "auth") return http::status::forbidden;
  if (kind == "state") return http::status::conflict;
  if (kind == "not_found") return http::status::not_found;
  if (kind == "gone") return http::status::gone;
  if (kind == "harness" || kind == "stream") return http::status::internal_server_error;
  return http::status::bad_request;
}

inline nlohmann::json error_outcome(ErrorKind kind, const std::string& message,
                                    const std::string& field) {
  return session::CommandOutcome::failure(Error(kind, message, field)).to_json();
}

struct ServeOptions {
  std::filesystem::path metrics_path;
  std::filesystem::path command_log_path;  // overrides server.command_log
};

// The whole live system in one process: signaling, interaction API, co-host
// media, chat, and the segment fan-out, driven by a fixed-rate session clock.
class FunnelServer {
 public:
  FunnelServer(Config cfg, ServeOptions opt = {})
      : cfg_(std::move(cfg)),
        opt_(std::move(opt)),
        intr_(cfg_.session_config().intrinsics()),
        segmenter_(cfg_.segmenter_config()),
        window_(cfg_.fanout.rungs, static_cast<std::size_t>(cfg_.fanout.window),
                cfg_.segmenter_config().segment_duration_ms),
        metrics_(opt_.metrics_path) {
    validate(cfg_);
    if (cfg_.server.scene.empty()) {
      fail(ErrorKind::kValidation, "config server.scene is required", "server.scene");
    }
    const auto scene_path = cfg_.resolve(cfg_.server.scene);
    scene_ = std::make_shared<const scene::Scene>(scene::load_scene(scene_path));
    if (!cfg_.server.scenario.empty()) {
      script_ = std::make_shared<const scene::ScenarioScript>(
          scene::load_scenario(cfg_.resolve(cfg_.server.scenario)));
    }
    session_ = std::make_unique<session::Session>(scene_, script_, cfg_.session_config());
    const auto log_path = !opt_.command_log_path.empty()
                              ? opt_.command_log_path
                              : std::filesystem::path(cfg_.server.command_log);
    command_log_ = std::make_unique<JsonlWriter>(log_path);
    if (command_log_->enabled()) {
      session_->set_log_sink([this](const nlohmann::json& e) { command_log_->write(e); });
    }
  }

  FunnelServer(const FunnelServer&) = delete;
  FunnelServer& operator=(const FunnelServer&) = delete;
  ~FunnelServer() { stop(); }

  // Binds the listener and starts every thread. Throws when the port is busy.
  void start() {
    const auto [host, port] = cfg_.listen_endpoint();
    const auto addr = net::ip::make_address(host == "localhost" ? "127.0.0.1" : host);
    acceptor_.open(addr.is_v6() ? tcp::v6() : tcp::v4());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind({addr, port});
    acceptor_.listen(net::socket_base::max_listen_connections);
    port_ = acceptor_.local_endpoint().port();

    {
      std::lock_guard lock(session_mu_);
      // The simulated VR user is present from the first tick.
      session_->handle_signal(kVrAgentId, session::msg::Join{session::Role::kVrHost, kVrAgentId});
    }
    clock_start_ = std::chrono::steady_clock::now();
    epoch_unix_ms_ = unix_ms_now();
    running_ = true;
    do_accept();
    for (std::int64_t i = 0; i < cfg_.server.io_threads; ++i) {
      io_threads_.emplace_back([this] { ioc_.run(); });
    }
    render_thread_ = std::thread([this] { render_loop(); });
    session_thread_ = std::thread([this] { session_loop(); });
  }

  // Stops the clock, drains the render queue, closes connections and writes
  // the chat ledger. Safe to call more than once.
  void stop() {
    if (!running_.exchange(false)) return;
    {
      std::lock_guard lock(clock_mu_);
      stopping_ = true;
    }
    clock_cv_.notify_all();
    if (session_thread_.joinable()) session_thread_.join();
    frame_cv_.notify_all();
    if (render_thread_.joinable()) render_thread_.join();
    net::post(acceptor_.get_executor(), [this] { acceptor_.close(); });
    {
      std::lock_guard lock(peers_mu_);
      for (auto& [id, p] : all_peers_) {
        if (auto s = p.lock()) s->close();
      }
    }
    // Give the close frames a moment before tearing the loop down.
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    ioc_.stop();
    for (auto& t : io_threads_) t.join();
    io_threads_.clear();
    {
      std::lock_guard lock(session_mu_);
      if (command_log_->enabled()) {
        command_log_->write({{"kind", "end"}, {"tick", session_->tick_index()}});
      }
      persist_chat_ledger();
    }
  }

  std::uint16_t port() const { return port_; }
  std::int64_t epoch_unix_ms() const { return epoch_unix_ms_; }
  const Config& config() const { return cfg_; }
  const fanout::SegmentWindow& window() const { return window_; }
  std::uint64_t frames_rendered() const { return frames_rendered_.load(); }
  std::uint64_t frames_skipped() const { return frames_skipped_.load(); }

  template <typename F>
  auto with_session(F&& f) {
    std::lock_guard lock(session_mu_);
    return f(*session_);
  }

  // Routes a plain HTTP request. Exposed for in-process tests.
  HttpReply handle_http(http::verb method, std::string_view target, const std::string& body) {
    const auto q = target.find('?');
    const std::string path(target.substr(0, q));
    try {
      if (method == http::verb::get) return handle_get(path);
      if (method == http::verb::post) return handle_post(path, body);
      return json_reply(http::status::method_not_allowed,
                        error_outcome(ErrorKind::kProtocol, "method not allowed", "method"));
    } catch (const Error& e) {
      const auto out = session::CommandOutcome::failure(e).to_json();
      return json_reply(status_for(out), out);
    }
  }

 private:
  friend class HttpConn;

  static HttpReply json_reply(http::status s, const nlohmann::json& j) {
    return {s, "application/json", j.dump()};
  }
  template <typename J>
  static HttpReply json_ok(const J& j) {
    return {http::status::ok, "application/json", j.dump()};
  }

  HttpReply handle_get(const std::string& path) {
    if (path == "/live/clock") {
      return json_ok(nlohmann::json{{"epoch_unix_ms", epoch_unix_ms_},
                                    {"now_unix_ms", unix_ms_now()},
                                    {"tick_hz", cfg_.render.tick_hz}});
    }
    if (path.rfind("/live/", 0) == 0) {
      const std::string rest = path.substr(6);
      const auto slash = rest.find('/');
      const std::string rung = rest.substr(0, slash);
      const std::string tail = slash == std::string::npos ? "" : rest.substr(slash);
      if (tail == "/playlist.json") return json_ok(window_.playlist(rung));
      if (tail.rfind("/seg/", 0) == 0) {
        const std::string n = tail.substr(5);
        if (n.empty() || n.find_first_not_of("0123456789") != std::string::npos || n.size() > 19) {
          fail(ErrorKind::kValidation, "segment number must be an integer", "seq");
        }
        const auto body = window_.segment(rung, std::stoull(n));
        const auto& b = body.bytes();
        return {http::status::ok, "application/octet-stream",
                std::string(reinterpret_cast<const char*>(b.data()), b.size())};
      }
    }
    if (path == "/api/state") {
      std::lock_guard lock(session_mu_);
      nlohmann::json st = session_->state_json();
      // Tokens are credentials.
      for (auto& [id, c] : st["clients"].items()) c.erase("token");
      return json_ok(st);
    }
    if (path == "/api/chat") {
      std::lock_guard lock(session_mu_);
      nlohmann::json msgs = nlohmann::json::array();
      for (const auto& m : session_->chat_ledger().messages()) msgs.push_back(session::to_json(m));
      return json_ok(msgs);
    }
    if (path == "/watch") return page("spectator", "/live/full/playlist.json");
    if (path == "/cohost") return page("co-host console", "/signal");
    fail(ErrorKind::kNotFound, "no route for " + path, "path");
  }

  static HttpReply page(const std::string& title, const std::string& entry) {
    return {http::status::ok, "text/html; charset=utf-8",
            "<!doctype html><meta charset=utf-8><title>funnel " + title +
                "</title>"
                "<p>funnel " +
                title + " endpoint. Clients start from <code>" + entry + "</code>.</p>\n"};
  }

  HttpReply handle_post(const std::string& path, const std::string& body) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
      fail(ErrorKind::kFormat, "request body is not JSON", "body");
    }
    if (!j.is_object()) fail(ErrorKind::kFormat, "request body must be an object", "body");
    if (path == "/api/command") {
      const auto out = run_command(j);
      return json_reply(status_for(out), out);
    }
    if (path == "/api/chat") {
      const auto out = run_chat(j);
      return json_reply(status_for(out), out);
    }
    if (path == "/api/audio") {
      const auto out = run_audio(j);
      return json_reply(status_for(out), out);
    }
    fail(ErrorKind::kNotFound, "no route for " + path, "path");
  }

  static std::string string_param(const nlohmann::json& j, const char* key, bool required) {
    const auto it = j.find(key);
    if (it == j.end()) {
      if (required) fail(ErrorKind::kValidation, std::string("missing ") + key, key);
      return {};
    }
    if (!it->is_string()) fail(ErrorKind::kValidation, std::string(key) + " must be a string", key);
    return it->get<std::string>();
  }

  nlohmann::json run_command(const nlohmann::json& j) {
    const std::string token = string_param(j, "token", false);
    const std::string name = string_param(j, "cmd", true);
    const nlohmann::json params = j.contains("params") ? j["params"] : nlohmann::json::object();
    const auto t0 = std::chrono::steady_clock::now();
    nlohmann::json out;
    std::optional<nlohmann::json> relayed;
    {
      std::lock_guard lock(session_mu_);
      out = session_->command(token, name, params).to_json();
      if (name == "relay_chat" && out.value("ok", false)) {
        const auto id = params.value("msg_id", std::uint64_t{0});
        if (const auto* m = session_->chat_ledger().find(id)) relayed = session::to_json(*m);
      }
    }
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    metrics_.write({{"kind", "command"},
                    {"cmd", name},
                    {"ok", out.value("ok", false)},
                    {"handle_ms", ms},
                    {"unix_ms", unix_ms_now()}});
    if (relayed) broadcast_chat(*relayed);
    return out;
  }

  nlohmann::json run_chat(const nlohmann::json& j) {
    const std::string client = string_param(j, "client_id", true);
    const std::string text = string_param(j, "text", true);
    const std::string token = string_param(j, "token", false);
    nlohmann::json out;
    std::optional<nlohmann::json> msg;
    {
      std::lock_guard lock(session_mu_);
      out = session_->chat(client, text, token).to_json();
      if (out.value("ok", false)) {
        msg = session::to_json(
            *session_->chat_ledger().find(out["result"]["msg_id"].get<std::uint64_t>()));
      }
    }
    if (msg) broadcast_chat(*msg);
    return out;
  }

  nlohmann::json run_audio(const nlohmann::json& j) {
    const std::string token = string_param(j, "token", true);
    std::lock_guard lock(session_mu_);
    const auto who = session_->signaling().authenticate(token);
    if (!who) return error_outcome(ErrorKind::kAuth, "unknown token", "token");
    session::AudioPacket pkt;
    pkt.source_role = who->second;
    pkt.t_ms = j.value("t_ms", session_->time_ms());
    nlohmann::json dests = nlohmann::json::array();
    for (auto d : session_->route(pkt)) dests.push_back(session::to_string(d));
    return session::CommandOutcome::success({{"routed_to", dests}}).to_json();
  }

  void broadcast_chat(const nlohmann::json& message) {
    const auto text = std::make_shared<const std::string>(
        nlohmann::json{{"type", "chat"}, {"message", message}}.dump());
    std::lock_guard lock(peers_mu_);
    for (auto& [id, p] : chat_peers_) {
      if (auto s = p.lock()) s->send(text, false);
    }
  }

  void upgrade(tcp::socket&& socket, http::request<http::string_body> req) {
    const std::string target(req.target());
    const auto q = target.find('?');
    const std::string path = target.substr(0, q);
    const std::string query = q == std::string::npos ? "" : target.substr(q + 1);
    auto peer = std::make_shared<WsPeer>(std::move(socket), ++next_peer_id_, path);
    {
      std::lock_guard lock(peers_mu_);
      all_peers_[peer->id()] = peer;
    }
    auto on_close = [this](WsPeer& p) { peer_closed(p); };
    if (path == "/signal") {
      peer->start(std::move(req), [this](WsPeer& p, const std::string& t) { on_signal(p, t); },
                  on_close, {});
    } else if (path == "/relay") {
      peer->start(std::move(req), [this](WsPeer& p, const std::string& t) { on_relay(p, t); },
                  on_close, {});
    } else if (path == "/media") {
      const std::string token = query_param(query, "token");
      bool ok = false;
      {
        std::lock_guard lock(session_mu_);
        const auto who = session_->signaling().authenticate(token);
        ok = who && who->second == session::Role::kCoHost;
      }
      peer->start(std::move(req), {}, on_close, [this, ok](WsPeer& p) {
        if (!ok) {
          p.send_text(
              error_outcome(ErrorKind::kAuth, "media needs the co-host token", "token").dump());
          p.close();
          return;
        }
        std::lock_guard lock(peers_mu_);
        media_peers_[p.id()] = p.weak_from_this();
      });
    } else {  // /chat
      peer->start(std::move(req), {}, on_close, [this](WsPeer& p) {
        std::vector<nlohmann::json> backlog;
        {
          std::lock_guard lock(session_mu_);
          for (const auto& m : session_->chat_ledger().messages())
            backlog.push_back(session::to_json(m));
        }
        for (const auto& m : backlog)
          p.send_text(nlohmann::json{{"type", "chat"}, {"message", m}}.dump());
        std::lock_guard lock(peers_mu_);
        chat_peers_[p.id()] = p.weak_from_this();
      });
    }
  }

  static std::string query_param(const std::string& query, const std::string& key) {
    std::size_t pos = 0;
    while (pos <= query.size()) {
      const auto amp = query.find('&', pos);
      const std::string kv =
          query.substr(pos, amp == std::string::npos ? std::string::npos : amp - pos);
      const auto eq = kv.find('=');
      if (kv.substr(0, eq) == key) return eq == std::string::npos ? "" : kv.substr(eq + 1);
      if (amp == std::string::npos) break;
      pos = amp + 1;
    }
    return {};
  }

  void peer_closed(WsPeer& p) {
    std::optional<std::string> bound;
    {
      std::lock_guard lock(peers_mu_);
      all_peers_.erase(p.id());
      media_peers_.erase(p.id());
      chat_peers_.erase(p.id());
      const auto it = peer_client_.find(p.id());
      if (it != peer_client_.end()) {
        bound = it->second;
        client_peer_.erase(it->second);
        peer_client_.erase(it);
      }
    }
    if (!bound || !running_) return;
    // A dropped signaling socket counts as Bye.
    std::vector<session::Outbound> out;
    {
      std::lock_guard lock(session_mu_);
      const auto& clients = session_->signaling().clients();
      const auto it = clients.find(*bound);
      if (it != clients.end() && it->second.state != session::ConnState::kClosed) {
        out = session_->handle_signal(*bound, session::msg::Bye{});
      }
    }
    deliver(out, *bound, nullptr);
  }

  void on_signal(WsPeer& peer, const std::string& text) {
    session::SignalMessage m;
    try {
      m = session::signal_from_json(nlohmann::json::parse(text));
    } catch (const std::exception&) {
      peer.send_text(session::to_json(session::msg::ErrorMsg{"invalid_message"}).dump());
      return;
    }
    std::string sender;
    bool bound = false;
    {
      std::lock_guard lock(peers_mu_);
      const auto it = peer_client_.find(peer.id());
      bound = it != peer_client_.end();
      sender = bound ? it->second : "conn-" + std::to_string(peer.id());
    }
    if (const auto* j = std::get_if<session::msg::Join>(&m); j && !bound) sender = j->client_id;
    std::vector<session::Outbound> out;
    {
      std::lock_guard lock(session_mu_);
      out = session_->handle_signal(sender, m);
      agent_react(out);
    }
    for (const auto& o : out) {
      if (o.to == sender && std::holds_alternative<session::msg::RoleAssigned>(o.message)) {
        std::lock_guard lock(peers_mu_);
        peer_client_[peer.id()] = sender;
        client_peer_[sender] = peer.weak_from_this();
      }
    }
    deliver(out, sender, &peer);
  }

  // The VR host answers a new co-host with an offer, as the headset app
  // would. Called with the session lock held; appends what it sends.
  void agent_react(std::vector<session::Outbound>& out) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      const auto* ra = std::get_if<session::msg::RoleAssigned>(&out[i].message);
      if (ra && ra->role == session::Role::kCoHost) {
        const auto more = session_->handle_signal(
            kVrAgentId, session::msg::Offer{"vr-sim offer " + std::to_string(++offers_sent_)});
        out.insert(out.end(), more.begin(), more.end());
      }
    }
  }

  void deliver(const std::vector<session::Outbound>& out, const std::string& sender, WsPeer* peer) {
    for (const auto& o : out) {
      if (o.to == kVrAgentId) continue;  // consumed by the simulator
      const std::string text = session::to_json(o.message).dump();
      if (o.to == sender && peer) {
        peer->send_text(text);
        continue;
      }
      std::shared_ptr<WsPeer> target;
      {
        std::lock_guard lock(peers_mu_);
        const auto it = client_peer_.find(o.to);
        if (it != client_peer_.end()) target = it->second.lock();
      }
      if (target) target->send_text(text);
    }
  }

  void on_relay(WsPeer& peer, const std::string& text) {
    nlohmann::json reply;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
      if (!j.is_object()) fail(ErrorKind::kFormat, "message must be an object", "body");
      reply = run_command(j);
    } catch (const nlohmann::json::exception&) {
      reply = error_outcome(ErrorKind::kFormat, "message is not JSON", "body");
    } catch (const Error& e) {
      reply = session::CommandOutcome::failure(e).to_json();
    }
    if (j.is_object() && j.contains("id")) reply["id"] = j["id"];
    peer.send_text(reply.dump());
  }

  void do_accept();

  void session_loop() {
    const std::chrono::duration<double> period(1.0 / cfg_.render.tick_hz);
    {
      std::lock_guard lock(session_mu_);
      submit(session_->snapshot());
    }
    while (true) {
      std::uint64_t tick = 0;
      {
        std::lock_guard lock(session_mu_);
        tick = session_->tick_index();
      }
      const auto wake =
          clock_start_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                             period * static_cast<double>(tick + 1));
      {
        std::unique_lock lock(clock_mu_);
        if (clock_cv_.wait_until(lock, wake, [this] { return stopping_; })) break;
      }
      // Ticks follow the wall clock; a late wake-up runs the missed ticks.
      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start_).count();
      const auto due = std::max<std::uint64_t>(
          tick + 1, static_cast<std::uint64_t>(elapsed * cfg_.render.tick_hz));
      std::lock_guard lock(session_mu_);
      session_->advance_to_tick(due);
      submit(session_->snapshot());
    }
  }

  void submit(session::RenderSnapshot snap) {
    {
      std::lock_guard lock(frame_mu_);
      if (pending_) ++frames_skipped_;
      pending_ = std::move(snap);
    }
    frame_cv_.notify_one();
  }

  void render_loop() {
    const double thumb_step_ms = 1000.0 / (cfg_.render.thumbnail_hz * 4.0);
    double next_thumb_ms = 0.0;
    std::size_t thumb_rr = 0;
    while (true) {
      session::RenderSnapshot snap;
      {
        std::unique_lock lock(frame_mu_);
        frame_cv_.wait(lock, [this] { return pending_.has_value() || !running_; });
        if (!pending_) break;
        snap = std::move(*pending_);
        pending_.reset();
      }
      const auto t0 = std::chrono::steady_clock::now();
      const render::Frame frame =
          session::render_view(*scene_, snap, intr_, render::Audience::kSpectatorOnly);
      const auto t1 = std::chrono::steady_clock::now();

      bool have_media = false;
      {
        std::lock_guard lock(peers_mu_);
        have_media = !media_peers_.empty();
      }
      if (have_media) {
        auto rec = fanout::encode_record(frame, {false, true, 1});
        send_media(std::make_shared<const std::string>(rec.begin(), rec.end()));
        // The four presets take turns so each refreshes at thumbnail_hz.
        if (static_cast<double>(snap.pts_ms) >= next_thumb_ms) {
          next_thumb_ms = static_cast<double>(snap.pts_ms) + thumb_step_ms;
          const rig::RigMode mode = rig::kAllModes[1 + thumb_rr++ % 4];
          const render::Frame thumb = render::render_thumbnail(
              *scene_, snap.avatar, snap.rigs[static_cast<std::size_t>(mode)], intr_, snap.overlays,
              snap.pts_ms);
          auto trec = fanout::encode_record(thumb, {true, false, 1});
          send_media(std::make_shared<const std::string>(trec.begin(), trec.end()));
        }
      }

      std::optional<fanout::StreamSegment> seg;
      try {
        seg = segmenter_.ingest(frame);
      } catch (const Error& e) {
        metrics_.write({{"kind", "stream_error"}, {"message", e.what()}, {"pts_ms", snap.pts_ms}});
      }
      const auto t2 = std::chrono::steady_clock::now();
      if (seg) {
        nlohmann::json sizes = nlohmann::json::array();
        for (const auto& p : seg->payloads) sizes.push_back(p.size());
        metrics_.write({{"kind", "segment"},
                        {"seq", seg->seq},
                        {"duration_ms", seg->duration_ms},
                        {"frames", seg->frame_count},
                        {"first_pts_ms", seg->first_pts_ms},
                        {"bytes", sizes},
                        {"cut_unix_ms", unix_ms_now()}});
        window_.publish(std::move(*seg));
      }
      ++frames_rendered_;
      using ms = std::chrono::duration<double, std::milli>;
      metrics_.write({{"kind", "tick"},
                      {"pts_ms", snap.pts_ms},
                      {"render_ms", ms(t1 - t0).count()},
                      {"encode_ms", ms(t2 - t1).count()}});
    }
  }

  void send_media(std::shared_ptr<const std::string> bytes) {
    std::lock_guard lock(peers_mu_);
    for (auto& [id, p] : media_peers_) {
      if (auto s = p.lock()) s->send(bytes, true, true);
    }
  }

  void persist_chat_ledger() {
    const auto path = std::filesystem::path(cfg_.server.chat_ledger);
    if (path.empty()) return;
    std::ofstream out(path, std::ios::out | std::ios::trunc);
    if (!out) return;
    session_->chat_ledger().write_jsonl(out);
  }

  Config cfg_;
  ServeOptions opt_;
  geom::CameraIntrinsics intr_;
  std::shared_ptr<const scene::Scene> scene_;
  std::shared_ptr<const scene::ScenarioScript> script_;

  std::mutex session_mu_;
  std::unique_ptr<session::Session> session_;
  std::uint64_t offers_sent_ = 0;

  fanout::Segmenter segmenter_;  // render thread only
  fanout::SegmentWindow window_;

  JsonlWriter metrics_;
  std::unique_ptr<JsonlWriter> command_log_;

  net::io_context ioc_;
  tcp::acceptor acceptor_{net::make_strand(ioc_)};
  std::vector<std::thread> io_threads_;
  std::uint16_t port_ = 0;

  std::atomic<bool> running_{false};
  std::mutex clock_mu_;
  std::condition_variable clock_cv_;
  bool stopping_ = false;
  std::chrono::steady_clock::time_point clock_start_;
  std::int64_t epoch_unix_ms_ = 0;
  std::thread session_thread_;

  std::mutex frame_mu_;
  std::condition_variable frame_cv_;
  std::optional<session::RenderSnapshot> pending_;
  std::thread render_thread_;
  std::atomic<std::uint64_t> frames_rendered_{0};
  std::atomic<std::uint64_t> frames_skipped_{0};

  std::atomic<std::uint64_t> next_peer_id_{0};
  std::mutex peers_mu_;
  std::map<std::uint64_t, std::weak_ptr<WsPeer>> all_peers_;
  std::map<std::uint64_t, std::weak_ptr<WsPeer>> media_peers_;
  std::map<std::uint64_t, std::weak_ptr<WsPeer>> chat_peers_;
  std::map<std::uint64_t, std::string> peer_client_;
  std::map<std::string, std::weak_ptr<WsPeer>> client_peer_;
};

// Reads requests off one TCP connection until it closes or upgrades.
class HttpConn : public std::enable_shared_from_this<HttpConn> {
 public:
  HttpConn(tcp::socket&& socket, FunnelServer& server)
      : stream_(std::move(socket)), server_(server) {}

  void start() {
    net::dispatch(stream_.get_executor(), [self = shared_from_this()] { self->do_read(); });
  }

 private:
  void do_read() {
    parser_.emplace();
    parser_->body_limit(1 << 20);
    stream_.expires_after(std::chrono::seconds(60));
    http::async_read(
        stream_, buffer_, *parser_,
        [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec == http::error::end_of_stream) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    if (ec) return;
    auto req = parser_->release();
    if (websocket::is_upgrade(req)) {
      const std::string target(req.target());
      const std::string path = target.substr(0, target.find('?'));
      if (path == "/signal" || path == "/relay" || path == "/media" || path == "/chat") {
        stream_.expires_never();
        server_.upgrade(stream_.release_socket(), std::move(req));
        return;
      }
    }
    HttpReply r = server_.handle_http(req.method(), req.target(), req.body());
    auto res = std::make_shared<http::response<http::string_body>>(r.status, req.version());
    res->set(http::field::server, "funnel");
    res->set(http::field::content_type, r.content_type);
    res->set(http::field::cache_control, "no-cache");
    res->keep_alive(req.keep_alive());
    res->body() = std::move(r.body);
    res->prepare_payload();
    http::async_write(stream_, *res,
                      [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
                        if (ec) return;
                        if (res->need_eof()) {
                          self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
                          return;
                        }
                        self->do_read();
                      });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  std::optional<http::request_parser<http::string_body>> parser_;
  FunnelServer& server_;
};

inline void FunnelServer::do_accept() {
  acceptor_.async_accept(net::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
    if (ec == net::error::operation_aborted || !acceptor_.is_open()) return;
    if (!ec) std::make_shared<HttpConn>(std::move(socket), *this)->start();
    do_accept();
  });
}

}  // namespace funnel::server

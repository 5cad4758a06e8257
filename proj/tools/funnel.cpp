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

// funnel serve|loadsim|replay. Exit codes: 0 ok, 1 runtime, 2 usage/config.

#include <csignal>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "funnel/fanout/loadsim.hpp"
#include "funnel/server/config.hpp"
#include "funnel/server/server.hpp"

namespace {

using funnel::Error;
using funnel::ErrorKind;

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

bool is_config_error(const Error& e) {
  return e.kind() == ErrorKind::kValidation || e.kind() == ErrorKind::kFormat ||
         e.kind() == ErrorKind::kNotFound;
}

int report(const Error& e, int code) {
  std::cerr << "funnel: " << e.what();
  if (!e.field().empty()) std::cerr << " [" << e.field() << "]";
  std::cerr << "\n";
  return code;
}

funnel::server::Config load(const std::string& path) {
  const auto env = funnel::server::process_environment();
  if (path.empty()) return funnel::server::parse_config("", env);
  return funnel::server::load_config(path, env);
}

int serve(const std::string& config_path, const std::string& listen,
          const funnel::server::ServeOptions& opt) {
  // Signals are taken synchronously by this thread; workers never see them.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  std::unique_ptr<funnel::server::FunnelServer> server;
  try {
    auto cfg = load(config_path);
    if (!listen.empty()) {
      cfg.server.listen = listen;
      funnel::server::validate(cfg);
    }
    server = std::make_unique<funnel::server::FunnelServer>(cfg, opt);
  } catch (const Error& e) {
    return report(e, is_config_error(e) ? kExitUsage : kExitRuntime);
  }
  try {
    server->start();
  } catch (const std::exception& e) {
    std::cerr << "funnel: cannot listen on " << server->config().server.listen << ": " << e.what()
              << "\n";
    return kExitRuntime;
  }
  const auto host = server->config().listen_endpoint().first;
  std::cout << "listening on http://" << host << ":" << server->port() << std::endl;
  int sig = 0;
  sigwait(&set, &sig);
  std::cout << "shutting down" << std::endl;
  server->stop();
  return 0;
}

int loadsim(const funnel::fanout::LoadSimConfig& cfg, const std::string& out_path) {
  funnel::fanout::LoadReport rep;
  try {
    rep = funnel::fanout::simulate_spectators(cfg);
  } catch (const Error& e) {
    return report(e, e.kind() == ErrorKind::kValidation ? kExitUsage : kExitRuntime);
  }
  const std::string text = funnel::fanout::to_json(rep).dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(out_path);
    if (!out) {
      std::cerr << "funnel: cannot write " << out_path << "\n";
      return kExitRuntime;
    }
    out << text;
    std::cout << "spectators " << rep.spectators.size() << ", stalls " << rep.total_stalls
              << ", latency median " << rep.latency_median_s << " s, hashes identical "
              << (rep.hashes_identical ? "yes" : "no") << "\n";
  }
  return 0;
}

int replay(const std::string& config_path, const std::string& log_path) {
  try {
    const auto cfg = load(config_path);
    if (cfg.server.scene.empty()) {
      throw Error(ErrorKind::kValidation, "config server.scene is required", "server.scene");
    }
    auto scene = std::make_shared<const funnel::scene::Scene>(
        funnel::scene::load_scene(cfg.resolve(cfg.server.scene)));
    std::shared_ptr<const funnel::scene::ScenarioScript> script;
    if (!cfg.server.scenario.empty()) {
      script = std::make_shared<const funnel::scene::ScenarioScript>(
          funnel::scene::load_scenario(cfg.resolve(cfg.server.scenario)));
    }
    std::ifstream in(log_path);
    if (!in) throw Error(ErrorKind::kNotFound, "cannot open log " + log_path, log_path);
    auto scfg = cfg.session_config();
    scfg.render_tablet = false;  // the tablet image is not part of the digest
    funnel::session::Session s(scene, script, scfg);
    const auto rep = funnel::session::replay(s, in);
    nlohmann::json j{{"digest", rep.digest}, {"entries", rep.entries}, {"tick", s.tick_index()}};
    j["halted_at"] = rep.halted_at ? nlohmann::json(*rep.halted_at) : nlohmann::json();
    j["diverged_at"] = rep.diverged_at ? nlohmann::json(*rep.diverged_at) : nlohmann::json();
    if (rep.halted_at) j["halt_error"] = rep.halt_error;
    std::cout << j.dump(2) << "\n";
    return 0;
  } catch (const Error& e) {
    return report(e, is_config_error(e) ? kExitUsage : kExitRuntime);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Live VR session mediation and spectator fan-out"};
  app.require_subcommand(1);

  std::string config_path;
  std::string listen;
  std::string metrics;
  std::string command_log;
  auto* serve_cmd = app.add_subcommand("serve", "Run the server");
  serve_cmd->add_option("--config,-c", config_path, "TOML config file");
  serve_cmd->add_option("--listen", listen, "host:port, overrides server.listen");
  serve_cmd->add_option("--metrics", metrics, "Write JSON-lines metrics here");
  serve_cmd->add_option("--command-log", command_log, "Record the session log here");

  funnel::fanout::LoadSimConfig sim;
  std::string out_path;
  auto* sim_cmd = app.add_subcommand("loadsim", "Simulate spectators against a running server");
  sim_cmd->add_option("-n,--spectators", sim.spectators, "Concurrent spectators")->required();
  sim_cmd->add_option("-t,--duration", sim.duration_s, "Seconds of playback per spectator")
      ->required();
  sim_cmd->add_option("--host", sim.host);
  sim_cmd->add_option("--port", sim.port);
  sim_cmd->add_option("--offset", sim.live_edge_offset, "Live-edge offset in segments");
  sim_cmd->add_option("--rung", sim.rung);
  sim_cmd->add_option("--poll", sim.poll_interval_s, "Playlist poll interval in seconds");
  sim_cmd->add_option("--prefetch", sim.prefetch_segments, "Segments fetched ahead of playback");
  sim_cmd->add_option("--out,-o", out_path, "Write the JSON report here instead of stdout");

  std::string log_path;
  auto* replay_cmd = app.add_subcommand("replay", "Replay a recorded session log");
  replay_cmd->add_option("log", log_path, "Session log (JSON lines)")->required();
  replay_cmd->add_option("--config,-c", config_path, "Config the session was recorded with")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (*serve_cmd) return serve(config_path, listen, {metrics, command_log});
  if (*sim_cmd) {
    if (sim.spectators <= 0) {
      std::cerr << "funnel: -n must be at least 1\n";
      return kExitUsage;
    }
    return loadsim(sim, out_path);
  }
  if (*replay_cmd) return replay(config_path, log_path);
  return kExitUsage;
}

// NDJSON session protocol and its single-client TCP transport.
//
// client -> server
//   {"kind":"config","config":{...},"trial":{...}|"scene":{...}}
//   {"kind":"frame","t":...,"stylus":{...},"head":{...},"gaze":{...}}
//   {"kind":"reset"}   {"kind":"ping"}
// server -> client
//   {"kind":"config","config":{...},"scene":{...},"state":{...}}
//   {"kind":"state","t":...,"state":{...},"events":[...]}   one per frame
//   {"kind":"reset","reason":...,"state":{...}}
//   {"kind":"pong"}   {"kind":"busy","msg":...}   {"kind":"error","msg":...}

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "stp/cli.hpp"

namespace stp::cli {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr std::size_t kMaxLineBytes = 1 << 20;

json error_reply(const std::string& msg) { return json{{"kind", "error"}, {"msg", msg}}; }

bool send_all(int fd, const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

bool send_json(int fd, const json& j) { return send_all(fd, j.dump() + "\n"); }

}  // namespace

ServeSession::ServeSession()
    : scene_(build_study_scene(TrialSceneSpec{})), kernel_(config_, scene_.scene, scene_.start_pose) {}

void ServeSession::reset() { kernel_.reset(); }

std::vector<json> ServeSession::handle_line(const std::string& line) {
  json msg;
  try {
    msg = json::parse(line);
  } catch (const json::parse_error& e) {
    return {error_reply(std::string("malformed JSON: ") + e.what())};
  }
  if (!msg.is_object() || !msg.contains("kind") || !msg["kind"].is_string()) {
    return {error_reply("message must be an object with a string 'kind'")};
  }
  const std::string kind = msg["kind"].get<std::string>();
  try {
    if (kind == "frame") return {handle_frame(std::move(msg))};
    if (kind == "config") return handle_config(msg);
    if (kind == "reset") {
      reset();
      return {json{{"kind", "reset"}, {"reason", "client request"}, {"state", state_to_json(kernel_.state())}}};
    }
    if (kind == "ping") return {json{{"kind", "pong"}}};
  } catch (const std::exception& e) {
    return {error_reply(e.what())};
  }
  return {error_reply("unknown message kind '" + kind + "'")};
}

std::vector<json> ServeSession::handle_config(const json& msg) {
  for (const auto& [key, value] : msg.items()) {
    if (key != "kind" && key != "config" && key != "trial" && key != "scene") {
      throw std::invalid_argument("config message: unknown field '" + key + "'");
    }
  }
  if (msg.contains("trial") && msg.contains("scene")) {
    throw std::invalid_argument("config message: give either 'trial' or 'scene', not both");
  }
  KernelConfig config = config_;
  StudyScene scene = scene_;
  if (msg.contains("trial")) {
    const TrialSpec trial = trial_from_json(msg["trial"]);
    const TrialSceneSpec spec = trial.scene_spec();
    spec.validate();
    scene = build_study_scene(spec);
    config = trial.kernel_config(config);
  }
  if (msg.contains("scene")) scene = scene_from_json(msg["scene"]);
  if (msg.contains("config")) config = config_from_json(msg["config"], config);
  config.validate();

  config_ = config;
  scene_ = std::move(scene);
  kernel_ = Kernel(config_, scene_.scene, scene_.start_pose);
  return {json{{"kind", "config"},
               {"config", config_to_json(config_)},
               {"scene", scene_to_json(scene_)},
               {"state", state_to_json(kernel_.state())}}};
}

json ServeSession::handle_frame(json msg) {
  msg.erase("kind");
  const InputFrame frame = frame_from_json(msg);
  const std::vector<KernelEvent> events = kernel_.step(frame);
  json ev = json::array();
  for (const KernelEvent& e : events) ev.push_back(event_to_json(e));
  return json{{"kind", "state"}, {"t", msg["t"]}, {"state", state_to_json(kernel_.state())}, {"events", std::move(ev)}};
}

Server::Server(const ServeOptions& options) : options_(options) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(options.port);
  if (::inet_pton(AF_INET, options.host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    throw std::runtime_error("invalid host address '" + options.host + "'");
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listen_fd_, 4) != 0) {
    const std::string msg = std::strerror(errno);
    ::close(listen_fd_);
    throw std::runtime_error("cannot listen on " + options.host + ":" + std::to_string(options.port) +
                             ": " + msg);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

Server::~Server() {
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void Server::run(const std::atomic<bool>& stop) {
  int client = -1;
  std::string buffer;
  ServeSession session;
  Clock::time_point last_seen = Clock::now();
  bool idle_reset_sent = false;

  auto drop_client = [&] {
    if (client >= 0) ::close(client);
    client = -1;
    buffer.clear();
  };

  while (!stop.load()) {
    pollfd fds[2] = {{listen_fd_, POLLIN, 0}, {client, POLLIN, 0}};
    const int ready = ::poll(fds, client >= 0 ? 2 : 1, 50);
    if (ready < 0 && errno != EINTR) break;

    if (ready > 0 && (fds[0].revents & POLLIN)) {
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd >= 0) {
        if (client >= 0) {
          send_json(fd, json{{"kind", "busy"}, {"msg", "a session is already active"}});
          ::close(fd);
        } else {
          client = fd;
          session = ServeSession();
          last_seen = Clock::now();
          idle_reset_sent = false;
        }
      }
    }

    if (client >= 0 && ready > 0 && (fds[1].revents & (POLLIN | POLLHUP | POLLERR))) {
      char chunk[65536];
      const ssize_t n = ::recv(client, chunk, sizeof chunk, 0);
      if (n <= 0) {
        if (n < 0 && errno == EINTR) continue;
        drop_client();
        continue;
      }
      buffer.append(chunk, static_cast<std::size_t>(n));
      last_seen = Clock::now();
      idle_reset_sent = false;
      bool ok = true;
      for (std::size_t nl; ok && (nl = buffer.find('\n')) != std::string::npos;) {
        std::string line = buffer.substr(0, nl);
        buffer.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        for (const json& reply : session.handle_line(line)) ok = ok && send_json(client, reply);
      }
      if (ok && buffer.size() > kMaxLineBytes) {
        buffer.clear();
        ok = send_json(client, error_reply("line too long"));
      }
      if (!ok) drop_client();
    }

    if (client >= 0 && !idle_reset_sent && Clock::now() - last_seen > options_.heartbeat) {
      session.reset();
      idle_reset_sent = true;
      if (!send_json(client, json{{"kind", "reset"},
                                  {"reason", "heartbeat timeout"},
                                  {"state", state_to_json(session.kernel().state())}})) {
        drop_client();
      }
    }
  }
  drop_client();
}

}  // namespace stp::cli

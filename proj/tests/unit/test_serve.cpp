#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <thread>

#include <nlohmann/json.hpp>

#include "stp/cli.hpp"

namespace stp::cli {
namespace {

using nlohmann::json;
using namespace std::chrono_literals;
const std::filesystem::path kData = STP_TEST_DATA_DIR;

json frame_message(const InputFrame& f) {
  json j = frame_to_json(f);
  j["kind"] = "frame";
  return j;
}

TEST(ServeSession, MatchesReplayEventForEvent) {
  const Trace trace = read_trace(kData / "golden_trace.jsonl");
  ServeSession session;
  const auto cfg = session.handle_line(json{{"kind", "config"}, {"trial", trial_to_json(*trace.header->trial)}}.dump());
  ASSERT_EQ(cfg.size(), 1u);
  ASSERT_EQ(cfg[0]["kind"], "config");
  EXPECT_EQ(scene_from_json(cfg[0]["scene"]), build_study_scene(trace.header->trial->scene_spec()));

  json served = json::array();
  for (const InputFrame& f : trace.frames) {
    const auto replies = session.handle_line(frame_message(f).dump());
    ASSERT_EQ(replies.size(), 1u);
    ASSERT_EQ(replies[0]["kind"], "state") << replies[0].dump();
    EXPECT_EQ(replies[0]["t"].get<double>(), f.t);
    for (json e : replies[0]["events"]) {
      e["t"] = f.t;
      served.push_back(e);
    }
  }
  const ReplayOutput replayed = replay(trace, std::nullopt, std::nullopt, true);
  EXPECT_EQ(served, replayed.json["events"]);
}

TEST(ServeSession, ErrorsDoNotEndTheSession) {
  ServeSession session;
  EXPECT_EQ(session.handle_line("{not json")[0]["kind"], "error");
  EXPECT_EQ(session.handle_line("[1,2]")[0]["kind"], "error");
  EXPECT_EQ(session.handle_line(R"({"kind":"dance"})")[0]["kind"], "error");
  EXPECT_EQ(session.handle_line(R"({"kind":"frame","t":0})")[0]["kind"], "error");
  EXPECT_EQ(session.handle_line(R"({"kind":"config","config":{"roll_gain":-2}})")[0]["kind"], "error");
  EXPECT_EQ(session.handle_line(R"({"kind":"config","trial":{},"scene":{}})")[0]["kind"], "error");
  EXPECT_EQ(session.handle_line(R"({"kind":"ping"})")[0]["kind"], "pong");

  InputFrame f;
  f.stylus = {{0, 1, 0.3}, UnitQuat::identity()};
  f.head = {{0, 1.2, 0}, UnitQuat::identity()};
  EXPECT_EQ(session.handle_line(frame_message(f).dump())[0]["kind"], "state");
  // Time must still increase after an error.
  EXPECT_EQ(session.handle_line(frame_message(f).dump())[0]["kind"], "error");
  f.t = 11.0;
  EXPECT_EQ(session.handle_line(frame_message(f).dump())[0]["kind"], "state");
}

TEST(ServeSession, ResetRestartsTheKernel) {
  ServeSession session;
  InputFrame f;
  f.stylus = {{0, 1, 0.3}, UnitQuat::identity()};
  f.head = {{0, 1.2, 0}, UnitQuat::identity()};
  f.rear_button = true;
  const auto r1 = session.handle_line(frame_message(f).dump());
  EXPECT_EQ(r1[0]["state"]["mode"], "Teleport");
  const auto reset = session.handle_line(R"({"kind":"reset"})");
  ASSERT_EQ(reset[0]["kind"], "reset");
  EXPECT_EQ(reset[0]["state"]["mode"], "Draw");
  // A reset kernel accepts t = 0 again.
  EXPECT_EQ(session.handle_line(frame_message(f).dump())[0]["kind"], "state");
}

class Client {
 public:
  explicit Client(std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
    connected_ = ::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0;
  }
  ~Client() { ::close(fd_); }
  bool connected() const { return connected_; }

  void send(const json& j) {
    const std::string s = j.dump() + "\n";
    ASSERT_EQ(::send(fd_, s.data(), s.size(), MSG_NOSIGNAL), static_cast<ssize_t>(s.size()));
  }
  void send_raw(const std::string& s) { ::send(fd_, s.data(), s.size(), MSG_NOSIGNAL); }

  /// Next reply line, or nullopt on timeout or close.
  std::optional<json> read(std::chrono::milliseconds timeout = 3000ms) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      if (const auto nl = buf_.find('\n'); nl != std::string::npos) {
        json j = json::parse(buf_.substr(0, nl));
        buf_.erase(0, nl + 1);
        return j;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return std::nullopt;
      pollfd p{fd_, POLLIN, 0};
      if (::poll(&p, 1, static_cast<int>(left.count())) <= 0) return std::nullopt;
      char chunk[4096];
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n <= 0) return std::nullopt;
      buf_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int fd_ = -1;
  bool connected_ = false;
  std::string buf_;
};

class ServerTest : public ::testing::Test {
 protected:
  void start(std::chrono::milliseconds heartbeat) {
    ServeOptions opts;
    opts.port = 0;
    opts.heartbeat = heartbeat;
    server_ = std::make_unique<Server>(opts);
    thread_ = std::thread([this] { server_->run(stop_); });
  }
  void TearDown() override {
    stop_ = true;
    if (thread_.joinable()) thread_.join();
  }
  std::uint16_t port() const { return server_->port(); }

  std::unique_ptr<Server> server_;
  std::atomic<bool> stop_{false};
  std::thread thread_;
};

TEST_F(ServerTest, StreamsTraceOverTcp) {
  start(5000ms);
  Client c(port());
  ASSERT_TRUE(c.connected());
  const Trace trace = read_trace(kData / "golden_trace.jsonl");
  c.send(json{{"kind", "config"}, {"trial", trial_to_json(*trace.header->trial)}});
  auto reply = c.read();
  ASSERT_TRUE(reply);
  EXPECT_EQ((*reply)["kind"], "config");
  int commits = 0;
  for (const InputFrame& f : trace.frames) {
    c.send(frame_message(f));
    reply = c.read();
    ASSERT_TRUE(reply);
    ASSERT_EQ((*reply)["kind"], "state");
    for (const json& e : (*reply)["events"]) commits += e["type"] == "TeleportCommitted";
  }
  EXPECT_EQ(commits, 1);
  c.send(json{{"kind", "ping"}});
  reply = c.read();
  ASSERT_TRUE(reply);
  EXPECT_EQ((*reply)["kind"], "pong");
}

TEST_F(ServerTest, SecondClientIsTurnedAway) {
  start(5000ms);
  Client first(port());
  ASSERT_TRUE(first.connected());
  first.send(json{{"kind", "ping"}});
  ASSERT_TRUE(first.read());
  Client second(port());
  ASSERT_TRUE(second.connected());
  const auto busy = second.read();
  ASSERT_TRUE(busy);
  EXPECT_EQ((*busy)["kind"], "busy");
  EXPECT_FALSE(second.read(500ms));
  // The first session is unaffected.
  first.send(json{{"kind", "ping"}});
  const auto pong = first.read();
  ASSERT_TRUE(pong);
  EXPECT_EQ((*pong)["kind"], "pong");
}

TEST_F(ServerTest, MalformedLineGetsErrorAndSessionContinues) {
  start(5000ms);
  Client c(port());
  ASSERT_TRUE(c.connected());
  c.send_raw("this is not json\n");
  auto reply = c.read();
  ASSERT_TRUE(reply);
  EXPECT_EQ((*reply)["kind"], "error");
  c.send(json{{"kind", "reset"}});
  reply = c.read();
  ASSERT_TRUE(reply);
  EXPECT_EQ((*reply)["kind"], "reset");
  EXPECT_EQ((*reply)["reason"], "client request");
}

TEST_F(ServerTest, HeartbeatGapResetsTheSession) {
  start(200ms);
  Client c(port());
  ASSERT_TRUE(c.connected());
  InputFrame f;
  f.stylus = {{0, 1, 0.3}, UnitQuat::identity()};
  f.head = {{0, 1.2, 0}, UnitQuat::identity()};
  f.rear_button = true;
  c.send(frame_message(f));
  auto reply = c.read();
  ASSERT_TRUE(reply);
  EXPECT_EQ((*reply)["state"]["mode"], "Teleport");
  reply = c.read(2000ms);
  ASSERT_TRUE(reply);
  EXPECT_EQ((*reply)["kind"], "reset");
  EXPECT_EQ((*reply)["reason"], "heartbeat timeout");
  EXPECT_EQ((*reply)["state"]["mode"], "Draw");
  // One reset per idle gap.
  EXPECT_FALSE(c.read(500ms));
  // The session restarts from t = 0.
  c.send(frame_message(f));
  reply = c.read();
  ASSERT_TRUE(reply);
  EXPECT_EQ((*reply)["kind"], "state");
}

}  // namespace
}  // namespace stp::cli

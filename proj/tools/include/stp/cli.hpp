// Command implementations behind the `stp` executable.
//
// Exit codes: 0 success, 1 usage error, 2 domain error (bad input data,
// validation failure, incomplete trial, IO failure).

#ifndef STP_CLI_HPP
#define STP_CLI_HPP

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stp/harness.hpp"
#include "stp/kernel.hpp"
#include "stp/scene.hpp"
#include "stp/trace.hpp"

namespace stp::cli {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitDomain = 2 };

/// Full command line dispatch; `argv[0]` is the program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

struct SimulateOptions {
  int participants = 18;
  std::uint64_t seed = 42;
  KernelConfig config;
  SyntheticUserParams user;
  /// When set, every synthetic trace is written here as p<P>_t<T>.jsonl.
  std::optional<std::filesystem::path> trace_dir;
};

/// All trials of all participants in design order. Deterministic in the
/// options.
std::vector<ResultRow> simulate(const SimulateOptions& options);

/// Per-trial seed of the synthetic user.
std::uint64_t trial_seed(std::uint64_t run_seed, int participant, int trial);

struct ReplayOutput {
  TrialResult result;
  nlohmann::json json;  // {"metrics":...} plus "events" when requested
};

/// Resolves the scene and config of a trace: an explicit scene wins over the
/// trial in the header; header config, then `config_overlay`, override the
/// defaults.
ReplayOutput replay(const Trace& trace, const std::optional<StudyScene>& scene,
                    const std::optional<nlohmann::json>& config_overlay, bool with_events);

nlohmann::json timed_event_to_json(const TimedEvent& e);

/// Transport-free serve session: one protocol line in, reply lines out.
class ServeSession {
 public:
  ServeSession();

  std::vector<nlohmann::json> handle_line(const std::string& line);
  /// Kernel back to its start state; config and scene are kept.
  void reset();

  const Kernel& kernel() const { return kernel_; }
  const StudyScene& scene() const { return scene_; }

 private:
  std::vector<nlohmann::json> handle_config(const nlohmann::json& msg);
  nlohmann::json handle_frame(nlohmann::json msg);

  KernelConfig config_;
  StudyScene scene_;
  Kernel kernel_;
};

struct ServeOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 8765;  // 0 picks a free port
  std::chrono::milliseconds heartbeat{5000};
};

/// Single-client NDJSON server over TCP.
class Server {
 public:
  /// Binds and listens; throws std::runtime_error on failure.
  explicit Server(const ServeOptions& options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  std::uint16_t port() const { return port_; }
  /// Serves until `stop` becomes true; returns within ~50 ms of that.
  void run(const std::atomic<bool>& stop);

 private:
  ServeOptions options_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
};

}  // namespace stp::cli

#endif  // STP_CLI_HPP

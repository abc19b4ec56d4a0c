// Input traces: JSONL serialization and the seeded synthetic user.
//
// File layout: an optional header line `{"header":{...}}` followed by one
// frame per line:
//   {"t":<ms>,"stylus":{"p":[x,y,z],"q":[w,x,y,z],"front":bool,"rear":bool},
//    "head":{"p":[...],"q":[...]},"gaze":{"o":[...],"d":[...],"valid":bool}}
// `gaze` is optional. Frame times start at 0 and increase strictly.

#ifndef STP_TRACE_HPP
#define STP_TRACE_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stp/kernel.hpp"
#include "stp/trial.hpp"

namespace stp {

struct TraceHeader {
  std::optional<KernelConfig> config;
  std::optional<TrialSpec> trial;
  std::string scene;  // free-form scene reference
  std::uint64_t seed = 0;

  friend bool operator==(const TraceHeader&, const TraceHeader&) = default;
};

struct Trace {
  std::optional<TraceHeader> header;
  std::vector<InputFrame> frames;

  friend bool operator==(const Trace&, const Trace&) = default;
};

/// Parse or validation failure; `line()` is 1-based, 0 when not line-specific.
class TraceError : public std::runtime_error {
 public:
  TraceError(const std::string& msg, std::size_t line);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

nlohmann::json frame_to_json(const InputFrame& f);
/// Throws std::invalid_argument on schema errors (unknown fields included).
InputFrame frame_from_json(const nlohmann::json& j);

void write_trace(std::ostream& out, const Trace& trace);
void write_trace(const std::filesystem::path& path, const Trace& trace);
Trace read_trace(std::istream& in);
Trace read_trace(const std::filesystem::path& path);

struct SyntheticUserParams {
  double reaction_mean_ms = 450.0;
  double reaction_sd_ms = 120.0;
  double aim_noise_deg = 1.0;    // sd of stylus pointing and rolling error
  double gaze_noise_deg = 2.68;  // mean angular gaze offset
  double gaze_jitter_deg = 0.5;  // per-sample gaze noise sd
  double frame_rate = 90.0;      // Hz
  double hold_mean_ms = 700.0;   // orientation adjustment time after hold onset
  double hold_sd_ms = 200.0;
  double arm_reach = 0.9;        // m, horizontal reach when drawing

  /// Noise terms may be zero; everything else must be positive.
  void validate() const;

  static SyntheticUserParams noiseless();
};

/// Deterministic trace of one full trial: switch in, aim at the marker,
/// press, orient toward the sphere midpoint, release, switch out, and draw
/// a stroke through both spheres.
Trace synth_trace(const TrialSpec& trial, const SyntheticUserParams& user, std::uint64_t seed,
                  const KernelConfig& base = {});

}  // namespace stp

#endif  // STP_TRACE_HPP

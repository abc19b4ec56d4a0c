// Study design, trial replay and the per-trial measures.

#ifndef STP_HARNESS_HPP
#define STP_HARNESS_HPP

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stp/kernel.hpp"
#include "stp/scene.hpp"
#include "stp/trace.hpp"
#include "stp/trial.hpp"

namespace stp {

inline constexpr int kTrialsPerParticipant = 120;
inline constexpr int kTrialsPerBlock = 20;

/// Cyclic Latin-square row `participant_index mod 3`.
std::array<OrientationMethod, 3> orientation_order(int participant_index);
/// Button first for even indices, Flip first for odd ones.
std::array<SwitchMethod, 2> switch_order(int participant_index);

/// The 120 trials of one participant in presentation order: three
/// orientation blocks, each split into two switch-method blocks of 20
/// shuffled (depth, rotation, repetition) trials. Throws
/// std::invalid_argument for a negative index.
std::vector<TrialSpec> generate_design(int participant_index);

struct TrialMetrics {
  double switch_in_ms = 0.0;
  double positioning_ms = 0.0;
  double orientation_ms = 0.0;
  double switch_out_ms = 0.0;
  double task_completion_ms = 0.0;
  double positioning_error_m = 0.0;
  double orientation_error_deg = 0.0;
  bool success = false;

  friend bool operator==(const TrialMetrics&, const TrialMetrics&) = default;
};

struct TimedEvent {
  double t = 0.0;
  KernelEvent event;
};

/// Key instants of a trial, all in trace time.
struct TrialTimes {
  double start = 0.0;
  double switch_in = 0.0;    // first switch into teleport mode
  double press = 0.0;        // teleport button press
  double commit = 0.0;       // release, teleport applied
  double back_switch = 0.0;  // first switch back to draw mode after the commit
};

/// Pure arithmetic over the key instants.
TrialMetrics timing_metrics(const TrialTimes& times);

struct TrialLog {
  std::vector<TimedEvent> events;
  std::optional<TrialTimes> times;  // nullopt: trial incomplete
  std::optional<TeleportCommitted> commit;
  /// Strokes drawn after the commit, in order.
  std::vector<std::vector<Vec3>> strokes;
};

struct TrialResult {
  TrialLog log;
  std::optional<TrialMetrics> metrics;  // nullopt: incomplete trial

  bool complete() const { return metrics.has_value(); }
};

/// Feeds every frame through a fresh kernel over `study` and measures the
/// trial. A trace without a commit, or without a switch back to draw mode
/// after it, yields an incomplete result.
TrialResult run_trial(const StudyScene& study, const Trace& trace, const KernelConfig& config);
/// As above with the study scene and technique pair taken from `spec`.
TrialResult run_trial(const TrialSpec& spec, const Trace& trace, const KernelConfig& base = {});

/// True iff the polyline passes within `radius` (inclusive) of both
/// centers. Throws std::invalid_argument for fewer than two points.
bool check_stroke(std::span<const Vec3> stroke, const Vec3& sphere_a, const Vec3& sphere_b,
                  double radius);

nlohmann::json metrics_to_json(const TrialMetrics& m);
TrialMetrics metrics_from_json(const nlohmann::json& j);

/// One line of a results file.
struct ResultRow {
  int participant = 0;
  int trial = 0;  // position in the participant's design
  TrialSpec spec;
  std::optional<TrialMetrics> metrics;

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

nlohmann::json result_to_json(const ResultRow& row);
ResultRow result_from_json(const nlohmann::json& j);
void write_results(std::ostream& out, std::span<const ResultRow> rows);
/// Throws TraceError with the offending line number.
std::vector<ResultRow> read_results(std::istream& in);
std::vector<ResultRow> read_results(const std::filesystem::path& path);

extern const char* const kResultsCsvHeader;
/// Tidy per-trial CSV; incomplete trials keep their key columns and leave
/// the measures empty.
void write_results_csv(std::ostream& out, std::span<const ResultRow> rows);

/// Shortest representation that parses back to the same double.
std::string format_number(double v);

}  // namespace stp

#endif  // STP_HARNESS_HPP

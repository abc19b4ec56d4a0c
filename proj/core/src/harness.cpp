#include "stp/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "json_util.hpp"
#include "stp/rng.hpp"

namespace stp {

namespace {

using jsonutil::json;

constexpr std::uint64_t kDesignSeed = 0x51a7d35e9b1c0fedULL;

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = dot(ab, ab);
  double s = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  s = std::clamp(s, 0.0, 1.0);
  return norm(p - (a + s * ab));
}

}  // namespace

std::array<OrientationMethod, 3> orientation_order(int participant_index) {
  if (participant_index < 0) throw std::invalid_argument("participant index must be >= 0");
  constexpr OrientationMethod methods[] = {OrientationMethod::Roll, OrientationMethod::StylusPoint,
                                           OrientationMethod::GazePoint};
  const int r = participant_index % 3;
  return {methods[r], methods[(r + 1) % 3], methods[(r + 2) % 3]};
}

std::array<SwitchMethod, 2> switch_order(int participant_index) {
  if (participant_index < 0) throw std::invalid_argument("participant index must be >= 0");
  if (participant_index % 2 == 0) return {SwitchMethod::Button, SwitchMethod::Flip};
  return {SwitchMethod::Flip, SwitchMethod::Button};
}

std::vector<TrialSpec> generate_design(int participant_index) {
  const auto orients = orientation_order(participant_index);
  const auto switches = switch_order(participant_index);
  std::vector<TrialSpec> design;
  design.reserve(kTrialsPerParticipant);
  std::uint64_t block = 0;
  for (OrientationMethod orient : orients) {
    for (SwitchMethod sw : switches) {
      std::vector<TrialSpec> trials;
      for (int rep = 1; rep <= 2; ++rep) {
        for (double depth : kStudyDepths) {
          for (double rotation : kStudyRotations) {
            trials.push_back(TrialSpec{sw, orient, depth, rotation, rep});
          }
        }
      }
      Rng rng(derive_seed(kDesignSeed, static_cast<std::uint64_t>(participant_index), block++));
      rng.shuffle(trials);
      design.insert(design.end(), trials.begin(), trials.end());
    }
  }
  return design;
}

TrialMetrics timing_metrics(const TrialTimes& times) {
  TrialMetrics m;
  m.switch_in_ms = times.switch_in - times.start;
  m.positioning_ms = times.press - times.switch_in;
  m.orientation_ms = times.commit - times.press;
  m.switch_out_ms = times.back_switch - times.commit;
  m.task_completion_ms = times.back_switch - times.start;
  return m;
}

bool check_stroke(std::span<const Vec3> stroke, const Vec3& sphere_a, const Vec3& sphere_b,
                  double radius) {
  if (stroke.size() < 2) throw std::invalid_argument("stroke needs at least two points");
  bool near_a = false;
  bool near_b = false;
  for (std::size_t i = 1; i < stroke.size() && !(near_a && near_b); ++i) {
    near_a = near_a || point_segment_distance(sphere_a, stroke[i - 1], stroke[i]) <= radius;
    near_b = near_b || point_segment_distance(sphere_b, stroke[i - 1], stroke[i]) <= radius;
  }
  return near_a && near_b;
}

TrialResult run_trial(const StudyScene& study, const Trace& trace, const KernelConfig& config) {
  Kernel kernel(config, study.scene, study.start_pose);
  TrialResult result;
  TrialLog& log = result.log;
  if (trace.frames.empty()) return result;

  const double start = trace.frames.front().t;
  std::optional<double> switch_in, press, commit_t, back_switch;
  std::optional<double> last_hold;
  std::vector<Vec3>* stroke = nullptr;

  for (const InputFrame& frame : trace.frames) {
    for (KernelEvent& e : kernel.step(frame)) {
      if (const auto* ms = std::get_if<ModeSwitched>(&e)) {
        if (ms->to == Mode::Teleport && !switch_in) switch_in = frame.t;
        if (ms->to == Mode::Draw && commit_t && !back_switch) back_switch = frame.t;
      } else if (std::get_if<HoldStarted>(&e) != nullptr) {
        if (!commit_t) last_hold = frame.t;
      } else if (const auto* tc = std::get_if<TeleportCommitted>(&e)) {
        if (!commit_t) {
          commit_t = frame.t;
          press = last_hold;
          log.commit = *tc;
        }
      } else if (const auto* ss = std::get_if<StrokeStarted>(&e)) {
        if (commit_t) {
          log.strokes.push_back({ss->point});
          stroke = &log.strokes.back();
        }
      } else if (const auto* sp = std::get_if<StrokePoint>(&e)) {
        if (stroke != nullptr) stroke->push_back(sp->point);
      } else if (std::get_if<StrokeEnded>(&e) != nullptr) {
        stroke = nullptr;
      }
      log.events.push_back({frame.t, std::move(e)});
    }
  }

  if (!switch_in || !press || !commit_t || !back_switch) return result;
  log.times = TrialTimes{start, *switch_in, *press, *commit_t, *back_switch};

  TrialMetrics m = timing_metrics(*log.times);
  m.positioning_error_m = horizontal_distance(log.commit->position, study.marker_center);
  const Vec3 to_mid = study.sphere_midpoint - log.commit->position;
  m.orientation_error_deg = std::abs(wrap_deg(log.commit->yaw_deg - yaw_of(to_mid)));
  m.success = std::any_of(log.strokes.begin(), log.strokes.end(), [&](const std::vector<Vec3>& s) {
    return s.size() >= 2 && check_stroke(s, study.sphere_a, study.sphere_b, study.sphere_radius);
  });
  result.metrics = m;
  return result;
}

TrialResult run_trial(const TrialSpec& spec, const Trace& trace, const KernelConfig& base) {
  return run_trial(build_study_scene(spec.scene_spec()), trace, spec.kernel_config(base));
}

json metrics_to_json(const TrialMetrics& m) {
  return json{{"switch_in_ms", m.switch_in_ms},
              {"positioning_ms", m.positioning_ms},
              {"orientation_ms", m.orientation_ms},
              {"switch_out_ms", m.switch_out_ms},
              {"task_ms", m.task_completion_ms},
              {"pos_err_m", m.positioning_error_m},
              {"ori_err_deg", m.orientation_error_deg},
              {"success", m.success}};
}

TrialMetrics metrics_from_json(const json& j) {
  static const char* const keys[] = {"switch_in_ms", "positioning_ms", "orientation_ms",
                                     "switch_out_ms", "task_ms",       "pos_err_m",
                                     "ori_err_deg",  "success"};
  if (!j.is_object()) throw std::invalid_argument("metrics: expected an object");
  jsonutil::check_keys(j, keys, "metrics");
  auto num = [&](const char* key) {
    return jsonutil::number(jsonutil::require(j, key, "metrics"), std::string("metrics.") + key);
  };
  TrialMetrics m;
  m.switch_in_ms = num("switch_in_ms");
  m.positioning_ms = num("positioning_ms");
  m.orientation_ms = num("orientation_ms");
  m.switch_out_ms = num("switch_out_ms");
  m.task_completion_ms = num("task_ms");
  m.positioning_error_m = num("pos_err_m");
  m.orientation_error_deg = num("ori_err_deg");
  m.success = jsonutil::boolean(jsonutil::require(j, "success", "metrics"), "metrics.success");
  return m;
}

json result_to_json(const ResultRow& row) {
  json j = trial_to_json(row.spec);
  j["participant"] = row.participant;
  j["trial"] = row.trial;
  j["complete"] = row.metrics.has_value();
  j["metrics"] = row.metrics ? metrics_to_json(*row.metrics) : json(nullptr);
  return j;
}

ResultRow result_from_json(const json& j) {
  static const char* const keys[] = {"participant", "trial",    "switch",   "orient", "depth",
                                     "rotation",    "rep",      "complete", "metrics"};
  if (!j.is_object()) throw std::invalid_argument("result: expected an object");
  jsonutil::check_keys(j, keys, "result");
  ResultRow row;
  const json& p = jsonutil::require(j, "participant", "result");
  const json& t = jsonutil::require(j, "trial", "result");
  if (!p.is_number_integer() || !t.is_number_integer()) {
    throw std::invalid_argument("result: participant and trial must be integers");
  }
  row.participant = p.get<int>();
  row.trial = t.get<int>();
  json spec = json::object();
  for (const char* k : {"switch", "orient", "depth", "rotation", "rep"}) {
    if (j.contains(k)) spec[k] = j[k];
  }
  row.spec = trial_from_json(spec);
  const json& metrics = jsonutil::require(j, "metrics", "result");
  if (!metrics.is_null()) row.metrics = metrics_from_json(metrics);
  if (j.contains("complete") &&
      jsonutil::boolean(j["complete"], "result.complete") != row.metrics.has_value()) {
    throw std::invalid_argument("result: 'complete' disagrees with 'metrics'");
  }
  return row;
}

void write_results(std::ostream& out, std::span<const ResultRow> rows) {
  for (const ResultRow& row : rows) out << result_to_json(row).dump() << '\n';
}

std::vector<ResultRow> read_results(std::istream& in) {
  std::vector<ResultRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(result_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw TraceError(std::string("malformed JSON: ") + e.what(), line_no);
    } catch (const std::invalid_argument& e) {
      throw TraceError(e.what(), line_no);
    }
  }
  return rows;
}

std::vector<ResultRow> read_results(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_results(in);
}

const char* const kResultsCsvHeader =
    "participant,switch,orient,depth,rotation,rep,switch_in_ms,positioning_ms,orientation_ms,"
    "switch_out_ms,task_ms,pos_err_m,ori_err_deg,success";

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_results_csv(std::ostream& out, std::span<const ResultRow> rows) {
  out << kResultsCsvHeader << '\n';
  for (const ResultRow& row : rows) {
    out << row.participant << ',' << to_string(row.spec.switch_method) << ','
        << to_string(row.spec.orientation_method) << ',' << format_number(row.spec.depth) << ','
        << format_number(row.spec.rotation) << ',' << row.spec.repetition;
    if (row.metrics) {
      const TrialMetrics& m = *row.metrics;
      for (double v : {m.switch_in_ms, m.positioning_ms, m.orientation_ms, m.switch_out_ms,
                       m.task_completion_ms, m.positioning_error_m, m.orientation_error_deg}) {
        out << ',' << format_number(v);
      }
      out << ',' << (m.success ? 1 : 0);
    } else {
      out << ",,,,,,,,";
    }
    out << '\n';
  }
}

}  // namespace stp

#include "stp/trace.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "json_util.hpp"

namespace stp {

namespace {

using jsonutil::json;

json time_to_json(double t) {
  // Whole milliseconds are written as integers.
  if (std::floor(t) == t && std::abs(t) < 1e15) return json(static_cast<std::int64_t>(t));
  return json(t);
}

Pose pose_from_json(const json& j, const std::string& where) {
  return {jsonutil::vec_from_json(jsonutil::require(j, "p", where), where + ".p"),
          jsonutil::quat_from_json(jsonutil::require(j, "q", where), where + ".q")};
}

}  // namespace

TrialSceneSpec TrialSpec::scene_spec() const {
  TrialSceneSpec s;
  s.depth = depth;
  s.rotation = rotation;
  return s;
}

KernelConfig TrialSpec::kernel_config(KernelConfig base) const {
  base.switch_method = switch_method;
  base.orientation_method = orientation_method;
  return base;
}

json trial_to_json(const TrialSpec& t) {
  return json{{"switch", to_string(t.switch_method)},
              {"orient", to_string(t.orientation_method)},
              {"depth", t.depth},
              {"rotation", t.rotation},
              {"rep", t.repetition}};
}

TrialSpec trial_from_json(const json& j) {
  static const char* const keys[] = {"switch", "orient", "depth", "rotation", "rep"};
  jsonutil::check_keys(j, keys, "trial");
  TrialSpec t;
  const json& sw = jsonutil::require(j, "switch", "trial");
  const json& ori = jsonutil::require(j, "orient", "trial");
  if (!sw.is_string() || !ori.is_string()) throw std::invalid_argument("trial: methods must be strings");
  t.switch_method = switch_method_from_string(sw.get<std::string>());
  t.orientation_method = orientation_method_from_string(ori.get<std::string>());
  t.depth = jsonutil::number(jsonutil::require(j, "depth", "trial"), "trial.depth");
  t.rotation = jsonutil::number(jsonutil::require(j, "rotation", "trial"), "trial.rotation");
  if (j.contains("rep")) {
    if (!j["rep"].is_number_integer()) throw std::invalid_argument("trial.rep: expected an integer");
    t.repetition = j["rep"].get<int>();
  }
  return t;
}

TraceError::TraceError(const std::string& msg, std::size_t line)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg),
      line_(line) {}

json frame_to_json(const InputFrame& f) {
  using jsonutil::quat_to_json;
  using jsonutil::vec_to_json;
  json j{{"t", time_to_json(f.t)},
         {"stylus",
          {{"p", vec_to_json(f.stylus.position)},
           {"q", quat_to_json(f.stylus.orientation)},
           {"front", f.front_button},
           {"rear", f.rear_button}}},
         {"head", {{"p", vec_to_json(f.head.position)}, {"q", quat_to_json(f.head.orientation)}}}};
  if (f.gaze) {
    j["gaze"] = {{"o", vec_to_json(f.gaze->origin)},
                 {"d", vec_to_json(f.gaze->dir)},
                 {"valid", f.gaze->valid}};
  }
  return j;
}

InputFrame frame_from_json(const json& j) {
  using jsonutil::require;
  static const char* const top_keys[] = {"t", "stylus", "head", "gaze"};
  static const char* const stylus_keys[] = {"p", "q", "front", "rear"};
  static const char* const head_keys[] = {"p", "q"};
  static const char* const gaze_keys[] = {"o", "d", "valid"};

  if (!j.is_object()) throw std::invalid_argument("frame: expected an object");
  jsonutil::check_keys(j, top_keys, "frame");
  InputFrame f;
  f.t = jsonutil::number(require(j, "t", "frame"), "frame.t");
  if (!std::isfinite(f.t)) throw std::invalid_argument("frame.t: non-finite");

  const json& stylus = require(j, "stylus", "frame");
  jsonutil::check_keys(stylus, stylus_keys, "frame.stylus");
  f.stylus = pose_from_json(stylus, "frame.stylus");
  f.front_button = jsonutil::boolean(require(stylus, "front", "frame.stylus"), "frame.stylus.front");
  f.rear_button = jsonutil::boolean(require(stylus, "rear", "frame.stylus"), "frame.stylus.rear");

  const json& head = require(j, "head", "frame");
  jsonutil::check_keys(head, head_keys, "frame.head");
  f.head = pose_from_json(head, "frame.head");

  if (auto it = j.find("gaze"); it != j.end() && !it->is_null()) {
    jsonutil::check_keys(*it, gaze_keys, "frame.gaze");
    GazeSample g;
    g.origin = jsonutil::vec_from_json(require(*it, "o", "frame.gaze"), "frame.gaze.o");
    g.dir = jsonutil::vec_from_json(require(*it, "d", "frame.gaze"), "frame.gaze.d");
    g.valid = jsonutil::boolean(require(*it, "valid", "frame.gaze"), "frame.gaze.valid");
    if (g.valid && std::abs(norm(g.dir) - 1.0) > 1e-6) {
      throw std::invalid_argument("frame.gaze.d: must be a unit vector");
    }
    f.gaze = g;
  }
  return f;
}

void write_trace(std::ostream& out, const Trace& trace) {
  if (trace.header) {
    const TraceHeader& h = *trace.header;
    json hj{{"scene", h.scene}, {"seed", h.seed}};
    if (h.config) hj["config"] = config_to_json(*h.config);
    if (h.trial) hj["trial"] = trial_to_json(*h.trial);
    out << json{{"header", hj}}.dump() << '\n';
  }
  for (const InputFrame& f : trace.frames) out << frame_to_json(f).dump() << '\n';
}

void write_trace(const std::filesystem::path& path, const Trace& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_trace(out, trace);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Trace read_trace(std::istream& in) {
  static const char* const header_keys[] = {"config", "trial", "scene", "seed"};
  Trace trace;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw TraceError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    try {
      if (j.is_object() && j.contains("header")) {
        if (trace.header || !trace.frames.empty()) {
          throw std::invalid_argument("header must be the first line");
        }
        if (j.size() != 1) throw std::invalid_argument("header line: unknown field");
        const json& hj = j["header"];
        if (!hj.is_object()) throw std::invalid_argument("header: expected an object");
        jsonutil::check_keys(hj, header_keys, "header");
        TraceHeader h;
        if (hj.contains("config")) h.config = config_from_json(hj["config"]);
        if (hj.contains("trial")) h.trial = trial_from_json(hj["trial"]);
        if (hj.contains("scene")) {
          if (!hj["scene"].is_string()) throw std::invalid_argument("header.scene: expected a string");
          h.scene = hj["scene"].get<std::string>();
        }
        if (hj.contains("seed")) {
          if (!hj["seed"].is_number_unsigned()) {
            throw std::invalid_argument("header.seed: expected a non-negative integer");
          }
          h.seed = hj["seed"].get<std::uint64_t>();
        }
        trace.header = h;
        continue;
      }
      InputFrame f = frame_from_json(j);
      if (trace.frames.empty()) {
        if (f.t != 0.0) throw std::invalid_argument("first frame must be at t = 0");
      } else if (!(f.t > trace.frames.back().t)) {
        throw std::invalid_argument("frame time must increase strictly (t = " +
                                    std::to_string(f.t) + ")");
      }
      trace.frames.push_back(std::move(f));
    } catch (const std::invalid_argument& e) {
      throw TraceError(e.what(), line_no);
    }
  }
  if (trace.frames.empty()) throw TraceError("empty trace: no frames", 0);
  return trace;
}

Trace read_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_trace(in);
}

}  // namespace stp

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "stp/cli.hpp"
#include "stp/rng.hpp"
#include "stp/stats.hpp"

namespace stp::cli {

namespace {

using nlohmann::json;

/// Error carrying an exit code, thrown by command bodies.
struct CommandError : std::runtime_error {
  CommandError(int code, const std::string& msg) : std::runtime_error(msg), code(code) {}
  int code;
};

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CommandError(kExitDomain, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw CommandError(kExitDomain, path.string() + ": malformed JSON: " + e.what());
  }
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CommandError(kExitDomain, "cannot open " + path.string() + " for writing");
  return out;
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

// Noise and timing flags shared by simulate and synth.
struct UserFlags {
  std::optional<double> aim_noise, gaze_noise, gaze_jitter, reaction_ms, frame_rate;
  bool noiseless = false;

  void add(CLI::App* app) {
    app->add_option("--aim-noise", aim_noise, "Stylus pointing noise sd (deg)");
    app->add_option("--gaze-noise", gaze_noise, "Mean gaze offset (deg)");
    app->add_option("--gaze-jitter", gaze_jitter, "Per-sample gaze noise sd (deg)");
    app->add_option("--reaction-ms", reaction_ms, "Mean reaction time (ms)");
    app->add_option("--frame-rate", frame_rate, "Tracking rate (Hz)");
    app->add_flag("--noiseless", noiseless, "Zero all aiming and gaze noise");
  }

  SyntheticUserParams resolve() const {
    SyntheticUserParams u = noiseless ? SyntheticUserParams::noiseless() : SyntheticUserParams{};
    if (aim_noise) u.aim_noise_deg = *aim_noise;
    if (gaze_noise) u.gaze_noise_deg = *gaze_noise;
    if (gaze_jitter) u.gaze_jitter_deg = *gaze_jitter;
    if (reaction_ms) u.reaction_mean_ms = *reaction_ms;
    if (frame_rate) u.frame_rate = *frame_rate;
    u.validate();
    return u;
  }
};

KernelConfig load_config(const std::optional<std::filesystem::path>& path) {
  KernelConfig c;
  if (path) c = config_from_json(read_json_file(*path));
  c.validate();
  return c;
}

std::string condition_key(const ResultRow& row, const std::vector<std::string>& by) {
  if (by.empty()) return "all";
  std::string key;
  for (const std::string& k : by) {
    if (!key.empty()) key += ',';
    key += k + '=';
    if (k == "participant") key += std::to_string(row.participant);
    else if (k == "switch") key += to_string(row.spec.switch_method);
    else if (k == "orient") key += to_string(row.spec.orientation_method);
    else if (k == "depth") key += format_number(row.spec.depth);
    else if (k == "rotation") key += format_number(row.spec.rotation);
    else if (k == "rep") key += std::to_string(row.spec.repetition);
  }
  return key;
}

struct Measure {
  const char* name;
  double (*get)(const TrialMetrics&);
};

constexpr Measure kMeasures[] = {
    {"task_ms", [](const TrialMetrics& m) { return m.task_completion_ms; }},
    {"switch_in_ms", [](const TrialMetrics& m) { return m.switch_in_ms; }},
    {"positioning_ms", [](const TrialMetrics& m) { return m.positioning_ms; }},
    {"orientation_ms", [](const TrialMetrics& m) { return m.orientation_ms; }},
    {"switch_out_ms", [](const TrialMetrics& m) { return m.switch_out_ms; }},
    {"pos_err_m", [](const TrialMetrics& m) { return m.positioning_error_m; }},
    {"ori_err_deg", [](const TrialMetrics& m) { return m.orientation_error_deg; }},
    {"success", [](const TrialMetrics& m) { return m.success ? 1.0 : 0.0; }},
};

void print_simulate_summary(std::ostream& out, const std::vector<ResultRow>& rows) {
  struct Cell {
    int n = 0, complete = 0, success = 0;
    double task = 0.0, pos = 0.0, ori = 0.0;
  };
  std::map<std::string, Cell> cells;
  for (const ResultRow& r : rows) {
    Cell& c = cells[std::string(to_string(r.spec.switch_method)) + "/" +
                    to_string(r.spec.orientation_method)];
    ++c.n;
    if (!r.metrics) continue;
    ++c.complete;
    c.success += r.metrics->success ? 1 : 0;
    c.task += r.metrics->task_completion_ms;
    c.pos += r.metrics->positioning_error_m;
    c.ori += r.metrics->orientation_error_deg;
  }
  out << pad("condition", 20) << pad("trials", 8) << pad("complete", 10) << pad("success", 9)
      << pad("task_ms", 10) << pad("pos_err_m", 11) << "ori_err_deg\n";
  for (const auto& [key, c] : cells) {
    const double k = c.complete > 0 ? c.complete : 1;
    out << pad(key, 20) << pad(std::to_string(c.n), 8) << pad(std::to_string(c.complete), 10)
        << pad(fixed(100.0 * c.success / k, 1) + "%", 9) << pad(fixed(c.task / k, 0), 10)
        << pad(fixed(c.pos / k, 3), 11) << fixed(c.ori / k, 2) << '\n';
  }
}

int cmd_simulate(int participants, std::uint64_t seed, const std::filesystem::path& out_path,
                 const std::optional<std::filesystem::path>& csv_path,
                 const std::optional<std::filesystem::path>& config_path,
                 const std::optional<std::filesystem::path>& trace_dir, const UserFlags& flags,
                 std::ostream& out) {
  SimulateOptions opts;
  opts.participants = participants;
  opts.seed = seed;
  opts.config = load_config(config_path);
  opts.user = flags.resolve();
  opts.trace_dir = trace_dir;
  const std::vector<ResultRow> rows = simulate(opts);

  std::ofstream results = open_output(out_path);
  write_results(results, rows);
  if (!results.flush()) throw CommandError(kExitDomain, "failed writing " + out_path.string());
  if (csv_path) {
    std::ofstream csv = open_output(*csv_path);
    write_results_csv(csv, rows);
    if (!csv.flush()) throw CommandError(kExitDomain, "failed writing " + csv_path->string());
  }
  print_simulate_summary(out, rows);
  out << rows.size() << " trials written to " << out_path.string() << '\n';
  return kExitOk;
}

int cmd_replay(const std::filesystem::path& trace_path,
               const std::optional<std::filesystem::path>& scene_path,
               const std::optional<std::filesystem::path>& config_path, bool with_events,
               std::ostream& out) {
  const Trace trace = read_trace(trace_path);
  std::optional<StudyScene> scene;
  if (scene_path) scene = scene_from_json(read_json_file(*scene_path));
  std::optional<json> overlay;
  if (config_path) overlay = read_json_file(*config_path);
  const ReplayOutput r = replay(trace, scene, overlay, with_events);
  if (!r.result.complete()) {
    if (with_events) out << r.json.dump() << '\n';
    throw CommandError(kExitDomain, "incomplete trial");
  }
  out << r.json.dump() << '\n';
  return kExitOk;
}

int cmd_stats(const std::filesystem::path& results_path, const std::string& by_spec,
              const std::optional<std::filesystem::path>& csv_path, std::ostream& out) {
  std::vector<std::string> by;
  std::stringstream ss(by_spec);
  for (std::string k; std::getline(ss, k, ',');) {
    if (k.empty()) continue;
    static const std::set<std::string> allowed = {"participant", "switch", "orient",
                                                  "depth",       "rotation", "rep"};
    if (!allowed.count(k)) throw CommandError(kExitUsage, "unknown group-by key '" + k + "'");
    by.push_back(k);
  }

  const std::vector<ResultRow> rows = read_results(results_path);
  std::vector<const ResultRow*> complete;
  for (const ResultRow& r : rows) {
    if (r.metrics) complete.push_back(&r);
  }
  if (complete.size() < 4) {
    throw CommandError(kExitDomain, "need at least 4 complete trials, found " +
                                        std::to_string(complete.size()));
  }
  std::vector<double> task;
  for (const ResultRow* r : complete) task.push_back(r->metrics->task_completion_ms);
  const std::vector<bool> keep = iqr_filter(task);

  std::map<std::string, MeasureTable> groups;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < complete.size(); ++i) {
    if (!keep[i]) continue;
    ++kept;
    MeasureTable& table = groups[condition_key(*complete[i], by)];
    if (table.empty()) {
      for (const Measure& m : kMeasures) table.emplace_back(m.name, std::vector<double>{});
    }
    for (std::size_t k = 0; k < std::size(kMeasures); ++k) {
      table[k].second.push_back(kMeasures[k].get(*complete[i]->metrics));
    }
  }
  const std::vector<ConditionSummary> summaries = aggregate(groups);

  const std::size_t filtered = complete.size() - kept;
  out << "trials: " << rows.size() << ", incomplete: " << rows.size() - complete.size()
      << ", IQR-filtered: " << filtered << " ("
      << fixed(100.0 * static_cast<double>(filtered) / static_cast<double>(complete.size()), 2)
      << "%)\n";
  for (const ConditionSummary& c : summaries) {
    out << c.key << "  (n=" << c.n << ")\n";
    for (const auto& [name, s] : c.measures) {
      out << "  " << pad(name, 16) << fixed(s.mean, 4) << " +/- " << fixed(s.ci_half_width, 4)
          << "  (sd " << fixed(s.sd, 4) << ")\n";
    }
  }
  if (csv_path) {
    std::ofstream csv = open_output(*csv_path);
    csv << "group,n,measure,mean,sd,ci95\n";
    for (const ConditionSummary& c : summaries) {
      for (const auto& [name, s] : c.measures) {
        csv << '"' << c.key << "\"," << c.n << ',' << name << ',' << format_number(s.mean) << ','
            << format_number(s.sd) << ',' << format_number(s.ci_half_width) << '\n';
      }
    }
    if (!csv.flush()) throw CommandError(kExitDomain, "failed writing " + csv_path->string());
  }
  return kExitOk;
}

int cmd_scene(double depth, double rotation, std::ostream& out) {
  TrialSceneSpec spec;
  spec.depth = depth;
  spec.rotation = rotation;
  out << scene_to_json(build_study_scene(spec)).dump(2) << '\n';
  return kExitOk;
}

int cmd_synth(const std::string& sw, const std::string& orient, double depth, double rotation,
              int rep, std::uint64_t seed, const std::optional<std::filesystem::path>& config_path,
              const UserFlags& flags, const std::optional<std::filesystem::path>& out_path,
              std::ostream& out) {
  TrialSpec spec{switch_method_from_string(sw), orientation_method_from_string(orient), depth,
                 rotation, rep};
  spec.scene_spec().validate();
  const Trace trace = synth_trace(spec, flags.resolve(), seed, load_config(config_path));
  if (out_path) {
    std::ofstream f = open_output(*out_path);
    write_trace(f, trace);
    if (!f.flush()) throw CommandError(kExitDomain, "failed writing " + out_path->string());
  } else {
    write_trace(out, trace);
  }
  return kExitOk;
}

int cmd_serve(const ServeOptions& options, std::ostream& out) {
  Server server(options);
  out << "listening on " << options.host << ':' << server.port() << std::endl;
  std::atomic<bool> stop{false};
  server.run(stop);
  return kExitOk;
}

}  // namespace

std::uint64_t trial_seed(std::uint64_t run_seed, int participant, int trial) {
  return derive_seed(run_seed, static_cast<std::uint64_t>(participant),
                     static_cast<std::uint64_t>(trial));
}

std::vector<ResultRow> simulate(const SimulateOptions& options) {
  if (options.participants < 1) throw std::invalid_argument("participants must be >= 1");
  options.config.validate();
  options.user.validate();
  if (options.trace_dir) std::filesystem::create_directories(*options.trace_dir);
  std::vector<ResultRow> rows;
  rows.reserve(static_cast<std::size_t>(options.participants) * kTrialsPerParticipant);
  for (int p = 0; p < options.participants; ++p) {
    const std::vector<TrialSpec> design = generate_design(p);
    for (int i = 0; i < static_cast<int>(design.size()); ++i) {
      const TrialSpec& spec = design[i];
      const Trace trace = synth_trace(spec, options.user, trial_seed(options.seed, p, i), options.config);
      if (options.trace_dir) {
        write_trace(*options.trace_dir / ("p" + std::to_string(p) + "_t" + std::to_string(i) + ".jsonl"),
                    trace);
      }
      rows.push_back(ResultRow{p, i, spec, run_trial(spec, trace, options.config).metrics});
    }
  }
  return rows;
}

json timed_event_to_json(const TimedEvent& e) {
  json j = event_to_json(e.event);
  j["t"] = e.t;
  return j;
}

ReplayOutput replay(const Trace& trace, const std::optional<StudyScene>& scene,
                    const std::optional<json>& config_overlay, bool with_events) {
  KernelConfig config;
  std::optional<TrialSpec> trial;
  if (trace.header) {
    trial = trace.header->trial;
    if (trial) config = trial->kernel_config(config);
    if (trace.header->config) config = *trace.header->config;
  }
  if (config_overlay) config = config_from_json(*config_overlay, config);
  config.validate();

  StudyScene study;
  if (scene) {
    study = *scene;
  } else if (trial) {
    study = build_study_scene(trial->scene_spec());
  } else {
    throw std::invalid_argument("trace header names no trial; pass a scene file");
  }

  ReplayOutput out;
  out.result = run_trial(study, trace, config);
  out.json = json::object();
  out.json["metrics"] = out.result.metrics ? metrics_to_json(*out.result.metrics) : json(nullptr);
  if (with_events) {
    json events = json::array();
    for (const TimedEvent& e : out.result.log.events) events.push_back(timed_event_to_json(e));
    out.json["events"] = std::move(events);
  }
  return out;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stylus teleportation kernel: simulate, replay, stats, serve", "stp"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run synthetic participants through the full design");
  int participants = 18;
  std::uint64_t seed = 42;
  std::filesystem::path out_path = "results.jsonl";
  std::optional<std::filesystem::path> csv_path, config_path, trace_dir;
  UserFlags sim_flags;
  sim->add_option("--participants,-n", participants, "Number of participants")
      ->check(CLI::PositiveNumber);
  sim->add_option("--seed", seed, "Run seed");
  sim->add_option("--out,-o", out_path, "Results JSONL path");
  sim->add_option("--csv", csv_path, "Also write tidy per-trial CSV");
  sim->add_option("--config", config_path, "Kernel config JSON");
  sim->add_option("--trace-dir", trace_dir, "Write every synthetic trace here");
  sim_flags.add(sim);

  // replay
  auto* rep = app.add_subcommand("replay", "Replay a trace and print trial metrics as JSON");
  std::filesystem::path trace_path;
  std::optional<std::filesystem::path> scene_path, replay_config;
  bool with_events = false;
  rep->add_option("trace,--trace", trace_path, "Trace JSONL")->required();
  rep->add_option("--scene", scene_path, "Scene JSON (defaults to the trial in the trace header)");
  rep->add_option("--config", replay_config, "Kernel config JSON overlay");
  rep->add_flag("--events", with_events, "Include the timed event log");

  // stats
  auto* st = app.add_subcommand("stats", "IQR-filter and summarize a results file");
  std::filesystem::path results_path;
  std::string by;
  std::optional<std::filesystem::path> stats_csv;
  st->add_option("results,--results", results_path, "Results JSONL")->required();
  st->add_option("--by", by, "Comma-separated group keys: participant,switch,orient,depth,rotation,rep");
  st->add_option("--csv", stats_csv, "Write the summary as CSV");

  // serve
  auto* srv = app.add_subcommand("serve", "Serve the kernel over NDJSON/TCP");
  ServeOptions serve_opts;
  int heartbeat_ms = 5000;
  srv->add_option("--port", serve_opts.port, "TCP port (0 picks a free one)");
  srv->add_option("--host", serve_opts.host, "Bind address");
  srv->add_option("--heartbeat-ms", heartbeat_ms, "Idle gap before a session reset")
      ->check(CLI::PositiveNumber);

  // scene
  auto* sc = app.add_subcommand("scene", "Print a study scene as JSON");
  double depth = 3.0, rotation = 45.0;
  sc->add_option("--depth", depth, "Board distance (m)");
  sc->add_option("--rotation", rotation, "Board rotation (deg)");

  // synth
  auto* sy = app.add_subcommand("synth", "Generate one synthetic trial trace");
  std::string sw = "Button", orient = "Roll";
  int repetition = 1;
  std::uint64_t synth_seed = 1;
  std::optional<std::filesystem::path> synth_out, synth_config;
  UserFlags synth_flags;
  sy->add_option("--switch", sw, "Button or Flip");
  sy->add_option("--orient", orient, "Roll, StylusPoint or GazePoint");
  sy->add_option("--depth", depth, "Board distance (m)");
  sy->add_option("--rotation", rotation, "Board rotation (deg)");
  sy->add_option("--rep", repetition, "Repetition index");
  sy->add_option("--seed", synth_seed, "Seed");
  sy->add_option("--config", synth_config, "Kernel config JSON");
  sy->add_option("--out,-o", synth_out, "Trace path (stdout when omitted)");
  synth_flags.add(sy);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*sim) {
      return cmd_simulate(participants, seed, out_path, csv_path, config_path, trace_dir, sim_flags, out);
    }
    if (*rep) return cmd_replay(trace_path, scene_path, replay_config, with_events, out);
    if (*st) return cmd_stats(results_path, by, stats_csv, out);
    if (*srv) {
      serve_opts.heartbeat = std::chrono::milliseconds(heartbeat_ms);
      return cmd_serve(serve_opts, out);
    }
    if (*sc) return cmd_scene(depth, rotation, out);
    if (*sy) {
      return cmd_synth(sw, orient, depth, rotation, repetition, synth_seed, synth_config, synth_flags,
                       synth_out, out);
    }
  } catch (const CommandError& e) {
    err << "error: " << e.what() << '\n';
    return e.code;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  }
  return kExitUsage;
}

}  // namespace stp::cli

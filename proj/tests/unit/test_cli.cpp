#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "stp/cli.hpp"

namespace stp::cli {
namespace {

namespace fs = std::filesystem;
const fs::path kData = STP_TEST_DATA_DIR;

struct RunResult {
  int code;
  std::string out;
  std::string err;
};

RunResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "stp");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("stp_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path path(const std::string& name) const { return dir_ / name; }

  fs::path dir_;
};

TEST_F(CliTest, UsageErrorsExitOne) {
  EXPECT_EQ(run_cli({}).code, kExitUsage);
  EXPECT_EQ(run_cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run_cli({"simulate", "--participants", "0"}).code, kExitUsage);
  EXPECT_EQ(run_cli({"simulate", "--participants", "abc"}).code, kExitUsage);
  EXPECT_EQ(run_cli({"replay"}).code, kExitUsage);
  EXPECT_EQ(run_cli({"stats", (kData / "golden_trace.jsonl").string(), "--by", "colour"}).code, kExitUsage);
  EXPECT_EQ(run_cli({"--help"}).code, kExitOk);
}

TEST_F(CliTest, DomainErrorsExitTwo) {
  EXPECT_EQ(run_cli({"replay", path("missing.jsonl").string()}).code, kExitDomain);
  EXPECT_EQ(run_cli({"scene", "--depth", "4"}).code, kExitDomain);
  EXPECT_EQ(run_cli({"synth", "--switch", "Knob"}).code, kExitDomain);
  std::ofstream(path("bad.json")) << "{\"roll_gain\": -1}";
  EXPECT_EQ(run_cli({"simulate", "-n", "1", "--config", path("bad.json").string(), "-o",
                     path("r.jsonl").string()})
                .code,
            kExitDomain);
}

TEST_F(CliTest, ExecutableReportsExitCodes) {
  const std::string exe = STP_EXE;
  auto status = [](const std::string& cmd) {
    const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  EXPECT_EQ(status(exe + " scene"), 0);
  EXPECT_EQ(status(exe + " simulate --participants 0"), 1);
  EXPECT_EQ(status(exe + " scene --rotation 30"), 2);
}

TEST_F(CliTest, SimulateIsDeterministic) {
  const fs::path a = path("a.jsonl"), b = path("b.jsonl"), c = path("c.jsonl");
  const fs::path csv = path("a.csv");
  ASSERT_EQ(run_cli({"simulate", "-n", "2", "--seed", "42", "-o", a.string(), "--csv", csv.string()}).code,
            kExitOk);
  ASSERT_EQ(run_cli({"simulate", "-n", "2", "--seed", "42", "-o", b.string()}).code, kExitOk);
  ASSERT_EQ(run_cli({"simulate", "-n", "2", "--seed", "43", "-o", c.string()}).code, kExitOk);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_NE(slurp(a), slurp(c));

  const std::vector<ResultRow> rows = read_results(a);
  ASSERT_EQ(rows.size(), 240u);
  EXPECT_EQ(rows.front().participant, 0);
  EXPECT_EQ(rows.back().participant, 1);
  EXPECT_EQ(rows.back().trial, 119);
  for (int i = 0; i < 120; ++i) EXPECT_EQ(rows[i].spec, generate_design(0)[i]);

  const std::string csv_text = slurp(csv);
  EXPECT_EQ(csv_text.substr(0, csv_text.find('\n')), kResultsCsvHeader);
  EXPECT_EQ(std::count(csv_text.begin(), csv_text.end(), '\n'), 241);
}

TEST_F(CliTest, SimulateWritesTraces) {
  ASSERT_EQ(run_cli({"simulate", "-n", "1", "-o", path("r.jsonl").string(), "--trace-dir",
                     path("traces").string()})
                .code,
            kExitOk);
  const fs::path first = path("traces") / "p0_t0.jsonl";
  ASSERT_TRUE(fs::exists(first));
  // Replaying a written trace reproduces the stored metrics.
  const RunResult r = run_cli({"replay", first.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const ResultRow row = read_results(path("r.jsonl")).front();
  ASSERT_TRUE(row.metrics);
  EXPECT_EQ(metrics_from_json(nlohmann::json::parse(r.out)["metrics"]), *row.metrics);
}

TEST_F(CliTest, ReplayMatchesGoldenMetrics) {
  const RunResult r = run_cli({"replay", (kData / "golden_trace.jsonl").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const nlohmann::json got = nlohmann::json::parse(r.out)["metrics"];
  std::ifstream gin(kData / "golden_metrics.json");
  const nlohmann::json want = nlohmann::json::parse(gin);
  for (const char* key : {"switch_in_ms", "positioning_ms", "orientation_ms", "switch_out_ms", "task_ms",
                          "pos_err_m", "ori_err_deg"}) {
    EXPECT_NEAR(got[key].get<double>(), want[key].get<double>(), 1e-9) << key;
  }
  EXPECT_EQ(got["success"], want["success"]);
}

TEST_F(CliTest, ReplayWithExplicitSceneAndEvents) {
  std::ofstream(path("scene.json")) << scene_to_json(build_study_scene({3.0, 180.0})).dump();
  const RunResult r = run_cli({"replay", (kData / "golden_trace.jsonl").string(), "--scene",
                               path("scene.json").string(), "--events"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const nlohmann::json j = nlohmann::json::parse(r.out);
  ASSERT_TRUE(j.contains("events"));
  std::set<std::string> types;
  for (const auto& e : j["events"]) types.insert(e["type"].get<std::string>());
  for (const char* t : {"ModeSwitched", "HoldStarted", "OrientationPreview", "TeleportCommitted", "StrokeStarted"}) {
    EXPECT_TRUE(types.count(t)) << t;
  }
}

TEST_F(CliTest, ReplayWithoutCommitIsIncomplete) {
  Trace trace = read_trace(kData / "golden_trace.jsonl");
  std::erase_if(trace.frames, [](const InputFrame& f) { return f.t >= 2000.0; });
  write_trace(path("short.jsonl"), trace);
  const RunResult r = run_cli({"replay", path("short.jsonl").string()});
  EXPECT_EQ(r.code, kExitDomain);
  EXPECT_NE(r.err.find("incomplete trial"), std::string::npos) << r.err;
}

TEST_F(CliTest, ReplayRejectsSceneWithoutMarker) {
  nlohmann::json scene = scene_to_json(build_study_scene({3.0, 180.0}));
  scene.erase("marker");
  std::ofstream(path("scene.json")) << scene.dump();
  const RunResult r = run_cli({"replay", (kData / "golden_trace.jsonl").string(), "--scene",
                               path("scene.json").string()});
  EXPECT_EQ(r.code, kExitDomain);
  EXPECT_NE(r.err.find("marker"), std::string::npos) << r.err;
}

TEST_F(CliTest, ReplayReportsTraceLine) {
  std::ofstream bad(path("bad.jsonl"));
  std::ifstream in(kData / "golden_trace.jsonl");
  std::string line;
  for (int i = 0; std::getline(in, line); ++i) bad << (i == 3 ? "{\"t\":" : line) << '\n';
  bad.close();
  const RunResult r = run_cli({"replay", path("bad.jsonl").string()});
  EXPECT_EQ(r.code, kExitDomain);
  EXPECT_NE(r.err.find("line 4"), std::string::npos) << r.err;
}

std::set<std::string> csv_groups(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::set<std::string> groups;
  while (std::getline(in, line)) groups.insert(line.substr(0, line.find("\",") + 1));
  return groups;
}

TEST_F(CliTest, StatsGroupsByKeys) {
  ASSERT_EQ(run_cli({"simulate", "-n", "2", "-o", path("r.jsonl").string()}).code, kExitOk);
  RunResult r = run_cli({"stats", path("r.jsonl").string(), "--by", "switch", "--csv", path("s1.csv").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(csv_groups(path("s1.csv")).size(), 2u);
  r = run_cli({"stats", path("r.jsonl").string(), "--by", "switch,orient", "--csv", path("s2.csv").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(csv_groups(path("s2.csv")).size(), 6u);
  EXPECT_NE(r.out.find("IQR-filtered"), std::string::npos);
  EXPECT_EQ(slurp(path("s2.csv")).substr(0, 29), "group,n,measure,mean,sd,ci95\n");
}

TEST_F(CliTest, StatsFiltersTenfoldOutlier) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd(4000.0, 300.0);
  std::vector<ResultRow> rows;
  for (int i = 0; i < 60; ++i) {
    TrialMetrics m;
    m.task_completion_ms = nd(rng);
    m.switch_in_ms = 0.2 * m.task_completion_ms;
    rows.push_back({0, i, generate_design(0)[i], m});
  }
  {
    std::ofstream f(path("clean.jsonl"));
    write_results(f, rows);
  }
  rows[7].metrics->task_completion_ms *= 10.0;
  {
    std::ofstream f(path("dirty.jsonl"));
    write_results(f, rows);
  }
  const RunResult clean = run_cli({"stats", path("clean.jsonl").string()});
  const RunResult dirty = run_cli({"stats", path("dirty.jsonl").string(), "--csv", path("d.csv").string()});
  ASSERT_EQ(clean.code, kExitOk) << clean.err;
  ASSERT_EQ(dirty.code, kExitOk) << dirty.err;
  EXPECT_NE(clean.out.find("IQR-filtered: 0 "), std::string::npos) << clean.out;
  EXPECT_NE(dirty.out.find("IQR-filtered: 1 "), std::string::npos) << dirty.out;
  const std::string csv = slurp(path("d.csv"));
  EXPECT_NE(csv.find("\"all\",59,task_ms"), std::string::npos) << csv;
}

TEST_F(CliTest, SceneAndSynthCommands) {
  const RunResult scene = run_cli({"scene", "--depth", "6", "--rotation", "-45"});
  ASSERT_EQ(scene.code, kExitOk) << scene.err;
  EXPECT_EQ(scene_from_json(nlohmann::json::parse(scene.out)), build_study_scene({6.0, -45.0}));

  const RunResult synth = run_cli({"synth", "--switch", "Flip", "--orient", "GazePoint", "--depth", "6",
                                   "--rotation", "90", "--seed", "5"});
  ASSERT_EQ(synth.code, kExitOk) << synth.err;
  std::istringstream in(synth.out);
  const TrialSpec spec{SwitchMethod::Flip, OrientationMethod::GazePoint, 6.0, 90.0, 1};
  EXPECT_EQ(read_trace(in), synth_trace(spec, {}, 5));
}

}  // namespace
}  // namespace stp::cli

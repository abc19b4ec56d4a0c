#include <benchmark/benchmark.h>

#include <cmath>

#include "stp/harness.hpp"

namespace {

stp::Vec3 pitched(double yaw_deg, double pitch_deg) {
  const double y = yaw_deg * M_PI / 180.0, p = pitch_deg * M_PI / 180.0;
  return {std::cos(p) * std::sin(y), std::sin(p), std::cos(p) * std::cos(y)};
}

void BM_ParabolaStudyScene(benchmark::State& state) {
  const stp::StudyScene s = stp::build_study_scene({});
  const stp::ParabolaParams params;
  double pitch = -10.0;
  for (auto _ : state) {
    auto hit = stp::intersect_parabola({0.0, 1.0, 0.0}, pitched(0.0, pitch), params, s.scene, true);
    benchmark::DoNotOptimize(hit);
    pitch = pitch > 40.0 ? -10.0 : pitch + 0.37;
  }
}
BENCHMARK(BM_ParabolaStudyScene);

void BM_KernelStep(benchmark::State& state) {
  const stp::TrialSpec spec{stp::SwitchMethod::Button, stp::OrientationMethod::Roll, 6.0, 90.0, 1};
  const stp::Trace trace = stp::synth_trace(spec, {}, 1);
  const stp::StudyScene s = stp::build_study_scene(spec.scene_spec());
  const stp::KernelConfig config = spec.kernel_config();
  for (auto _ : state) {
    stp::Kernel kernel(config, s.scene, s.start_pose);
    for (const stp::InputFrame& f : trace.frames) benchmark::DoNotOptimize(kernel.step(f));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(trace.frames.size()));
}
BENCHMARK(BM_KernelStep);

void BM_SynthAndRunTrial(benchmark::State& state) {
  const stp::TrialSpec spec{stp::SwitchMethod::Flip, stp::OrientationMethod::GazePoint, 3.0, -45.0, 1};
  std::uint64_t seed = 0;
  for (auto _ : state) {
    const stp::Trace trace = stp::synth_trace(spec, {}, ++seed);
    benchmark::DoNotOptimize(stp::run_trial(spec, trace));
  }
}
BENCHMARK(BM_SynthAndRunTrial);

}  // namespace

BENCHMARK_MAIN();

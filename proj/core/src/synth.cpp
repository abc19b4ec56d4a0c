// Seeded synthetic participant. The user plans aims from scene geometry,
// adds motor and gaze noise, and observes the kernel it drives (cursor
// freeze, arrow preview, landing pose) the way a participant watches the
// headset display.

#include <algorithm>
#include <cmath>

#include "stp/rng.hpp"
#include "stp/trace.hpp"

namespace stp {

namespace {

// Rig-frame body layout of a seated participant.
constexpr Vec3 kHeadLocal{0.0, 1.2, 0.0};
constexpr Vec3 kStylusLocal{0.2, 0.95, 0.35};
constexpr double kButtonClickMs = 100.0;
constexpr double kFlipMs = 350.0;
constexpr double kStrokeMs = 500.0;
constexpr double kRollSpeedDegPerS = 150.0;
constexpr double kMaxLookAwayDeg = 100.0;

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

// Fast approach covering 90% of the motion, then a slow correction.
double two_phase(double tau) {
  if (tau < 0.6) return 0.9 * smoothstep(tau / 0.6);
  return 0.9 + 0.1 * smoothstep((tau - 0.6) / 0.4);
}

std::optional<Vec3> solve_launch(const Vec3& origin, const Vec3& target, const ParabolaParams& p,
                                 bool high) {
  const double dx = target.x - origin.x;
  const double dz = target.z - origin.z;
  const double dist = std::hypot(dx, dz);
  const double dy = target.y - origin.y;
  if (dist < 1e-6) return std::nullopt;
  const double v2 = p.speed * p.speed;
  const double disc = v2 * v2 - p.gravity * (p.gravity * dist * dist + 2.0 * dy * v2);
  if (disc < 0.0) return std::nullopt;
  const double root = std::sqrt(disc);
  const double tan_pitch = (v2 + (high ? root : -root)) / (p.gravity * dist);
  const double pitch = std::atan(tan_pitch);
  const double flight = dist / (p.speed * std::cos(pitch));
  if (flight > p.max_fall_time) return std::nullopt;
  const double c = std::cos(pitch);
  return Vec3{c * dx / dist, std::sin(pitch), c * dz / dist};
}

// Launch direction such that the arc leaving `center + half_length * dir`
// reaches `target`. Either grip puts the launch point on that side.
std::optional<Vec3> aim_from_stylus(const Vec3& center, double half_length, const Vec3& target,
                                    const ParabolaParams& p, bool high) {
  auto dir = solve_launch(center, target, p, high);
  for (int i = 0; dir && i < 8; ++i) dir = solve_launch(center + half_length * *dir, target, p, high);
  return dir;
}

Vec3 perturb(const Vec3& dir, double yaw_offset, double pitch_offset) {
  if (yaw_offset == 0.0 && pitch_offset == 0.0) return dir;
  const double yaw = std::hypot(dir.x, dir.z) > 1e-9 ? yaw_of(dir) : 0.0;
  return direction_from_yaw_pitch(yaw + yaw_offset, std::clamp(pitch_of(dir) + pitch_offset, -89.0, 89.0));
}

Vec3 horizontal_unit(const Vec3& v) { return normalized(Vec3{v.x, 0.0, v.z}); }

class SyntheticUser {
 public:
  SyntheticUser(const TrialSpec& trial, const SyntheticUserParams& user, std::uint64_t seed,
                const KernelConfig& base)
      : trial_(trial),
        user_(user),
        seed_(seed),
        config_(trial.kernel_config(base)),
        study_(build_study_scene(trial.scene_spec())),
        kernel_(config_, study_.scene, study_.start_pose),
        rng_(seed),
        period_ms_(1000.0 / user.frame_rate) {
    if (config_.orientation_method == OrientationMethod::GazePoint) {
      // Per-trial calibration offset drawn so its mean magnitude equals
      // gaze_noise_deg (Rayleigh mean = sigma * sqrt(pi / 2)).
      const double sigma = user_.gaze_noise_deg / std::sqrt(kPi / 2.0);
      gaze_bias_yaw_ = rng_.normal(0.0, sigma);
      gaze_bias_pitch_ = rng_.normal(0.0, sigma);
    }
  }

  Trace run();

 private:
  const UserPose& rig() const { return kernel_.state().user_pose; }
  Vec3 head_world() const { return to_world(rig(), kHeadLocal); }
  Vec3 stylus_world() const { return to_world(rig(), stylus_pos_); }
  UnitQuat world_to_rig(const UnitQuat& q) const { return UnitQuat::from_yaw(-rig().yaw_deg) * q; }
  Vec3 rig_dir(const Vec3& world_dir) const { return UnitQuat::from_yaw(-rig().yaw_deg).rotate(world_dir); }

  /// Grip-dependent stylus orientation whose launch direction is `dir`.
  UnitQuat pointing(const Vec3& world_dir) const {
    const Vec3 fwd = config_.switch_method == SwitchMethod::Flip ? -world_dir : world_dir;
    return world_to_rig(UnitQuat::look_along(fwd));
  }
  UnitQuat pen_pose_toward(const Vec3& world_point) const {
    return world_to_rig(UnitQuat::look_along(world_point - stylus_world()));
  }
  void look_at(const Vec3& world_point) {
    head_q_ = world_to_rig(UnitQuat::look_along(world_point - head_world()));
  }

  double sample_ms(double mean, double sd, double floor_ms) {
    return std::max(floor_ms, rng_.normal(mean, sd));
  }
  std::size_t frames_for(double ms) const {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(ms / period_ms_)));
  }

  void emit();
  void dwell(double ms) {
    for (std::size_t i = 0, n = frames_for(ms); i < n; ++i) emit();
  }
  void move_stylus(const UnitQuat& target, double ms, double (*profile)(double));

  std::optional<Vec3> noisy_aim(const Vec3& ideal, bool respect_permeability,
                                std::span<const ObjectId> pass);
  std::optional<Vec3> orientation_target(const Vec3& destination,
                                         std::span<const ObjectId> pass) const;
  const OrientHoldPhase* hold_phase() const {
    return std::get_if<OrientHoldPhase>(&kernel_.state().phase);
  }

  TrialSpec trial_;
  SyntheticUserParams user_;
  std::uint64_t seed_;
  KernelConfig config_;
  StudyScene study_;
  Kernel kernel_;
  Rng rng_;
  double period_ms_;

  std::size_t frame_index_ = 0;
  std::vector<InputFrame> frames_;
  Vec3 stylus_pos_ = kStylusLocal;
  UnitQuat stylus_q_;
  UnitQuat head_q_;
  bool front_ = false;
  bool rear_ = false;
  std::optional<Vec3> gaze_target_;  // world point; nullopt: look straight ahead
  double gaze_bias_yaw_ = 0.0;
  double gaze_bias_pitch_ = 0.0;
};

void SyntheticUser::emit() {
  InputFrame f;
  f.t = static_cast<double>(frame_index_) * 1000.0 / user_.frame_rate;
  f.stylus = {stylus_pos_, stylus_q_};
  f.front_button = front_;
  f.rear_button = rear_;
  f.head = {kHeadLocal, head_q_};
  if (config_.orientation_method == OrientationMethod::GazePoint) {
    Vec3 dir = gaze_target_ ? rig_dir(normalized(*gaze_target_ - head_world())) : head_q_.forward();
    const double jitter = user_.gaze_jitter_deg;
    dir = perturb(dir, gaze_bias_yaw_ + (jitter > 0.0 ? rng_.normal(0.0, jitter) : 0.0),
                  gaze_bias_pitch_ + (jitter > 0.0 ? rng_.normal(0.0, jitter) : 0.0));
    f.gaze = GazeSample{kHeadLocal, dir, true};
  }
  kernel_.step(f);
  frames_.push_back(std::move(f));
  ++frame_index_;
}

void SyntheticUser::move_stylus(const UnitQuat& target, double ms, double (*profile)(double)) {
  const UnitQuat start = stylus_q_;
  const std::size_t n = frames_for(ms);
  for (std::size_t i = 1; i <= n; ++i) {
    stylus_q_ = i == n ? target : slerp(start, target, profile(static_cast<double>(i) / n));
    emit();
  }
}

std::optional<Vec3> SyntheticUser::noisy_aim(const Vec3& ideal, bool respect_permeability,
                                             std::span<const ObjectId> pass) {
  const double sd = user_.aim_noise_deg;
  if (sd <= 0.0) return ideal;
  for (int attempt = 0; attempt < 20; ++attempt) {
    const Vec3 d = perturb(ideal, rng_.normal(0.0, sd), rng_.normal(0.0, sd));
    const auto hit = intersect_parabola(stylus_world() + config_.stylus_half_length * d, d,
                                        config_.parabola, study_.scene, respect_permeability, pass);
    if (!hit) continue;
    if (respect_permeability && hit->object_id != study_.scene.ground_id()) continue;
    return d;
  }
  return ideal;
}

// Picks a point on the bearing line from `destination` through the sphere
// midpoint that the orientation pointer can actually reach, preferring
// points far from the destination.
std::optional<Vec3> SyntheticUser::orientation_target(const Vec3& destination,
                                                      std::span<const ObjectId> pass) const {
  const Vec3 bearing = horizontal_unit(study_.sphere_midpoint - destination);
  const double ideal_yaw = yaw_of(bearing);
  std::vector<Vec3> candidates;
  for (double h : {1.2, 0.6, 1.8}) {
    const Vec3 from{destination.x, h, destination.z};
    if (auto hit = intersect_ray(from, bearing, study_.scene, pass)) candidates.push_back(hit->point);
  }
  for (double s : {6.0, 5.0, 4.0, 3.0, 2.5, 2.0, 1.5, 1.0, 0.6, 0.3}) {
    candidates.push_back(destination + s * bearing);
  }
  std::stable_sort(candidates.begin(), candidates.end(), [&](const Vec3& a, const Vec3& b) {
    return horizontal_distance(a, destination) > horizontal_distance(b, destination);
  });

  const Vec3 head = head_world();
  const Vec3 to_marker = normalized(destination - head);
  for (const Vec3& target : candidates) {
    if (horizontal_distance(target, destination) < 0.2) continue;
    if (std::abs(wrap_deg(yaw_of(target - destination) - ideal_yaw)) > 1e-6) continue;
    const Vec3 to_target = normalized(target - head);
    if (angle_between(to_target, to_marker) > kMaxLookAwayDeg) continue;

    if (config_.orientation_method == OrientationMethod::GazePoint) {
      const auto hit = intersect_ray(head, to_target, study_.scene, pass);
      if (hit && norm(hit->point - target) < 1e-3) return target;
    } else {
      for (bool high : {false, true}) {
        const auto dir = aim_from_stylus(stylus_world(), config_.stylus_half_length, target,
                                         config_.parabola, high);
        if (!dir) continue;
        if (config_.switch_method == SwitchMethod::Flip && angle_between(*dir, to_target) > 60.0) {
          continue;
        }
        const auto hit = intersect_parabola(stylus_world() + config_.stylus_half_length * *dir, *dir,
                                            config_.parabola, study_.scene, false, pass);
        if (hit && norm(hit->point - target) < 1e-3) return target;
      }
    }
  }
  return std::nullopt;
}

Trace SyntheticUser::run() {
  const Vec3 midpoint = study_.sphere_midpoint;
  const Vec3 pen_target = midpoint - Vec3{0.0, 0.3, 0.0};
  const ParabolaParams& arc = config_.parabola;
  const double h = config_.stylus_half_length;

  // Trial start: reading the board, pen in precision grip.
  look_at(midpoint);
  stylus_q_ = pen_pose_toward(pen_target);
  emit();
  dwell(sample_ms(user_.reaction_mean_ms, user_.reaction_sd_ms, 150.0));

  // Positioning aim at the marker.
  const Vec3 marker = study_.marker_center;
  look_at(marker);
  std::optional<Vec3> ideal = aim_from_stylus(stylus_world(), h, marker, arc, false);
  if (!ideal) ideal = aim_from_stylus(stylus_world(), h, marker, arc, true);
  const Vec3 aim = ideal ? *noisy_aim(*ideal, true, {}) : normalized(marker - stylus_world());
  const double aim_ms = sample_ms(650.0, 150.0, 300.0);

  if (config_.switch_method == SwitchMethod::Button) {
    rear_ = true;
    dwell(kButtonClickMs);
    rear_ = false;
    move_stylus(pointing(aim), aim_ms, two_phase);
  } else {
    const Vec3 rough = perturb(aim, rng_.uniform(-8.0, 8.0), rng_.uniform(-6.0, 6.0));
    move_stylus(pointing(rough), kFlipMs, smoothstep);
    move_stylus(pointing(aim), 0.6 * aim_ms, two_phase);
  }
  dwell(sample_ms(150.0, 50.0, 60.0));

  // Confirm the destination.
  front_ = true;
  emit();
  const OrientHoldPhase* hold = hold_phase();
  if (hold != nullptr) {
    const Vec3 destination = hold->destination;
    const std::vector<ObjectId> pass = kernel_.state().translucent;
    dwell(config_.hold_threshold_ms + sample_ms(120.0, 40.0, 30.0));

    double motion_ms = 0.0;
    switch (config_.orientation_method) {
      case OrientationMethod::Roll: {
        hold = hold_phase();
        const double start_yaw = hold != nullptr ? hold->roll.initial_head_yaw : rig().yaw_deg;
        const double target_yaw = yaw_of(midpoint - destination);
        double twist = wrap_deg(target_yaw - start_yaw) / config_.roll_gain;
        if (user_.aim_noise_deg > 0.0) twist += rng_.normal(0.0, user_.aim_noise_deg);
        motion_ms = std::max(200.0, std::abs(twist) / kRollSpeedDegPerS * 1000.0);
        const std::size_t n = frames_for(motion_ms);
        const double per_frame = twist / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
          const Vec3 axis = config_.switch_method == SwitchMethod::Flip ? -stylus_q_.forward()
                                                                        : stylus_q_.forward();
          stylus_q_ = UnitQuat::from_axis_angle(axis, per_frame) * stylus_q_;
          emit();
        }
        break;
      }
      case OrientationMethod::StylusPoint: {
        const Vec3 target = orientation_target(destination, pass).value_or(midpoint);
        look_at(target);
        std::optional<Vec3> dir = aim_from_stylus(stylus_world(), h, target, arc, false);
        if (!dir) dir = aim_from_stylus(stylus_world(), h, target, arc, true);
        if (!dir) dir = normalized(target - stylus_world());
        const Vec3 d = noisy_aim(*dir, false, pass).value_or(*dir);
        motion_ms = sample_ms(600.0, 150.0, 250.0);
        move_stylus(pointing(d), motion_ms, two_phase);
        break;
      }
      case OrientationMethod::GazePoint: {
        const Vec3 target = orientation_target(destination, pass).value_or(midpoint);
        gaze_target_ = target;
        const UnitQuat toward_marker = head_q_;
        look_at(target);
        head_q_ = slerp(toward_marker, head_q_, 0.5);
        motion_ms = std::max(250.0, (config_.gaze_window + 5) * period_ms_);
        dwell(motion_ms);
        break;
      }
    }
    const double settle = sample_ms(user_.hold_mean_ms, user_.hold_sd_ms, 0.0) - motion_ms;
    dwell(std::max(150.0, settle));
  }

  // Release to teleport.
  front_ = false;
  emit();
  gaze_target_.reset();
  look_at(midpoint);
  dwell(sample_ms(0.8 * user_.reaction_mean_ms, user_.reaction_sd_ms, 120.0));

  // Back to draw mode.
  if (config_.switch_method == SwitchMethod::Button) {
    rear_ = true;
    dwell(kButtonClickMs);
    rear_ = false;
    stylus_q_ = pen_pose_toward(pen_target);
    emit();
  } else {
    move_stylus(pen_pose_toward(pen_target), kFlipMs, smoothstep);
  }
  dwell(sample_ms(300.0, 80.0, 100.0));

  // Connect the spheres, or draw in mid-air when they are out of reach.
  const Vec3 along = normalized(study_.sphere_a - study_.sphere_b);
  Vec3 start = study_.sphere_a + 0.08 * along;
  Vec3 end = study_.sphere_b - 0.08 * along;
  const Vec3 user_pos = rig().position;
  const double reach = horizontal_distance(user_pos, midpoint);
  if (reach > user_.arm_reach) {
    const Vec3 back = horizontal_unit(user_pos - midpoint) * (reach - 0.9 * user_.arm_reach);
    start = start + back;
    end = end + back;
  }
  const UnitQuat pen_q = world_to_rig(UnitQuat::look_along(midpoint - head_world()));
  const Vec3 pen_fwd_world = UnitQuat::from_yaw(rig().yaw_deg).rotate(pen_q.forward());
  auto place_tip = [&](const Vec3& tip_world) {
    stylus_pos_ = to_rig(rig(), tip_world - h * pen_fwd_world);
    stylus_q_ = pen_q;
  };

  const Vec3 tip_rest = stylus_world() + h * UnitQuat::from_yaw(rig().yaw_deg).rotate(stylus_q_.forward());
  const std::size_t approach = frames_for(250.0);
  for (std::size_t i = 1; i <= approach; ++i) {
    const double s = smoothstep(static_cast<double>(i) / approach);
    place_tip(tip_rest + s * (start - tip_rest));
    emit();
  }
  front_ = true;
  const std::size_t stroke = frames_for(kStrokeMs);
  for (std::size_t i = 0; i <= stroke; ++i) {
    place_tip(start + (static_cast<double>(i) / stroke) * (end - start));
    emit();
  }
  front_ = false;
  emit();
  dwell(300.0);

  Trace trace;
  trace.header = TraceHeader{config_, trial_, "study", seed_};
  trace.frames = std::move(frames_);
  return trace;
}

}  // namespace

void SyntheticUserParams::validate() const {
  if (!(reaction_mean_ms > 0.0) || !(reaction_sd_ms >= 0.0)) {
    throw std::invalid_argument("reaction_ms must be positive");
  }
  if (!(aim_noise_deg >= 0.0)) throw std::invalid_argument("aim_noise_deg must be >= 0");
  if (!(gaze_noise_deg >= 0.0)) throw std::invalid_argument("gaze_noise_deg must be >= 0");
  if (!(gaze_jitter_deg >= 0.0)) throw std::invalid_argument("gaze_jitter_deg must be >= 0");
  if (!(frame_rate > 0.0)) throw std::invalid_argument("frame_rate must be > 0");
  if (!(hold_mean_ms > 0.0) || !(hold_sd_ms >= 0.0)) throw std::invalid_argument("hold_ms must be positive");
  if (!(arm_reach > 0.0)) throw std::invalid_argument("arm_reach must be > 0");
}

SyntheticUserParams SyntheticUserParams::noiseless() {
  SyntheticUserParams p;
  p.aim_noise_deg = 0.0;
  p.gaze_noise_deg = 0.0;
  p.gaze_jitter_deg = 0.0;
  return p;
}

Trace synth_trace(const TrialSpec& trial, const SyntheticUserParams& user, std::uint64_t seed,
                  const KernelConfig& base) {
  user.validate();
  return SyntheticUser(trial, user, seed, base).run();
}

}  // namespace stp

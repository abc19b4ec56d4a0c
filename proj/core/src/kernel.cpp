#include "stp/kernel.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "json_util.hpp"

namespace stp {

namespace {

using jsonutil::json;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

json optional_vec(const std::optional<Vec3>& v) {
  return v ? jsonutil::vec_to_json(*v) : json(nullptr);
}

json optional_num(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

double head_yaw_or(const Pose& world_head, double fallback) {
  try {
    return yaw_of(world_head.orientation.forward());
  } catch (const DegenerateDirection&) {
    return fallback;
  }
}

std::optional<OrientationSample> orientation_from_cursor(const Vec3& destination,
                                                          const Vec3& cursor) {
  try {
    return OrientationSample{cursor, yaw_of(cursor - destination)};
  } catch (const DegenerateDirection&) {
    return std::nullopt;
  }
}

struct Buttons {
  bool teleport_down = false;
  bool teleport_was_down = false;
  bool rear_pressed = false;
};

Buttons read_buttons(const KernelState& s, const InputFrame& f, SwitchMethod method) {
  Buttons b;
  if (method == SwitchMethod::Button) {
    b.teleport_down = f.front_button;
    b.teleport_was_down = s.front_down;
  } else {
    b.teleport_down = f.front_button || f.rear_button;
    b.teleport_was_down = s.front_down || s.rear_down;
  }
  b.rear_pressed = f.rear_button && !s.rear_down;
  return b;
}

void enter_mode(KernelState& s, Mode to, std::vector<KernelEvent>& events) {
  if (s.stroke_active) {
    events.emplace_back(StrokeEnded{});
    s.stroke_active = false;
  }
  s.mode = to;
  s.phase = to == Mode::Teleport ? Phase{AimingPhase{}} : Phase{IdlePhase{}};
  s.translucent.clear();
  events.emplace_back(ModeSwitched{to});
}

void run_controller(OrientHoldPhase& hold, const KernelState& s, const Pose& world_stylus,
                    const Pose& world_head, const InputFrame& frame, const KernelConfig& config,
                    const Scene& scene, bool activating) {
  switch (config.orientation_method) {
    case OrientationMethod::Roll: {
      if (activating) {
        hold.roll.initial_head_yaw = head_yaw_or(world_head, s.user_pose.yaw_deg);
        hold.roll.accumulated_twist = 0.0;
      } else {
        const Vec3 axis = stylus_ray(world_stylus, config).dir;
        hold.roll.accumulated_twist +=
            twist_delta(hold.roll.last_stylus, world_stylus.orientation, axis);
      }
      hold.roll.last_stylus = world_stylus.orientation;
      hold.preview_yaw =
          roll_controller(hold.roll.initial_head_yaw, hold.roll.accumulated_twist, config.roll_gain);
      break;
    }
    case OrientationMethod::StylusPoint: {
      const auto sample = point_controller(hold.destination, stylus_ray(world_stylus, config),
                                           config.parabola, scene, s.translucent);
      if (sample) {
        hold.preview_yaw = sample->yaw_deg;
        hold.orientation_cursor = sample->cursor;
      }
      break;
    }
    case OrientationMethod::GazePoint: {
      if (!frame.gaze || !frame.gaze->valid || s.gaze_buffer.empty()) break;
      const UnitQuat rig = UnitQuat::from_yaw(s.user_pose.yaw_deg);
      std::vector<Vec3> world_dirs;
      world_dirs.reserve(s.gaze_buffer.size());
      for (const Vec3& d : s.gaze_buffer) world_dirs.push_back(rig.rotate(d));
      const auto sample = gaze_controller(hold.destination, to_world(s.user_pose, frame.gaze->origin),
                                          world_dirs, scene, s.translucent);
      if (sample) {
        hold.preview_yaw = sample->yaw_deg;
        hold.orientation_cursor = sample->cursor;
      }
      break;
    }
  }
}

}  // namespace

const char* to_string(SwitchMethod m) { return m == SwitchMethod::Button ? "Button" : "Flip"; }

const char* to_string(OrientationMethod m) {
  switch (m) {
    case OrientationMethod::Roll:
      return "Roll";
    case OrientationMethod::StylusPoint:
      return "StylusPoint";
    case OrientationMethod::GazePoint:
      return "GazePoint";
  }
  return "?";
}

const char* to_string(Mode m) { return m == Mode::Draw ? "Draw" : "Teleport"; }

SwitchMethod switch_method_from_string(const std::string& s) {
  if (s == "Button") return SwitchMethod::Button;
  if (s == "Flip") return SwitchMethod::Flip;
  throw std::invalid_argument("unknown switch method '" + s + "' (expected Button or Flip)");
}

OrientationMethod orientation_method_from_string(const std::string& s) {
  if (s == "Roll" || s == "StylusRoll") return OrientationMethod::Roll;
  if (s == "StylusPoint") return OrientationMethod::StylusPoint;
  if (s == "GazePoint") return OrientationMethod::GazePoint;
  throw std::invalid_argument("unknown orientation method '" + s +
                              "' (expected Roll, StylusPoint or GazePoint)");
}

void KernelConfig::validate() const {
  if (!(flip_on_deg > 0.0 && flip_on_deg < 180.0)) {
    throw std::invalid_argument("flip_on_deg must lie in (0, 180)");
  }
  if (!(flip_off_deg < flip_on_deg)) throw std::invalid_argument("flip_off_deg must be < flip_on_deg");
  if (!(hold_threshold_ms > 0.0)) throw std::invalid_argument("hold_threshold_ms must be > 0");
  if (!(roll_gain > 0.0)) throw std::invalid_argument("roll_gain must be > 0");
  if (gaze_window < 1) throw std::invalid_argument("gaze_window must be >= 1");
  if (!(stylus_half_length >= 0.0)) throw std::invalid_argument("stylus_half_length must be >= 0");
  parabola.validate();
}

json config_to_json(const KernelConfig& c) {
  return json{{"switch_method", to_string(c.switch_method)},
              {"orientation_method", to_string(c.orientation_method)},
              {"flip_on_deg", c.flip_on_deg},
              {"flip_off_deg", c.flip_off_deg},
              {"hold_threshold_ms", c.hold_threshold_ms},
              {"roll_gain", c.roll_gain},
              {"gaze_window", c.gaze_window},
              {"stylus_half_length", c.stylus_half_length},
              {"parabola",
               {{"speed", c.parabola.speed},
                {"gravity", c.parabola.gravity},
                {"max_fall_time", c.parabola.max_fall_time},
                {"march_step", c.parabola.march_step}}}};
}

KernelConfig config_from_json(const json& j, KernelConfig c) {
  using jsonutil::number;
  if (!j.is_object()) throw std::invalid_argument("config: expected an object");
  for (const auto& [key, value] : j.items()) {
    const std::string where = "config." + key;
    if (key == "switch_method") {
      if (!value.is_string()) throw std::invalid_argument(where + ": expected a string");
      c.switch_method = switch_method_from_string(value.get<std::string>());
    } else if (key == "orientation_method") {
      if (!value.is_string()) throw std::invalid_argument(where + ": expected a string");
      c.orientation_method = orientation_method_from_string(value.get<std::string>());
    } else if (key == "flip_on_deg") {
      c.flip_on_deg = number(value, where);
    } else if (key == "flip_off_deg") {
      c.flip_off_deg = number(value, where);
    } else if (key == "hold_threshold_ms") {
      c.hold_threshold_ms = number(value, where);
    } else if (key == "roll_gain") {
      c.roll_gain = number(value, where);
    } else if (key == "gaze_window") {
      if (!value.is_number_integer()) throw std::invalid_argument(where + ": expected an integer");
      c.gaze_window = value.get<int>();
    } else if (key == "stylus_half_length") {
      c.stylus_half_length = number(value, where);
    } else if (key == "parabola") {
      if (!value.is_object()) throw std::invalid_argument(where + ": expected an object");
      for (const auto& [pk, pv] : value.items()) {
        const std::string pwhere = where + "." + pk;
        if (pk == "speed") {
          c.parabola.speed = number(pv, pwhere);
        } else if (pk == "gravity") {
          c.parabola.gravity = number(pv, pwhere);
        } else if (pk == "max_fall_time") {
          c.parabola.max_fall_time = number(pv, pwhere);
        } else if (pk == "march_step") {
          c.parabola.march_step = number(pv, pwhere);
        } else {
          throw std::invalid_argument(pwhere + ": unknown field");
        }
      }
    } else {
      throw std::invalid_argument(where + ": unknown field");
    }
  }
  c.validate();
  return c;
}

KernelState initial_state(const UserPose& start) {
  KernelState s;
  s.user_pose = start;
  return s;
}

bool is_teleport_event(const KernelEvent& e) {
  return std::holds_alternative<CursorUpdated>(e) || std::holds_alternative<HoldStarted>(e) ||
         std::holds_alternative<OrientationPreview>(e) ||
         std::holds_alternative<TeleportCommitted>(e);
}

bool is_draw_event(const KernelEvent& e) {
  return std::holds_alternative<StrokeStarted>(e) || std::holds_alternative<StrokePoint>(e) ||
         std::holds_alternative<StrokeEnded>(e);
}

Pose to_world(const UserPose& rig, const Pose& local) {
  const UnitQuat r = UnitQuat::from_yaw(rig.yaw_deg);
  return {rig.position + r.rotate(local.position), r * local.orientation};
}

Vec3 to_world(const UserPose& rig, const Vec3& local) {
  return rig.position + UnitQuat::from_yaw(rig.yaw_deg).rotate(local);
}

Vec3 to_rig(const UserPose& rig, const Vec3& world) {
  return UnitQuat::from_yaw(-rig.yaw_deg).rotate(world - rig.position);
}

bool detect_flip(const Vec3& stylus_dir, const Vec3& cam_forward, bool currently_flipped,
                 const KernelConfig& config) {
  const double angle = angle_between(stylus_dir, cam_forward);
  if (!currently_flipped) return angle > config.flip_on_deg;
  return !(angle < config.flip_off_deg);
}

PressKind classify_press(double duration_ms, double threshold_ms) {
  return duration_ms >= threshold_ms ? PressKind::Hold : PressKind::Click;
}

double roll_controller(double initial_head_yaw, double accumulated_twist, double gain) {
  return wrap_deg(initial_head_yaw + gain * accumulated_twist);
}

StylusRay stylus_ray(const Pose& world_stylus, const KernelConfig& config) {
  const Vec3 axis = world_stylus.orientation.forward();
  if (config.switch_method == SwitchMethod::Flip) {
    return {world_stylus.position - config.stylus_half_length * axis, -axis};
  }
  return {world_stylus.position + config.stylus_half_length * axis, axis};
}

std::optional<OrientationSample> point_controller(const Vec3& destination, const StylusRay& ray,
                                                  const ParabolaParams& params,
                                                  const Scene& scene,
                                                  std::span<const ObjectId> penetrated_ids) {
  const auto hit = intersect_parabola(ray.origin, ray.dir, params, scene, false, penetrated_ids);
  if (!hit) return std::nullopt;
  return orientation_from_cursor(destination, hit->point);
}

std::optional<Vec3> smooth_gaze(std::span<const Vec3> directions) {
  if (directions.empty()) return std::nullopt;
  Vec3 sum;
  for (const Vec3& d : directions) sum += d;
  const double n = norm(sum);
  if (!(n > 1e-12)) return std::nullopt;
  return sum / n;
}

std::optional<OrientationSample> gaze_controller(const Vec3& destination, const Vec3& gaze_origin,
                                                 std::span<const Vec3> gaze_directions,
                                                 const Scene& scene,
                                                 std::span<const ObjectId> penetrated_ids) {
  const auto dir = smooth_gaze(gaze_directions);
  if (!dir) return std::nullopt;
  const auto hit = intersect_ray(gaze_origin, *dir, scene, penetrated_ids);
  if (!hit) return std::nullopt;
  return orientation_from_cursor(destination, hit->point);
}

StepResult step(const KernelState& state, const InputFrame& frame, const KernelConfig& config,
                const Scene& scene) {
  if (state.last_t && !(frame.t > *state.last_t)) {
    throw std::invalid_argument("frame time must increase strictly");
  }
  StepResult out{state, {}};
  KernelState& s = out.state;
  auto& events = out.events;

  const Pose world_stylus = to_world(s.user_pose, frame.stylus);
  const Pose world_head = to_world(s.user_pose, frame.head);
  const Buttons buttons = read_buttons(state, frame, config.switch_method);

  if (frame.gaze && frame.gaze->valid) {
    s.gaze_buffer.push_back(frame.gaze->dir);
    while (s.gaze_buffer.size() > static_cast<std::size_t>(config.gaze_window)) {
      s.gaze_buffer.pop_front();
    }
  }

  const bool holding = std::holds_alternative<OrientHoldPhase>(s.phase);
  bool switched = false;
  if (config.switch_method == SwitchMethod::Button) {
    if (buttons.rear_pressed) {
      if (holding) {
        events.emplace_back(SwitchDenied{"teleport in progress"});
      } else {
        enter_mode(s, s.mode == Mode::Draw ? Mode::Teleport : Mode::Draw, events);
        switched = true;
      }
    }
  } else {
    const bool was_flipped = s.flipped;
    s.flipped = detect_flip(world_stylus.orientation.forward(), world_head.orientation.forward(),
                            was_flipped, config);
    const Mode wanted = s.flipped ? Mode::Teleport : Mode::Draw;
    if (wanted != s.mode) {
      if (holding) {
        if (s.flipped != was_flipped) events.emplace_back(SwitchDenied{"teleport in progress"});
      } else {
        enter_mode(s, wanted, events);
        switched = true;
      }
    }
  }

  if (!switched && s.mode == Mode::Draw) {
    if (frame.front_button) {
      const Vec3 tip = world_stylus.position +
                       config.stylus_half_length * world_stylus.orientation.forward();
      if (s.stroke_active) {
        events.emplace_back(StrokePoint{tip});
      } else {
        events.emplace_back(StrokeStarted{tip});
        s.stroke_active = true;
      }
    } else if (s.stroke_active) {
      events.emplace_back(StrokeEnded{});
      s.stroke_active = false;
    }
  } else if (!switched && s.mode == Mode::Teleport) {
    if (std::holds_alternative<CommittingPhase>(s.phase) ||
        std::holds_alternative<IdlePhase>(s.phase)) {
      s.phase = AimingPhase{};
    }
    if (auto* aim = std::get_if<AimingPhase>(&s.phase)) {
      const StylusRay ray = stylus_ray(world_stylus, config);
      const auto hit = intersect_parabola(ray.origin, ray.dir, config.parabola, scene, true);
      std::optional<Vec3> cursor;
      if (hit && hit->object_id == scene.ground_id()) cursor = hit->point;
      s.translucent = hit ? hit->penetrated_ids : std::vector<ObjectId>{};
      if (cursor != aim->cursor) {
        aim->cursor = cursor;
        events.emplace_back(CursorUpdated{cursor});
      }
      if (buttons.teleport_down && !buttons.teleport_was_down && cursor) {
        OrientHoldPhase hold;
        hold.press_t = frame.t;
        hold.destination = *cursor;
        s.phase = hold;
        events.emplace_back(HoldStarted{*cursor});
      }
    } else if (auto* hold = std::get_if<OrientHoldPhase>(&s.phase)) {
      const double held_for = frame.t - hold->press_t;
      const bool activating =
          !hold->classified_hold &&
          classify_press(held_for, config.hold_threshold_ms) == PressKind::Hold;
      if (activating) hold->classified_hold = true;
      if (hold->classified_hold) {
        run_controller(*hold, s, world_stylus, world_head, frame, config, scene, activating);
        if (hold->preview_yaw) {
          events.emplace_back(OrientationPreview{*hold->preview_yaw, hold->orientation_cursor});
        }
      }
      if (!buttons.teleport_down) {
        TeleportCommitted commit;
        commit.position = hold->destination;
        commit.orientation_changed = hold->classified_hold && hold->preview_yaw.has_value();
        commit.yaw_deg = commit.orientation_changed ? *hold->preview_yaw : s.user_pose.yaw_deg;
        s.user_pose.position = commit.position;
        s.user_pose.yaw_deg = commit.yaw_deg;
        s.phase = CommittingPhase{};
        s.translucent.clear();
        events.emplace_back(commit);
      }
    }
  }

  s.front_down = frame.front_button;
  s.rear_down = frame.rear_button;
  s.last_t = frame.t;
  return out;
}

Kernel::Kernel(KernelConfig config, Scene scene, UserPose start)
    : config_(std::move(config)), scene_(std::move(scene)), start_(start),
      state_(initial_state(start)) {
  config_.validate();
}

std::vector<KernelEvent> Kernel::step(const InputFrame& frame) {
  StepResult r = stp::step(state_, frame, config_, scene_);
  state_ = std::move(r.state);
  return std::move(r.events);
}

void Kernel::reset() { state_ = initial_state(start_); }

json event_to_json(const KernelEvent& e) {
  using jsonutil::vec_to_json;
  return std::visit(
      Overloaded{
          [](const ModeSwitched& m) { return json{{"type", "ModeSwitched"}, {"to", to_string(m.to)}}; },
          [](const CursorUpdated& c) {
            return json{{"type", "CursorUpdated"}, {"pos", optional_vec(c.position)}};
          },
          [](const HoldStarted& h) {
            return json{{"type", "HoldStarted"}, {"destination", vec_to_json(h.destination)}};
          },
          [](const OrientationPreview& p) {
            return json{{"type", "OrientationPreview"},
                        {"yaw_deg", p.yaw_deg},
                        {"cursor", optional_vec(p.cursor)}};
          },
          [](const TeleportCommitted& c) {
            return json{{"type", "TeleportCommitted"},
                        {"position", vec_to_json(c.position)},
                        {"yaw_deg", c.yaw_deg},
                        {"orientation_changed", c.orientation_changed}};
          },
          [](const SwitchDenied& d) { return json{{"type", "SwitchDenied"}, {"reason", d.reason}}; },
          [](const StrokeStarted& p) {
            return json{{"type", "StrokeStarted"}, {"point", vec_to_json(p.point)}};
          },
          [](const StrokePoint& p) {
            return json{{"type", "StrokePoint"}, {"point", vec_to_json(p.point)}};
          },
          [](const StrokeEnded&) { return json{{"type", "StrokeEnded"}}; },
      },
      e);
}

json state_to_json(const KernelState& s) {
  json phase = std::visit(
      Overloaded{
          [](const IdlePhase&) { return json{{"kind", "Idle"}}; },
          [](const AimingPhase& a) { return json{{"kind", "Aiming"}, {"cursor", optional_vec(a.cursor)}}; },
          [](const OrientHoldPhase& h) {
            return json{{"kind", "OrientHold"},
                        {"press_t", h.press_t},
                        {"destination", jsonutil::vec_to_json(h.destination)},
                        {"classified_hold", h.classified_hold},
                        {"preview_yaw", optional_num(h.preview_yaw)},
                        {"orientation_cursor", optional_vec(h.orientation_cursor)}};
          },
          [](const CommittingPhase&) { return json{{"kind", "Committing"}}; },
      },
      s.phase);
  return json{{"mode", to_string(s.mode)},
              {"flipped", s.flipped},
              {"phase", std::move(phase)},
              {"user_pose",
               {{"p", jsonutil::vec_to_json(s.user_pose.position)}, {"yaw_deg", s.user_pose.yaw_deg}}},
              {"translucent", s.translucent},
              {"gaze_samples", s.gaze_buffer.size()},
              {"stroke_active", s.stroke_active},
              {"t", optional_num(s.last_t)}};
}

}  // namespace stp

// Interaction kernel: a pure state machine over stylus/head/gaze input frames
// covering draw/teleport mode switching, parabolic positioning, and the three
// orientation controllers.
//
// Device conventions: the stylus tip is local +z of the stylus pose, offset
// by `stylus_half_length` from the pose position; the tail sits opposite.
// The head looks along its local +z. Tracked poses are expressed in the
// user's rig frame and mapped to the world by the current UserPose, so a
// teleport moves the whole rig.

#ifndef STP_KERNEL_HPP
#define STP_KERNEL_HPP

#include <deque>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stp/geom.hpp"
#include "stp/scene.hpp"

namespace stp {

enum class SwitchMethod { Button, Flip };
enum class OrientationMethod { Roll, StylusPoint, GazePoint };
enum class Mode { Draw, Teleport };
enum class PressKind { Click, Hold };

const char* to_string(SwitchMethod m);
const char* to_string(OrientationMethod m);
const char* to_string(Mode m);
SwitchMethod switch_method_from_string(const std::string& s);
OrientationMethod orientation_method_from_string(const std::string& s);

struct KernelConfig {
  SwitchMethod switch_method = SwitchMethod::Button;
  OrientationMethod orientation_method = OrientationMethod::Roll;
  double flip_on_deg = 120.0;
  double flip_off_deg = 110.0;
  double hold_threshold_ms = 200.0;
  double roll_gain = 1.5;
  int gaze_window = 10;
  ParabolaParams parabola;
  double stylus_half_length = 0.08;  // m

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  friend bool operator==(const KernelConfig&, const KernelConfig&) = default;
};

nlohmann::json config_to_json(const KernelConfig& config);
/// Overlays the fields present in `j` onto `base`; unknown fields throw.
KernelConfig config_from_json(const nlohmann::json& j, KernelConfig base = {});

struct GazeSample {
  Vec3 origin;
  Vec3 dir;
  bool valid = true;

  friend bool operator==(const GazeSample&, const GazeSample&) = default;
};

/// One tracked input sample. `t` is in milliseconds.
struct InputFrame {
  double t = 0.0;
  Pose stylus;
  bool front_button = false;
  bool rear_button = false;
  Pose head;
  std::optional<GazeSample> gaze;

  friend bool operator==(const InputFrame&, const InputFrame&) = default;
};

struct RollTracking {
  double initial_head_yaw = 0.0;
  double accumulated_twist = 0.0;
  UnitQuat last_stylus;
};

struct IdlePhase {};
struct AimingPhase {
  std::optional<Vec3> cursor;
};
struct OrientHoldPhase {
  double press_t = 0.0;
  Vec3 destination;
  bool classified_hold = false;
  std::optional<double> preview_yaw;
  std::optional<Vec3> orientation_cursor;
  RollTracking roll;
};
struct CommittingPhase {};

using Phase = std::variant<IdlePhase, AimingPhase, OrientHoldPhase, CommittingPhase>;

struct KernelState {
  Mode mode = Mode::Draw;
  bool flipped = false;
  Phase phase = IdlePhase{};
  UserPose user_pose;
  /// Most recent valid gaze directions in the rig frame, oldest first.
  std::deque<Vec3> gaze_buffer;
  std::vector<ObjectId> translucent;
  bool front_down = false;
  bool rear_down = false;
  bool stroke_active = false;
  std::optional<double> last_t;
};

KernelState initial_state(const UserPose& start);

struct ModeSwitched {
  Mode to;
};
struct CursorUpdated {
  std::optional<Vec3> position;  // nullopt: no valid ground destination
};
struct HoldStarted {
  Vec3 destination;
};
struct OrientationPreview {
  double yaw_deg = 0.0;
  std::optional<Vec3> cursor;
};
struct TeleportCommitted {
  Vec3 position;
  double yaw_deg = 0.0;
  bool orientation_changed = false;
};
struct SwitchDenied {
  std::string reason;
};
struct StrokeStarted {
  Vec3 point;
};
struct StrokePoint {
  Vec3 point;
};
struct StrokeEnded {};

using KernelEvent = std::variant<ModeSwitched, CursorUpdated, HoldStarted, OrientationPreview,
                                 TeleportCommitted, SwitchDenied, StrokeStarted, StrokePoint,
                                 StrokeEnded>;

bool is_teleport_event(const KernelEvent& e);
bool is_draw_event(const KernelEvent& e);

struct StepResult {
  KernelState state;
  std::vector<KernelEvent> events;
};

/// Advances the kernel by one frame. Throws std::invalid_argument when
/// `frame.t` does not exceed the previous frame's time.
StepResult step(const KernelState& state, const InputFrame& frame, const KernelConfig& config,
                const Scene& scene);

/// Hysteresis latch on the stylus (tail-to-tip) direction versus the camera
/// forward vector.
bool detect_flip(const Vec3& stylus_dir, const Vec3& cam_forward, bool currently_flipped,
                 const KernelConfig& config);

/// Hold iff duration >= threshold.
PressKind classify_press(double duration_ms, double threshold_ms = 200.0);

double roll_controller(double initial_head_yaw, double accumulated_twist, double gain);

struct OrientationSample {
  Vec3 cursor;
  double yaw_deg = 0.0;
};

/// Origin and launch direction of the stylus pointer for the current grip:
/// tip-forward for the Button method, tail-forward once flipped.
struct StylusRay {
  Vec3 origin;
  Vec3 dir;
};
StylusRay stylus_ray(const Pose& world_stylus, const KernelConfig& config);

/// Orientation from a second parabola; nullopt keeps the previous preview.
std::optional<OrientationSample> point_controller(const Vec3& destination, const StylusRay& ray,
                                                  const ParabolaParams& params,
                                                  const Scene& scene,
                                                  std::span<const ObjectId> penetrated_ids);

/// Renormalized mean of the buffered directions, or nullopt when empty or
/// cancelling out.
std::optional<Vec3> smooth_gaze(std::span<const Vec3> directions);

/// Orientation from the smoothed gaze ray; nullopt keeps the previous preview.
std::optional<OrientationSample> gaze_controller(const Vec3& destination, const Vec3& gaze_origin,
                                                 std::span<const Vec3> gaze_directions,
                                                 const Scene& scene,
                                                 std::span<const ObjectId> penetrated_ids);

/// Maps a rig-frame pose into the world.
Pose to_world(const UserPose& rig, const Pose& local);
Vec3 to_world(const UserPose& rig, const Vec3& local);
/// Inverse of to_world for points.
Vec3 to_rig(const UserPose& rig, const Vec3& world);

/// Stateful wrapper owning a state, a config and a scene.
class Kernel {
 public:
  Kernel(KernelConfig config, Scene scene, UserPose start);

  std::vector<KernelEvent> step(const InputFrame& frame);
  void reset();

  const KernelState& state() const { return state_; }
  const KernelConfig& config() const { return config_; }
  const Scene& scene() const { return scene_; }

 private:
  KernelConfig config_;
  Scene scene_;
  UserPose start_;
  KernelState state_;
};

nlohmann::json event_to_json(const KernelEvent& e);
nlohmann::json state_to_json(const KernelState& s);

}  // namespace stp

#endif  // STP_KERNEL_HPP

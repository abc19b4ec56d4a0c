// Pure 3D math for the teleport kernel.
//
// World frame: y-up, right-handed, meters. Yaw is measured about +y with
// yaw 0 facing +z and positive yaw turning +z toward +x, i.e. a right-handed
// rotation about +y (yaw_of(v) == atan2(v.x, v.z)). All angles are degrees.

#ifndef STP_GEOM_HPP
#define STP_GEOM_HPP

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace stp {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDegPerRad = 180.0 / kPi;
inline constexpr double kRadPerDeg = kPi / 180.0;

inline double deg_to_rad(double deg) { return deg * kRadPerDeg; }
inline double rad_to_deg(double rad) { return rad * kDegPerRad; }

/// Wraps an angle in degrees to (-180, 180].
double wrap_deg(double deg);

/// Raised when a direction has no usable horizontal component.
class DegenerateDirection : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
inline Vec3 operator*(double s, const Vec3& v) { return {s * v.x, s * v.y, s * v.z}; }
inline Vec3 operator*(const Vec3& v, double s) { return {v.x * s, v.y * s, v.z * s}; }
inline Vec3 operator/(const Vec3& v, double s) { return {v.x / s, v.y / s, v.z / s}; }
inline Vec3& operator+=(Vec3& a, const Vec3& b) {
  a.x += b.x;
  a.y += b.y;
  a.z += b.z;
  return a;
}

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline bool is_finite(const Vec3& v) {
  return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

/// Throws std::domain_error for a zero or non-finite vector.
Vec3 normalized(const Vec3& v);

/// Distance in the horizontal (x, z) plane.
double horizontal_distance(const Vec3& a, const Vec3& b);

/// Unit direction for a yaw/pitch pair (pitch positive = up).
Vec3 direction_from_yaw_pitch(double yaw_deg, double pitch_deg);

/// Pitch of a direction in degrees, positive up.
double pitch_of(const Vec3& v);

/// Rotation quaternion. Construction through the factories keeps it unit
/// length; raw construction via `from_components` validates the norm.
class UnitQuat {
 public:
  UnitQuat() = default;

  static UnitQuat identity() { return {}; }
  /// Accepts components whose norm is within 1e-6 of 1 and renormalizes them.
  static UnitQuat from_components(double w, double x, double y, double z);
  static UnitQuat from_axis_angle(const Vec3& axis, double angle_deg);
  /// Rotation about +y by `yaw_deg`.
  static UnitQuat from_yaw(double yaw_deg);
  /// Rotation taking local +z onto `forward` with no roll about it (local +y
  /// stays in the vertical plane containing `forward`).
  static UnitQuat look_along(const Vec3& forward);

  double w() const { return w_; }
  double x() const { return x_; }
  double y() const { return y_; }
  double z() const { return z_; }

  UnitQuat conjugate() const { return UnitQuat(w_, -x_, -y_, -z_); }
  Vec3 rotate(const Vec3& v) const;
  /// Local +z in world coordinates.
  Vec3 forward() const { return rotate({0.0, 0.0, 1.0}); }

  friend UnitQuat operator*(const UnitQuat& a, const UnitQuat& b);
  friend bool operator==(const UnitQuat&, const UnitQuat&) = default;

 private:
  UnitQuat(double w, double x, double y, double z) : w_(w), x_(x), y_(y), z_(z) {}

  double w_ = 1.0;
  double x_ = 0.0;
  double y_ = 0.0;
  double z_ = 0.0;
};

/// Shortest-path spherical interpolation, `t` in [0, 1].
UnitQuat slerp(const UnitQuat& a, const UnitQuat& b, double t);

struct Pose {
  Vec3 position;
  UnitQuat orientation;

  friend bool operator==(const Pose&, const Pose&) = default;
};

struct ParabolaParams {
  double speed = 10.0;          // m/s
  double gravity = 9.81;        // m/s^2
  double max_fall_time = 1.5;   // s
  double march_step = 1.0 / 90.0;  // s

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  friend bool operator==(const ParabolaParams&, const ParabolaParams&) = default;
};

/// Positional tolerance the parabola bisection refines to.
inline constexpr double kParabolaRefineTolerance = 1e-4;
/// Rays report no hit beyond this distance.
inline constexpr double kMaxRayDistance = 200.0;

/// Identifier of a scene object.
using ObjectId = std::string;

struct Hit {
  Vec3 point;
  Vec3 normal;
  ObjectId object_id;
  double time_of_flight = 0.0;  // parabola only
  std::vector<ObjectId> penetrated_ids;
};

class Scene;

/// Position along a ballistic arc at time `t`. Throws std::domain_error when
/// t lies outside [0, params.max_fall_time].
Vec3 parabola_point(const Vec3& origin, const Vec3& dir, const ParabolaParams& params, double t);

/// First blocking surface along the arc, or nullopt if the arc runs out of
/// fall time. With `respect_permeability`, permeable objects are crossed and
/// recorded in `penetrated_ids`. Objects in `pass_through` never block.
std::optional<Hit> intersect_parabola(const Vec3& origin, const Vec3& dir,
                                      const ParabolaParams& params, const Scene& scene,
                                      bool respect_permeability,
                                      std::span<const ObjectId> pass_through = {});

/// Nearest surface along a ray within kMaxRayDistance, skipping `pass_through`.
std::optional<Hit> intersect_ray(const Vec3& origin, const Vec3& dir, const Scene& scene,
                                 std::span<const ObjectId> pass_through = {});

/// Yaw of the horizontal projection of `v`, in (-180, 180]. Throws
/// DegenerateDirection when that projection is shorter than 1e-6 m.
double yaw_of(const Vec3& v);

/// Signed twist of `curr * prev^-1` about `axis` (swing-twist decomposition),
/// positive for a right-handed turn (clockwise looking along `axis`).
double twist_delta(const UnitQuat& prev, const UnitQuat& curr, const Vec3& axis);

/// Angle between two unit vectors in [0, 180].
double angle_between(const Vec3& a, const Vec3& b);

}  // namespace stp

#endif  // STP_GEOM_HPP

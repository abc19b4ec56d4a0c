// Scene model: ground, boxes and quads with a teleport-permeability flag, and
// the corridor/blackboard study scene.

#ifndef STP_SCENE_HPP
#define STP_SCENE_HPP

#include <array>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stp/geom.hpp"

namespace stp {

/// The y = 0 plane; a scene has exactly one.
struct GroundPlane {
  friend bool operator==(const GroundPlane&, const GroundPlane&) = default;
};

struct Box {
  Vec3 half_extents;
  friend bool operator==(const Box&, const Box&) = default;
};

/// Zero-thickness rectangle spanning local x (width) and local y (height);
/// its front face looks along local +z. Both faces intersect.
struct Quad {
  double width = 1.0;
  double height = 1.0;
  friend bool operator==(const Quad&, const Quad&) = default;
};

using Shape = std::variant<GroundPlane, Box, Quad>;

/// Object placement: position plus rotation about +y.
struct Placement {
  Vec3 position;
  double yaw_deg = 0.0;

  UnitQuat rotation() const { return UnitQuat::from_yaw(yaw_deg); }
  friend bool operator==(const Placement&, const Placement&) = default;
};

struct SceneObject {
  ObjectId id;
  Shape shape;
  Placement pose;
  bool permeable = false;
  double base_alpha = 1.0;
  bool translucent_now = false;

  friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

/// Ground position plus yaw of the user's tracking rig.
struct UserPose {
  Vec3 position;
  double yaw_deg = 0.0;

  friend bool operator==(const UserPose&, const UserPose&) = default;
};

namespace detail {

/// Planar rectangle used by the intersection routines. Ground faces are
/// unbounded.
struct Face {
  std::size_t object_index = 0;
  Vec3 center;
  Vec3 normal;
  Vec3 u;
  Vec3 v;
  double half_u = 0.0;
  double half_v = 0.0;
  bool bounded = true;
};

struct Aabb {
  Vec3 lo;
  Vec3 hi;
  bool infinite = false;
};

}  // namespace detail

/// Immutable collection of scene objects with derived intersection geometry.
class Scene {
 public:
  Scene() = default;
  /// Validates ids (non-empty, unique), extents, alpha, and that exactly one
  /// ground plane sits at y = 0. Throws std::invalid_argument.
  explicit Scene(std::vector<SceneObject> objects);

  const std::vector<SceneObject>& objects() const { return objects_; }
  const SceneObject* find(const ObjectId& id) const;
  const ObjectId& ground_id() const;

  const std::vector<detail::Face>& faces() const { return faces_; }
  const std::vector<detail::Aabb>& bounds() const { return bounds_; }

  friend bool operator==(const Scene& a, const Scene& b) { return a.objects_ == b.objects_; }

 private:
  std::vector<SceneObject> objects_;
  std::vector<detail::Face> faces_;
  std::vector<detail::Aabb> bounds_;
  std::size_t ground_index_ = 0;
};

/// Copy of `scene` where exactly the listed objects are translucent. Throws
/// std::invalid_argument for unknown or non-permeable ids.
Scene mark_penetrated(const Scene& scene, std::span<const ObjectId> penetrated_ids);

inline constexpr std::array<double, 2> kStudyDepths = {3.0, 6.0};
inline constexpr std::array<double, 5> kStudyRotations = {45.0, -45.0, 90.0, -90.0, 180.0};

struct TrialSceneSpec {
  double depth = 3.0;      // m, blackboard distance from the start position
  double rotation = 45.0;  // deg, board turn away from facing the user
  double corridor_length = 70.0;
  double corridor_width = 8.0;
  double ceiling_height = 4.0;
  double marker_offset = 0.5;
  double sphere_height = 1.0;
  double sphere_gap = 0.3;
  double sphere_radius = 0.05;
  double board_width = 2.0;
  double board_height = 1.5;
  double board_bottom = 0.3;
  double board_alpha = 0.88;

  /// Throws std::invalid_argument for values outside the study design.
  void validate() const;
};

inline const ObjectId kBlackboardId = "blackboard";
inline const ObjectId kFloorId = "floor";

struct StudyScene {
  Scene scene;
  Vec3 marker_center;
  Vec3 sphere_a;
  Vec3 sphere_b;
  Vec3 sphere_midpoint;
  double sphere_radius = 0.05;
  UserPose start_pose;

  friend bool operator==(const StudyScene&, const StudyScene&) = default;
};

StudyScene build_study_scene(const TrialSceneSpec& spec);

/// Outward (front-face) normal of the blackboard for a given rotation.
Vec3 board_front_normal(double rotation_deg);

nlohmann::json scene_to_json(const StudyScene& scene);
/// Throws std::invalid_argument on schema violations, including a missing
/// marker or sphere pair.
StudyScene scene_from_json(const nlohmann::json& j);

}  // namespace stp

#endif  // STP_SCENE_HPP

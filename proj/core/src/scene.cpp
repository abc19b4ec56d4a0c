#include "stp/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "json_util.hpp"

namespace stp {

namespace {

using jsonutil::json;

void extend(detail::Aabb& box, const Vec3& p) {
  box.lo = {std::min(box.lo.x, p.x), std::min(box.lo.y, p.y), std::min(box.lo.z, p.z)};
  box.hi = {std::max(box.hi.x, p.x), std::max(box.hi.y, p.y), std::max(box.hi.z, p.z)};
}

detail::Aabb empty_aabb() {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return {{inf, inf, inf}, {-inf, -inf, -inf}, false};
}

void pad(detail::Aabb& box) {
  constexpr double eps = 1e-9;
  box.lo = box.lo - Vec3{eps, eps, eps};
  box.hi = box.hi + Vec3{eps, eps, eps};
}

const char* shape_name(const Shape& s) {
  if (std::holds_alternative<GroundPlane>(s)) return "ground";
  if (std::holds_alternative<Box>(s)) return "box";
  return "quad";
}

}  // namespace

Scene::Scene(std::vector<SceneObject> objects) : objects_(std::move(objects)) {
  std::set<ObjectId> seen;
  std::size_t grounds = 0;
  for (std::size_t i = 0; i < objects_.size(); ++i) {
    const SceneObject& obj = objects_[i];
    const std::string where = "scene object '" + obj.id + "'";
    if (obj.id.empty()) throw std::invalid_argument("scene object with empty id");
    if (!seen.insert(obj.id).second) throw std::invalid_argument(where + ": duplicate id");
    if (!is_finite(obj.pose.position) || !std::isfinite(obj.pose.yaw_deg)) {
      throw std::invalid_argument(where + ": non-finite pose");
    }
    if (!(obj.base_alpha >= 0.0 && obj.base_alpha <= 1.0)) {
      throw std::invalid_argument(where + ": alpha outside [0, 1]");
    }

    const UnitQuat rot = obj.pose.rotation();
    const Vec3 ax = rot.rotate({1.0, 0.0, 0.0});
    const Vec3 ay = rot.rotate({0.0, 1.0, 0.0});
    const Vec3 az = rot.rotate({0.0, 0.0, 1.0});
    const Vec3& c = obj.pose.position;

    if (std::holds_alternative<GroundPlane>(obj.shape)) {
      if (obj.pose.position.y != 0.0) throw std::invalid_argument(where + ": ground must sit at y = 0");
      ++grounds;
      ground_index_ = i;
      faces_.push_back({i, {0.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {1.0, 0.0, 0.0}, {0.0, 0.0, 1.0},
                        0.0, 0.0, false});
      detail::Aabb box;
      box.infinite = true;
      bounds_.push_back(box);
    } else if (const auto* quad = std::get_if<Quad>(&obj.shape)) {
      if (!(quad->width > 0.0 && quad->height > 0.0)) {
        throw std::invalid_argument(where + ": quad extents must be > 0");
      }
      const double hu = 0.5 * quad->width;
      const double hv = 0.5 * quad->height;
      faces_.push_back({i, c, az, ax, ay, hu, hv, true});
      detail::Aabb box = empty_aabb();
      for (double su : {-1.0, 1.0}) {
        for (double sv : {-1.0, 1.0}) extend(box, c + su * hu * ax + sv * hv * ay);
      }
      pad(box);
      bounds_.push_back(box);
    } else {
      const Vec3 h = std::get<Box>(obj.shape).half_extents;
      if (!(h.x > 0.0 && h.y > 0.0 && h.z > 0.0)) {
        throw std::invalid_argument(where + ": box half extents must be > 0");
      }
      const Vec3 axes[3] = {ax, ay, az};
      const double halves[3] = {h.x, h.y, h.z};
      for (int a = 0; a < 3; ++a) {
        const int b = (a + 1) % 3;
        const int d = (a + 2) % 3;
        for (double s : {-1.0, 1.0}) {
          faces_.push_back({i, c + s * halves[a] * axes[a], s * axes[a], axes[b], axes[d],
                            halves[b], halves[d], true});
        }
      }
      detail::Aabb box = empty_aabb();
      for (double sx : {-1.0, 1.0}) {
        for (double sy : {-1.0, 1.0}) {
          for (double sz : {-1.0, 1.0}) extend(box, c + sx * h.x * ax + sy * h.y * ay + sz * h.z * az);
        }
      }
      pad(box);
      bounds_.push_back(box);
    }
  }
  if (grounds != 1) throw std::invalid_argument("scene must contain exactly one ground plane");
}

const SceneObject* Scene::find(const ObjectId& id) const {
  auto it = std::find_if(objects_.begin(), objects_.end(),
                         [&](const SceneObject& o) { return o.id == id; });
  return it == objects_.end() ? nullptr : &*it;
}

const ObjectId& Scene::ground_id() const { return objects_.at(ground_index_).id; }

Scene mark_penetrated(const Scene& scene, std::span<const ObjectId> penetrated_ids) {
  for (const ObjectId& id : penetrated_ids) {
    const SceneObject* obj = scene.find(id);
    if (obj == nullptr) throw std::invalid_argument("unknown scene object '" + id + "'");
    if (!obj->permeable) throw std::invalid_argument("scene object '" + id + "' is not permeable");
  }
  std::vector<SceneObject> objects = scene.objects();
  for (SceneObject& obj : objects) {
    obj.translucent_now =
        std::find(penetrated_ids.begin(), penetrated_ids.end(), obj.id) != penetrated_ids.end();
  }
  return Scene(std::move(objects));
}

void TrialSceneSpec::validate() const {
  if (std::find(kStudyDepths.begin(), kStudyDepths.end(), depth) == kStudyDepths.end()) {
    throw std::invalid_argument("depth must be 3 or 6 m");
  }
  if (std::find(kStudyRotations.begin(), kStudyRotations.end(), rotation) ==
      kStudyRotations.end()) {
    throw std::invalid_argument("rotation must be one of 45, -45, 90, -90, 180 deg");
  }
  for (double v : {corridor_length, corridor_width, ceiling_height, marker_offset, sphere_height,
                   sphere_gap, sphere_radius, board_width, board_height, board_bottom,
                   board_alpha}) {
    if (!(v > 0.0)) throw std::invalid_argument("study scene dimensions must be positive");
  }
}

Vec3 board_front_normal(double rotation_deg) {
  // At rotation 0 the board would face the user (-z); rotation turns it away.
  return UnitQuat::from_yaw(wrap_deg(rotation_deg + 180.0)).forward();
}

StudyScene build_study_scene(const TrialSceneSpec& spec) {
  spec.validate();

  // The user starts 10 m from the rear wall of the corridor.
  constexpr double rear_margin = 10.0;
  constexpr double wall = 0.1;  // half thickness
  const double half_w = 0.5 * spec.corridor_width;
  const double half_h = 0.5 * spec.ceiling_height;
  const double half_l = 0.5 * spec.corridor_length;
  const double mid_z = -rear_margin + half_l;

  std::vector<SceneObject> objects;
  objects.push_back({kFloorId, GroundPlane{}, {{0.0, 0.0, 0.0}, 0.0}, false, 1.0, false});
  objects.push_back({"wall_left", Box{{wall, half_h, half_l}}, {{-half_w - wall, half_h, mid_z}, 0.0},
                     false, 1.0, false});
  objects.push_back({"wall_right", Box{{wall, half_h, half_l}}, {{half_w + wall, half_h, mid_z}, 0.0},
                     false, 1.0, false});
  objects.push_back({"ceiling", Box{{half_w + 2 * wall, wall, half_l + 2 * wall}},
                     {{0.0, spec.ceiling_height + wall, mid_z}, 0.0}, false, 1.0, false});
  objects.push_back({"wall_rear", Box{{half_w, half_h, wall}}, {{0.0, half_h, -rear_margin - wall}, 0.0},
                     false, 1.0, false});
  objects.push_back({"wall_far", Box{{half_w, half_h, wall}},
                     {{0.0, half_h, -rear_margin + spec.corridor_length + wall}, 0.0}, false, 1.0,
                     false});

  const double board_yaw = wrap_deg(spec.rotation + 180.0);
  const Vec3 board_center{0.0, spec.board_bottom + 0.5 * spec.board_height, spec.depth};
  objects.push_back({kBlackboardId, Quad{spec.board_width, spec.board_height},
                     {board_center, board_yaw}, true, spec.board_alpha, false});

  const UnitQuat board_rot = UnitQuat::from_yaw(board_yaw);
  const Vec3 normal = board_rot.forward();
  const Vec3 right = board_rot.rotate({1.0, 0.0, 0.0});
  const Vec3 face_on_ground{board_center.x, 0.0, board_center.z};

  StudyScene out;
  out.scene = Scene(std::move(objects));
  out.marker_center = face_on_ground + spec.marker_offset * normal;
  const Vec3 sphere_center{board_center.x, spec.sphere_height, board_center.z};
  out.sphere_a = sphere_center + 0.5 * spec.sphere_gap * right;
  out.sphere_b = sphere_center - 0.5 * spec.sphere_gap * right;
  out.sphere_midpoint = 0.5 * (out.sphere_a + out.sphere_b);
  out.sphere_radius = spec.sphere_radius;
  out.start_pose = UserPose{{0.0, 0.0, 0.0}, 0.0};
  return out;
}

json scene_to_json(const StudyScene& study) {
  using jsonutil::vec_to_json;
  json objects = json::array();
  for (const SceneObject& obj : study.scene.objects()) {
    json shape{{"type", shape_name(obj.shape)}};
    if (const auto* box = std::get_if<Box>(&obj.shape)) {
      shape["half_extents"] = vec_to_json(box->half_extents);
    } else if (const auto* quad = std::get_if<Quad>(&obj.shape)) {
      shape["width"] = quad->width;
      shape["height"] = quad->height;
    }
    json o{{"id", obj.id},
           {"shape", shape},
           {"pose", {{"p", vec_to_json(obj.pose.position)}, {"yaw_deg", obj.pose.yaw_deg}}},
           {"permeable", obj.permeable},
           {"alpha", obj.base_alpha}};
    if (obj.translucent_now) o["translucent"] = true;
    objects.push_back(std::move(o));
  }
  return json{{"objects", std::move(objects)},
              {"marker", vec_to_json(study.marker_center)},
              {"spheres", json::array({vec_to_json(study.sphere_a), vec_to_json(study.sphere_b)})},
              {"sphere_radius", study.sphere_radius},
              {"start", {{"p", vec_to_json(study.start_pose.position)},
                         {"yaw_deg", study.start_pose.yaw_deg}}}};
}

StudyScene scene_from_json(const json& j) {
  using jsonutil::boolean;
  using jsonutil::check_keys;
  using jsonutil::number;
  using jsonutil::require;
  using jsonutil::vec_from_json;
  static const char* const top_keys[] = {"objects", "marker", "spheres", "sphere_radius", "start"};
  static const char* const object_keys[] = {"id", "shape", "pose", "permeable", "alpha", "translucent"};
  static const char* const shape_keys[] = {"type", "half_extents", "width", "height"};
  static const char* const pose_keys[] = {"p", "yaw_deg"};

  check_keys(j, top_keys, "scene");
  const json& objs = require(j, "objects", "scene");
  if (!objs.is_array()) throw std::invalid_argument("scene: 'objects' must be an array");
  std::vector<SceneObject> objects;
  for (std::size_t i = 0; i < objs.size(); ++i) {
    const json& o = objs[i];
    const std::string where = "scene.objects[" + std::to_string(i) + "]";
    SceneObject obj;
    check_keys(o, object_keys, where);
    const json& id = require(o, "id", where);
    if (!id.is_string()) throw std::invalid_argument(where + ".id: expected a string");
    obj.id = id.get<std::string>();

    const json& shape = require(o, "shape", where);
    check_keys(shape, shape_keys, where + ".shape");
    const json& type = require(shape, "type", where + ".shape");
    if (type == "ground") {
      obj.shape = GroundPlane{};
    } else if (type == "box") {
      obj.shape = Box{vec_from_json(require(shape, "half_extents", where + ".shape"),
                                    where + ".shape.half_extents")};
    } else if (type == "quad") {
      obj.shape = Quad{number(require(shape, "width", where + ".shape"), where + ".shape.width"),
                       number(require(shape, "height", where + ".shape"), where + ".shape.height")};
    } else {
      throw std::invalid_argument(where + ".shape.type: expected ground, box or quad");
    }

    const json& pose = require(o, "pose", where);
    check_keys(pose, pose_keys, where + ".pose");
    obj.pose.position = vec_from_json(require(pose, "p", where + ".pose"), where + ".pose.p");
    obj.pose.yaw_deg = number(require(pose, "yaw_deg", where + ".pose"), where + ".pose.yaw_deg");
    obj.permeable = o.contains("permeable") ? boolean(o["permeable"], where + ".permeable") : false;
    obj.base_alpha = o.contains("alpha") ? number(o["alpha"], where + ".alpha") : 1.0;
    obj.translucent_now =
        o.contains("translucent") ? boolean(o["translucent"], where + ".translucent") : false;
    objects.push_back(std::move(obj));
  }

  StudyScene out;
  out.scene = Scene(std::move(objects));
  out.marker_center = vec_from_json(require(j, "marker", "scene"), "scene.marker");
  const json& spheres = require(j, "spheres", "scene");
  if (!spheres.is_array() || spheres.size() != 2) {
    throw std::invalid_argument("scene.spheres: expected two sphere centers");
  }
  out.sphere_a = vec_from_json(spheres[0], "scene.spheres[0]");
  out.sphere_b = vec_from_json(spheres[1], "scene.spheres[1]");
  out.sphere_midpoint = 0.5 * (out.sphere_a + out.sphere_b);
  if (j.contains("sphere_radius")) {
    out.sphere_radius = number(j["sphere_radius"], "scene.sphere_radius");
    if (!(out.sphere_radius > 0.0)) throw std::invalid_argument("scene.sphere_radius must be > 0");
  }
  if (j.contains("start")) {
    const json& start = j["start"];
    check_keys(start, pose_keys, "scene.start");
    out.start_pose.position = vec_from_json(require(start, "p", "scene.start"), "scene.start.p");
    out.start_pose.yaw_deg = number(require(start, "yaw_deg", "scene.start"), "scene.start.yaw_deg");
  }
  return out;
}

}  // namespace stp

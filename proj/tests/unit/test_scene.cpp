#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "stp/scene.hpp"

namespace stp {
namespace {

std::vector<TrialSceneSpec> all_study_specs() {
  std::vector<TrialSceneSpec> out;
  for (double depth : kStudyDepths) {
    for (double rotation : kStudyRotations) {
      TrialSceneSpec s;
      s.depth = depth;
      s.rotation = rotation;
      out.push_back(s);
    }
  }
  return out;
}

TEST(StudyScene, DepthThreeRotation180Example) {
  TrialSceneSpec spec;
  spec.depth = 3.0;
  spec.rotation = 180.0;
  const StudyScene s = build_study_scene(spec);
  const SceneObject* board = s.scene.find(kBlackboardId);
  ASSERT_NE(board, nullptr);
  EXPECT_NEAR(board->pose.position.x, 0.0, 1e-12);
  EXPECT_NEAR(board->pose.position.y, 1.05, 1e-12);
  EXPECT_NEAR(board->pose.position.z, 3.0, 1e-12);
  EXPECT_NEAR(s.marker_center.x, 0.0, 1e-12);
  EXPECT_NEAR(s.marker_center.y, 0.0, 1e-12);
  EXPECT_NEAR(s.marker_center.z, 3.5, 1e-12);
  EXPECT_NEAR(std::abs(s.sphere_a.x), 0.15, 1e-12);
  EXPECT_NEAR(s.sphere_a.x, -s.sphere_b.x, 1e-12);
  EXPECT_NEAR(s.sphere_a.y, 1.0, 1e-12);
  EXPECT_NEAR(s.sphere_a.z, 3.0, 1e-12);
  EXPECT_NEAR(s.sphere_b.z, 3.0, 1e-12);
}

TEST(StudyScene, GeometryInvariantsForAllConfigurations) {
  for (const TrialSceneSpec& spec : all_study_specs()) {
    SCOPED_TRACE("depth " + std::to_string(spec.depth) + " rotation " + std::to_string(spec.rotation));
    const StudyScene s = build_study_scene(spec);
    const SceneObject* board = s.scene.find(kBlackboardId);
    ASSERT_NE(board, nullptr);
    const Vec3 n = board_front_normal(spec.rotation);
    EXPECT_NEAR(n.y, 0.0, 1e-15);
    EXPECT_NEAR(norm(n), 1.0, 1e-15);
    // Front normal is the quad's local +z.
    const Vec3 quad_normal = board->pose.rotation().forward();
    EXPECT_NEAR(norm(quad_normal - n), 0.0, 1e-12);

    EXPECT_EQ(s.marker_center.y, 0.0);
    const Vec3 face_on_ground{board->pose.position.x, 0.0, board->pose.position.z};
    EXPECT_NEAR(norm(s.marker_center - face_on_ground), 0.5, 1e-9);
    EXPECT_NEAR(dot(s.marker_center - face_on_ground, n), 0.5, 1e-9);

    EXPECT_NEAR(s.sphere_a.y, 1.0, 1e-9);
    EXPECT_NEAR(s.sphere_b.y, 1.0, 1e-9);
    EXPECT_NEAR(norm(s.sphere_a - s.sphere_b), 0.3, 1e-9);
    const Vec3 mid = 0.5 * (s.sphere_a + s.sphere_b);
    EXPECT_NEAR(norm(s.sphere_midpoint - mid), 0.0, 1e-12);
    const Vec3 behind_marker = s.marker_center - 0.5 * n + Vec3{0.0, 1.0, 0.0};
    EXPECT_NEAR(norm(s.sphere_midpoint - behind_marker), 0.0, 1e-9);
    // Ideal yaw at the marker faces the board.
    EXPECT_NEAR(wrap_deg(yaw_of(s.sphere_midpoint - s.marker_center) - yaw_of(-n)), 0.0, 1e-9);

    EXPECT_EQ(s.start_pose.position, (Vec3{0, 0, 0}));
    EXPECT_EQ(s.start_pose.yaw_deg, 0.0);
    EXPECT_DOUBLE_EQ(s.sphere_radius, 0.05);
  }
}

TEST(StudyScene, RotationTurnsBoardAwayFromUser) {
  // Rotation 180 faces +z (away from a user at the origin).
  const Vec3 n = board_front_normal(180.0);
  EXPECT_NEAR(n.z, 1.0, 1e-12);
  // Rotation 0 would face -z (yaw 180); positive rotation adds yaw.
  EXPECT_NEAR(board_front_normal(90.0).x, -1.0, 1e-12);
  EXPECT_NEAR(board_front_normal(-90.0).x, 1.0, 1e-12);
  EXPECT_NEAR(yaw_of(board_front_normal(45.0)), -135.0, 1e-12);
}

TEST(StudyScene, ObjectsAndMaterials) {
  const StudyScene s = build_study_scene({});
  const SceneObject* board = s.scene.find(kBlackboardId);
  ASSERT_NE(board, nullptr);
  EXPECT_TRUE(board->permeable);
  EXPECT_DOUBLE_EQ(board->base_alpha, 0.88);
  const Quad* quad = std::get_if<Quad>(&board->shape);
  ASSERT_NE(quad, nullptr);
  EXPECT_DOUBLE_EQ(quad->width, 2.0);
  EXPECT_DOUBLE_EQ(quad->height, 1.5);
  for (const SceneObject& o : s.scene.objects()) {
    if (o.id != kBlackboardId) {
      EXPECT_FALSE(o.permeable) << o.id;
    }
  }
  EXPECT_EQ(s.scene.ground_id(), kFloorId);
  for (const char* id : {"wall_left", "wall_right", "ceiling", "wall_rear", "wall_far"}) {
    EXPECT_NE(s.scene.find(id), nullptr) << id;
  }
}

TEST(StudyScene, CorridorFootprint) {
  const StudyScene s = build_study_scene({});
  // Horizontal rays from the start reach the side walls 4 m away and the
  // end walls 70 m apart.
  const auto left = intersect_ray({0, 1, 0}, {-1, 0, 0}, s.scene);
  const auto right = intersect_ray({0, 1, 0}, {1, 0, 0}, s.scene);
  const auto back = intersect_ray({0, 1, 0}, {0, 0, -1}, s.scene);
  const std::vector<ObjectId> skip{kBlackboardId};
  const auto front = intersect_ray({0, 1, 0}, {0, 0, 1}, s.scene, skip);
  ASSERT_TRUE(left && right && back && front);
  EXPECT_NEAR(right->point.x - left->point.x, 8.0, 1e-9);
  EXPECT_NEAR(front->point.z - back->point.z, 70.0, 1e-9);
  const auto up = intersect_ray({0, 1, 0}, {0, 1, 0}, s.scene);
  ASSERT_TRUE(up);
  EXPECT_EQ(up->object_id, "ceiling");
}

TEST(StudyScene, RejectsValuesOutsideTheDesign) {
  TrialSceneSpec spec;
  spec.depth = 6.0;
  spec.rotation = 0.0;
  EXPECT_THROW(build_study_scene(spec), std::invalid_argument);
  spec.rotation = 45.0;
  spec.depth = 4.0;
  EXPECT_THROW(build_study_scene(spec), std::invalid_argument);
  spec.depth = 3.0;
  spec.sphere_radius = 0.0;
  EXPECT_THROW(build_study_scene(spec), std::invalid_argument);
}

TEST(MarkPenetrated, Semantics) {
  const Scene base = build_study_scene({}).scene;
  const std::vector<ObjectId> none;
  const std::vector<ObjectId> board{kBlackboardId};

  const Scene marked = mark_penetrated(base, board);
  for (const SceneObject& o : marked.objects()) EXPECT_EQ(o.translucent_now, o.id == kBlackboardId);

  const Scene cleared = mark_penetrated(marked, none);
  for (const SceneObject& o : cleared.objects()) EXPECT_FALSE(o.translucent_now);

  // Second call replaces, never accumulates.
  const Scene custom({
      {"floor", GroundPlane{}, {{0, 0, 0}, 0.0}, false, 1.0, false},
      {"a", Quad{1, 1}, {{0, 1, 2}, 0.0}, true, 0.5, false},
      {"b", Quad{1, 1}, {{0, 1, 4}, 0.0}, true, 0.5, false},
  });
  const std::vector<ObjectId> first{"a"}, second{"b"};
  const Scene twice = mark_penetrated(mark_penetrated(custom, first), second);
  EXPECT_FALSE(twice.find("a")->translucent_now);
  EXPECT_TRUE(twice.find("b")->translucent_now);

  const std::vector<ObjectId> unknown{"nope"}, solid{"wall_left"};
  EXPECT_THROW(mark_penetrated(base, unknown), std::invalid_argument);
  EXPECT_THROW(mark_penetrated(base, solid), std::invalid_argument);
}

TEST(Scene, ValidatesObjects) {
  const SceneObject floor{"floor", GroundPlane{}, {{0, 0, 0}, 0.0}, false, 1.0, false};
  EXPECT_THROW(Scene(std::vector<SceneObject>{}), std::invalid_argument);
  EXPECT_THROW(Scene({floor, floor}), std::invalid_argument);
  SceneObject raised = floor;
  raised.pose.position.y = 1.0;
  EXPECT_THROW(Scene({raised}), std::invalid_argument);
  EXPECT_THROW(Scene({floor, {"box", Box{{0, 1, 1}}, {{0, 1, 0}, 0.0}, false, 1.0, false}}),
               std::invalid_argument);
  EXPECT_THROW(Scene({floor, {"q", Quad{1, 1}, {{0, 1, 0}, 0.0}, false, 1.5, false}}),
               std::invalid_argument);
  EXPECT_THROW(Scene({floor, {"", Quad{1, 1}, {{0, 1, 0}, 0.0}, false, 1.0, false}}),
               std::invalid_argument);
}

TEST(SceneJson, RoundTripsEveryStudyScene) {
  for (const TrialSceneSpec& spec : all_study_specs()) {
    const StudyScene s = build_study_scene(spec);
    const nlohmann::json j = scene_to_json(s);
    EXPECT_EQ(scene_from_json(j), s);
    EXPECT_EQ(scene_from_json(nlohmann::json::parse(j.dump())), s);
  }
}

TEST(SceneJson, SchemaShape) {
  const nlohmann::json j = scene_to_json(build_study_scene({}));
  ASSERT_TRUE(j.contains("objects"));
  bool saw_board = false;
  for (const auto& o : j["objects"]) {
    EXPECT_TRUE(o.contains("id"));
    EXPECT_TRUE(o["shape"].contains("type"));
    EXPECT_TRUE(o["pose"].contains("p"));
    EXPECT_TRUE(o["pose"].contains("yaw_deg"));
    if (o["id"] == kBlackboardId) {
      saw_board = true;
      EXPECT_EQ(o["shape"]["type"], "quad");
      EXPECT_EQ(o["permeable"], true);
      EXPECT_DOUBLE_EQ(o["alpha"].get<double>(), 0.88);
    }
  }
  EXPECT_TRUE(saw_board);
  EXPECT_EQ(j["marker"].size(), 3u);
  EXPECT_EQ(j["spheres"].size(), 2u);
}

TEST(SceneJson, RejectsMissingMarkerAndUnknownFields) {
  nlohmann::json j = scene_to_json(build_study_scene({}));
  nlohmann::json no_marker = j;
  no_marker.erase("marker");
  EXPECT_THROW(scene_from_json(no_marker), std::invalid_argument);
  nlohmann::json no_spheres = j;
  no_spheres.erase("spheres");
  EXPECT_THROW(scene_from_json(no_spheres), std::invalid_argument);
  nlohmann::json extra = j;
  extra["objects"][0]["colour"] = "red";
  EXPECT_THROW(scene_from_json(extra), std::invalid_argument);
  nlohmann::json bad_shape = j;
  bad_shape["objects"][1]["shape"]["type"] = "sphere";
  EXPECT_THROW(scene_from_json(bad_shape), std::invalid_argument);
}

}  // namespace
}  // namespace stp

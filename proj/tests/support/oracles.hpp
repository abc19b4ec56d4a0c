// Independent reference computations used by the tests.

#ifndef STP_TESTS_ORACLES_HPP
#define STP_TESTS_ORACLES_HPP

#include <cmath>
#include <algorithm>
#include <optional>
#include <vector>

#include "stp/geom.hpp"
#include "stp/scene.hpp"

namespace stp::oracle {

/// Explicit-Euler integration of the launch until it drops through y = 0,
/// with the crossing located by linear interpolation of the last step.
inline std::optional<Vec3> euler_ground_hit(const Vec3& origin, const Vec3& dir, double speed,
                                            double gravity, double max_time, double dt = 1e-4) {
  Vec3 p = origin;
  Vec3 v = speed * dir;
  const auto steps = static_cast<long>(std::ceil(max_time / dt));
  for (long i = 0; i < steps; ++i) {
    const double h = std::min(dt, max_time - static_cast<double>(i) * dt);
    const Vec3 next = p + h * v;
    v.y -= gravity * h;
    if (next.y <= 0.0 && p.y > 0.0) {
      const double s = p.y / (p.y - next.y);
      return p + s * (next - p);
    }
    p = next;
  }
  return std::nullopt;
}

/// Closed-form flight time to y = 0 for a launch from height y0 > 0.
inline double ground_flight_time(double y0, double vertical_speed, double gravity) {
  return (vertical_speed + std::sqrt(vertical_speed * vertical_speed + 2.0 * gravity * y0)) / gravity;
}

inline Vec3 pitched_dir(double yaw_deg, double pitch_deg) {
  const double y = yaw_deg * kPi / 180.0;
  const double p = pitch_deg * kPi / 180.0;
  return {std::cos(p) * std::sin(y), std::sin(p), std::cos(p) * std::cos(y)};
}

inline double segment_point_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  // Sampled minimum, independent of the closed-form clamp in the library.
  double best = 1e300;
  for (int i = 0; i <= 20000; ++i) {
    const double s = i / 20000.0;
    const Vec3 q = a + s * (b - a);
    best = std::min(best, std::sqrt((q.x - p.x) * (q.x - p.x) + (q.y - p.y) * (q.y - p.y) +
                                    (q.z - p.z) * (q.z - p.z)));
  }
  return best;
}

inline double polyline_point_distance(const std::vector<Vec3>& pts, const Vec3& p) {
  double best = 1e300;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    best = std::min(best, segment_point_distance(p, pts[i], pts[i + 1]));
  }
  return best;
}

inline Scene flat_ground() {
  return Scene({SceneObject{"floor", GroundPlane{}, {{0, 0, 0}, 0.0}, false, 1.0, false}});
}

}  // namespace stp::oracle

#endif  // STP_TESTS_ORACLES_HPP

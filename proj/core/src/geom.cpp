#include "stp/geom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stp/scene.hpp"

namespace stp {

namespace {

constexpr double kUnitTolerance = 1e-6;
constexpr double kDegenerateHorizontal = 1e-6;

void require_unit(const Vec3& dir, const char* what) {
  if (!is_finite(dir) || std::abs(norm(dir) - 1.0) > kUnitTolerance) {
    throw std::invalid_argument(std::string(what) + " must be a unit vector");
  }
}

Vec3 arc_point(const Vec3& origin, const Vec3& dir, const ParabolaParams& params, double t) {
  const double drop = 0.5 * params.gravity * t * t;
  return {origin.x + params.speed * dir.x * t, origin.y + params.speed * dir.y * t - drop,
          origin.z + params.speed * dir.z * t};
}

bool contains(std::span<const ObjectId> ids, const ObjectId& id) {
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

bool inside_face(const detail::Face& face, const Vec3& p) {
  if (!face.bounded) return true;
  const Vec3 rel = p - face.center;
  constexpr double slack = 1e-12;
  return std::abs(dot(rel, face.u)) <= face.half_u + slack &&
         std::abs(dot(rel, face.v)) <= face.half_v + slack;
}

bool overlaps(const detail::Aabb& box, const Vec3& lo, const Vec3& hi) {
  if (box.infinite) return true;
  return lo.x <= box.hi.x && hi.x >= box.lo.x && lo.y <= box.hi.y && hi.y >= box.lo.y &&
         lo.z <= box.hi.z && hi.z >= box.lo.z;
}

struct Crossing {
  double t = 0.0;
  Vec3 point;
  std::size_t face = 0;
};

}  // namespace

double wrap_deg(double deg) {
  double r = std::fmod(deg, 360.0);
  if (r <= -180.0) r += 360.0;
  if (r > 180.0) r -= 360.0;
  return r;
}

Vec3 normalized(const Vec3& v) {
  const double n = norm(v);
  if (!(n > 0.0) || !std::isfinite(n)) throw std::domain_error("cannot normalize a zero vector");
  return v / n;
}

double horizontal_distance(const Vec3& a, const Vec3& b) {
  return std::hypot(a.x - b.x, a.z - b.z);
}

Vec3 direction_from_yaw_pitch(double yaw_deg, double pitch_deg) {
  const double yaw = deg_to_rad(yaw_deg);
  const double pitch = deg_to_rad(pitch_deg);
  return {std::cos(pitch) * std::sin(yaw), std::sin(pitch), std::cos(pitch) * std::cos(yaw)};
}

double pitch_of(const Vec3& v) {
  return rad_to_deg(std::atan2(v.y, std::hypot(v.x, v.z)));
}

UnitQuat UnitQuat::from_components(double w, double x, double y, double z) {
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  if (!std::isfinite(n) || std::abs(n - 1.0) > kUnitTolerance) {
    throw std::invalid_argument("quaternion is not unit length");
  }
  // Leave already-normalized input bit-identical.
  if (std::abs(n - 1.0) <= 1e-12) return UnitQuat(w, x, y, z);
  return UnitQuat(w / n, x / n, y / n, z / n);
}

UnitQuat UnitQuat::from_axis_angle(const Vec3& axis, double angle_deg) {
  const Vec3 a = normalized(axis);
  const double half = 0.5 * deg_to_rad(angle_deg);
  const double s = std::sin(half);
  return UnitQuat(std::cos(half), a.x * s, a.y * s, a.z * s);
}

UnitQuat UnitQuat::from_yaw(double yaw_deg) {
  const double half = 0.5 * deg_to_rad(yaw_deg);
  return UnitQuat(std::cos(half), 0.0, std::sin(half), 0.0);
}

UnitQuat UnitQuat::look_along(const Vec3& forward) {
  const Vec3 f = normalized(forward);
  const double yaw = rad_to_deg(std::atan2(f.x, f.z));
  // Rotating +z toward +y is a negative turn about +x.
  return from_yaw(yaw) * from_axis_angle({1.0, 0.0, 0.0}, -pitch_of(f));
}

Vec3 UnitQuat::rotate(const Vec3& v) const {
  // v' = v + 2w(q x v) + 2 q x (q x v)
  const Vec3 q{x_, y_, z_};
  const Vec3 t = 2.0 * cross(q, v);
  return v + w_ * t + cross(q, t);
}

UnitQuat operator*(const UnitQuat& a, const UnitQuat& b) {
  return UnitQuat(a.w_ * b.w_ - a.x_ * b.x_ - a.y_ * b.y_ - a.z_ * b.z_,
                  a.w_ * b.x_ + a.x_ * b.w_ + a.y_ * b.z_ - a.z_ * b.y_,
                  a.w_ * b.y_ - a.x_ * b.z_ + a.y_ * b.w_ + a.z_ * b.x_,
                  a.w_ * b.z_ + a.x_ * b.y_ - a.y_ * b.x_ + a.z_ * b.w_);
}

UnitQuat slerp(const UnitQuat& a, const UnitQuat& b, double t) {
  double bw = b.w(), bx = b.x(), by = b.y(), bz = b.z();
  double c = a.w() * bw + a.x() * bx + a.y() * by + a.z() * bz;
  if (c < 0.0) {
    c = -c;
    bw = -bw;
    bx = -bx;
    by = -by;
    bz = -bz;
  }
  double wa = 1.0 - t;
  double wb = t;
  if (c < 0.9995) {
    const double theta = std::acos(c);
    const double s = std::sin(theta);
    wa = std::sin((1.0 - t) * theta) / s;
    wb = std::sin(t * theta) / s;
  }
  const double w = wa * a.w() + wb * bw;
  const double x = wa * a.x() + wb * bx;
  const double y = wa * a.y() + wb * by;
  const double z = wa * a.z() + wb * bz;
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  return UnitQuat::from_components(w / n, x / n, y / n, z / n);
}

void ParabolaParams::validate() const {
  if (!(speed > 0.0)) throw std::invalid_argument("parabola.speed must be > 0");
  if (!(gravity > 0.0)) throw std::invalid_argument("parabola.gravity must be > 0");
  if (!(max_fall_time > 0.0)) throw std::invalid_argument("parabola.max_fall_time must be > 0");
  if (!(march_step > 0.0) || !(march_step < max_fall_time)) {
    throw std::invalid_argument("parabola.march_step must lie in (0, max_fall_time)");
  }
}

Vec3 parabola_point(const Vec3& origin, const Vec3& dir, const ParabolaParams& params, double t) {
  if (!(t >= 0.0) || t > params.max_fall_time) {
    throw std::domain_error("parabola time outside [0, max_fall_time]");
  }
  return arc_point(origin, dir, params, t);
}

std::optional<Hit> intersect_parabola(const Vec3& origin, const Vec3& dir,
                                      const ParabolaParams& params, const Scene& scene,
                                      bool respect_permeability,
                                      std::span<const ObjectId> pass_through) {
  require_unit(dir, "parabola direction");
  params.validate();

  const auto& faces = scene.faces();
  const auto& bounds = scene.bounds();
  const auto& objects = scene.objects();
  const double sag = 0.125 * params.gravity * params.march_step * params.march_step + 1e-9;
  const auto steps =
      static_cast<std::size_t>(std::ceil(params.max_fall_time / params.march_step - 1e-9));

  std::vector<ObjectId> penetrated;
  std::vector<Crossing> crossings;

  double t0 = 0.0;
  Vec3 p0 = origin;
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t1 = std::min(static_cast<double>(k) * params.march_step, params.max_fall_time);
    const Vec3 p1 = arc_point(origin, dir, params, t1);
    const Vec3 lo{std::min(p0.x, p1.x), std::min(p0.y, p1.y) - sag, std::min(p0.z, p1.z)};
    const Vec3 hi{std::max(p0.x, p1.x), std::max(p0.y, p1.y) + sag, std::max(p0.z, p1.z)};

    crossings.clear();
    for (std::size_t f = 0; f < faces.size(); ++f) {
      const detail::Face& face = faces[f];
      if (!overlaps(bounds[face.object_index], lo, hi)) continue;
      double d0 = dot(face.normal, p0 - face.center);
      double d1 = dot(face.normal, p1 - face.center);
      const bool crosses = (d0 > 0.0 && d1 <= 0.0) || (d0 < 0.0 && d1 >= 0.0);
      if (!crosses) continue;

      double ta = t0;
      double tb = t1;
      Vec3 pa = p0;
      Vec3 pb = p1;
      while (norm(pb - pa) > kParabolaRefineTolerance) {
        const double tm = 0.5 * (ta + tb);
        const Vec3 pm = arc_point(origin, dir, params, tm);
        const double dm = dot(face.normal, pm - face.center);
        if ((d0 > 0.0) == (dm > 0.0) && dm != 0.0) {
          ta = tm;
          pa = pm;
          d0 = dm;
        } else {
          tb = tm;
          pb = pm;
          d1 = dm;
        }
      }
      const double frac = (d0 == d1) ? 1.0 : d0 / (d0 - d1);
      const double t_hit = ta + (tb - ta) * frac;
      Vec3 p_hit = arc_point(origin, dir, params, t_hit);
      p_hit = p_hit - dot(face.normal, p_hit - face.center) * face.normal;
      if (!inside_face(face, p_hit)) continue;
      crossings.push_back({t_hit, p_hit, f});
    }

    std::stable_sort(crossings.begin(), crossings.end(),
                     [](const Crossing& a, const Crossing& b) { return a.t < b.t; });
    for (const Crossing& c : crossings) {
      const detail::Face& face = faces[c.face];
      const SceneObject& obj = objects[face.object_index];
      if (contains(pass_through, obj.id)) continue;
      if (respect_permeability && obj.permeable) {
        if (!contains(penetrated, obj.id)) penetrated.push_back(obj.id);
        continue;
      }
      const Vec3 velocity{params.speed * dir.x, params.speed * dir.y - params.gravity * c.t,
                          params.speed * dir.z};
      Hit hit;
      hit.point = c.point;
      hit.normal = dot(face.normal, velocity) > 0.0 ? -face.normal : face.normal;
      hit.object_id = obj.id;
      hit.time_of_flight = c.t;
      hit.penetrated_ids = std::move(penetrated);
      std::erase(hit.penetrated_ids, obj.id);
      return hit;
    }
    t0 = t1;
    p0 = p1;
  }
  return std::nullopt;
}

std::optional<Hit> intersect_ray(const Vec3& origin, const Vec3& dir, const Scene& scene,
                                 std::span<const ObjectId> pass_through) {
  require_unit(dir, "ray direction");
  const auto& faces = scene.faces();
  const auto& objects = scene.objects();

  std::optional<Hit> best;
  double best_s = std::numeric_limits<double>::infinity();
  for (const detail::Face& face : faces) {
    const SceneObject& obj = objects[face.object_index];
    if (contains(pass_through, obj.id)) continue;
    const double denom = dot(face.normal, dir);
    if (std::abs(denom) < 1e-12) continue;
    const double s = dot(face.normal, face.center - origin) / denom;
    if (!(s > 1e-9) || s > kMaxRayDistance || s >= best_s) continue;
    Vec3 p = origin + s * dir;
    p = p - dot(face.normal, p - face.center) * face.normal;
    if (!inside_face(face, p)) continue;
    best_s = s;
    Hit hit;
    hit.point = p;
    hit.normal = denom > 0.0 ? -face.normal : face.normal;
    hit.object_id = obj.id;
    best = std::move(hit);
  }
  return best;
}

double yaw_of(const Vec3& v) {
  if (std::hypot(v.x, v.z) <= kDegenerateHorizontal) {
    throw DegenerateDirection("direction has no horizontal component");
  }
  const double yaw = rad_to_deg(std::atan2(v.x, v.z));
  return yaw == -180.0 ? 180.0 : yaw;
}

double twist_delta(const UnitQuat& prev, const UnitQuat& curr, const Vec3& axis) {
  const Vec3 a = normalized(axis);
  const UnitQuat rel = curr * prev.conjugate();
  double w = rel.w();
  double along = rel.x() * a.x + rel.y() * a.y + rel.z() * a.z;
  if (w < 0.0) {
    w = -w;
    along = -along;
  }
  if (w == 0.0 && along == 0.0) return 0.0;  // pure 180 deg swing
  return rad_to_deg(2.0 * std::atan2(along, w));
}

double angle_between(const Vec3& a, const Vec3& b) {
  return rad_to_deg(std::atan2(norm(cross(a, b)), dot(a, b)));
}

}  // namespace stp

#include "oculorl/vecmath.hpp"

#include <algorithm>
#include <numbers>

#include "oculorl/error.hpp"

namespace oculorl {

namespace {

// atan2 yields [-pi, pi]; the Fick ranges are half-open at -pi.
double wrap_half_open(double a) { return a <= -std::numbers::pi ? std::numbers::pi : a; }

}  // namespace

UnitQuat UnitQuat::from_axis_angle(const Vec3& axis, double angle) {
  const double n = oculorl::norm(axis);
  if (n == 0.0) return identity();
  const double s = std::sin(0.5 * angle) / n;
  return {std::cos(0.5 * angle), axis.x * s, axis.y * s, axis.z * s};
}

UnitQuat UnitQuat::from_rotation_vector(const Vec3& rv) {
  const double theta = oculorl::norm(rv);
  if (theta < 1e-12) {
    // Second-order series keeps the map smooth through zero.
    const UnitQuat q{1.0 - theta * theta / 8.0, 0.5 * rv.x, 0.5 * rv.y, 0.5 * rv.z};
    return q.normalized();
  }
  return from_axis_angle(rv, theta);
}

UnitQuat UnitQuat::normalized() const {
  const double n = norm();
  return {w / n, x / n, y / n, z / n};
}

Vec3 UnitQuat::rotation_vector() const {
  // q and -q are the same rotation; pick the representative with w >= 0.
  const double sign = w < 0.0 ? -1.0 : 1.0;
  const Vec3 v{sign * x, sign * y, sign * z};
  const double s = oculorl::norm(v);
  const double c = sign * w;
  if (s < 1e-12) return v * (2.0 / c);
  const double theta = 2.0 * std::atan2(s, c);
  return v * (theta / s);
}

double UnitQuat::angle() const {
  const double s = std::sqrt(x * x + y * y + z * z);
  return 2.0 * std::atan2(s, std::abs(w));
}

Vec3 rotate_vector(const UnitQuat& q, const Vec3& v) {
  const Vec3 u{q.x, q.y, q.z};
  const Vec3 t = 2.0 * cross(u, v);
  return v + q.w * t + cross(u, t);
}

UnitQuat integrate_orientation(const UnitQuat& q, const Vec3& omega, double dt) {
  return (UnitQuat::from_rotation_vector(omega * dt) * q).normalized();
}

FickAngles quat_to_fick_unchecked(const UnitQuat& q) {
  const double r00 = 1.0 - 2.0 * (q.y * q.y + q.z * q.z);
  const double r10 = 2.0 * (q.x * q.y + q.w * q.z);
  const double r20 = 2.0 * (q.x * q.z - q.w * q.y);
  const double r11 = 1.0 - 2.0 * (q.x * q.x + q.z * q.z);
  const double r12 = 2.0 * (q.y * q.z - q.w * q.x);
  FickAngles f;
  f.pitch_rad = std::asin(std::clamp(r10, -1.0, 1.0));
  f.yaw_rad = wrap_half_open(std::atan2(-r20, r00));
  f.torsion_rad = wrap_half_open(std::atan2(-r12, r11));
  return f;
}

FickAngles quat_to_fick(const UnitQuat& q) {
  FickAngles f = quat_to_fick_unchecked(q);
  if (std::abs(f.pitch_rad) >= kGimbalLimit) {
    throw GimbalLock("Fick pitch within 0.01 rad of +/-pi/2");
  }
  return f;
}

UnitQuat fick_to_quat(const FickAngles& f) {
  const UnitQuat yaw = UnitQuat::from_axis_angle({0.0, 1.0, 0.0}, f.yaw_rad);
  const UnitQuat pitch = UnitQuat::from_axis_angle({0.0, 0.0, 1.0}, f.pitch_rad);
  const UnitQuat torsion = UnitQuat::from_axis_angle({1.0, 0.0, 0.0}, f.torsion_rad);
  return (yaw * pitch * torsion).normalized();
}

Vec3 ray_plane_x(const Vec3& origin, const Vec3& dir, double plane_x) {
  if (!(dir.x > 1e-6)) throw GazeParallel("gaze direction does not point toward the target plane");
  const double t = (plane_x - origin.x) / dir.x;
  Vec3 out = origin + t * dir;
  out.x = plane_x;
  return out;
}

}  // namespace oculorl

#pragma once

#include <cmath>

namespace oculorl {

// World frame: +x anterior (toward the target), +y superior, +z toward the
// subject's right.

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr Vec3& operator-=(const Vec3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  constexpr Vec3& operator*=(double s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
constexpr Vec3 operator/(const Vec3& a, double s) { return {a.x / s, a.y / s, a.z / s}; }

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(const Vec3& a) { return a / norm(a); }
inline bool is_finite(const Vec3& a) {
  return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

/// Rotation quaternion (w, x, y, z). Kept at unit norm by every producer in
/// this header; `normalized()` restores it after accumulated rounding.
struct UnitQuat {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static constexpr UnitQuat identity() { return {}; }
  /// Rotation by `angle` radians about `axis` (any nonzero length).
  static UnitQuat from_axis_angle(const Vec3& axis, double angle);
  /// Exponential map: rotation by |rv| about rv/|rv|.
  static UnitQuat from_rotation_vector(const Vec3& rv);

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
  UnitQuat normalized() const;
  constexpr UnitQuat conjugate() const { return {w, -x, -y, -z}; }
  /// Logarithm map: the rotation vector theta * axis with theta in [0, pi].
  Vec3 rotation_vector() const;
  /// Rotation angle in [0, pi].
  double angle() const;

  friend constexpr bool operator==(const UnitQuat&, const UnitQuat&) = default;
};

/// Hamilton product; (a * b) applies b first, then a.
constexpr UnitQuat operator*(const UnitQuat& a, const UnitQuat& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

Vec3 rotate_vector(const UnitQuat& q, const Vec3& v);

/// Advances q by a constant world-frame angular velocity over dt using the
/// exact exponential map, then renormalizes.
UnitQuat integrate_orientation(const UnitQuat& q, const Vec3& omega, double dt);

/// Fick sequence: yaw about +y, then pitch about the rotated +z, then torsion
/// about the rotated +x (the gaze axis). All angles in (-pi, pi].
struct FickAngles {
  double yaw_rad = 0.0;
  double pitch_rad = 0.0;
  double torsion_rad = 0.0;
};

/// Pitch magnitudes at or beyond this are reported as gimbal lock.
inline constexpr double kGimbalLimit = 1.5707963267948966 - 0.01;

/// Throws GimbalLock when |pitch| >= kGimbalLimit.
FickAngles quat_to_fick(const UnitQuat& q);
/// Same decomposition without the gimbal check (the degenerate axis split is
/// arbitrary but finite).
FickAngles quat_to_fick_unchecked(const UnitQuat& q);
UnitQuat fick_to_quat(const FickAngles& f);

/// Intersection of the ray origin + t*dir (t >= 0 implied by dir.x > 0) with
/// the plane x = plane_x. Throws GazeParallel when dir.x <= 1e-6.
Vec3 ray_plane_x(const Vec3& origin, const Vec3& dir, double plane_x);

}  // namespace oculorl

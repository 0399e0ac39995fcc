#include "oculorl/muscle.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "oculorl/error.hpp"

namespace oculorl {

namespace {

constexpr double kPenetrationFraction = 0.9;

// Curve shape constants.
constexpr double kFlWidth = 0.45;
constexpr double kFvCurvature = 0.25;
constexpr double kFvEccentricGain = 0.4;
constexpr double kPeStrain = 0.6;
constexpr double kPeShape = 4.0;

}  // namespace

std::string_view muscle_kind_name(MuscleKind kind) {
  switch (kind) {
    case MuscleKind::LR: return "LR";
    case MuscleKind::MR: return "MR";
    case MuscleKind::SR: return "SR";
    case MuscleKind::IR: return "IR";
    case MuscleKind::SO: return "SO";
    case MuscleKind::IO: return "IO";
  }
  return "?";
}

std::string muscle_slot_name(Eye eye, MuscleKind kind) {
  return fmt::format("{}_{}", eye == Eye::Right ? "right" : "left", muscle_kind_name(kind));
}

void MuscleParams::validate() const {
  auto require = [&](bool ok, const char* key, const char* why) {
    if (!ok) throw ValidationError(name.empty() ? std::string(key) : name + "." + key, why);
  };
  require(std::isfinite(f_max) && f_max > 0.0, "f_max", "must be > 0");
  require(std::isfinite(l_opt) && l_opt > 0.0, "l_opt", "must be > 0");
  require(std::isfinite(l_slack) && l_slack >= 0.0, "l_slack", "must be >= 0");
  require(std::isfinite(v_max) && v_max > 0.0, "v_max", "must be > 0");
  require(std::isfinite(tau_act) && tau_act > 0.0, "tau_act", "must be > 0");
  require(std::isfinite(tau_deact) && tau_deact >= tau_act, "tau_deact", "must be >= tau_act");
  require(is_finite(origin), "origin", "must be finite");
  require(std::abs(norm(insertion_dir) - 1.0) < 1e-9, "insertion_dir", "must be a unit vector");
}

double activation_step(double a, double u, double dt, const MuscleParams& p) {
  u = std::clamp(u, 0.0, 1.0);
  const double tau = u > a ? p.tau_act : p.tau_deact;
  const double next = u + (a - u) * std::exp(-dt / tau);
  return std::clamp(next, 0.0, 1.0);
}

double active_force_length(double l_norm) {
  const double d = l_norm - 1.0;
  return std::exp(-d * d / kFlWidth);
}

double force_velocity(double v_norm) {
  if (v_norm <= -1.0) return 0.0;
  if (v_norm <= 0.0) return (1.0 + v_norm) / (1.0 - v_norm / kFvCurvature);
  return 1.0 + kFvEccentricGain * v_norm / (v_norm + kFvCurvature);
}

double force_velocity_slope(double v_norm) {
  if (v_norm <= -1.0) return 0.0;
  if (v_norm <= 0.0) {
    const double den = 1.0 - v_norm / kFvCurvature;
    return (1.0 + 1.0 / kFvCurvature) / (den * den);
  }
  const double den = v_norm + kFvCurvature;
  return kFvEccentricGain * kFvCurvature / (den * den);
}

double passive_force_length(double l_norm) {
  if (l_norm <= 1.0) return 0.0;
  return std::expm1(kPeShape * (l_norm - 1.0) / kPeStrain) / std::expm1(kPeShape);
}

double fiber_force(double a, double l_norm, double v_norm, const MuscleParams& p) {
  const double f = a * active_force_length(l_norm) * force_velocity(v_norm) +
                   passive_force_length(l_norm);
  return std::max(0.0, p.f_max * f);
}

MusclePath muscle_path_unchecked(const UnitQuat& eye_q, const Vec3& eye_center,
                                 const MuscleParams& p, double globe_radius) {
  const Vec3 arm = rotate_vector(eye_q, p.insertion_dir * globe_radius);
  MusclePath path;
  path.insertion_world = eye_center + arm;
  const Vec3 span = p.origin - path.insertion_world;
  path.length = norm(span);
  path.line_of_action = span / path.length;
  // Closest point of the segment to the globe center.
  const double t = std::clamp(-dot(arm, path.line_of_action), 0.0, path.length);
  path.clearance = norm(arm + t * path.line_of_action);
  return path;
}

MusclePath muscle_path(const UnitQuat& eye_q, const Vec3& eye_center, const MuscleParams& p,
                       double globe_radius) {
  MusclePath path = muscle_path_unchecked(eye_q, eye_center, p, globe_radius);
  if (path.clearance < kPenetrationFraction * globe_radius) {
    throw PenetratingPath(fmt::format("{} path passes {:.2f} radii from the globe center",
                                      p.name, path.clearance / globe_radius));
  }
  return path;
}

Vec3 muscle_torque(const UnitQuat& eye_q, const Vec3& eye_center, double force,
                   const MuscleParams& p, double globe_radius) {
  const MusclePath path = muscle_path_unchecked(eye_q, eye_center, p, globe_radius);
  return cross(path.insertion_world - eye_center, force * path.line_of_action);
}

}  // namespace oculorl

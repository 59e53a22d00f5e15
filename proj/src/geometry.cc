#include "decay_lidar/geometry.h"

#include <cmath>

namespace decay_lidar {

Quat ExpRotation(const Vec3& axis_angle) {
  const double angle = axis_angle.norm();
  if (angle < 1e-12) {
    // First-order expansion keeps tiny rotations exact to rounding.
    Quat q(1.0, 0.5 * axis_angle.x(), 0.5 * axis_angle.y(),
           0.5 * axis_angle.z());
    return q.normalized();
  }
  return Quat(Eigen::AngleAxisd(angle, axis_angle / angle));
}

Vec3 LogRotation(const Quat& rotation) {
  Quat q = rotation.normalized();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const double s = q.vec().norm();
  if (s < 1e-12) return 2.0 * q.vec();
  const double angle = 2.0 * std::atan2(s, q.w());
  return angle * q.vec() / s;
}

Quat YawRotation(double yaw) {
  return Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()));
}

}  // namespace decay_lidar

#ifndef DECAY_LIDAR_GEOMETRY_H_
#define DECAY_LIDAR_GEOMETRY_H_

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace decay_lidar {

using Vec3 = Eigen::Vector3d;
using Vec3f = Eigen::Vector3f;
using Quat = Eigen::Quaterniond;

// Rigid transform mapping sensor-frame points into the map frame.
struct Pose {
  Vec3 translation = Vec3::Zero();
  Quat rotation = Quat::Identity();

  Pose() = default;
  Pose(const Vec3& t, const Quat& q) : translation(t), rotation(q) {}

  static Pose Identity() { return Pose(); }

  Vec3 operator*(const Vec3& point) const {
    return rotation * point + translation;
  }

  Pose operator*(const Pose& other) const {
    return Pose(rotation * other.translation + translation,
                (rotation * other.rotation).normalized());
  }

  Pose inverse() const {
    const Quat inv = rotation.conjugate();
    return Pose(-(inv * translation), inv);
  }

  bool operator==(const Pose& other) const {
    return translation == other.translation &&
           rotation.coeffs() == other.rotation.coeffs();
  }
};

// Exponential map from an axis-angle vector to a unit quaternion.
Quat ExpRotation(const Vec3& axis_angle);

// Inverse of ExpRotation; angle in [0, pi].
Vec3 LogRotation(const Quat& rotation);

// Rotation about +z by `yaw` radians.
Quat YawRotation(double yaw);

}  // namespace decay_lidar

#endif  // DECAY_LIDAR_GEOMETRY_H_

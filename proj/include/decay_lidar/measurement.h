#ifndef DECAY_LIDAR_MEASUREMENT_H_
#define DECAY_LIDAR_MEASUREMENT_H_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "decay_lidar/geometry.h"

namespace decay_lidar {

// Lidar reading class. Values are the on-disk kind bytes.
enum class ReadingKind : std::uint8_t { kSub = 0, kRange = 1, kSup = 2 };

// One ray in a single 3D measurement, fully resolved into doubles.
struct Measurement {
  Pose sensor_pose;
  Vec3 direction = Vec3::UnitX();  // sensor frame, unit norm
  ReadingKind kind = ReadingKind::kSup;
  double range = 0.0;  // meaningful iff kind == kRange
  double r_min = 0.0;
  double r_max = 0.0;

  static Measurement Range(const Pose& pose, const Vec3& dir, double r,
                           double r_min, double r_max);
  static Measurement Sub(const Pose& pose, const Vec3& dir, double r_min,
                         double r_max);
  static Measurement Sup(const Pose& pose, const Vec3& dir, double r_min,
                         double r_max);

  const Vec3& Origin() const { return sensor_pose.translation; }
  Vec3 WorldDirection() const {
    return (sensor_pose.rotation * direction).normalized();
  }
  Vec3 PointAt(double r) const { return Origin() + r * WorldDirection(); }

  // Throws std::invalid_argument if the sensor limits or range are invalid.
  void Validate() const;
};

// One stored ray. Direction and range keep the sensor's f32 precision so
// scan files round-trip bit-exactly.
struct Ray {
  Vec3f direction = Vec3f::UnitX();
  ReadingKind kind = ReadingKind::kSup;
  float range = 0.0f;

  bool operator==(const Ray& other) const {
    return direction == other.direction && kind == other.kind &&
           range == other.range;
  }
};

// All rays recorded from one sensor pose.
struct Scan {
  Pose pose;
  double r_min = 0.0;
  double r_max = 0.0;
  std::vector<Ray> rays;

  Measurement At(std::size_t j) const { return At(j, pose); }
  // The j-th ray as if recorded from `hypothesis` instead of `pose`.
  Measurement At(std::size_t j, const Pose& hypothesis) const;

  bool operator==(const Scan& other) const {
    return pose == other.pose && r_min == other.r_min &&
           r_max == other.r_max && rays == other.rays;
  }
};

// Normalized double-precision direction of a stored f32 direction.
inline Vec3 ToUnit(const Vec3f& d) { return d.cast<double>().normalized(); }

}  // namespace decay_lidar

#endif  // DECAY_LIDAR_MEASUREMENT_H_

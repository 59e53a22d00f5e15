#include "decay_lidar/measurement.h"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace decay_lidar {

Measurement Measurement::Range(const Pose& pose, const Vec3& dir, double r,
                               double r_min, double r_max) {
  return {pose, dir, ReadingKind::kRange, r, r_min, r_max};
}

Measurement Measurement::Sub(const Pose& pose, const Vec3& dir, double r_min,
                             double r_max) {
  return {pose, dir, ReadingKind::kSub, 0.0, r_min, r_max};
}

Measurement Measurement::Sup(const Pose& pose, const Vec3& dir, double r_min,
                             double r_max) {
  return {pose, dir, ReadingKind::kSup, 0.0, r_min, r_max};
}

void Measurement::Validate() const {
  std::ostringstream os;
  if (!(r_min >= 0.0) || !(r_min < r_max) || !std::isfinite(r_max)) {
    os << "invalid sensor limits [" << r_min << ", " << r_max << "]";
    throw std::invalid_argument(os.str());
  }
  if (kind == ReadingKind::kRange && !(range >= r_min && range <= r_max)) {
    os << "range " << range << " outside [" << r_min << ", " << r_max << "]";
    throw std::invalid_argument(os.str());
  }
  if (std::abs(direction.norm() - 1.0) > 1e-6) {
    throw std::invalid_argument("measurement direction must be unit norm");
  }
}

Measurement Scan::At(std::size_t j, const Pose& hypothesis) const {
  const Ray& ray = rays[j];
  return {hypothesis, ToUnit(ray.direction), ray.kind,
          static_cast<double>(ray.range), r_min, r_max};
}

}  // namespace decay_lidar

#include "decay_lidar/grid.h"

#include <sstream>

namespace decay_lidar {

GridGeometry::GridGeometry(const Vec3& origin, double edge_length,
                           const GridDims& dims)
    : origin_(origin), edge_length_(edge_length), dims_(dims) {
  if (!(edge_length > 0.0) || !std::isfinite(edge_length)) {
    throw std::invalid_argument("grid edge length must be positive");
  }
  if (!origin.allFinite()) {
    throw std::invalid_argument("grid origin must be finite");
  }
  for (auto n : dims) {
    if (n == 0) throw std::invalid_argument("grid dims must be >= 1");
  }
}

VoxelCoord GridGeometry::Delinearize(std::int64_t index) const {
  const std::int64_t nx = dims_[0];
  const std::int64_t ny = dims_[1];
  return {index % nx, (index / nx) % ny, index / (nx * ny)};
}

Vec3 GridGeometry::VoxelCenter(std::int64_t index) const {
  const VoxelCoord c = Delinearize(index);
  return origin_ + edge_length_ * Vec3(c[0] + 0.5, c[1] + 0.5, c[2] + 0.5);
}

std::int64_t Locate(const GridGeometry& geom, const Vec3& point) {
  VoxelCoord c;
  for (int a = 0; a < 3; ++a) {
    const double u = (point[a] - geom.origin()[a]) / geom.edge_length();
    if (!(u >= 0.0) || u >= static_cast<double>(geom.dims()[a])) {
      return kOutside;
    }
    c[a] = static_cast<std::int64_t>(std::floor(u));
  }
  if (!geom.Contains(c)) return kOutside;
  return geom.Linearize(c);
}

namespace internal {

void ThrowNonUnitDirection(const Vec3& direction) {
  std::ostringstream os;
  os << "ray direction must have unit norm (got norm " << direction.norm()
     << ")";
  throw std::invalid_argument(os.str());
}

void ThrowNegativeLength(double length) {
  std::ostringstream os;
  os << "ray length must be >= 0 (got " << length << ")";
  throw std::invalid_argument(os.str());
}

}  // namespace internal

void TraceRay(const GridGeometry& geom, const Vec3& origin,
              const Vec3& direction, double length, Traversal* out) {
  out->segments.clear();
  out->total_length = length;
  VisitRay(geom, origin, direction, length,
           [out](std::int64_t voxel, double distance) {
             auto& segs = out->segments;
             if (voxel == kOutside && !segs.empty() &&
                 segs.back().voxel == kOutside) {
               segs.back().length += distance;
               return;
             }
             segs.push_back({voxel, distance});
           });
}

Traversal TraceRay(const GridGeometry& geom, const Vec3& origin,
                   const Vec3& direction, double length) {
  Traversal t;
  TraceRay(geom, origin, direction, length, &t);
  return t;
}

}  // namespace decay_lidar

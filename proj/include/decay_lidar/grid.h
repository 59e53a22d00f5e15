#ifndef DECAY_LIDAR_GRID_H_
#define DECAY_LIDAR_GRID_H_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "decay_lidar/geometry.h"

namespace decay_lidar {

// Sentinel voxel index for space beyond the grid extent.
inline constexpr std::int64_t kOutside = -1;

using GridDims = std::array<std::uint32_t, 3>;
using VoxelCoord = std::array<std::int64_t, 3>;

// Axis-aligned tesselation into cubic voxels. Voxel (ix, iy, iz) covers the
// half-open box [origin + k * edge, origin + (k + 1) * edge) on every axis.
// Linear indices are x-fastest.
class GridGeometry {
 public:
  GridGeometry(const Vec3& origin, double edge_length, const GridDims& dims);

  const Vec3& origin() const { return origin_; }
  double edge_length() const { return edge_length_; }
  const GridDims& dims() const { return dims_; }
  std::int64_t voxel_count() const {
    return static_cast<std::int64_t>(dims_[0]) * dims_[1] * dims_[2];
  }
  Vec3 upper() const {
    return origin_ + edge_length_ * Vec3(dims_[0], dims_[1], dims_[2]);
  }

  bool Contains(const VoxelCoord& c) const {
    return c[0] >= 0 && c[1] >= 0 && c[2] >= 0 && c[0] < dims_[0] &&
           c[1] < dims_[1] && c[2] < dims_[2];
  }
  std::int64_t Linearize(const VoxelCoord& c) const {
    return c[0] + static_cast<std::int64_t>(dims_[0]) *
                      (c[1] + static_cast<std::int64_t>(dims_[1]) * c[2]);
  }
  VoxelCoord Delinearize(std::int64_t index) const;
  Vec3 VoxelCenter(std::int64_t index) const;

  bool operator==(const GridGeometry& other) const {
    return origin_ == other.origin_ && edge_length_ == other.edge_length_ &&
           dims_ == other.dims_;
  }
  bool operator!=(const GridGeometry& other) const { return !(*this == other); }

 private:
  Vec3 origin_;
  double edge_length_;
  GridDims dims_;
};

// Linear index of the voxel containing `point`, or kOutside.
std::int64_t Locate(const GridGeometry& geom, const Vec3& point);

struct Segment {
  std::int64_t voxel;  // linear index or kOutside
  double length;       // meters

  bool operator==(const Segment&) const = default;
};

// Ordered per-voxel chord lengths of one ray.
struct Traversal {
  std::vector<Segment> segments;
  double total_length = 0.0;
};

namespace internal {

[[noreturn]] void ThrowNonUnitDirection(const Vec3& direction);
[[noreturn]] void ThrowNegativeLength(double length);

}  // namespace internal

// Walks the segment [origin, origin + length * direction] and calls
// `visit(voxel, distance)` once per traversed voxel in travel order. Travel
// before and after the grid box is reported as one kOutside call each.
// Zero-length chords are skipped; tied boundary crossings advance all tied
// axes at once.
template <typename Visitor>
void VisitRay(const GridGeometry& geom, const Vec3& origin,
              const Vec3& direction, double length, Visitor&& visit) {
  if (!(std::abs(direction.norm() - 1.0) <= 1e-9)) {
    internal::ThrowNonUnitDirection(direction);
  }
  if (!(length >= 0.0)) internal::ThrowNegativeLength(length);
  if (length == 0.0) return;

  constexpr double kInf = std::numeric_limits<double>::infinity();
  const double edge = geom.edge_length();
  const Vec3& lo = geom.origin();
  const Vec3 hi = geom.upper();

  double t_enter = 0.0;
  double t_exit = length;
  for (int a = 0; a < 3; ++a) {
    if (direction[a] == 0.0) {
      if (origin[a] < lo[a] || origin[a] >= hi[a]) {
        t_enter = kInf;
        break;
      }
      continue;
    }
    double ta = (lo[a] - origin[a]) / direction[a];
    double tb = (hi[a] - origin[a]) / direction[a];
    if (ta > tb) std::swap(ta, tb);
    t_enter = std::max(t_enter, ta);
    t_exit = std::min(t_exit, tb);
  }
  if (!(t_enter < t_exit)) {
    visit(kOutside, length);
    return;
  }
  if (t_enter > 0.0) visit(kOutside, t_enter);

  const auto& dims = geom.dims();
  const Vec3 entry = origin + t_enter * direction;
  VoxelCoord cell;
  std::array<int, 3> step;
  std::array<double, 3> t_next;
  auto boundary_t = [&](int a) {
    if (step[a] == 0) return kInf;
    const std::int64_t plane = cell[a] + (step[a] > 0 ? 1 : 0);
    return (lo[a] + static_cast<double>(plane) * edge - origin[a]) /
           direction[a];
  };
  for (int a = 0; a < 3; ++a) {
    const double u = (entry[a] - lo[a]) / edge;
    auto k = static_cast<std::int64_t>(std::floor(u));
    step[a] = direction[a] > 0.0 ? 1 : (direction[a] < 0.0 ? -1 : 0);
    // A ray leaving an exact boundary backwards starts in the lower cell.
    if (step[a] < 0 && static_cast<double>(k) == u) --k;
    cell[a] = std::clamp<std::int64_t>(k, 0, dims[a] - 1);
    t_next[a] = boundary_t(a);
  }

  double t = t_enter;
  double t_inside_end = t_exit;
  while (true) {
    const double tn =
        std::min({t_next[0], t_next[1], t_next[2], t_exit});
    if (tn > t) visit(geom.Linearize(cell), tn - t);
    if (tn >= t_exit) break;
    bool left_grid = false;
    for (int a = 0; a < 3; ++a) {
      if (t_next[a] == tn) {
        cell[a] += step[a];
        if (cell[a] < 0 || cell[a] >= dims[a]) left_grid = true;
        t_next[a] = boundary_t(a);
      }
    }
    t = tn;
    if (left_grid) {
      t_inside_end = tn;
      break;
    }
  }
  if (t_inside_end < length) visit(kOutside, length - t_inside_end);
}

// Exact traversal of [origin, origin + length * direction]. Throws
// std::invalid_argument for a non-unit direction or negative length.
Traversal TraceRay(const GridGeometry& geom, const Vec3& origin,
                   const Vec3& direction, double length);

// Buffer-reusing variant of TraceRay.
void TraceRay(const GridGeometry& geom, const Vec3& origin,
              const Vec3& direction, double length, Traversal* out);

}  // namespace decay_lidar

#endif  // DECAY_LIDAR_GRID_H_

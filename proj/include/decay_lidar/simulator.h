#ifndef DECAY_LIDAR_SIMULATOR_H_
#define DECAY_LIDAR_SIMULATOR_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "decay_lidar/decay_map.h"
#include "decay_lidar/grid.h"
#include "decay_lidar/measurement.h"
#include "decay_lidar/rng.h"

namespace decay_lidar {

// Solid of constant decay rate used to compose synthetic worlds.
struct Primitive {
  enum class Shape { kBox, kSphere, kCylinder };

  Shape shape = Shape::kBox;
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Zero();  // box
  double yaw = 0.0;                  // box, radians about +z
  double radius = 0.0;               // sphere, cylinder
  double height = 0.0;               // cylinder, centered on center.z
  double rate = 0.0;                 // 1/m

  static Primitive Box(const Vec3& center, const Vec3& size, double rate,
                       double yaw = 0.0);
  static Primitive Sphere(const Vec3& center, double radius, double rate);
  static Primitive Cylinder(const Vec3& center, double radius, double height,
                            double rate);

  bool Contains(const Vec3& p) const;
  // Axis-aligned bounding box.
  void Bounds(Vec3* lo, Vec3* hi) const;
};

struct WorldSpec {
  GridGeometry geom{Vec3::Zero(), 1.0, {1, 1, 1}};
  std::vector<Primitive> primitives;
  double background_rate = 0.01;  // 1/m, also used outside the grid
  std::uint64_t seed = 0;
};

// Each voxel takes the rate of the last primitive containing its center,
// otherwise the background rate.
DecayGrid RasterizeWorld(const WorldSpec& spec);

// Azimuth/elevation fan of sensor-frame unit directions.
struct ScanPattern {
  std::size_t azimuth_count = 180;
  double elevation_min = -0.40;  // rad
  double elevation_max = 0.10;   // rad
  std::size_t elevation_count = 8;

  std::vector<Vec3f> Directions() const;
};

struct ScanSpec {
  Pose pose;
  std::vector<Vec3f> directions;
  double r_min = 0.5;
  double r_max = 30.0;
  double failure_rate = 0.0;
};

// Draws one reading from the decay process along the ray by inverting the
// piecewise-exponential survival function.
Measurement SampleRay(const DecayGrid& map, const Pose& pose,
                      const Vec3& direction, double r_min, double r_max,
                      RandomStream& rng);

// Samples every direction of `spec` (without corruption). Ray j of scan
// `scan_index` uses substream (seed, kRaySample, scan_index, j). Ranges are
// stored at f32 precision, clamped into [r_min, r_max].
Scan SampleScan(const DecayGrid& map, const ScanSpec& spec, std::uint64_t seed,
                std::uint64_t scan_index);

// Replaces each reading with SUB with probability `failure_rate`
// (substream (seed, kCorruption, scan_index, j)).
Scan CorruptScan(Scan scan, double failure_rate, std::uint64_t seed,
                 std::uint64_t scan_index);

// Sample + corrupt for every pose; scans are independent, so `threads`
// only affects speed.
std::vector<Scan> SimulateScans(const DecayGrid& map,
                                const std::vector<Pose>& poses,
                                const ScanPattern& pattern, double r_min,
                                double r_max, double failure_rate,
                                std::uint64_t seed,
                                std::uint64_t first_scan_index = 0,
                                int threads = 1);

// Poses spaced evenly along a polyline of horizontal waypoints, heading
// along the path, at constant height.
struct TrajectorySpec {
  std::vector<Eigen::Vector2d> waypoints;
  std::size_t steps = 50;
  double height = 1.5;
};

std::vector<Pose> MakeTrajectory(const TrajectorySpec& spec);

// A complete synthetic benchmark environment.
struct Scenario {
  std::string name;
  WorldSpec world;  // ground truth, rasterized finer than the maps
  // Grid of the maps built from the mapping scans. Covers the same extent as
  // world.geom at a coarser edge length, so surfaces fall inside map voxels
  // rather than on their faces.
  GridGeometry map_geom{Vec3::Zero(), 1.0, {1, 1, 1}};
  TrajectorySpec trajectory;
  ScanPattern pattern;
  double r_min = 0.5;
  double r_max = 30.0;
  // Mapping scans are taken at this many poses along the same path (with
  // independent random draws), disjoint from the localization scans.
  std::size_t mapping_steps = 200;
};

// "campus" (buildings, trees, lawn), "forest" (dense trunks and canopy),
// "park" (open woodland with an underpass). Throws std::invalid_argument
// for other names.
Scenario MakeScenario(const std::string& name, std::uint64_t seed = 1);

std::vector<std::string> StandardSuite();

// Scan indices of mapping scans start here so their random draws never
// coincide with localization scans.
inline constexpr std::uint64_t kMappingScanIndexBase = std::uint64_t{1} << 32;

struct SimulatedRun {
  DecayGrid truth;
  std::vector<Pose> trajectory;    // localization poses
  std::vector<Scan> scans;         // localization scans, corrupted
  std::vector<Scan> mapping_scans; // uncorrupted, along the same path
};

// Rasterizes the world and samples localization and mapping scans.
// `failure_rate` applies to the localization scans only.
SimulatedRun SimulateScenario(const Scenario& scenario, double failure_rate,
                              std::uint64_t seed, int threads = 1);

}  // namespace decay_lidar

#endif  // DECAY_LIDAR_SIMULATOR_H_

#include "decay_lidar/simulator.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "decay_lidar/parallel.h"

namespace decay_lidar {

Primitive Primitive::Box(const Vec3& center, const Vec3& size, double rate,
                         double yaw) {
  Primitive p;
  p.shape = Shape::kBox;
  p.center = center;
  p.half_extents = 0.5 * size;
  p.rate = rate;
  p.yaw = yaw;
  return p;
}

Primitive Primitive::Sphere(const Vec3& center, double radius, double rate) {
  Primitive p;
  p.shape = Shape::kSphere;
  p.center = center;
  p.radius = radius;
  p.rate = rate;
  return p;
}

Primitive Primitive::Cylinder(const Vec3& center, double radius, double height,
                              double rate) {
  Primitive p;
  p.shape = Shape::kCylinder;
  p.center = center;
  p.radius = radius;
  p.height = height;
  p.rate = rate;
  return p;
}

bool Primitive::Contains(const Vec3& p) const {
  const Vec3 d = p - center;
  switch (shape) {
    case Shape::kBox: {
      const double c = std::cos(yaw), s = std::sin(yaw);
      const Vec3 local(c * d.x() + s * d.y(), -s * d.x() + c * d.y(), d.z());
      return std::abs(local.x()) <= half_extents.x() &&
             std::abs(local.y()) <= half_extents.y() &&
             std::abs(local.z()) <= half_extents.z();
    }
    case Shape::kSphere:
      return d.squaredNorm() <= radius * radius;
    case Shape::kCylinder:
      return d.head<2>().squaredNorm() <= radius * radius &&
             std::abs(d.z()) <= 0.5 * height;
  }
  return false;
}

void Primitive::Bounds(Vec3* lo, Vec3* hi) const {
  Vec3 half;
  switch (shape) {
    case Shape::kBox: {
      const double c = std::abs(std::cos(yaw)), s = std::abs(std::sin(yaw));
      half = Vec3(c * half_extents.x() + s * half_extents.y(),
                  s * half_extents.x() + c * half_extents.y(), half_extents.z());
      break;
    }
    case Shape::kSphere:
      half = Vec3::Constant(radius);
      break;
    case Shape::kCylinder:
      half = Vec3(radius, radius, 0.5 * height);
      break;
  }
  *lo = center - half;
  *hi = center + half;
}

DecayGrid RasterizeWorld(const WorldSpec& spec) {
  if (!(spec.background_rate >= 0.0)) {
    throw std::invalid_argument("background rate must be >= 0");
  }
  for (const Primitive& p : spec.primitives) {
    if (!(p.rate >= 0.0) || !std::isfinite(p.rate)) {
      throw std::invalid_argument("primitive rates must be finite and >= 0");
    }
  }
  const GridGeometry& g = spec.geom;
  const auto n = static_cast<std::size_t>(g.voxel_count());
  std::vector<double> rates(n, spec.background_rate);
  // Primitives in order, each over the voxels whose centers can lie inside
  // its bounding box; later primitives overwrite earlier ones.
  for (const Primitive& p : spec.primitives) {
    Vec3 lo, hi;
    p.Bounds(&lo, &hi);
    VoxelCoord first, last;
    bool empty = false;
    for (int a = 0; a < 3; ++a) {
      const double u0 = (lo[a] - g.origin()[a]) / g.edge_length() - 0.5;
      const double u1 = (hi[a] - g.origin()[a]) / g.edge_length() - 0.5;
      first[a] = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(u0)));
      last[a] = std::min<std::int64_t>(g.dims()[a] - 1,
                                       static_cast<std::int64_t>(std::floor(u1)));
      if (first[a] > last[a]) empty = true;
    }
    if (empty) continue;
    for (std::int64_t z = first[2]; z <= last[2]; ++z) {
      for (std::int64_t y = first[1]; y <= last[1]; ++y) {
        for (std::int64_t x = first[0]; x <= last[0]; ++x) {
          const std::int64_t i = g.Linearize({x, y, z});
          if (p.Contains(g.VoxelCenter(i))) rates[static_cast<std::size_t>(i)] = p.rate;
        }
      }
    }
  }
  return DecayGrid(spec.geom, std::move(rates), spec.background_rate,
                   spec.background_rate);
}

std::vector<Vec3f> ScanPattern::Directions() const {
  std::vector<Vec3f> dirs;
  dirs.reserve(azimuth_count * elevation_count);
  for (std::size_t e = 0; e < elevation_count; ++e) {
    const double elev =
        elevation_count == 1
            ? elevation_min
            : elevation_min + (elevation_max - elevation_min) *
                                  static_cast<double>(e) /
                                  static_cast<double>(elevation_count - 1);
    for (std::size_t a = 0; a < azimuth_count; ++a) {
      const double az = 2.0 * M_PI * static_cast<double>(a) /
                        static_cast<double>(azimuth_count);
      const Vec3 d(std::cos(elev) * std::cos(az), std::cos(elev) * std::sin(az),
                   std::sin(elev));
      dirs.push_back(d.cast<float>());
    }
  }
  return dirs;
}

Measurement SampleRay(const DecayGrid& map, const Pose& pose,
                      const Vec3& direction, double r_min, double r_max,
                      RandomStream& rng) {
  Measurement m = Measurement::Sup(pose, direction, r_min, r_max);
  const double target = -std::log(rng.Uniform());
  double depth = 0.0;
  double travelled = 0.0;
  bool reflected = false;
  double r_hit = 0.0;
  VisitRay(map.geometry(), m.Origin(), m.WorldDirection(), r_max,
           [&](std::int64_t voxel, double d) {
             if (reflected) return;
             const double rate = map.RateAt(voxel);
             if (rate > 0.0 && depth + rate * d >= target) {
               r_hit = std::min(travelled + (target - depth) / rate,
                                travelled + d);
               reflected = true;
               return;
             }
             depth += rate * d;
             travelled += d;
           });
  if (!reflected) return m;
  if (r_hit < r_min) {
    m.kind = ReadingKind::kSub;
    return m;
  }
  m.kind = ReadingKind::kRange;
  m.range = r_hit;
  return m;
}

namespace {

float ToStoredRange(double r, double r_min, double r_max) {
  constexpr float kInf = std::numeric_limits<float>::infinity();
  float f = static_cast<float>(r);
  while (static_cast<double>(f) > r_max) f = std::nextafter(f, -kInf);
  while (static_cast<double>(f) < r_min) f = std::nextafter(f, kInf);
  return f;
}

}  // namespace

Scan SampleScan(const DecayGrid& map, const ScanSpec& spec, std::uint64_t seed,
                std::uint64_t scan_index) {
  Scan scan;
  scan.pose = spec.pose;
  scan.r_min = spec.r_min;
  scan.r_max = spec.r_max;
  scan.rays.resize(spec.directions.size());
  for (std::size_t j = 0; j < spec.directions.size(); ++j) {
    RandomStream rng(seed, StreamTag::kRaySample, scan_index, j);
    Ray& ray = scan.rays[j];
    ray.direction = spec.directions[j];
    const Measurement m = SampleRay(map, spec.pose, ToUnit(ray.direction),
                                    spec.r_min, spec.r_max, rng);
    ray.kind = m.kind;
    ray.range = m.kind == ReadingKind::kRange
                    ? ToStoredRange(m.range, spec.r_min, spec.r_max)
                    : 0.0f;
  }
  return spec.failure_rate > 0.0
             ? CorruptScan(std::move(scan), spec.failure_rate, seed, scan_index)
             : scan;
}

Scan CorruptScan(Scan scan, double failure_rate, std::uint64_t seed,
                 std::uint64_t scan_index) {
  if (!(failure_rate >= 0.0 && failure_rate <= 1.0)) {
    throw std::invalid_argument("failure rate must lie in [0, 1]");
  }
  if (failure_rate == 0.0) return scan;
  for (std::size_t j = 0; j < scan.rays.size(); ++j) {
    RandomStream rng(seed, StreamTag::kCorruption, scan_index, j);
    if (rng.Uniform() < failure_rate) {
      scan.rays[j].kind = ReadingKind::kSub;
      scan.rays[j].range = 0.0f;
    }
  }
  return scan;
}

std::vector<Scan> SimulateScans(const DecayGrid& map,
                                const std::vector<Pose>& poses,
                                const ScanPattern& pattern, double r_min,
                                double r_max, double failure_rate,
                                std::uint64_t seed,
                                std::uint64_t first_scan_index, int threads) {
  const std::vector<Vec3f> directions = pattern.Directions();
  std::vector<Scan> scans(poses.size());
  ParallelFor(poses.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      ScanSpec spec{poses[i], directions, r_min, r_max, failure_rate};
      scans[i] = SampleScan(map, spec, seed, first_scan_index + i);
    }
  });
  return scans;
}

std::vector<Pose> MakeTrajectory(const TrajectorySpec& spec) {
  if (spec.waypoints.empty()) {
    throw std::invalid_argument("trajectory needs at least one waypoint");
  }
  std::vector<double> cumulative{0.0};
  for (std::size_t i = 1; i < spec.waypoints.size(); ++i) {
    cumulative.push_back(cumulative.back() +
                         (spec.waypoints[i] - spec.waypoints[i - 1]).norm());
  }
  const double total = cumulative.back();
  std::vector<Pose> poses;
  poses.reserve(spec.steps);
  for (std::size_t k = 0; k < spec.steps; ++k) {
    const double s = spec.steps > 1 ? total * static_cast<double>(k) /
                                          static_cast<double>(spec.steps - 1)
                                    : 0.0;
    std::size_t seg = 0;
    while (seg + 2 < spec.waypoints.size() && cumulative[seg + 1] < s) ++seg;
    Eigen::Vector2d a = spec.waypoints[seg];
    Eigen::Vector2d b = spec.waypoints.size() > 1 ? spec.waypoints[seg + 1] : a;
    const double seg_len = (b - a).norm();
    const double f = seg_len > 0.0 ? (s - cumulative[seg]) / seg_len : 0.0;
    const Eigen::Vector2d p = a + std::clamp(f, 0.0, 1.0) * (b - a);
    const double yaw = seg_len > 0.0 ? std::atan2(b.y() - a.y(), b.x() - a.x())
                                     : 0.0;
    poses.emplace_back(Vec3(p.x(), p.y(), spec.height), YawRotation(yaw));
  }
  return poses;
}

namespace {

constexpr double kMapEdge = 0.5;
constexpr std::uint32_t kTruthSubdivision = 4;

// Map grid with `dims` voxels of kMapEdge; truth raster over the same extent
// with kTruthSubdivision^3 voxels per map voxel.
void SetGrids(Scenario& s, const GridDims& dims) {
  s.map_geom = GridGeometry(Vec3::Zero(), kMapEdge, dims);
  s.world.geom = GridGeometry(Vec3::Zero(), kMapEdge / kTruthSubdivision,
                              {dims[0] * kTruthSubdivision,
                               dims[1] * kTruthSubdivision,
                               dims[2] * kTruthSubdivision});
}

constexpr double kGroundRate = 8.0;
constexpr double kSolidRate = 20.0;
constexpr double kTrunkRate = 12.0;

void AddTree(std::vector<Primitive>& prims, double x, double y, double trunk_h,
             double canopy_r, double canopy_rate) {
  prims.push_back(Primitive::Cylinder(Vec3(x, y, 0.5 + 0.5 * trunk_h), 0.3,
                                      trunk_h, kTrunkRate));
  prims.push_back(Primitive::Sphere(Vec3(x, y, 0.5 + trunk_h + 0.4 * canopy_r),
                                    canopy_r, canopy_rate));
}

Scenario Campus(std::uint64_t seed) {
  Scenario s;
  s.name = "campus";
  SetGrids(s, {80, 60, 14});
  s.world.seed = seed;
  RandomStream rng(seed, StreamTag::kWorld, 1);
  auto& prims = s.world.primitives;
  prims.push_back(Primitive::Box(Vec3(20, 15, 0.25), Vec3(40, 30, 0.5), kGroundRate));
  // Building right of the footpath, with a recessed entrance.
  prims.push_back(Primitive::Box(Vec3(20, 23, 3.5), Vec3(26, 7, 6), kSolidRate));
  prims.push_back(Primitive::Box(Vec3(17, 19.25, 1.75), Vec3(3, 0.5, 2.5), 0.0));
  prims.push_back(Primitive::Box(Vec3(36, 26, 2.5), Vec3(6, 6, 4), kSolidRate, 0.3));
  // Lawn with trees and bushes on the left.
  for (double x : {6.0, 12.5, 19.0, 26.0, 33.0}) {
    AddTree(prims, x + rng.Uniform(-1, 1), 6.0 + rng.Uniform(-1.5, 1.5),
            2.5 + rng.Uniform(0, 1), 1.8 + rng.Uniform(0, 0.6), 0.8);
  }
  for (int i = 0; i < 8; ++i) {
    prims.push_back(Primitive::Sphere(
        Vec3(rng.Uniform(3, 37), rng.Uniform(2, 10), 0.8),
        0.6 + rng.Uniform(0, 0.5), 1.5));
  }
  // Facade pilasters at irregular spacing, so the wall is not uniform along
  // the path.
  for (double x : {8.0, 10.5, 14.5, 19.5, 23.0, 27.5, 30.0}) {
    prims.push_back(Primitive::Box(Vec3(x + rng.Uniform(-0.4, 0.4), 19.2, 3.0),
                                   Vec3(0.7, 0.8, 5.0), kSolidRate));
  }
  // Lamp posts, bollards, a bench, a kiosk and bins along the path.
  for (double x : {9.0, 21.0, 31.0}) {
    prims.push_back(Primitive::Cylinder(Vec3(x, 17.5, 2.5), 0.2, 4.0, kSolidRate));
  }
  for (int i = 0; i < 10; ++i) {
    prims.push_back(Primitive::Cylinder(
        Vec3(rng.Uniform(3, 34), rng.Uniform(0, 1) < 0.5 ? 11.8 : 16.3, 1.0),
        0.15, 1.0, kSolidRate));
  }
  prims.push_back(Primitive::Box(Vec3(15, 11.5, 0.9), Vec3(2, 0.6, 0.8), kSolidRate));
  prims.push_back(Primitive::Box(Vec3(26, 9.5, 1.75), Vec3(2.5, 2.0, 2.5),
                                 kSolidRate, 0.4));
  for (int i = 0; i < 6; ++i) {
    prims.push_back(Primitive::Box(
        Vec3(rng.Uniform(4, 34),
             rng.Uniform(0, 1) < 0.5 ? rng.Uniform(10.5, 12.3) : rng.Uniform(15.7, 17.5),
             0.9),
        Vec3(0.5, 0.5, 0.8), kSolidRate, rng.Uniform(0, 1.5)));
  }
  s.trajectory.waypoints = {{4.0, 14.0}, {30.0, 14.0}, {36.0, 18.0}};
  s.trajectory.steps = 60;
  s.trajectory.height = 1.6;
  return s;
}

Scenario Forest(std::uint64_t seed) {
  Scenario s;
  s.name = "forest";
  SetGrids(s, {70, 60, 20});
  s.world.seed = seed;
  RandomStream rng(seed, StreamTag::kWorld, 2);
  auto& prims = s.world.primitives;
  prims.push_back(Primitive::Box(Vec3(17.5, 15, 0.25), Vec3(35, 30, 0.5), kGroundRate));
  // Undergrowth first so trunks overwrite it.
  for (int i = 0; i < 40; ++i) {
    const double y = rng.Uniform(1, 29);
    if (std::abs(y - 15.0) < 1.8) continue;
    prims.push_back(Primitive::Sphere(Vec3(rng.Uniform(1, 34), y, 0.7),
                                      0.5 + rng.Uniform(0, 0.8), 0.9));
  }
  for (int i = 0; i < 45; ++i) {
    const double x = rng.Uniform(1, 34);
    double y = rng.Uniform(1, 29);
    if (std::abs(y - 15.0) < 2.0) y += y < 15.0 ? -2.0 : 2.0;
    AddTree(prims, x, y, 4.0 + rng.Uniform(0, 3), 1.5 + rng.Uniform(0, 1.2),
            0.5 + rng.Uniform(0, 0.6));
  }
  s.trajectory.waypoints = {{3.0, 15.0}, {16.0, 14.0}, {32.0, 16.0}};
  s.trajectory.steps = 60;
  s.trajectory.height = 1.6;
  return s;
}

Scenario Park(std::uint64_t seed) {
  Scenario s;
  s.name = "park";
  SetGrids(s, {80, 60, 14});
  s.world.seed = seed;
  RandomStream rng(seed, StreamTag::kWorld, 3);
  auto& prims = s.world.primitives;
  prims.push_back(Primitive::Box(Vec3(20, 15, 0.25), Vec3(40, 30, 0.5), kGroundRate));
  // Road underpass: a bridge deck on two abutments across the path.
  prims.push_back(Primitive::Box(Vec3(22, 15, 4.5), Vec3(4, 30, 1.0), kSolidRate));
  prims.push_back(Primitive::Box(Vec3(22, 10.5, 2.25), Vec3(4, 3, 3.5), kSolidRate));
  prims.push_back(Primitive::Box(Vec3(22, 19.5, 2.25), Vec3(4, 3, 3.5), kSolidRate));
  for (int i = 0; i < 14; ++i) {
    const double x = rng.Uniform(2, 38);
    double y = rng.Uniform(2, 28);
    if (std::abs(y - 15.0) < 3.0) y += y < 15.0 ? -3.0 : 3.0;
    if (std::abs(x - 22.0) < 3.5) continue;
    AddTree(prims, x, y, 3.0 + rng.Uniform(0, 2), 2.0 + rng.Uniform(0, 1), 0.6);
  }
  prims.push_back(Primitive::Box(Vec3(8, 24, 1.5), Vec3(5, 4, 2.0), kSolidRate, 0.5));
  s.trajectory.waypoints = {{3.0, 15.0}, {37.0, 15.0}};
  s.trajectory.steps = 60;
  s.trajectory.height = 1.6;
  return s;
}

}  // namespace

Scenario MakeScenario(const std::string& name, std::uint64_t seed) {
  if (name == "campus") return Campus(seed);
  if (name == "forest") return Forest(seed);
  if (name == "park") return Park(seed);
  throw std::invalid_argument("unknown scenario '" + name +
                              "' (expected campus, forest or park)");
}

std::vector<std::string> StandardSuite() { return {"campus", "forest", "park"}; }

SimulatedRun SimulateScenario(const Scenario& scenario, double failure_rate,
                              std::uint64_t seed, int threads) {
  SimulatedRun run{RasterizeWorld(scenario.world), {}, {}, {}};
  run.trajectory = MakeTrajectory(scenario.trajectory);
  run.scans = SimulateScans(run.truth, run.trajectory, scenario.pattern,
                            scenario.r_min, scenario.r_max, failure_rate, seed,
                            0, threads);
  TrajectorySpec mapping = scenario.trajectory;
  mapping.steps = scenario.mapping_steps;
  run.mapping_scans = SimulateScans(run.truth, MakeTrajectory(mapping),
                                    scenario.pattern, scenario.r_min,
                                    scenario.r_max, 0.0, seed,
                                    kMappingScanIndexBase, threads);
  return run;
}

}  // namespace decay_lidar

#ifndef DECAY_LIDAR_BASELINES_H_
#define DECAY_LIDAR_BASELINES_H_

#include <cstdint>
#include <memory>
#include <vector>

#include "decay_lidar/grid.h"
#include "decay_lidar/likelihood.h"
#include "decay_lidar/measurement.h"

namespace decay_lidar {

// --- Reflection model ---------------------------------------------------------
//
// Each voxel stores hits H and misses M; q = H / (H + M) is the probability
// that a ray entering the voxel is reflected there. Space outside the grid
// behaves like a lattice of voxels with the same edge length and q = prior_q.

struct ReflectionOptions {
  double prior_q = 0.025;
  double unobserved_q = 0.025;
};

class ReflectionGrid {
 public:
  ReflectionGrid(const GridGeometry& geom, std::vector<std::uint64_t> hits,
                 std::vector<std::uint64_t> misses,
                 const ReflectionOptions& options);
  // Explicit probabilities (hit/miss counts are zero). Used for synthetic
  // constructions and deserialization.
  ReflectionGrid(const GridGeometry& geom, std::vector<double> q,
                 std::vector<std::uint64_t> hits,
                 std::vector<std::uint64_t> misses, double prior_q,
                 double unobserved_q);

  const GridGeometry& geometry() const { return geom_; }
  const std::vector<double>& q() const { return q_; }
  const std::vector<std::uint64_t>& hits() const { return hits_; }
  const std::vector<std::uint64_t>& misses() const { return misses_; }
  double prior_q() const { return prior_q_; }
  double unobserved_q() const { return unobserved_q_; }

  double QAt(std::int64_t voxel) const {
    return voxel == kOutside ? prior_q_ : q_[static_cast<std::size_t>(voxel)];
  }

 private:
  GridGeometry geom_;
  std::vector<double> q_;
  std::vector<std::uint64_t> hits_;
  std::vector<std::uint64_t> misses_;
  double prior_q_;
  double unobserved_q_;
};

// Counts endpoint voxels of RANGE rays as hits and every other voxel crossed
// with positive chord as a miss (SUP rays: misses along r_max). SUB rays are
// skipped.
ReflectionGrid BuildReflectionMap(const std::vector<Scan>& scans,
                                  const GridGeometry& geom,
                                  const ReflectionOptions& options = {},
                                  int threads = 1);

// P(x(r) in v_k) = q_k * prod (1 - q_i) over the voxels crossed before v_k.
RayLikelihood ReflectionRayProb(const ReflectionGrid& map,
                                const Measurement& m);

// Chord length of the full ray line inside the voxel holding the endpoint
// (one edge length when the endpoint is outside the grid), floored at 1e-9.
double EndpointChord(const GridGeometry& geom, const Measurement& m);

// P(x(r) in v_k) spread uniformly over the endpoint voxel's chord.
RayLikelihood ReflectionToDensity(const ReflectionGrid& map,
                                  const Measurement& m);

// P(sup) = prod (1 - q_i) along r_max; P(sub) = 1 - prod (1 - q_i) along
// r_min.
RayLikelihood ReflectionOutOfRangeProb(const ReflectionGrid& map,
                                       const Measurement& m);

class ReflectionModel final : public SensorModel {
 public:
  explicit ReflectionModel(std::shared_ptr<const ReflectionGrid> map)
      : map_(std::move(map)) {}

  ModelKind kind() const override { return ModelKind::kReflection; }
  RayLikelihood Evaluate(const Measurement& m) const override;
  const ReflectionGrid& map() const { return *map_; }

 private:
  std::shared_ptr<const ReflectionGrid> map_;
};

// --- Endpoint model (likelihood field) ----------------------------------------

struct LikelihoodFieldOptions {
  double sigma = 0.2;  // m
  double p_oor = 0.1;  // total probability of out-of-range readings
};

class LikelihoodField {
 public:
  LikelihoodField(const GridGeometry& geom, std::vector<double> nearest_dist,
                  const LikelihoodFieldOptions& options);

  const GridGeometry& geometry() const { return geom_; }
  const std::vector<double>& nearest_dist() const { return nearest_dist_; }
  double sigma() const { return sigma_; }
  double p_oor() const { return p_oor_; }

  // Distance from the voxel containing `point` to the nearest mapped
  // endpoint voxel; infinity outside the grid.
  double NearestDistanceAt(const Vec3& point) const;

  // Unnormalized score exp(-d^2 / (2 sigma^2)).
  double Score(const Vec3& point) const;

 private:
  GridGeometry geom_;
  std::vector<double> nearest_dist_;
  double sigma_;
  double p_oor_;
};

// Exact Euclidean distance (meters, between voxel centers) from every voxel
// to the nearest voxel with `occupied[i]` set; infinity if none is occupied.
std::vector<double> EuclideanDistanceTransform(const GridGeometry& geom,
                                               const std::vector<bool>& occupied);

// Throws std::invalid_argument if no RANGE endpoint falls inside the grid.
LikelihoodField BuildLikelihoodField(const std::vector<Scan>& scans,
                                     const GridGeometry& geom,
                                     const LikelihoodFieldOptions& options = {});

// Per-ray normalizer: midpoint-rule integral of the score over
// [r_min, r_max] at step <= edge_length / 4.
double EndpointNormalizer(const LikelihoodField& field, const Measurement& m);

// RANGE: (1 - p_oor) * g(r) / normalizer. SUB and SUP: p_oor / 2 each.
RayLikelihood EndpointRayDensity(const LikelihoodField& field,
                                 const Measurement& m);

class EndpointModel final : public SensorModel {
 public:
  explicit EndpointModel(std::shared_ptr<const LikelihoodField> field)
      : field_(std::move(field)) {}

  ModelKind kind() const override { return ModelKind::kEndpoint; }
  RayLikelihood Evaluate(const Measurement& m) const override {
    return EndpointRayDensity(*field_, m);
  }
  const LikelihoodField& field() const { return *field_; }

 private:
  std::shared_ptr<const LikelihoodField> field_;
};

}  // namespace decay_lidar

#endif  // DECAY_LIDAR_BASELINES_H_

#ifndef DECAY_LIDAR_DECAY_MAP_H_
#define DECAY_LIDAR_DECAY_MAP_H_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "decay_lidar/grid.h"
#include "decay_lidar/measurement.h"

namespace decay_lidar {

// Minimum distance credited to the voxel that records a hit.
inline constexpr double kMinHitDistance = 1e-9;

struct IntegrationStats {
  std::uint64_t range_rays = 0;
  std::uint64_t sup_rays = 0;
  std::uint64_t sub_skipped = 0;

  bool operator==(const IntegrationStats&) const = default;
};

// Per-voxel reflection counts and traveled distances gathered from scans.
class MapAccumulator {
 public:
  explicit MapAccumulator(const GridGeometry& geom);

  const GridGeometry& geometry() const { return geom_; }

  const std::vector<std::uint64_t>& hits() const { return hits_; }
  const std::vector<double>& dist() const { return dist_; }
  std::uint64_t outside_hits() const { return outside_hits_; }
  double outside_dist() const { return outside_dist_; }
  const IntegrationStats& stats() const { return stats_; }

  // Adds one measurement. RANGE rays credit their traversal up to the
  // endpoint and a hit in locate(endpoint); SUP rays credit travel up to
  // r_max; SUB rays are skipped and counted.
  void Integrate(const Measurement& m);

  // Same as Integrate with a precomputed traversal of the ray (length r for
  // RANGE, r_max for SUP).
  void Apply(const Measurement& m, const Traversal& traversal);

  // Elementwise sum. Throws std::invalid_argument on geometry mismatch.
  void Merge(const MapAccumulator& other);

  // Raw access for deserialization.
  std::vector<std::uint64_t>& mutable_hits() { return hits_; }
  std::vector<double>& mutable_dist() { return dist_; }
  void set_outside(std::uint64_t hits, double dist) {
    outside_hits_ = hits;
    outside_dist_ = dist;
  }

 private:
  void CreditHit(std::int64_t voxel, double last_segment_in_voxel);

  GridGeometry geom_;
  std::vector<std::uint64_t> hits_;
  std::vector<double> dist_;
  std::uint64_t outside_hits_ = 0;
  double outside_dist_ = 0.0;
  IntegrationStats stats_;
};

struct FinalizeOptions {
  double prior_rate = 0.05;       // 1/m, all space outside the grid
  double unobserved_rate = 0.05;  // 1/m, voxels no ray traveled through
  double rate_cap = 1e4;          // 1/m
};

// Decay-rate map: one exponential decay rate per voxel.
class DecayGrid {
 public:
  DecayGrid(const GridGeometry& geom, std::vector<double> rates,
            double prior_rate, double unobserved_rate);
  // Uniform map.
  DecayGrid(const GridGeometry& geom, double rate, double prior_rate);

  const GridGeometry& geometry() const { return geom_; }
  const std::vector<double>& rates() const { return rates_; }
  double prior_rate() const { return prior_rate_; }
  double unobserved_rate() const { return unobserved_rate_; }

  // Rate of `voxel`, or prior_rate for kOutside.
  double RateAt(std::int64_t voxel) const {
    return voxel == kOutside ? prior_rate_
                             : rates_[static_cast<std::size_t>(voxel)];
  }
  // Mean free path 1/lambda; infinity for a zero rate.
  double MeanFreePath(std::int64_t voxel) const;

  void set_rate(std::int64_t voxel, double rate);

 private:
  GridGeometry geom_;
  std::vector<double> rates_;
  double prior_rate_;
  double unobserved_rate_;
};

MapAccumulator IntegrateMeasurement(MapAccumulator acc, const Measurement& m);

// Maximum-likelihood rates: hits / distance, capped; unobserved voxels take
// unobserved_rate.
DecayGrid Finalize(const MapAccumulator& acc,
                   const FinalizeOptions& options = {});

MapAccumulator Merge(const MapAccumulator& a, const MapAccumulator& b);

// Integrates every ray of `scans` in scan/ray order. Ray tracing runs on
// `threads` workers; accumulation is sequential, so the result is
// bit-identical for any thread count.
MapAccumulator BuildAccumulator(const GridGeometry& geom,
                                const std::vector<Scan>& scans,
                                int threads = 1);

}  // namespace decay_lidar

#endif  // DECAY_LIDAR_DECAY_MAP_H_

#include "decay_lidar/decay_map.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "decay_lidar/ray_batch.h"

namespace decay_lidar {

MapAccumulator::MapAccumulator(const GridGeometry& geom)
    : geom_(geom),
      hits_(static_cast<std::size_t>(geom.voxel_count()), 0),
      dist_(static_cast<std::size_t>(geom.voxel_count()), 0.0) {}

void MapAccumulator::Integrate(const Measurement& m) {
  m.Validate();
  Traversal traversal;
  TraceRay(geom_, m.Origin(), m.WorldDirection(), KnownTravel(m), &traversal);
  Apply(m, traversal);
}

void MapAccumulator::Apply(const Measurement& m, const Traversal& traversal) {
  if (m.kind == ReadingKind::kSub) {
    ++stats_.sub_skipped;
    return;
  }
  for (const Segment& s : traversal.segments) {
    if (s.voxel == kOutside) {
      outside_dist_ += s.length;
    } else {
      dist_[static_cast<std::size_t>(s.voxel)] += s.length;
    }
  }
  if (m.kind == ReadingKind::kSup) {
    ++stats_.sup_rays;
    return;
  }
  ++stats_.range_rays;
  const std::int64_t k = Locate(geom_, m.PointAt(m.range));
  double last = 0.0;
  if (!traversal.segments.empty() && traversal.segments.back().voxel == k) {
    last = traversal.segments.back().length;
  }
  CreditHit(k, last);
}

void MapAccumulator::CreditHit(std::int64_t voxel, double last_segment) {
  const double top_up = std::max(0.0, kMinHitDistance - last_segment);
  if (voxel == kOutside) {
    ++outside_hits_;
    outside_dist_ += top_up;
    return;
  }
  const auto i = static_cast<std::size_t>(voxel);
  ++hits_[i];
  dist_[i] += top_up;
}

void MapAccumulator::Merge(const MapAccumulator& other) {
  if (other.geom_ != geom_) {
    throw std::invalid_argument("cannot merge accumulators with different grids");
  }
  for (std::size_t i = 0; i < hits_.size(); ++i) {
    hits_[i] += other.hits_[i];
    dist_[i] += other.dist_[i];
  }
  outside_hits_ += other.outside_hits_;
  outside_dist_ += other.outside_dist_;
  stats_.range_rays += other.stats_.range_rays;
  stats_.sup_rays += other.stats_.sup_rays;
  stats_.sub_skipped += other.stats_.sub_skipped;
}

DecayGrid::DecayGrid(const GridGeometry& geom, std::vector<double> rates,
                     double prior_rate, double unobserved_rate)
    : geom_(geom),
      rates_(std::move(rates)),
      prior_rate_(prior_rate),
      unobserved_rate_(unobserved_rate) {
  if (static_cast<std::int64_t>(rates_.size()) != geom_.voxel_count()) {
    throw std::invalid_argument("rate count does not match grid size");
  }
  auto bad = [](double r) { return !(r >= 0.0) || !std::isfinite(r); };
  if (bad(prior_rate_) || bad(unobserved_rate_) ||
      std::any_of(rates_.begin(), rates_.end(), bad)) {
    throw std::invalid_argument("decay rates must be finite and >= 0");
  }
}

DecayGrid::DecayGrid(const GridGeometry& geom, double rate, double prior_rate)
    : DecayGrid(geom,
                std::vector<double>(static_cast<std::size_t>(geom.voxel_count()),
                                    rate),
                prior_rate, rate) {}

double DecayGrid::MeanFreePath(std::int64_t voxel) const {
  const double rate = RateAt(voxel);
  return rate > 0.0 ? 1.0 / rate : std::numeric_limits<double>::infinity();
}

void DecayGrid::set_rate(std::int64_t voxel, double rate) {
  if (!(rate >= 0.0) || !std::isfinite(rate)) {
    throw std::invalid_argument("decay rates must be finite and >= 0");
  }
  rates_.at(static_cast<std::size_t>(voxel)) = rate;
}

MapAccumulator IntegrateMeasurement(MapAccumulator acc, const Measurement& m) {
  acc.Integrate(m);
  return acc;
}

DecayGrid Finalize(const MapAccumulator& acc, const FinalizeOptions& options) {
  if (!(options.prior_rate >= 0.0) || !(options.unobserved_rate >= 0.0) ||
      !(options.rate_cap > 0.0)) {
    throw std::invalid_argument("finalize rates must be >= 0, cap > 0");
  }
  const auto& hits = acc.hits();
  const auto& dist = acc.dist();
  std::vector<double> rates(hits.size());
  for (std::size_t i = 0; i < hits.size(); ++i) {
    rates[i] = dist[i] > 0.0
                   ? std::min(static_cast<double>(hits[i]) / dist[i],
                              options.rate_cap)
                   : options.unobserved_rate;
  }
  return DecayGrid(acc.geometry(), std::move(rates), options.prior_rate,
                   options.unobserved_rate);
}

MapAccumulator Merge(const MapAccumulator& a, const MapAccumulator& b) {
  MapAccumulator out = a;
  out.Merge(b);
  return out;
}

MapAccumulator BuildAccumulator(const GridGeometry& geom,
                                const std::vector<Scan>& scans, int threads) {
  MapAccumulator acc(geom);
  ForEachKnownTravel(geom, scans, threads,
                     [&acc](const Measurement& m, const Traversal& t) {
                       acc.Apply(m, t);
                     });
  return acc;
}

}  // namespace decay_lidar

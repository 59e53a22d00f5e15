#ifndef DECAY_LIDAR_RAY_BATCH_H_
#define DECAY_LIDAR_RAY_BATCH_H_

#include <cstddef>
#include <vector>

#include "decay_lidar/grid.h"
#include "decay_lidar/measurement.h"
#include "decay_lidar/parallel.h"

namespace decay_lidar {

// Distance a ray is known to have traveled: r for RANGE, r_max for SUP,
// zero for SUB (the traversal is unknown).
inline double KnownTravel(const Measurement& m) {
  switch (m.kind) {
    case ReadingKind::kRange:
      return m.range;
    case ReadingKind::kSup:
      return m.r_max;
    case ReadingKind::kSub:
      break;
  }
  return 0.0;
}

// Traces the known travel of every ray in `scans` and calls
// `sink(measurement, traversal)` in scan/ray order. Tracing of each chunk is
// spread over `threads` workers; the sink always runs on the caller.
template <typename Sink>
void ForEachKnownTravel(const GridGeometry& geom,
                        const std::vector<Scan>& scans, int threads,
                        Sink&& sink) {
  constexpr std::size_t kChunk = 8192;
  std::vector<Measurement> batch;
  std::vector<Traversal> traversals(kChunk);
  batch.reserve(kChunk);

  auto flush = [&] {
    ParallelFor(batch.size(), threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const Measurement& m = batch[i];
        TraceRay(geom, m.Origin(), m.WorldDirection(), KnownTravel(m),
                 &traversals[i]);
      }
    });
    for (std::size_t i = 0; i < batch.size(); ++i) sink(batch[i], traversals[i]);
    batch.clear();
  };

  for (const Scan& scan : scans) {
    for (std::size_t j = 0; j < scan.rays.size(); ++j) {
      batch.push_back(scan.At(j));
      if (batch.size() == kChunk) flush();
    }
  }
  if (!batch.empty()) flush();
}

}  // namespace decay_lidar

#endif  // DECAY_LIDAR_RAY_BATCH_H_

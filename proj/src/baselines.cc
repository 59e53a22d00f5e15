#include "decay_lidar/baselines.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "decay_lidar/ray_batch.h"

namespace decay_lidar {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMinChord = 1e-9;

bool IsProbability(double p) { return p >= 0.0 && p <= 1.0; }

// ln prod (1 - q_i) over the first `length` meters of the ray, excluding the
// chord inside `endpoint_voxel` when it is the final segment.
double LogTransmission(const ReflectionGrid& map, const Measurement& m,
                       double length, bool exclude_last,
                       std::int64_t endpoint_voxel) {
  const double edge = map.geometry().edge_length();
  Traversal traversal;
  TraceRay(map.geometry(), m.Origin(), m.WorldDirection(), length, &traversal);
  auto& segs = traversal.segments;
  double log_t = 0.0;
  for (std::size_t s = 0; s < segs.size(); ++s) {
    const bool last = s + 1 == segs.size();
    const Segment& seg = segs[s];
    if (seg.voxel == kOutside) {
      // Virtual lattice: one factor per edge length of outside travel; the
      // outside cell holding the endpoint is not a pass-through.
      double crossings = seg.length / edge;
      if (last && exclude_last && endpoint_voxel == kOutside) {
        crossings = std::max(0.0, crossings - 1.0);
      }
      log_t += crossings * std::log1p(-map.prior_q());
      continue;
    }
    if (last && exclude_last && seg.voxel == endpoint_voxel) continue;
    log_t += std::log1p(-map.QAt(seg.voxel));
  }
  return log_t;
}

}  // namespace

ReflectionGrid::ReflectionGrid(const GridGeometry& geom,
                               std::vector<std::uint64_t> hits,
                               std::vector<std::uint64_t> misses,
                               const ReflectionOptions& options)
    : geom_(geom),
      hits_(std::move(hits)),
      misses_(std::move(misses)),
      prior_q_(options.prior_q),
      unobserved_q_(options.unobserved_q) {
  const auto n = static_cast<std::size_t>(geom_.voxel_count());
  if (hits_.size() != n || misses_.size() != n) {
    throw std::invalid_argument("hit/miss counts do not match grid size");
  }
  if (!IsProbability(prior_q_) || !IsProbability(unobserved_q_)) {
    throw std::invalid_argument("reflection priors must lie in [0, 1]");
  }
  q_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t total = hits_[i] + misses_[i];
    q_[i] = total > 0 ? static_cast<double>(hits_[i]) /
                            static_cast<double>(total)
                      : unobserved_q_;
  }
}

ReflectionGrid::ReflectionGrid(const GridGeometry& geom, std::vector<double> q,
                               std::vector<std::uint64_t> hits,
                               std::vector<std::uint64_t> misses,
                               double prior_q, double unobserved_q)
    : geom_(geom),
      q_(std::move(q)),
      hits_(std::move(hits)),
      misses_(std::move(misses)),
      prior_q_(prior_q),
      unobserved_q_(unobserved_q) {
  const auto n = static_cast<std::size_t>(geom_.voxel_count());
  if (hits_.empty()) hits_.assign(n, 0);
  if (misses_.empty()) misses_.assign(n, 0);
  if (q_.size() != n || hits_.size() != n || misses_.size() != n) {
    throw std::invalid_argument("reflection arrays do not match grid size");
  }
  if (!IsProbability(prior_q_) || !IsProbability(unobserved_q_) ||
      !std::all_of(q_.begin(), q_.end(), IsProbability)) {
    throw std::invalid_argument("reflection probabilities must lie in [0, 1]");
  }
}

ReflectionGrid BuildReflectionMap(const std::vector<Scan>& scans,
                                  const GridGeometry& geom,
                                  const ReflectionOptions& options,
                                  int threads) {
  const auto n = static_cast<std::size_t>(geom.voxel_count());
  std::vector<std::uint64_t> hits(n, 0);
  std::vector<std::uint64_t> misses(n, 0);
  ForEachKnownTravel(
      geom, scans, threads, [&](const Measurement& m, const Traversal& t) {
        if (m.kind == ReadingKind::kSub) return;
        std::int64_t k = kOutside;
        if (m.kind == ReadingKind::kRange) {
          k = Locate(geom, m.PointAt(m.range));
          if (k != kOutside) ++hits[static_cast<std::size_t>(k)];
        }
        for (const Segment& s : t.segments) {
          if (s.voxel == kOutside || s.length <= 0.0) continue;
          if (m.kind == ReadingKind::kRange && s.voxel == k) continue;
          ++misses[static_cast<std::size_t>(s.voxel)];
        }
      });
  return ReflectionGrid(geom, std::move(hits), std::move(misses), options);
}

RayLikelihood ReflectionRayProb(const ReflectionGrid& map,
                                const Measurement& m) {
  if (m.kind != ReadingKind::kRange) {
    throw std::invalid_argument("ReflectionRayProb needs a RANGE reading");
  }
  const std::int64_t k = Locate(map.geometry(), m.PointAt(m.range));
  return RayLikelihood::Probability(
      SafeLog(map.QAt(k)) +
      LogTransmission(map, m, m.range, /*exclude_last=*/true, k));
}

double EndpointChord(const GridGeometry& geom, const Measurement& m) {
  const std::int64_t k = Locate(geom, m.PointAt(m.range));
  if (k == kOutside) return geom.edge_length();
  double chord = 0.0;
  const double reach = m.range + 2.0 * geom.edge_length();
  VisitRay(geom, m.Origin(), m.WorldDirection(), reach,
           [&](std::int64_t voxel, double d) {
             if (voxel == k) chord += d;
           });
  return std::max(chord, kMinChord);
}

RayLikelihood ReflectionToDensity(const ReflectionGrid& map,
                                  const Measurement& m) {
  const RayLikelihood p = ReflectionRayProb(map, m);
  return RayLikelihood::Density(p.log_value -
                                std::log(EndpointChord(map.geometry(), m)));
}

RayLikelihood ReflectionOutOfRangeProb(const ReflectionGrid& map,
                                       const Measurement& m) {
  switch (m.kind) {
    case ReadingKind::kSup:
      return RayLikelihood::Probability(
          LogTransmission(map, m, m.r_max, false, kOutside));
    case ReadingKind::kSub:
      return RayLikelihood::Probability(
          Log1mExp(LogTransmission(map, m, m.r_min, false, kOutside)));
    case ReadingKind::kRange:
      break;
  }
  throw std::invalid_argument("out-of-range probability needs SUB or SUP");
}

RayLikelihood ReflectionModel::Evaluate(const Measurement& m) const {
  return m.kind == ReadingKind::kRange ? ReflectionToDensity(*map_, m)
                                       : ReflectionOutOfRangeProb(*map_, m);
}

// --- Likelihood field -----------------------------------------------------------

LikelihoodField::LikelihoodField(const GridGeometry& geom,
                                 std::vector<double> nearest_dist,
                                 const LikelihoodFieldOptions& options)
    : geom_(geom),
      nearest_dist_(std::move(nearest_dist)),
      sigma_(options.sigma),
      p_oor_(options.p_oor) {
  if (static_cast<std::int64_t>(nearest_dist_.size()) != geom_.voxel_count()) {
    throw std::invalid_argument("distance field does not match grid size");
  }
  if (!(sigma_ > 0.0)) throw std::invalid_argument("sigma must be positive");
  if (!(p_oor_ > 0.0 && p_oor_ < 1.0)) {
    throw std::invalid_argument("p_oor must lie in (0, 1)");
  }
}

double LikelihoodField::NearestDistanceAt(const Vec3& point) const {
  const std::int64_t k = Locate(geom_, point);
  return k == kOutside ? kInf : nearest_dist_[static_cast<std::size_t>(k)];
}

double LikelihoodField::Score(const Vec3& point) const {
  const double d = NearestDistanceAt(point);
  return std::exp(-d * d / (2.0 * sigma_ * sigma_));
}

namespace {

// Squared distance transform of one line (Felzenszwalb & Huttenlocher lower
// envelope of parabolas). `f` holds squared distances, inf for empty.
void SquaredDistance1d(std::vector<double>& f, std::vector<double>& out,
                       std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s;
    while (true) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
      if (s <= z[k]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) {
    std::fill(out.begin(), out.end(), kInf);
    return;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    out[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

std::vector<double> EuclideanDistanceTransform(
    const GridGeometry& geom, const std::vector<bool>& occupied) {
  const auto& dims = geom.dims();
  const std::size_t n = static_cast<std::size_t>(geom.voxel_count());
  if (occupied.size() != n) {
    throw std::invalid_argument("occupancy does not match grid size");
  }
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = occupied[i] ? 0.0 : kInf;

  const std::size_t longest = *std::max_element(dims.begin(), dims.end());
  std::vector<double> line(longest), result(longest), z(longest + 1);
  std::vector<int> v(longest);
  const std::size_t stride[3] = {1, dims[0],
                                 static_cast<std::size_t>(dims[0]) * dims[1]};
  for (int axis = 0; axis < 3; ++axis) {
    const std::size_t len = dims[axis];
    line.resize(len);
    result.resize(len);
    for (std::size_t start = 0; start < n; ++start) {
      // Visit each line once, from its first cell along `axis`.
      if ((start / stride[axis]) % len != 0) continue;
      for (std::size_t t = 0; t < len; ++t) line[t] = sq[start + t * stride[axis]];
      SquaredDistance1d(line, result, v, z);
      for (std::size_t t = 0; t < len; ++t) sq[start + t * stride[axis]] = result[t];
    }
  }
  const double edge = geom.edge_length();
  for (double& d : sq) d = d == kInf ? kInf : std::sqrt(d) * edge;
  return sq;
}

LikelihoodField BuildLikelihoodField(const std::vector<Scan>& scans,
                                     const GridGeometry& geom,
                                     const LikelihoodFieldOptions& options) {
  std::vector<bool> occupied(static_cast<std::size_t>(geom.voxel_count()),
                             false);
  bool any = false;
  for (const Scan& scan : scans) {
    for (std::size_t j = 0; j < scan.rays.size(); ++j) {
      if (scan.rays[j].kind != ReadingKind::kRange) continue;
      const Measurement m = scan.At(j);
      const std::int64_t k = Locate(geom, m.PointAt(m.range));
      if (k == kOutside) continue;
      occupied[static_cast<std::size_t>(k)] = true;
      any = true;
    }
  }
  if (!any) {
    throw std::invalid_argument(
        "likelihood field needs at least one RANGE endpoint inside the grid");
  }
  return LikelihoodField(geom, EuclideanDistanceTransform(geom, occupied),
                         options);
}

double EndpointNormalizer(const LikelihoodField& field, const Measurement& m) {
  const double span = m.r_max - m.r_min;
  const double max_step = field.geometry().edge_length() / 4.0;
  const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(span / max_step)));
  const double h = span / static_cast<double>(steps);
  const Vec3 origin = m.Origin();
  const Vec3 dir = m.WorldDirection();
  double integral = 0.0;
  for (std::size_t i = 0; i < steps; ++i) {
    const double r = m.r_min + (static_cast<double>(i) + 0.5) * h;
    integral += field.Score(origin + r * dir);
  }
  return integral * h;
}

RayLikelihood EndpointRayDensity(const LikelihoodField& field,
                                 const Measurement& m) {
  if (m.kind != ReadingKind::kRange) {
    return RayLikelihood::Probability(std::log(field.p_oor() / 2.0));
  }
  const double normalizer = EndpointNormalizer(field, m);
  const double in_range = std::log1p(-field.p_oor());
  if (!(normalizer > 0.0)) {
    // No mapped structure anywhere along the ray: uniform over the range.
    return RayLikelihood::Density(in_range - std::log(m.r_max - m.r_min));
  }
  const double d = field.NearestDistanceAt(m.PointAt(m.range));
  const double log_score = -d * d / (2.0 * field.sigma() * field.sigma());
  return RayLikelihood::Density(in_range + log_score - std::log(normalizer));
}

}  // namespace decay_lidar

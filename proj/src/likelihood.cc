#include "decay_lidar/likelihood.h"

#include <stdexcept>
#include <string>

namespace decay_lidar {

double Log1mExp(double x) {
  if (x >= 0.0) return -std::numeric_limits<double>::infinity();
  constexpr double kLn2 = 0.6931471805599453;
  return x > -kLn2 ? std::log(-std::expm1(x)) : std::log1p(-std::exp(x));
}

double OpticalDepth(const DecayGrid& map, const Measurement& m, double r) {
  double depth = 0.0;
  VisitRay(map.geometry(), m.Origin(), m.WorldDirection(), r,
           [&](std::int64_t voxel, double d) { depth += map.RateAt(voxel) * d; });
  return depth;
}

double Survival(const DecayGrid& map, const Measurement& m, double r) {
  return std::exp(-OpticalDepth(map, m, r));
}

RayLikelihood RayDensity(const DecayGrid& map, const Measurement& m) {
  const double rate = map.RateAt(Locate(map.geometry(), m.PointAt(m.range)));
  return RayLikelihood::Density(SafeLog(rate) - OpticalDepth(map, m, m.range));
}

RayLikelihood OutOfRangeProb(const DecayGrid& map, const Measurement& m) {
  switch (m.kind) {
    case ReadingKind::kSub:
      return RayLikelihood::Probability(
          Log1mExp(-OpticalDepth(map, m, m.r_min)));
    case ReadingKind::kSup:
      return RayLikelihood::Probability(-OpticalDepth(map, m, m.r_max));
    case ReadingKind::kRange:
      break;
  }
  throw std::invalid_argument("OutOfRangeProb needs a SUB or SUP reading");
}

RayLikelihood EvaluateDecay(const DecayGrid& map, const Measurement& m) {
  return m.kind == ReadingKind::kRange ? RayDensity(map, m)
                                       : OutOfRangeProb(map, m);
}

std::string_view ModelName(ModelKind kind) {
  switch (kind) {
    case ModelKind::kDecay:
      return "decay";
    case ModelKind::kReflection:
      return "reflection";
    case ModelKind::kEndpoint:
      return "endpoint";
  }
  return "unknown";
}

ModelKind ParseModelKind(std::string_view name) {
  if (name == "decay") return ModelKind::kDecay;
  if (name == "reflection") return ModelKind::kReflection;
  if (name == "endpoint") return ModelKind::kEndpoint;
  throw std::invalid_argument("unknown sensor model '" + std::string(name) +
                              "' (expected decay, reflection or endpoint)");
}

namespace {

void Accumulate(const RayLikelihood& term, double log_floor,
                ScanLikelihood* out) {
  ++out->evaluated;
  if (!(term.log_value >= log_floor)) {
    ++out->floored;
    out->log_likelihood += log_floor;
  } else {
    out->log_likelihood += term.log_value;
  }
}

}  // namespace

ScanLikelihood ScanLogLikelihood(const SensorModel& model, const Scan& scan,
                                 const Pose& pose,
                                 const ScanEvalOptions& options) {
  if (options.stride < 1) throw std::invalid_argument("stride must be >= 1");
  ScanLikelihood out;
  const auto stride = static_cast<std::size_t>(options.stride);
  for (std::size_t j = 0; j < scan.rays.size(); j += stride) {
    Accumulate(model.Evaluate(scan.At(j, pose)), options.log_floor, &out);
  }
  return out;
}

ScanLikelihood ScanLogLikelihood(const SensorModel& model, const Scan& scan,
                                 const ScanEvalOptions& options) {
  return ScanLogLikelihood(model, scan, scan.pose, options);
}

ScanLikelihood ScanLogLikelihood(const DecayGrid& map, const Scan& scan,
                                 const ScanEvalOptions& options) {
  // Non-owning view; the model does not outlive this call.
  const DecayModel model(std::shared_ptr<const DecayGrid>(
      std::shared_ptr<const DecayGrid>(), &map));
  return ScanLogLikelihood(model, scan, scan.pose, options);
}

ScanLikelihood MeasurementsLogLikelihood(
    const SensorModel& model, const std::vector<Measurement>& measurements,
    double log_floor) {
  ScanLikelihood out;
  for (const Measurement& m : measurements) {
    Accumulate(model.Evaluate(m), log_floor, &out);
  }
  return out;
}

}  // namespace decay_lidar

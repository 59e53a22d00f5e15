#ifndef DECAY_LIDAR_LIKELIHOOD_H_
#define DECAY_LIDAR_LIKELIHOOD_H_

#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "decay_lidar/decay_map.h"
#include "decay_lidar/measurement.h"

namespace decay_lidar {

// Per-ray log terms below this are clamped when a scan is evaluated.
inline constexpr double kDefaultLogFloor = -40.0;

enum class LikelihoodKind { kDensity, kProbability };

// Likelihood of one reading: a density in 1/m for in-range readings, an
// absolute probability for out-of-range readings. Both are carried in log
// space; value() is derived.
struct RayLikelihood {
  LikelihoodKind kind = LikelihoodKind::kProbability;
  double log_value = 0.0;

  static RayLikelihood Density(double log_value) {
    return {LikelihoodKind::kDensity, log_value};
  }
  static RayLikelihood Probability(double log_value) {
    return {LikelihoodKind::kProbability, log_value};
  }
  double value() const { return std::exp(log_value); }
};

// ln(x) with ln(0) = -inf.
inline double SafeLog(double x) {
  return x > 0.0 ? std::log(x) : -std::numeric_limits<double>::infinity();
}

// ln(1 - exp(x)) for x <= 0, accurate near both ends.
double Log1mExp(double x);

// --- Decay-rate model -------------------------------------------------------

// -ln N(r): the optical depth sum of lambda_i * d_i along the first r meters,
// with outside travel weighted by the prior rate.
double OpticalDepth(const DecayGrid& map, const Measurement& m, double r);

// N(r) = exp(-sum lambda_i d_i).
double Survival(const DecayGrid& map, const Measurement& m, double r);

// p(r) = lambda_k N(r), lambda_k the rate at locate(endpoint).
RayLikelihood RayDensity(const DecayGrid& map, const Measurement& m);

// P(sub) = 1 - N(r_min), P(sup) = N(r_max).
RayLikelihood OutOfRangeProb(const DecayGrid& map, const Measurement& m);

// Density for RANGE readings, probability otherwise.
RayLikelihood EvaluateDecay(const DecayGrid& map, const Measurement& m);

// --- Common sensor-model surface ---------------------------------------------

enum class ModelKind { kDecay, kReflection, kEndpoint };

std::string_view ModelName(ModelKind kind);
// Throws std::invalid_argument for an unknown name.
ModelKind ParseModelKind(std::string_view name);

// A measurement model whose RANGE outputs are densities (1/m) and whose
// out-of-range outputs are absolute probabilities. Implementations are
// immutable and safe to evaluate concurrently.
class SensorModel {
 public:
  virtual ~SensorModel() = default;
  virtual ModelKind kind() const = 0;
  virtual RayLikelihood Evaluate(const Measurement& m) const = 0;
};

class DecayModel final : public SensorModel {
 public:
  explicit DecayModel(std::shared_ptr<const DecayGrid> map)
      : map_(std::move(map)) {}

  ModelKind kind() const override { return ModelKind::kDecay; }
  RayLikelihood Evaluate(const Measurement& m) const override {
    return EvaluateDecay(*map_, m);
  }
  const DecayGrid& map() const { return *map_; }

 private:
  std::shared_ptr<const DecayGrid> map_;
};

struct ScanLikelihood {
  double log_likelihood = 0.0;
  std::size_t evaluated = 0;
  std::size_t floored = 0;

  bool AllFloored() const { return evaluated > 0 && floored == evaluated; }
};

struct ScanEvalOptions {
  double log_floor = kDefaultLogFloor;
  int stride = 1;  // evaluate rays 0, stride, 2*stride, ...
};

// Sum of per-ray log terms of `scan` as recorded from `pose`. Terms below
// log_floor are clamped to it and counted. Summation follows ray order.
ScanLikelihood ScanLogLikelihood(const SensorModel& model, const Scan& scan,
                                 const Pose& pose,
                                 const ScanEvalOptions& options = {});

// Evaluated at the scan's own pose.
ScanLikelihood ScanLogLikelihood(const SensorModel& model, const Scan& scan,
                                 const ScanEvalOptions& options = {});

// Decay-model scan likelihood at the scan's own pose.
ScanLikelihood ScanLogLikelihood(const DecayGrid& map, const Scan& scan,
                                 const ScanEvalOptions& options = {});

// Sum over a list of independent measurements (possibly mixed poses).
ScanLikelihood MeasurementsLogLikelihood(
    const SensorModel& model, const std::vector<Measurement>& measurements,
    double log_floor = kDefaultLogFloor);

}  // namespace decay_lidar

#endif  // DECAY_LIDAR_LIKELIHOOD_H_

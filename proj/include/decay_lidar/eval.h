#ifndef DECAY_LIDAR_EVAL_H_
#define DECAY_LIDAR_EVAL_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "decay_lidar/likelihood.h"
#include "decay_lidar/mcl.h"
#include "decay_lidar/measurement.h"
#include "decay_lidar/rng.h"

namespace decay_lidar {

struct EvalConfig {
  std::size_t sample_count = 50;  // M
  double sample_radius = 2.5;     // m
  double gt_sigma_xy = 0.3;       // m, Gaussian surrogate per horizontal axis
  // Evaluate the surrogate density as-is instead of renormalizing it over
  // the sample set.
  bool kl_raw = false;
  int ray_subsample = 1;
  double log_floor = kDefaultLogFloor;

  // Throws std::invalid_argument.
  void Validate() const;
};

// -sum_j log p(z_j | s_j, m) over every ray of every scan at its recorded
// (true) pose, with per-ray flooring.
double ForwardKl(const SensorModel& model, const std::vector<Scan>& scans,
                 double log_floor = kDefaultLogFloor);

struct InverseKlResult {
  double value = 0.0;
  bool valid = true;  // false when every sample's likelihood was floored
};

// KL divergence of the normalized pose likelihood over M poses drawn
// uniformly from a horizontal disc around `truth` (orientation fixed) from
// the Gaussian surrogate N(s; truth, sigma^2 I2) on the same samples.
InverseKlResult InverseKl(const SensorModel& model, const Scan& scan,
                          const Pose& truth, const EvalConfig& config,
                          RandomStream& rng, int threads = 1);

// KL of normalized `model_log_lik` against the surrogate given as log
// densities at the same samples; the core of InverseKl, exposed for tests.
double SampleKl(const std::vector<double>& model_log_lik,
                const std::vector<double>& surrogate_log_density, bool raw);

// Uniform draw from a disc of `radius` around `center` in the xy plane.
Pose SampleDisc(const Pose& center, double radius, RandomStream& rng);

struct ModelReport {
  ModelKind model = ModelKind::kDecay;
  double forward_kl = 0.0;
  double inverse_kl_mean = 0.0;
  std::size_t inverse_kl_invalid = 0;
  double mcl_mean_error_m = 0.0;
  std::map<std::string, double> parameters;  // model-specific, echoed
};

// Tunable parameters of a model (prior rates, sigma, p_oor, ...).
std::map<std::string, double> ModelParameters(const SensorModel& model);

struct Report {
  std::vector<ModelReport> models;
  EvalConfig eval;
  FilterConfig filter;
  std::uint64_t seed = 0;
};

struct CompareOptions {
  EvalConfig eval;
  FilterConfig filter;
  bool run_mcl = true;
  std::uint64_t seed = 0;
  int threads = 1;
};

// Evaluates every model on the same localization scans (true poses in the
// scan headers): forward KL over all rays, inverse KL averaged over scans,
// and the mean MCL position error.
Report CompareModels(const std::vector<const SensorModel*>& models,
                     const std::vector<Scan>& scans,
                     const CompareOptions& options);

nlohmann::json ReportToJson(const Report& report);
Report ReportFromJson(const nlohmann::json& j);
// One row per model: model,forward_kl,inverse_kl_mean,mcl_mean_error_m.
std::string ReportToCsv(const Report& report);

}  // namespace decay_lidar

#endif  // DECAY_LIDAR_EVAL_H_

#include "decay_lidar/eval.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "decay_lidar/baselines.h"
#include "decay_lidar/parallel.h"

namespace decay_lidar {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log sum exp over `v`.
double LogSumExp(const std::vector<double>& v) {
  double best = kNegInf;
  for (double x : v) best = std::max(best, x);
  if (best == kNegInf) return kNegInf;
  double total = 0.0;
  for (double x : v) total += std::exp(x - best);
  return best + std::log(total);
}

}  // namespace

void EvalConfig::Validate() const {
  if (sample_count < 2) throw std::invalid_argument("sample_count must be >= 2");
  if (!(sample_radius > 0.0)) {
    throw std::invalid_argument("sample_radius must be positive");
  }
  if (!(gt_sigma_xy > 0.0)) throw std::invalid_argument("gt_sigma must be positive");
  if (ray_subsample < 1) throw std::invalid_argument("ray_subsample must be >= 1");
}

double ForwardKl(const SensorModel& model, const std::vector<Scan>& scans,
                 double log_floor) {
  double total = 0.0;
  const ScanEvalOptions options{log_floor, 1};
  for (const Scan& scan : scans) {
    total -= ScanLogLikelihood(model, scan, options).log_likelihood;
  }
  return total;
}

double SampleKl(const std::vector<double>& model_log_lik,
                const std::vector<double>& surrogate_log_density, bool raw) {
  if (model_log_lik.size() != surrogate_log_density.size() ||
      model_log_lik.empty()) {
    throw std::invalid_argument("sample vectors must be non-empty and aligned");
  }
  const double model_norm = LogSumExp(model_log_lik);
  const double surrogate_norm = raw ? 0.0 : LogSumExp(surrogate_log_density);
  double kl = 0.0;
  for (std::size_t i = 0; i < model_log_lik.size(); ++i) {
    const double log_p = model_log_lik[i] - model_norm;
    const double p = std::exp(log_p);
    if (p == 0.0) continue;
    kl += p * (log_p - (surrogate_log_density[i] - surrogate_norm));
  }
  return kl;
}

Pose SampleDisc(const Pose& center, double radius, RandomStream& rng) {
  const double r = radius * std::sqrt(rng.Uniform());
  const double phi = 2.0 * M_PI * rng.Uniform();
  Pose p = center;
  p.translation.x() += r * std::cos(phi);
  p.translation.y() += r * std::sin(phi);
  return p;
}

InverseKlResult InverseKl(const SensorModel& model, const Scan& scan,
                          const Pose& truth, const EvalConfig& config,
                          RandomStream& rng, int threads) {
  config.Validate();
  const std::size_t m = config.sample_count;
  std::vector<Pose> samples(m);
  for (Pose& s : samples) s = SampleDisc(truth, config.sample_radius, rng);

  std::vector<double> log_lik(m);
  std::vector<char> floored(m, 0);
  const ScanEvalOptions options{config.log_floor, config.ray_subsample};
  ParallelFor(m, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const ScanLikelihood l = ScanLogLikelihood(model, scan, samples[i], options);
      log_lik[i] = l.log_likelihood;
      floored[i] = l.AllFloored() ? 1 : 0;
    }
  });
  InverseKlResult result;
  if (std::all_of(floored.begin(), floored.end(), [](char f) { return f; })) {
    result.valid = false;
    result.value = std::numeric_limits<double>::quiet_NaN();
    return result;
  }
  const double var = config.gt_sigma_xy * config.gt_sigma_xy;
  std::vector<double> surrogate(m);
  for (std::size_t i = 0; i < m; ++i) {
    const Eigen::Vector2d d =
        (samples[i].translation - truth.translation).head<2>();
    surrogate[i] = -d.squaredNorm() / (2.0 * var) - std::log(2.0 * M_PI * var);
  }
  result.value = SampleKl(log_lik, surrogate, config.kl_raw);
  return result;
}

std::map<std::string, double> ModelParameters(const SensorModel& model) {
  if (const auto* m = dynamic_cast<const DecayModel*>(&model)) {
    return {{"prior_rate", m->map().prior_rate()},
            {"unobserved_rate", m->map().unobserved_rate()}};
  }
  if (const auto* m = dynamic_cast<const ReflectionModel*>(&model)) {
    return {{"prior_q", m->map().prior_q()},
            {"unobserved_q", m->map().unobserved_q()}};
  }
  if (const auto* m = dynamic_cast<const EndpointModel*>(&model)) {
    return {{"sigma", m->field().sigma()}, {"p_oor", m->field().p_oor()}};
  }
  return {};
}

Report CompareModels(const std::vector<const SensorModel*>& models,
                     const std::vector<Scan>& scans,
                     const CompareOptions& options) {
  options.eval.Validate();
  Report report;
  report.eval = options.eval;
  report.filter = options.filter;
  report.seed = options.seed;
  for (const SensorModel* model : models) {
    ModelReport row;
    row.model = model->kind();
    row.parameters = ModelParameters(*model);
    row.forward_kl = ForwardKl(*model, scans, options.eval.log_floor);
    double kl_sum = 0.0;
    std::size_t kl_count = 0;
    for (std::size_t s = 0; s < scans.size(); ++s) {
      // Same pose samples for every model.
      RandomStream rng(options.seed, StreamTag::kPoseSamples, s);
      const InverseKlResult kl = InverseKl(*model, scans[s], scans[s].pose,
                                           options.eval, rng, options.threads);
      if (kl.valid) {
        kl_sum += kl.value;
        ++kl_count;
      } else {
        ++row.inverse_kl_invalid;
      }
    }
    row.inverse_kl_mean =
        kl_count > 0 ? kl_sum / static_cast<double>(kl_count)
                     : std::numeric_limits<double>::quiet_NaN();
    if (options.run_mcl) {
      row.mcl_mean_error_m = MeanPositionError(
          RunFilter(*model, scans, options.filter, options.seed, options.threads));
    } else {
      row.mcl_mean_error_m = std::numeric_limits<double>::quiet_NaN();
    }
    report.models.push_back(row);
  }
  return report;
}

namespace {

nlohmann::json NumberOrNull(double x) {
  return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

double NumberOrNan(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN()
                     : j.get<double>();
}

}  // namespace

nlohmann::json ReportToJson(const Report& report) {
  nlohmann::json config = {
      {"seed", report.seed},
      {"eval",
       {{"sample_count", report.eval.sample_count},
        {"sample_radius", report.eval.sample_radius},
        {"gt_sigma_xy", report.eval.gt_sigma_xy},
        {"kl_raw", report.eval.kl_raw},
        {"ray_subsample", report.eval.ray_subsample},
        {"log_floor", report.eval.log_floor},
        {"pose_sampling", "horizontal translation only, orientation fixed"}}},
      {"filter",
       {{"particle_count", report.filter.particle_count},
        {"ray_subsample", report.filter.ray_subsample},
        {"resample_threshold", report.filter.resample_threshold},
        {"init_sigma",
         {report.filter.init_sigma.xy, report.filter.init_sigma.z,
          report.filter.init_sigma.rot}},
        {"motion_noise",
         {report.filter.motion_noise.translation,
          report.filter.motion_noise.rotation}}}}};
  nlohmann::json out = nlohmann::json::object();
  for (const ModelReport& m : report.models) {
    out[std::string(ModelName(m.model))] = {
        {"forward_kl", NumberOrNull(m.forward_kl)},
        {"inverse_kl_mean", NumberOrNull(m.inverse_kl_mean)},
        {"inverse_kl_invalid", m.inverse_kl_invalid},
        {"mcl_mean_error_m", NumberOrNull(m.mcl_mean_error_m)},
        {"config", config}};
    out[std::string(ModelName(m.model))]["config"]["model_parameters"] =
        m.parameters;
  }
  return out;
}

Report ReportFromJson(const nlohmann::json& j) {
  Report report;
  // Every row carries the same run configuration; read it from the first.
  if (!j.empty() && j.begin()->contains("config")) {
    const nlohmann::json& c = (*j.begin())["config"];
    report.seed = c.value("seed", std::uint64_t{0});
    if (c.contains("eval")) {
      const nlohmann::json& e = c["eval"];
      report.eval.sample_count = e.value("sample_count", report.eval.sample_count);
      report.eval.sample_radius = e.value("sample_radius", report.eval.sample_radius);
      report.eval.gt_sigma_xy = e.value("gt_sigma_xy", report.eval.gt_sigma_xy);
      report.eval.kl_raw = e.value("kl_raw", report.eval.kl_raw);
      report.eval.ray_subsample = e.value("ray_subsample", report.eval.ray_subsample);
      report.eval.log_floor = e.value("log_floor", report.eval.log_floor);
    }
    if (c.contains("filter")) {
      const nlohmann::json& f = c["filter"];
      FilterConfig& out = report.filter;
      out.particle_count = f.value("particle_count", out.particle_count);
      out.ray_subsample = f.value("ray_subsample", out.ray_subsample);
      out.resample_threshold = f.value("resample_threshold", out.resample_threshold);
      if (f.contains("init_sigma")) {
        const auto s = f["init_sigma"].get<std::vector<double>>();
        if (s.size() == 3) out.init_sigma = {s[0], s[1], s[2]};
      }
      if (f.contains("motion_noise")) {
        const auto n = f["motion_noise"].get<std::vector<double>>();
        if (n.size() == 2) out.motion_noise = {n[0], n[1]};
      }
    }
  }
  for (const auto& [name, row] : j.items()) {
    ModelReport m;
    m.model = ParseModelKind(name);
    m.forward_kl = NumberOrNan(row.at("forward_kl"));
    m.inverse_kl_mean = NumberOrNan(row.at("inverse_kl_mean"));
    m.inverse_kl_invalid = row.value("inverse_kl_invalid", std::size_t{0});
    m.mcl_mean_error_m = NumberOrNan(row.at("mcl_mean_error_m"));
    if (row.contains("config") && row["config"].contains("model_parameters")) {
      m.parameters = row["config"]["model_parameters"]
                         .get<std::map<std::string, double>>();
    }
    report.models.push_back(m);
  }
  return report;
}

std::string ReportToCsv(const Report& report) {
  std::ostringstream os;
  os.precision(17);
  os << "model,forward_kl,inverse_kl_mean,mcl_mean_error_m\n";
  for (const ModelReport& m : report.models) {
    os << ModelName(m.model) << ',' << m.forward_kl << ',' << m.inverse_kl_mean
       << ',' << m.mcl_mean_error_m << '\n';
  }
  return os.str();
}

}  // namespace decay_lidar

#include "decay_lidar/mcl.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "decay_lidar/parallel.h"

namespace decay_lidar {

void FilterConfig::Validate() const {
  if (particle_count < 1) {
    throw std::invalid_argument("particle_count must be >= 1");
  }
  if (ray_subsample < 1) {
    throw std::invalid_argument("ray_subsample must be >= 1");
  }
  const double sigmas[] = {init_sigma.xy,          init_sigma.z,
                           init_sigma.rot,         motion_noise.translation,
                           motion_noise.rotation,  odometry_noise.translation,
                           odometry_noise.rotation};
  for (double s : sigmas) {
    if (!(s >= 0.0)) throw std::invalid_argument("sigmas must be >= 0");
  }
  if (!(resample_threshold >= 0.0 && resample_threshold <= 1.0)) {
    throw std::invalid_argument("resample_threshold must lie in [0, 1]");
  }
}

Pose SamplePose(const Pose& mean, const InitSigma& sigma, RandomStream& rng) {
  const Vec3 dt(rng.Normal(0.0, sigma.xy), rng.Normal(0.0, sigma.xy),
                rng.Normal(0.0, sigma.z));
  const Vec3 w(rng.Normal(0.0, sigma.rot), rng.Normal(0.0, sigma.rot),
               rng.Normal(0.0, sigma.rot));
  return Pose(mean.translation + dt,
              (mean.rotation * ExpRotation(w)).normalized());
}

ParticleSet Initialize(const FilterConfig& config, const Pose& initial_guess,
                       RandomStream& rng) {
  config.Validate();
  ParticleSet particles(config.particle_count);
  for (Particle& p : particles) {
    p.pose = SamplePose(initial_guess, config.init_sigma, rng);
    p.log_weight = 0.0;
  }
  return particles;
}

void Predict(ParticleSet& particles, const Pose& odometry_delta,
             const MotionNoise& noise, RandomStream& rng) {
  for (Particle& p : particles) {
    const Vec3 dt(rng.Normal(0.0, noise.translation),
                  rng.Normal(0.0, noise.translation),
                  rng.Normal(0.0, noise.translation));
    const Vec3 w(rng.Normal(0.0, noise.rotation), rng.Normal(0.0, noise.rotation),
                 rng.Normal(0.0, noise.rotation));
    p.pose = p.pose * odometry_delta * Pose(dt, ExpRotation(w));
  }
}

void Correct(ParticleSet& particles, const Scan& scan, const SensorModel& model,
             int stride, double log_floor, int threads) {
  if (particles.empty()) return;
  const ScanEvalOptions options{log_floor, stride};
  std::vector<double> scores(particles.size());
  ParallelFor(particles.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      scores[i] =
          ScanLogLikelihood(model, scan, particles[i].pose, options).log_likelihood;
    }
  });
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < particles.size(); ++i) {
    particles[i].log_weight += scores[i];
    best = std::max(best, particles[i].log_weight);
  }
  for (Particle& p : particles) p.log_weight -= best;
}

std::vector<double> NormalizedWeights(const ParticleSet& particles) {
  std::vector<double> w(particles.size());
  if (particles.empty()) return w;
  double best = -std::numeric_limits<double>::infinity();
  for (const Particle& p : particles) best = std::max(best, p.log_weight);
  double total = 0.0;
  for (std::size_t i = 0; i < particles.size(); ++i) {
    w[i] = std::exp(particles[i].log_weight - best);
    total += w[i];
  }
  for (double& x : w) x /= total;
  return w;
}

double EffectiveSampleSize(const ParticleSet& particles) {
  const std::vector<double> w = NormalizedWeights(particles);
  double sum_sq = 0.0;
  for (double x : w) sum_sq += x * x;
  return sum_sq > 0.0 ? 1.0 / sum_sq : 0.0;
}

std::vector<std::size_t> SystematicCounts(const std::vector<double>& weights,
                                          double u) {
  const std::size_t n = weights.size();
  std::vector<std::size_t> counts(n, 0);
  if (n == 0) return counts;
  double cumulative = 0.0;
  std::size_t i = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double pointer = (static_cast<double>(k) + u) / static_cast<double>(n);
    while (i + 1 < n && cumulative + weights[i] <= pointer) {
      cumulative += weights[i];
      ++i;
    }
    ++counts[i];
  }
  return counts;
}

bool Resample(ParticleSet& particles, double threshold, RandomStream& rng) {
  const std::size_t n = particles.size();
  if (n == 0) return false;
  if (EffectiveSampleSize(particles) >= threshold * static_cast<double>(n)) {
    return false;
  }
  const std::vector<std::size_t> counts =
      SystematicCounts(NormalizedWeights(particles), rng.Uniform());
  ParticleSet next;
  next.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < counts[i]; ++c) {
      next.push_back({particles[i].pose, 0.0});
    }
  }
  particles = std::move(next);
  return true;
}

Pose Estimate(const ParticleSet& particles) {
  if (particles.empty()) {
    throw std::invalid_argument("cannot estimate from an empty particle set");
  }
  const std::vector<double> w = NormalizedWeights(particles);
  Vec3 t = Vec3::Zero();
  Eigen::Matrix4d scatter = Eigen::Matrix4d::Zero();
  const Eigen::Vector4d reference = particles.front().pose.rotation.coeffs();
  for (std::size_t i = 0; i < particles.size(); ++i) {
    t += w[i] * particles[i].pose.translation;
    Eigen::Vector4d q = particles[i].pose.rotation.coeffs();
    if (q.dot(reference) < 0.0) q = -q;
    scatter += w[i] * q * q.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> solver(scatter);
  Eigen::Vector4d principal = solver.eigenvectors().col(3);
  if (principal.dot(reference) < 0.0) principal = -principal;
  Quat q;
  q.coeffs() = principal.normalized();
  return Pose(t, q);
}

std::vector<FilterStep> RunFilter(const SensorModel& model,
                                  const std::vector<Scan>& scans,
                                  const FilterConfig& config,
                                  std::uint64_t seed, int threads) {
  config.Validate();
  std::vector<FilterStep> out;
  if (scans.empty()) return out;
  RandomStream init_rng(seed, StreamTag::kFilterInit);
  Pose guess = scans.front().pose;
  if (config.offset_initial_guess) {
    guess = SamplePose(guess, config.init_sigma, init_rng);
  }
  ParticleSet particles = Initialize(config, guess, init_rng);
  out.reserve(scans.size());
  for (std::size_t step = 0; step < scans.size(); ++step) {
    const Scan& scan = scans[step];
    if (step > 0) {
      RandomStream odo_rng(seed, StreamTag::kOdometry, step);
      const Pose truth_delta = scans[step - 1].pose.inverse() * scan.pose;
      const MotionNoise& on = config.odometry_noise;
      const Vec3 dt(odo_rng.Normal(0.0, on.translation),
                    odo_rng.Normal(0.0, on.translation),
                    odo_rng.Normal(0.0, on.translation));
      const Vec3 dw(odo_rng.Normal(0.0, on.rotation),
                    odo_rng.Normal(0.0, on.rotation),
                    odo_rng.Normal(0.0, on.rotation));
      const Pose odometry = truth_delta * Pose(dt, ExpRotation(dw));
      RandomStream motion_rng(seed, StreamTag::kFilterMotion, step);
      Predict(particles, odometry, config.motion_noise, motion_rng);
    }
    Correct(particles, scan, model, config.ray_subsample, config.log_floor,
            threads);
    FilterStep record;
    record.step = step;
    record.estimate = Estimate(particles);
    record.truth = scan.pose;
    record.position_error =
        (record.estimate.translation - record.truth.translation).norm();
    out.push_back(record);
    RandomStream resample_rng(seed, StreamTag::kFilterResample, step);
    Resample(particles, config.resample_threshold, resample_rng);
  }
  return out;
}

double MeanPositionError(const std::vector<FilterStep>& steps) {
  if (steps.empty()) return 0.0;
  double total = 0.0;
  for (const FilterStep& s : steps) total += s.position_error;
  return total / static_cast<double>(steps.size());
}

}  // namespace decay_lidar

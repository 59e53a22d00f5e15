#ifndef DECAY_LIDAR_MCL_H_
#define DECAY_LIDAR_MCL_H_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "decay_lidar/geometry.h"
#include "decay_lidar/likelihood.h"
#include "decay_lidar/measurement.h"
#include "decay_lidar/rng.h"

namespace decay_lidar {

struct Particle {
  Pose pose;
  double log_weight = 0.0;
};

using ParticleSet = std::vector<Particle>;

// Standard deviations of the initial particle cloud.
struct InitSigma {
  double xy = 1.0;   // m, per horizontal axis
  double z = 0.2;    // m
  double rot = 0.1;  // rad, per rotation axis
};

// Per-step Gaussian diffusion applied after composing odometry.
struct MotionNoise {
  double translation = 0.05;  // m, per axis
  double rotation = 0.01;     // rad, per axis
};

struct FilterConfig {
  std::size_t particle_count = 300;
  InitSigma init_sigma;
  MotionNoise motion_noise;
  double resample_threshold = 0.5;  // ESS / N
  ModelKind model = ModelKind::kDecay;
  int ray_subsample = 10;
  double log_floor = kDefaultLogFloor;
  // Offset the initial guess from the true start pose by a draw from
  // init_sigma, so the filter starts from a wrong mean.
  bool offset_initial_guess = true;
  // Corruption of ground-truth odometry deltas.
  MotionNoise odometry_noise{0.02, 0.005};

  // Throws std::invalid_argument.
  void Validate() const;
};

// Draws a pose around `mean`: Gaussian translation per InitSigma, rotation
// mean * exp(w) with w ~ N(0, sigma_rot^2 I).
Pose SamplePose(const Pose& mean, const InitSigma& sigma, RandomStream& rng);

ParticleSet Initialize(const FilterConfig& config, const Pose& initial_guess,
                       RandomStream& rng);

// pose <- pose * odometry_delta * noise, noise drawn in the body frame.
void Predict(ParticleSet& particles, const Pose& odometry_delta,
             const MotionNoise& noise, RandomStream& rng);

// Adds each particle's scan log-likelihood (rays subsampled by `stride`) and
// shifts log weights so the maximum is 0. Particles are scored on `threads`
// workers; each score depends only on its particle.
void Correct(ParticleSet& particles, const Scan& scan,
             const SensorModel& model, int stride,
             double log_floor = kDefaultLogFloor, int threads = 1);

// Normalized linear weights.
std::vector<double> NormalizedWeights(const ParticleSet& particles);

// 1 / sum w^2 of the normalized weights.
double EffectiveSampleSize(const ParticleSet& particles);

// Systematic resampling when ESS / N < threshold. Returns whether it
// resampled; afterwards all log weights are 0.
bool Resample(ParticleSet& particles, double threshold, RandomStream& rng);

// Offspring counts of systematic resampling for normalized `weights` and
// a single uniform offset u in [0, 1).
std::vector<std::size_t> SystematicCounts(const std::vector<double>& weights,
                                          double u);

// Weighted mean translation; rotation is the principal eigenvector of the
// weighted quaternion scatter matrix.
Pose Estimate(const ParticleSet& particles);

struct FilterStep {
  std::size_t step = 0;
  Pose estimate;
  Pose truth;
  double position_error = 0.0;  // m
};

// Runs the filter over `scans`, whose headers carry the true poses. The
// truth is used only to derive (noisy) odometry and the initial guess, and
// to score the estimate. Deterministic given `seed`.
std::vector<FilterStep> RunFilter(const SensorModel& model,
                                  const std::vector<Scan>& scans,
                                  const FilterConfig& config,
                                  std::uint64_t seed, int threads = 1);

double MeanPositionError(const std::vector<FilterStep>& steps);

}  // namespace decay_lidar

#endif  // DECAY_LIDAR_MCL_H_

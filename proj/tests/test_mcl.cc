#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"

#include "decay_lidar/likelihood.h"
#include "decay_lidar/mcl.h"
#include "decay_lidar/simulator.h"
#include "test_util.h"

namespace decay_lidar {
namespace {

double StdDev(const std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (v.size() - 1));
}

TEST_SUITE("mcl") {

TEST_CASE("config defaults and validation") {
  FilterConfig c;
  CHECK(c.particle_count == 300);
  CHECK(c.init_sigma.xy == 1.0);
  CHECK(c.init_sigma.z == 0.2);
  CHECK(c.init_sigma.rot == 0.1);
  CHECK(c.resample_threshold == 0.5);
  CHECK(c.ray_subsample == 10);
  CHECK_NOTHROW(c.Validate());
  c.particle_count = 0;
  CHECK_THROWS(c.Validate());
  c = FilterConfig{};
  c.init_sigma.z = -1;
  CHECK_THROWS(c.Validate());
}

TEST_CASE("zero sigma initializes every particle at the guess") {
  FilterConfig c;
  c.init_sigma = {0, 0, 0};
  const Pose guess(Vec3(1, 2, 3), YawRotation(0.4));
  RandomStream rng(51);
  const ParticleSet ps = Initialize(c, guess, rng);
  CHECK(ps.size() == 300);
  for (const Particle& p : ps) {
    CHECK(p.pose.translation == guess.translation);
    CHECK(p.pose.rotation.angularDistance(guess.rotation) < 1e-12);
    CHECK(p.log_weight == 0.0);
  }
}

TEST_CASE("initial cloud matches the configured spread") {
  FilterConfig c;
  c.particle_count = 100000;
  const Pose guess(Vec3(1, 2, 3), YawRotation(0.4));
  RandomStream rng(52);
  const ParticleSet ps = Initialize(c, guess, rng);
  std::vector<double> x, y, z, rx, ry, rz;
  for (const Particle& p : ps) {
    x.push_back(p.pose.translation.x());
    y.push_back(p.pose.translation.y());
    z.push_back(p.pose.translation.z());
    const Vec3 w = LogRotation(guess.rotation.conjugate() * p.pose.rotation);
    rx.push_back(w.x());
    ry.push_back(w.y());
    rz.push_back(w.z());
    CHECK(std::abs(p.pose.rotation.norm() - 1.0) < 1e-9);
  }
  CHECK(StdDev(x) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(StdDev(y) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(StdDev(z) == doctest::Approx(0.2).epsilon(0.05));
  for (const auto* v : {&rx, &ry, &rz}) CHECK(StdDev(*v) == doctest::Approx(0.1).epsilon(0.05));

  // Estimate of the cloud is near the guess.
  const Pose est = Estimate(ps);
  const double bound = 3.0 / std::sqrt(1e5);
  CHECK(std::abs(est.translation.x() - guess.translation.x()) < bound * 1.0);
  CHECK(std::abs(est.translation.y() - guess.translation.y()) < bound * 1.0);
  CHECK(std::abs(est.translation.z() - guess.translation.z()) < bound * 0.2);
}

TEST_CASE("predict composes odometry and diffuses") {
  RandomStream rng(53);
  const Pose start(Vec3(1, 0, 0), YawRotation(M_PI / 2));
  ParticleSet ps(3, Particle{start, 0.0});
  Predict(ps, Pose::Identity(), {0.0, 0.0}, rng);
  for (const Particle& p : ps) CHECK(p.pose.translation.isApprox(start.translation));

  const Pose delta(Vec3(2, 0, 0), YawRotation(0.1));
  Predict(ps, delta, {0.0, 0.0}, rng);
  const Pose expected = start * delta;
  for (const Particle& p : ps) {
    CHECK(p.pose.translation.isApprox(expected.translation, 1e-12));
    CHECK(p.pose.rotation.angularDistance(expected.rotation) < 1e-12);
  }
  CHECK(ps[0].pose.translation.isApprox(Vec3(1, 2, 0), 1e-12));

  ParticleSet cloud(100000, Particle{Pose::Identity(), 0.0});
  Predict(cloud, Pose::Identity(), {0.3, 0.0}, rng);
  std::vector<double> x, y, z;
  double mx = 0.0;
  for (const Particle& p : cloud) {
    x.push_back(p.pose.translation.x());
    y.push_back(p.pose.translation.y());
    z.push_back(p.pose.translation.z());
    mx += p.pose.translation.x();
  }
  CHECK(std::abs(mx / cloud.size()) < 0.01);
  for (const auto* v : {&x, &y, &z}) CHECK(StdDev(*v) == doctest::Approx(0.3).epsilon(0.05));
}

TEST_CASE("correct: single particle, peaked world, shift invariance") {
  // A wall 3 m ahead of the true pose; an offset particle sees it at 2 m.
  const GridGeometry g(Vec3(-5, -5, -5), 0.25, {40, 40, 40});
  std::vector<double> rates(static_cast<std::size_t>(g.voxel_count()), 0.0);
  for (std::int64_t i = 0; i < g.voxel_count(); ++i) {
    if (g.VoxelCenter(i).x() > 3.0 && g.VoxelCenter(i).x() < 3.5) {
      rates[static_cast<std::size_t>(i)] = 20.0;
    }
  }
  const DecayModel model(std::make_shared<DecayGrid>(g, rates, 0.05, 0.05));
  const Pose truth(Vec3(0, 0, 0), Quat::Identity());
  Scan scan{truth, 0.1, 4.5, {}};
  RandomStream rng(54);
  for (int j = 0; j < 50; ++j) {
    const Vec3 d = Vec3(1, rng.Uniform(-0.3, 0.3), rng.Uniform(-0.3, 0.3)).normalized();
    const Measurement m = SampleRay(model.map(), truth, d, 0.1, 4.5, rng);
    scan.rays.push_back({d.cast<float>(), m.kind, static_cast<float>(m.range)});
  }

  ParticleSet one{{truth, -3.0}};
  Correct(one, scan, model, 1);
  CHECK(NormalizedWeights(one)[0] == 1.0);

  ParticleSet two{{truth, 0.0}, {Pose(Vec3(1.0, 0, 0), Quat::Identity()), 0.0}};
  Correct(two, scan, model, 1);
  CHECK(NormalizedWeights(two)[0] > 0.99);
  CHECK(std::max(two[0].log_weight, two[1].log_weight) == 0.0);

  ParticleSet shifted = two;
  for (Particle& p : shifted) p.log_weight += 17.0;
  const auto a = NormalizedWeights(two);
  const auto b = NormalizedWeights(shifted);
  CHECK(a[0] == doctest::Approx(b[0]).epsilon(1e-12));
  CHECK(a[1] == doctest::Approx(b[1]).epsilon(1e-12));
}

TEST_CASE("correct is independent of the thread count") {
  const Scenario sc = MakeScenario("forest", 1);
  const auto truth = std::make_shared<DecayGrid>(RasterizeWorld(sc.world));
  const DecayModel model(truth);
  const Pose pose(Vec3(10, 15, 1.6), Quat::Identity());
  const auto scans = SimulateScans(*truth, {pose}, sc.pattern, 0.5, 30.0, 0.1, 1);
  FilterConfig c;
  c.particle_count = 40;
  RandomStream r1(55), r2(55);
  ParticleSet a = Initialize(c, pose, r1), b = Initialize(c, pose, r2);
  Correct(a, scans[0], model, 10, kDefaultLogFloor, 1);
  Correct(b, scans[0], model, 10, kDefaultLogFloor, 4);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].log_weight == b[i].log_weight);
}

TEST_CASE("resampling") {
  RandomStream rng(56);
  ParticleSet uniform(10, Particle{Pose::Identity(), 0.0});
  CHECK(EffectiveSampleSize(uniform) == doctest::Approx(10.0));
  CHECK_FALSE(Resample(uniform, 0.5, rng));

  ParticleSet peaked;
  for (int i = 0; i < 10; ++i) {
    peaked.push_back({Pose(Vec3(i, 0, 0), Quat::Identity()), i == 3 ? 0.0 : -1e4});
  }
  CHECK(Resample(peaked, 0.5, rng));
  for (const Particle& p : peaked) {
    CHECK(p.pose.translation.x() == 3.0);
    CHECK(p.log_weight == 0.0);
  }
}

TEST_CASE("systematic offspring counts are within one of N w") {
  RandomStream rng(57);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.Uniform(0, 50));
    std::vector<double> w(n);
    for (double& x : w) x = rng.Uniform() * (rng.Uniform() < 0.3 ? 10.0 : 1.0);
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& x : w) x /= sum;
    const auto counts = SystematicCounts(w, rng.Uniform());
    std::size_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double expected = w[i] * static_cast<double>(n);
      CHECK(static_cast<double>(counts[i]) >= std::floor(expected) - 1e-9);
      CHECK(static_cast<double>(counts[i]) <= std::ceil(expected) + 1e-9);
      total += counts[i];
    }
    CHECK(total == n);
  }
}

TEST_CASE("estimate") {
  const Pose p(Vec3(1, 2, 3), YawRotation(2.0));
  CHECK(Estimate(ParticleSet(5, Particle{p, 0.0})).translation.isApprox(p.translation));
  CHECK(Estimate(ParticleSet(5, Particle{p, 0.0})).rotation.angularDistance(p.rotation) < 1e-9);
  const ParticleSet pair{{Pose(Vec3(-1, 0, 0), YawRotation(0.3)), 0.0},
                         {Pose(Vec3(1, 0, 0), YawRotation(0.3)), 0.0}};
  const Pose mid = Estimate(pair);
  CHECK(mid.translation.norm() < 1e-12);
  CHECK(mid.rotation.angularDistance(YawRotation(0.3)) < 1e-9);
  // Antipodal quaternions are the same rotation.
  Quat neg = YawRotation(0.3);
  neg.coeffs() *= -1.0;
  const ParticleSet flipped{{Pose(Vec3::Zero(), YawRotation(0.3)), 0.0},
                            {Pose(Vec3::Zero(), neg), 0.0}};
  CHECK(Estimate(flipped).rotation.angularDistance(YawRotation(0.3)) < 1e-9);
}

TEST_CASE("filter runs are deterministic") {
  Scenario sc = MakeScenario("forest", 1);
  sc.trajectory.steps = 6;
  sc.mapping_steps = 20;
  const SimulatedRun run = SimulateScenario(sc, 0.1, 2);
  const DecayModel model(std::make_shared<DecayGrid>(run.truth));
  FilterConfig c;
  c.particle_count = 50;
  const auto a = RunFilter(model, run.scans, c, 3, 1);
  const auto b = RunFilter(model, run.scans, c, 3, 2);
  REQUIRE(a.size() == run.scans.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].estimate == b[i].estimate);
    CHECK(a[i].position_error ==
          doctest::Approx((a[i].estimate.translation - a[i].truth.translation).norm()));
  }
  CHECK(MeanPositionError(a) == MeanPositionError(b));
}

}  // TEST_SUITE

}  // namespace
}  // namespace decay_lidar

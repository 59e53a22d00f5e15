#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"

#include "decay_lidar/decay_map.h"
#include "decay_lidar/likelihood.h"
#include "decay_lidar/rng.h"
#include "test_util.h"

namespace decay_lidar {
namespace {

Pose At(const Vec3& p) { return Pose(p, Quat::Identity()); }

TEST_SUITE("likelihood") {

TEST_CASE("survival closed forms") {
  const GridGeometry g(Vec3::Zero(), 1.0, {20, 1, 1});
  const DecayGrid uniform(g, 0.1, 0.1);
  const auto m = Measurement::Sup(At(Vec3(0, 0.5, 0.5)), Vec3::UnitX(), 0.5, 10.0);
  CHECK(Survival(uniform, m, 0.0) == 1.0);
  CHECK(Survival(uniform, m, 10.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  const DecayGrid vacuum(g, 0.0, 0.0);
  CHECK(Survival(vacuum, m, 7.3) == 1.0);
}

TEST_CASE("density examples") {
  const GridGeometry g(Vec3::Zero(), 1.0, {1, 1, 1});
  const DecayGrid one(g, 1.0, 1.0);
  const auto at0 = Measurement::Range(At(Vec3(0.2, 0.5, 0.5)), Vec3::UnitX(), 0.0, 0.0, 5.0);
  CHECK(RayDensity(one, at0).value() == doctest::Approx(1.0));

  // lambda 0.5 over 1 m, then lambda 2 with the endpoint after 0.5 m.
  const GridGeometry g2(Vec3::Zero(), 1.0, {2, 1, 1});
  const DecayGrid two(g2, {0.5, 2.0}, 0.05, 0.05);
  const auto m = Measurement::Range(At(Vec3(0, 0.5, 0.5)), Vec3::UnitX(), 1.5, 0.0, 5.0);
  const RayLikelihood p = RayDensity(two, m);
  CHECK(p.kind == LikelihoodKind::kDensity);
  CHECK(p.value() == doctest::Approx(2.0 * std::exp(-1.5)).epsilon(1e-12));
  CHECK(p.value() == doctest::Approx(0.446260).epsilon(1e-6));
  CHECK(ScanLogLikelihood(DecayModel(std::make_shared<DecayGrid>(two)),
                          Scan{At(Vec3(0, 0.5, 0.5)), 0.0, 5.0,
                               {{Vec3f::UnitX(), ReadingKind::kRange, 1.5f}}})
            .log_likelihood == doctest::Approx(std::log(2.0) - 1.5));
}

TEST_CASE("out-of-range closed forms") {
  const GridGeometry g(Vec3::Zero(), 1.0, {20, 1, 1});
  const Pose pose = At(Vec3(0, 0.5, 0.5));
  const DecayGrid vacuum(g, 0.0, 0.0);
  const auto sup = Measurement::Sup(pose, Vec3::UnitX(), 0.5, 10.0);
  CHECK(OutOfRangeProb(vacuum, sup).value() == 1.0);
  CHECK(OutOfRangeProb(DecayGrid(g, 0.1, 0.1), sup).value() ==
        doctest::Approx(0.367879).epsilon(1e-6));
  const auto sub = Measurement::Sub(pose, Vec3::UnitX(), 1.0, 10.0);
  const RayLikelihood p = OutOfRangeProb(DecayGrid(g, 0.5, 0.5), sub);
  CHECK(p.kind == LikelihoodKind::kProbability);
  CHECK(p.value() == doctest::Approx(0.393469).epsilon(1e-6));
}

TEST_CASE("log1mexp is accurate at both ends") {
  CHECK(Log1mExp(-1e-20) == doctest::Approx(std::log(1e-20)));
  CHECK(Log1mExp(-50.0) == doctest::Approx(-std::exp(-50.0)).epsilon(1e-12));
  CHECK(Log1mExp(-1.0) == doctest::Approx(std::log(1.0 - std::exp(-1.0))));
  CHECK(Log1mExp(0.0) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("scan log likelihood: empty, independence and flooring") {
  const GridGeometry g(Vec3::Zero(), 1.0, {4, 4, 4});
  RandomStream rng(21);
  const auto map = std::make_shared<DecayGrid>(testing::RandomDecayGrid(g, rng, 1.5, 0.05));
  const DecayModel model(map);
  Scan a{At(Vec3(2, 2, 2)), 0.1, 6.0, {}};
  CHECK(ScanLogLikelihood(model, a).log_likelihood == 0.0);
  Scan b = a;
  for (int j = 0; j < 50; ++j) {
    a.rays.push_back({testing::RandomUnit(rng).cast<float>(), ReadingKind::kRange,
                      static_cast<float>(rng.Uniform(0.1, 6.0))});
    b.rays.push_back({testing::RandomUnit(rng).cast<float>(), ReadingKind::kSup, 0.0f});
  }
  Scan ab = a;
  ab.rays.insert(ab.rays.end(), b.rays.begin(), b.rays.end());
  const double la = ScanLogLikelihood(model, a).log_likelihood;
  const double lb = ScanLogLikelihood(model, b).log_likelihood;
  CHECK(ScanLogLikelihood(model, ab).log_likelihood == doctest::Approx(la + lb).epsilon(1e-12));

  // A range reading ending in a zero-rate voxel has zero density.
  const GridGeometry g1(Vec3::Zero(), 10.0, {1, 1, 1});
  const DecayModel empty(std::make_shared<DecayGrid>(g1, 0.0, 0.0));
  Scan z{At(Vec3(1, 5, 5)), 0.1, 5.0,
         {{Vec3f::UnitX(), ReadingKind::kRange, 2.0f},
          {Vec3f::UnitX(), ReadingKind::kSup, 0.0f}}};
  const ScanLikelihood r = ScanLogLikelihood(empty, z, {-40.0, 1});
  CHECK(r.log_likelihood == -40.0);
  CHECK(r.floored == 1);
  CHECK(r.evaluated == 2);
  CHECK_FALSE(r.AllFloored());
}

TEST_CASE("survival is monotone and piecewise exponential") {
  const GridGeometry g(Vec3(-1, -1, -1), 0.5, {6, 6, 6});
  RandomStream rng(22);
  const DecayGrid map = testing::RandomDecayGrid(g, rng, 3.0, 0.05);
  for (int i = 0; i < 20; ++i) {
    const auto m = Measurement::Sup(At(testing::RandomPointIn(g, rng)),
                                    testing::RandomUnit(rng), 0.1, 5.0);
    double prev = 1.0;
    for (double r = 0.0; r <= 5.0; r += 0.01) {
      const double n = Survival(map, m, r);
      CHECK(n <= prev);
      prev = n;
    }
    // Second difference of ln N inside one voxel.
    const Traversal t = TraceRay(g, m.Origin(), m.WorldDirection(), 5.0);
    double start = 0.0;
    for (const Segment& s : t.segments) {
      if (s.length > 0.1) {
        const double h = s.length / 4;
        const double a = OpticalDepth(map, m, start + h);
        const double b = OpticalDepth(map, m, start + 2 * h);
        const double c = OpticalDepth(map, m, start + 3 * h);
        CHECK(std::abs(a - 2 * b + c) < 1e-9);
      }
      start += s.length;
    }
  }
}

TEST_CASE("density is the negative derivative of survival") {
  const GridGeometry g(Vec3(-1, -1, -1), 0.5, {6, 6, 6});
  RandomStream rng(23);
  const DecayGrid map = testing::RandomDecayGrid(g, rng, 3.0, 0.05, 0.0);
  int checked = 0;
  while (checked < 100) {
    const Pose pose = At(testing::RandomPointIn(g, rng));
    const Vec3 dir = testing::RandomUnit(rng);
    const double r = rng.Uniform(0.2, 4.0);
    const double h = 1e-6;
    const auto m = Measurement::Range(pose, dir, r, 0.0, 5.0);
    // Skip points near a voxel face, where the derivative jumps.
    if (Locate(g, m.PointAt(r - 1e-4)) != Locate(g, m.PointAt(r + 1e-4))) continue;
    const double fd = (Survival(map, m, r - h) - Survival(map, m, r + h)) / (2 * h);
    const double p = RayDensity(map, m).value();
    CHECK(std::abs(fd - p) <= 1e-5 * std::max(p, 1e-12) + 1e-12);
    ++checked;
  }
}

TEST_CASE("density integrates to one over the whole line") {
  const GridGeometry g(Vec3::Zero(), 0.5, {6, 6, 6});
  RandomStream rng(24);
  const DecayGrid map = testing::RandomDecayGrid(g, rng, 2.0, 0.5);
  for (int i = 0; i < 5; ++i) {
    const Pose pose = At(testing::RandomPointIn(g, rng));
    const Vec3 dir = testing::RandomUnit(rng);
    // Beyond the grid the prior rate 0.5 applies; 60 m leaves e^-30.
    const double r_end = 60.0;
    const double integral = testing::PiecewiseQuadrature(
        g, pose.translation, dir, 0.0, r_end, 1e-3, [&](double r) {
          return RayDensity(map, Measurement::Range(pose, dir, r, 0.0, r_end)).value();
        });
    CHECK(std::abs(integral - 1.0) <= 1e-4);
  }
}

}  // TEST_SUITE

}  // namespace
}  // namespace decay_lidar

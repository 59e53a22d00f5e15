#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "doctest.h"

#include "decay_lidar/baselines.h"
#include "decay_lidar/likelihood.h"
#include "decay_lidar/rng.h"
#include "test_util.h"

namespace decay_lidar {
namespace {

Pose At(const Vec3& p) { return Pose(p, Quat::Identity()); }

ReflectionGrid Row(std::vector<double> q, double prior_q = 0.025) {
  const GridGeometry g(Vec3::Zero(), 1.0,
                       {static_cast<std::uint32_t>(q.size()), 1, 1});
  return ReflectionGrid(g, std::move(q), {}, {}, prior_q, prior_q);
}

Measurement RangeX(double r) {
  return Measurement::Range(At(Vec3(0, 0.5, 0.5)), Vec3::UnitX(), r, 0.0, 20.0);
}

Scan OneRayScan(const Vec3& origin, const Vec3& dir, ReadingKind kind,
                float range) {
  return Scan{At(origin), 0.1, 10.0, {{dir.cast<float>(), kind, range}}};
}

TEST_SUITE("baselines") {

TEST_CASE("reflection map counts hits and misses") {
  const GridGeometry g(Vec3::Zero(), 1.0, {3, 1, 1});
  const ReflectionGrid one =
      BuildReflectionMap({OneRayScan(Vec3(0.5, 0.5, 0.5), Vec3::UnitX(),
                                     ReadingKind::kRange, 0.2f)},
                         g);
  CHECK(one.hits()[0] == 1);
  CHECK(one.misses()[0] == 0);
  CHECK(one.q()[0] == 1.0);
  CHECK(one.q()[1] == 0.025);  // never touched

  const ReflectionGrid two = BuildReflectionMap(
      {OneRayScan(Vec3(0.5, 0.5, 0.5), Vec3::UnitX(), ReadingKind::kRange, 0.2f),
       OneRayScan(Vec3(0.5, 0.5, 0.5), Vec3::UnitX(), ReadingKind::kRange, 1.2f)},
      g);
  CHECK(two.hits()[0] == 1);
  CHECK(two.misses()[0] == 1);
  CHECK(two.q()[0] == 0.5);
  CHECK(two.q()[1] == 1.0);

  const ReflectionGrid sup = BuildReflectionMap(
      {OneRayScan(Vec3(0.5, 0.5, 0.5), Vec3::UnitX(), ReadingKind::kSup, 0.0f)}, g);
  CHECK(sup.misses() == std::vector<std::uint64_t>{1, 1, 1});
  const ReflectionGrid sub = BuildReflectionMap(
      {OneRayScan(Vec3(0.5, 0.5, 0.5), Vec3::UnitX(), ReadingKind::kSub, 0.0f)}, g);
  CHECK(sub.misses() == std::vector<std::uint64_t>{0, 0, 0});
}

TEST_CASE("reflection ray probability examples") {
  CHECK(ReflectionRayProb(Row({0, 0, 1}), RangeX(2.5)).value() == 1.0);
  CHECK(ReflectionRayProb(Row({0.5}), RangeX(0.5)).value() == doctest::Approx(0.5));
  const RayLikelihood p = ReflectionRayProb(Row({0.2, 0.3}), RangeX(1.5));
  CHECK(p.kind == LikelihoodKind::kProbability);
  CHECK(p.value() == doctest::Approx(0.24).epsilon(1e-12));
  // A wall before the endpoint.
  CHECK(ReflectionRayProb(Row({1.0, 0.5}), RangeX(1.5)).log_value ==
        -std::numeric_limits<double>::infinity());
}

TEST_CASE("reflection density divides by the endpoint chord") {
  const RayLikelihood d = ReflectionToDensity(Row({0.2, 0.3}), RangeX(1.5));
  CHECK(d.kind == LikelihoodKind::kDensity);
  CHECK(d.value() == doctest::Approx(0.24).epsilon(1e-12));  // chord 1

  const GridGeometry g(Vec3::Zero(), 1.0, {1, 1, 1});
  const ReflectionGrid cube(g, {0.5}, {}, {}, 0.025, 0.025);
  const Vec3 diag = Vec3(1, 1, 1).normalized();
  const auto m = Measurement::Range(At(Vec3::Zero()), diag, 0.7, 0.0, 5.0);
  CHECK(EndpointChord(g, m) == doctest::Approx(std::sqrt(3.0)));
  CHECK(ReflectionToDensity(cube, m).value() == doctest::Approx(0.5 / std::sqrt(3.0)));

  // The density integrated over the endpoint chord recovers P.
  const ReflectionGrid row = Row({0.2, 0.3, 0.4});
  double integral = 0.0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    integral += ReflectionToDensity(row, RangeX(1.0 + (i + 0.5) / n)).value() / n;
  }
  CHECK(std::abs(integral - 0.24) <= 1e-9);
}

TEST_CASE("reflection out-of-range probabilities") {
  const ReflectionGrid row = Row({0.2, 0.3, 0.4}, 0.0);
  const Pose pose = At(Vec3(0, 0.5, 0.5));
  const auto sup = Measurement::Sup(pose, Vec3::UnitX(), 0.5, 3.0);
  CHECK(ReflectionOutOfRangeProb(row, sup).value() == doctest::Approx(0.8 * 0.7 * 0.6));
  const auto sub = Measurement::Sub(pose, Vec3::UnitX(), 1.5, 3.0);
  CHECK(ReflectionOutOfRangeProb(row, sub).value() == doctest::Approx(1.0 - 0.8 * 0.7));
}

TEST_CASE("outside space is a lattice with the prior q") {
  const ReflectionGrid row = Row({0.0}, 0.1);
  // Endpoint 2.2 m beyond the grid: 1.2 cell lengths of outside travel
  // precede the endpoint cell.
  CHECK(ReflectionRayProb(row, RangeX(3.2)).value() ==
        doctest::Approx(std::pow(0.9, 1.2) * 0.1));
  CHECK(ReflectionRayProb(row, RangeX(4.0)).value() == doctest::Approx(0.9 * 0.9 * 0.1));
}

TEST_CASE("unit subvoxels make reflection and decay survival identical") {
  RandomStream rng(31);
  for (int i = 0; i < 50; ++i) {
    const double lambda = rng.Uniform(0.0, 3.0);
    const double q = 1.0 - std::exp(-lambda);
    const int n = 1 + static_cast<int>(rng.Uniform(0, 20));
    const GridGeometry g(Vec3::Zero(), 1.0, {static_cast<std::uint32_t>(n), 1, 1});
    const ReflectionGrid refl(g, std::vector<double>(n, q), {}, {}, 0.0, 0.0);
    const DecayGrid decay(g, lambda, 0.0);
    const auto sup = Measurement::Sup(At(Vec3(0, 0.5, 0.5)), Vec3::UnitX(), 0.1,
                                      static_cast<double>(n));
    const double a = ReflectionOutOfRangeProb(refl, sup).value();
    const double b = OutOfRangeProb(decay, sup).value();
    CHECK(std::abs(a - b) <= 1e-12);
  }
}

TEST_CASE("distance transform matches brute force") {
  RandomStream rng(32);
  const GridGeometry g(Vec3(1, -2, 0), 0.3, {9, 7, 5});
  const auto n = static_cast<std::size_t>(g.voxel_count());
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<bool> occ(n, false);
    for (std::size_t i = 0; i < n; ++i) occ[i] = rng.Uniform() < 0.03;
    occ[static_cast<std::size_t>(rng.Uniform(0, static_cast<double>(n)))] = true;
    const auto edt = EuclideanDistanceTransform(g, occ);
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        if (occ[j]) {
          best = std::min(best, (g.VoxelCenter(static_cast<std::int64_t>(i)) -
                                 g.VoxelCenter(static_cast<std::int64_t>(j)))
                                    .norm());
        }
      }
      CHECK(std::abs(edt[i] - best) <= 1e-9);
    }
  }
  const auto none = EuclideanDistanceTransform(g, std::vector<bool>(n, false));
  CHECK(std::isinf(none[0]));
}

TEST_CASE("likelihood field basics") {
  const GridGeometry g(Vec3::Zero(), 1.0, {5, 1, 1});
  const auto scans = std::vector<Scan>{
      OneRayScan(Vec3(0.5, 0.5, 0.5), Vec3::UnitX(), ReadingKind::kRange, 2.0f)};
  const LikelihoodField field = BuildLikelihoodField(scans, g, {0.2, 0.1});
  CHECK(field.nearest_dist()[2] == 0.0);
  CHECK(field.nearest_dist()[3] == 1.0);
  CHECK(field.nearest_dist()[0] == 2.0);
  CHECK(field.Score(Vec3(2.5, 0.5, 0.5)) == 1.0);
  CHECK(std::isinf(field.NearestDistanceAt(Vec3(-1, 0, 0))));
  CHECK_THROWS_AS(
      BuildLikelihoodField({OneRayScan(Vec3(0.5, 0.5, 0.5), Vec3::UnitX(),
                                       ReadingKind::kSup, 0.0f)},
                           g),
      std::invalid_argument);

  const auto sub = Measurement::Sub(At(Vec3(0.5, 0.5, 0.5)), Vec3::UnitX(), 0.1, 4.0);
  const RayLikelihood p = EndpointRayDensity(field, sub);
  CHECK(p.kind == LikelihoodKind::kProbability);
  CHECK(p.value() == doctest::Approx(0.05));

  // Peak density at the mapped endpoint.
  double best_r = 0.0, best = 0.0;
  for (double r = 0.15; r < 4.0; r += 0.1) {
    const double d = EndpointRayDensity(
        field, Measurement::Range(At(Vec3(0.5, 0.5, 0.5)), Vec3::UnitX(), r, 0.1, 4.0)).value();
    if (d > best) {
      best = d;
      best_r = r;
    }
  }
  CHECK(Locate(g, Vec3(0.5 + best_r, 0.5, 0.5)) == 2);
}

TEST_CASE("endpoint density is normalized with its out-of-range mass") {
  RandomStream rng(33);
  const GridGeometry g(Vec3::Zero(), 0.5, {10, 10, 4});
  std::vector<Scan> scans;
  for (int i = 0; i < 20; ++i) {
    scans.push_back(OneRayScan(testing::RandomPointIn(g, rng), testing::RandomUnit(rng),
                               ReadingKind::kRange, 0.3f));
  }
  const LikelihoodField field = BuildLikelihoodField(scans, g, {0.2, 0.1});
  for (int i = 0; i < 10; ++i) {
    const Pose pose = At(testing::RandomPointIn(g, rng));
    const Vec3 dir = testing::RandomUnit(rng);
    const double r_min = 0.2, r_max = 6.0;
    // Same midpoint nodes as the per-ray normalizer.
    const double max_step = g.edge_length() / 4.0;
    const auto steps = static_cast<int>(std::ceil((r_max - r_min) / max_step));
    const double h = (r_max - r_min) / steps;
    double integral = 0.0;
    for (int k = 0; k < steps; ++k) {
      const double r = r_min + (k + 0.5) * h;
      integral += h * EndpointRayDensity(field, Measurement::Range(pose, dir, r, r_min, r_max)).value();
    }
    const double sub = EndpointRayDensity(field, Measurement::Sub(pose, dir, r_min, r_max)).value();
    const double sup = EndpointRayDensity(field, Measurement::Sup(pose, dir, r_min, r_max)).value();
    CHECK(std::abs(integral + sub + sup - 1.0) <= 1e-6);
  }
}

TEST_CASE("endpoint score ignores the path while decay density drops") {
  const GridGeometry g(Vec3::Zero(), 1.0, {6, 1, 1});
  const auto scans = std::vector<Scan>{
      OneRayScan(Vec3(0.5, 0.5, 0.5), Vec3::UnitX(), ReadingKind::kRange, 4.0f)};
  const LikelihoodField before = BuildLikelihoodField(scans, g);
  auto with_obstacle = scans;
  with_obstacle.push_back(OneRayScan(Vec3(0.5, 0.5, 0.5), Vec3::UnitX(),
                                     ReadingKind::kRange, 2.0f));
  const LikelihoodField after = BuildLikelihoodField(with_obstacle, g);
  CHECK(after.nearest_dist()[2] == 0.0);
  const Vec3 endpoint(4.5, 0.5, 0.5);
  CHECK(before.Score(endpoint) == after.Score(endpoint));

  DecayGrid open(g, 0.1, 0.05);
  DecayGrid blocked = open;
  blocked.set_rate(2, 3.0);
  const auto m = Measurement::Range(At(Vec3(0.5, 0.5, 0.5)), Vec3::UnitX(), 4.0, 0.1, 6.0);
  CHECK(RayDensity(blocked, m).value() < RayDensity(open, m).value());
}

}  // TEST_SUITE

}  // namespace
}  // namespace decay_lidar

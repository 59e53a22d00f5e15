#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"

#include "decay_lidar/rng.h"

namespace decay_lidar {
namespace {

TEST_SUITE("rng") {

TEST_CASE("streams are reproducible and keyed") {
  RandomStream a(5, StreamTag::kRaySample, 3, 4), b(5, StreamTag::kRaySample, 3, 4);
  for (int i = 0; i < 100; ++i) CHECK(a() == b());

  std::set<std::uint64_t> firsts;
  for (std::uint64_t seed : {1, 2}) {
    for (StreamTag tag : {StreamTag::kRaySample, StreamTag::kCorruption}) {
      for (std::uint64_t i = 0; i < 3; ++i) {
        for (std::uint64_t j = 0; j < 3; ++j) firsts.insert(RandomStream(seed, tag, i, j)());
      }
    }
  }
  CHECK(firsts.size() == 36);
  // Swapping the substream indices gives a different stream.
  CHECK(RandomStream(1, StreamTag::kTest, 1, 2)() != RandomStream(1, StreamTag::kTest, 2, 1)());
}

TEST_CASE("uniform draws lie in (0, 1) with the right moments") {
  RandomStream rng(11);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.Uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sq += u * u;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.005);
  CHECK(std::abs(sq / n - 1.0 / 3.0) < 0.005);
}

TEST_CASE("normal draws have the right moments") {
  RandomStream rng(12);
  const int n = 200000;
  double sum = 0.0, sq = 0.0, four = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.Normal(1.0, 2.0);
    sum += x;
    sq += (x - 1.0) * (x - 1.0);
    four += std::pow((x - 1.0) / 2.0, 4);
  }
  CHECK(std::abs(sum / n - 1.0) < 0.02);
  CHECK(std::abs(std::sqrt(sq / n) - 2.0) < 0.02);
  CHECK(std::abs(four / n - 3.0) < 0.1);
}

TEST_CASE("neighbouring substreams are uncorrelated") {
  const int n = 100000;
  double sxy = 0.0;
  for (int i = 0; i < n; ++i) {
    RandomStream a(3, StreamTag::kRaySample, 0, static_cast<std::uint64_t>(i));
    RandomStream b(3, StreamTag::kRaySample, 0, static_cast<std::uint64_t>(i) + 1);
    sxy += (a.Uniform() - 0.5) * (b.Uniform() - 0.5);
  }
  // Standard error of the mean product is 1 / (12 sqrt(n)).
  CHECK(std::abs(sxy / n) < 5.0 / (12.0 * std::sqrt(static_cast<double>(n))));
}

}  // TEST_SUITE

}  // namespace
}  // namespace decay_lidar

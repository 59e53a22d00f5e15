#ifndef DECAY_LIDAR_RNG_H_
#define DECAY_LIDAR_RNG_H_

#include <cmath>
#include <cstdint>
#include <limits>

namespace decay_lidar {

// SplitMix64 output function.
constexpr std::uint64_t Mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stream purposes, mixed into substream keys so that e.g. ray sampling and
// failure injection never share random numbers.
enum class StreamTag : std::uint64_t {
  kRaySample = 1,
  kCorruption = 2,
  kFilterInit = 3,
  kFilterMotion = 4,
  kFilterResample = 5,
  kOdometry = 6,
  kPoseSamples = 7,
  kWorld = 8,
  kTest = 99,
};

// Counter-based generator: SplitMix64 evaluated at key + n * gamma for
// n = 1, 2, .... A substream is fully determined by (seed, tag, a, b), so
// per-ray streams are reproducible regardless of evaluation order.
// Satisfies UniformRandomBitGenerator.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t seed, StreamTag tag = StreamTag::kTest,
                        std::uint64_t a = 0, std::uint64_t b = 0)
      : key_(Mix64(Mix64(Mix64(seed ^ 0x6a09e667f3bcc909ULL) ^
                         static_cast<std::uint64_t>(tag)) ^
                   Mix64(a + 0x3c6ef372fe94f82bULL)) ^
             Mix64(b + 0xa54ff53a5f1d36f1ULL)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
    ++counter_;
    return Mix64(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
  }

  // Uniform on the open interval (0, 1).
  double Uniform() {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Standard normal via Box-Muller; the second variate is cached.
  double Normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = Uniform();
    const double u2 = Uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double Normal(double mean, double sigma) { return mean + sigma * Normal(); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace decay_lidar

#endif  // DECAY_LIDAR_RNG_H_

#pragma once

#include <cstdint>
#include <random>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

namespace ldcluster {

/// splitmix64 finalizer; used to turn (seed, tag, index) counters into
/// well-separated engine seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stream tags keep the different consumers of one master seed apart.
enum class StreamTag : std::uint64_t {
  tilted_replica = 1,
  rejection_replica = 2,
  tau_sample = 3,
  fbm_replica = 4,
  noise_check = 5,
  bootstrap = 6,
  unconditioned_replica = 7,
};

/// A reproducible random stream. Streams are derived from a master seed by
/// counter-based splitting, so replica i always sees the same numbers no
/// matter which worker runs it.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  static RandomStream derive(std::uint64_t master, StreamTag tag, std::uint64_t index) {
    const std::uint64_t a = splitmix64(master ^ splitmix64(static_cast<std::uint64_t>(tag)));
    return RandomStream(a ^ splitmix64(index + 0x632be59bd9b4e019ULL));
  }

  double normal() { return normal_(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal_(engine_); }
  double exponential() { return exponential_(engine_); }
  /// Uniform on [0, 1).
  double uniform() { return std::generate_canonical<double, 53>(engine_); }
  std::uint64_t next_u64() { return engine_(); }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  boost::random::normal_distribution<double> normal_;
  boost::random::exponential_distribution<double> exponential_;
};

}  // namespace ldcluster

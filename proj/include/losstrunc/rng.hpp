#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace losstrunc {

/// Seeded random stream with platform-independent variate transforms.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The standard distributions are not, so uniform, integer and
/// normal variates are derived here directly from the raw 64-bit words.
///
/// Substreams: a global seed is split into independent components with
///   engine_seed = splitmix64(splitmix64(seed ^ fnv1a64(tag)) ^ splitmix64(index))
/// so adding a new tag never shifts the draws of an existing one.
class Rng {
 public:
  explicit Rng(std::uint64_t engine_seed) : engine_(engine_seed) {}

  static Rng substream(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  /// Uniform integer on [0, n); n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);
  /// Standard normal via Box-Muller; the spare variate is cached.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace losstrunc

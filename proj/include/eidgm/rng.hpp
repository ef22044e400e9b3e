#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace eidgm {

/// Seeded random stream. The engine is std::mt19937_64, whose output
/// sequence is fixed by the standard; the uniform and normal transforms
/// are spelled out here so draws do not depend on the standard library's
/// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [0, n).
  std::size_t index(std::size_t n);

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal();

  void shuffle(std::vector<std::size_t>& v);

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

/// Derives an independent seed for sub-stream `index` (splitmix64 finalizer).
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace eidgm

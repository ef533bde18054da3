#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace styleseg {

/// splitmix64 finalizer; used to derive independent stream seeds from
/// (seed, index) so per-sample work gives the same result serial or parallel.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

/// Deterministic RNG with platform-stable distributions (the std::
/// distributions are implementation-defined, so uniform/normal are done here).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);

  /// Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi);

  /// Standard normal via Box-Muller.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j =
          static_cast<std::size_t>(uniform_int(0, static_cast<int>(i) - 1));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace styleseg

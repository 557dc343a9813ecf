#pragma once

#include <cstdint>
#include <vector>

namespace sdae {

// Deterministic, platform-independent generator (xoshiro256++ seeded via
// splitmix64). The standard <random> distributions are implementation
// defined, so sampling and shuffling are done by hand to keep runs
// reproducible across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  std::uint32_t next_u32();

  // Uniform in [0, 1).
  double uniform();
  // Uniform integer in [0, n). n must be > 0.
  std::size_t uniform_index(std::size_t n);
  // Standard normal via Box-Muller.
  double normal();
  // Normal rejected outside [-2*std, 2*std].
  double trunc_normal(double std_dev);

  // Fisher-Yates; stable across platforms unlike std::shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // Hash-combines a seed with a stream of counters. Used to split one root
  // seed into independent per-(epoch, step, item) streams without carrying
  // mutable generator state around.
  static std::uint64_t derive(std::uint64_t seed,
                              std::initializer_list<std::uint64_t> path);

 private:
  std::uint64_t s_[4];
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sdae

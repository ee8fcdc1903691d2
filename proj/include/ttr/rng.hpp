#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace ttr {

// SplitMix64 generator. All simulation randomness goes through this class so
// that results are bit-identical across compilers and standard libraries
// (std:: distributions are implementation-defined).
//
// Streams: Rng::stream(seed, name) derives an independent generator for a
// named purpose ("bootstrap", "random-baseline", ...) from a replica seed by
// hashing the name with FNV-1a and mixing it into the seed with one
// SplitMix64 finalizer round.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  static Rng stream(std::uint64_t seed, std::string_view name);

  std::uint64_t next();

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be > 0. Rejection sampling, no modulo bias.
  std::uint64_t index(std::uint64_t n);

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

std::uint64_t mix64(std::uint64_t z);

}  // namespace ttr

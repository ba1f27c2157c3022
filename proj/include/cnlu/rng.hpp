#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace cnlu {

// Deterministic random source. All distributions are derived from the raw
// mt19937_64 stream by hand so that generated artifacts are byte-identical
// across standard libraries (std::uniform_real_distribution et al. are
// implementation-defined).
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Inclusive bounds, rejection sampling to stay unbiased.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    const uint64_t range = static_cast<uint64_t>(hi - lo) + 1;
    if (range == 0) return lo + static_cast<int64_t>(gen_());  // full u64 range
    const uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    uint64_t x = gen_();
    while (x >= limit) x = gen_();
    return lo + static_cast<int64_t>(x % range);
  }

  // Box-Muller with cached spare.
  double normal(double mean = 0.0, double sd = 1.0) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + sd * spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return mean + sd * r * std::cos(theta);
  }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Derived stream for sharded work (per split, per shard).
  Rng fork(uint64_t stream) const {
    Rng copy = *this;
    const uint64_t s = copy.next_u64() ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    return Rng(s);
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cnlu

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace duet {

// Deterministic RNG. The mt19937_64 engine output is pinned by the standard;
// all distributions are derived here from raw 64-bit draws so that streams
// are reproducible across platforms and library versions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller, one value cached
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // uniform integer in [0, n), rejection-sampled to avoid modulo bias
  uint64_t below(uint64_t n) {
    if (n == 0) return 0;
    uint64_t bound = UINT64_MAX - UINT64_MAX % n;
    uint64_t x = next_u64();
    while (x >= bound) x = next_u64();
    return x % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // pick k distinct indices out of n (partial Fisher-Yates), returned sorted
  std::vector<int64_t> choose(int64_t n, int64_t k);

  static uint64_t splitmix(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

  // derive a child seed from a parent seed and a stream tag
  static uint64_t mix(uint64_t a, uint64_t b) { return splitmix(a ^ splitmix(b)); }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline std::vector<int64_t> Rng::choose(int64_t n, int64_t k) {
  std::vector<int64_t> idx(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  if (k > n) k = n;
  for (int64_t i = 0; i < k; ++i) {
    int64_t j = i + static_cast<int64_t>(below(static_cast<uint64_t>(n - i)));
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
  }
  idx.resize(static_cast<size_t>(k));
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace duet

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bk {

// Raised when a crop request cannot produce a non-degenerate region
// (box entirely outside the frame, zero-area intersection, ...).
class NoValidCrop : public std::runtime_error {
 public:
  explicit NoValidCrop(const std::string& what) : std::runtime_error(what) {}
};

// Raised for missing or corrupt external inputs (manifests, checkpoints,
// video files). The message always names the offending file.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when training hits a non-finite loss; carries enough context to
// locate the failing step.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Seed derivation. All stochastic components are seeded through hash chains
// over (global seed, stable identifiers) so results do not depend on
// execution order.
// ---------------------------------------------------------------------------

inline uint64_t hash_mix(uint64_t a, uint64_t b) {
  // splitmix64 finalizer over the combined value
  uint64_t x = a + 0x9e3779b97f4a7c15ULL + (b << 1 | b >> 63);
  x ^= b;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t hash_str(std::string_view s) {
  uint64_t h = 1469598103934665603ULL;  // FNV-1a 64
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline uint64_t hash_f64(double v) {
  uint64_t bits;
  static_assert(sizeof(bits) == sizeof(v));
  __builtin_memcpy(&bits, &v, sizeof(bits));
  return hash_mix(bits, 0x5bd1e995u);
}

// ---------------------------------------------------------------------------
// Deterministic RNG. mt19937_64 has a standard-mandated output sequence; the
// distribution helpers below are hand-rolled so draws are identical across
// standard library implementations.
// ---------------------------------------------------------------------------

class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next() { return gen_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n), unbiased
  int64_t uniform_int(int64_t n) {
    if (n <= 0) throw std::invalid_argument("Rng::uniform_int: n must be positive");
    const uint64_t un = static_cast<uint64_t>(n);
    const uint64_t lim = UINT64_MAX - UINT64_MAX % un;
    uint64_t x;
    do {
      x = gen_();
    } while (x >= lim);
    return static_cast<int64_t>(x % un);
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // N(0, stddev^2) truncated to [-limit, limit] by rejection.
  double trunc_normal(double stddev, double limit) {
    for (;;) {
      const double x = normal() * stddev;
      if (x >= -limit && x <= limit) return x;
    }
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace bk

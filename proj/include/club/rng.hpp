#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace club {

/// Deterministic seeded random stream. All draws go through hand-rolled
/// transforms on top of mt19937_64 so that output is identical across
/// standard-library implementations (std distributions are not portable).
///
/// Streams form a tree: `derive(salt...)` yields an independent child
/// stream whose state depends only on the parent key and the salts, never
/// on how much the parent has been consumed. Environments use this to key
/// per-round draws by round index, which keeps paired policy runs on
/// bit-identical streams.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : key_(key), engine_(mix_(key)) {}

  std::uint64_t key() const { return key_; }

  template <typename... Salts>
  RngStream derive(Salts... salts) const {
    std::uint64_t k = key_;
    ((k = mix_(k ^ static_cast<std::uint64_t>(salts))), ...);
    return RngStream(k);
  }

  /// Uniform on [0,1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo,hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [lo,hi], inclusive. Unbiased via rejection.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) return static_cast<std::int64_t>(engine_());  // full range
    const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % range;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return lo + static_cast<std::int64_t>(v % range);
  }

  /// Standard normal via Box-Muller (no cached spare).
  double gaussian() {
    double u1;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  bool bernoulli(double p) { return uniform01() < p; }

  std::uint64_t bits() { return engine_(); }

  /// In-place Fisher-Yates shuffle.
  template <typename Container>
  void shuffle(Container& c) {
    for (std::size_t i = c.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(c[i - 1], c[j]);
    }
  }

 private:
  // splitmix64 finalizer; good avalanche for key mixing.
  static std::uint64_t mix_(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::mt19937_64 engine_;
};

}  // namespace club

#pragma once
// Deterministic random source. Every consumer derives a named substream from
// the single run seed, so enabling one feature (say dropout) never shifts the
// draws seen by another (say initialization).

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace nmtwp {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed), seed_(seed) {}

  Rng substream(std::string_view name) const {
    // FNV-1a over the name, mixed with the master seed.
    std::uint64_t h = 1469598103934665603ULL ^ seed_;
    for (char c : name) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ULL;
    }
    return Rng(h);
  }

  Rng substream(std::string_view name, std::uint64_t index) const {
    return substream(std::string(name) + "#" + std::to_string(index));
  }

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Inclusive bounds.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(eng_() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  double gaussian(double mean, double stddev) {
    // Box-Muller; one draw discarded to keep the stream stateless.
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    return mean + stddev * z;
  }

  template <class V>
  void shuffle(V& v) {
    // Fisher-Yates with a pinned draw sequence.
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = eng_() % i;
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
  std::uint64_t seed_;
};

}  // namespace nmtwp

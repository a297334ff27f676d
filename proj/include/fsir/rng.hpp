#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "fsir/errors.hpp"

namespace fsir::rng {

// Counter-based generator: draw i of a stream with key K is the bit-mix of
// K + (i+1)*GOLDEN, so streams are pure functions of (key, counter). Substream
// keys are derived by re-mixing (parent key, index), which makes per-subject
// output independent of how many subjects exist (prefix stability) and of
// thread scheduling.

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30; z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27; z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

inline std::uint64_t derive_key(std::uint64_t parent, std::uint64_t index) {
  return mix64(parent + kGolden * (index + 0x632BE59BD9B4E019ull));
}

// Stream roles; values are arbitrary fixed tags fed to derive_key.
enum class Tag : std::uint64_t {
  path = 0x7061746800000001ull,    // Brownian increments
  noise = 0x6e6f697300000002ull,   // response noise
  design = 0x6473676e00000003ull,  // sparse design draws
  run = 0x72756e7300000004ull,     // Monte Carlo run keys
  eval = 0x6576616c00000005ull,    // held-out evaluation sample
  calib = 0x63616c6200000006ull,   // bandwidth calibration data
};

inline std::uint64_t derive_key(std::uint64_t parent, Tag tag, std::uint64_t index) {
  return derive_key(derive_key(parent, static_cast<std::uint64_t>(tag)), index);
}

class Stream {
 public:
  explicit Stream(std::uint64_t key) : state_(key) {}

  std::uint64_t next_u64() {
    state_ += kGolden;
    return mix64(state_);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; consumes exactly two 64-bit draws.
  double normal() {
    double u1 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Unbiased integer in [0, range) by rejection.
  std::uint64_t uniform_below(std::uint64_t range) {
    if (range == 0) throw Error(ErrorKind::ConfigInvalid, "uniform_below(0)");
    const std::uint64_t threshold = (0ull - range) % range;  // 2^64 mod range
    for (;;) {
      const std::uint64_t u = next_u64();
      if (u >= threshold) return u % range;
    }
  }

  // Inclusive integer range.
  int uniform_int(int lo, int hi) {
    if (hi < lo) throw Error(ErrorKind::ConfigInvalid, "uniform_int: empty range");
    return lo + static_cast<int>(uniform_below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  // `count` distinct integers from [lo, hi], ascending (partial Fisher-Yates).
  std::vector<int> sample_without_replacement(int lo, int hi, int count) {
    const int m = hi - lo + 1;
    if (count < 0 || count > m)
      throw Error(ErrorKind::ConfigInvalid, "sample_without_replacement: count out of range");
    std::vector<int> pool(m);
    for (int i = 0; i < m; ++i) pool[i] = lo + i;
    for (int i = 0; i < count; ++i) {
      const int j = i + static_cast<int>(uniform_below(static_cast<std::uint64_t>(m - i)));
      std::swap(pool[i], pool[j]);
    }
    std::vector<int> out(pool.begin(), pool.begin() + count);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::uint64_t state_;
};

}  // namespace fsir::rng

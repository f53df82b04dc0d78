#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace pmuplace {

// All randomized experiments draw through these helpers. std::mt19937_64 has
// a standard-pinned output sequence; the distributions below are hand-rolled
// because std::uniform_int_distribution is implementation-defined and would
// break bit-reproducibility across standard libraries.

using Rng = std::mt19937_64;

// Unbiased integer in [0, bound) by rejection.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
  const std::uint64_t threshold = (~bound + 1) % bound;  // 2^64 mod bound
  for (;;) {
    std::uint64_t r = rng();
    if (r >= threshold) return r % bound;
  }
}

// Double in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// k distinct indices from {0..m-1}, ascending. Partial Fisher-Yates.
inline std::vector<int> sample_without_replacement(Rng& rng, int m, int k) {
  std::vector<int> pool(m);
  for (int i = 0; i < m; ++i) pool[i] = i;
  for (int i = 0; i < k; ++i) {
    int j = i + static_cast<int>(uniform_below(rng, m - i));
    std::swap(pool[i], pool[j]);
  }
  std::vector<int> out(pool.begin(), pool.begin() + k);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace pmuplace

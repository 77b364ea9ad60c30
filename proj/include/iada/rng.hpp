// Deterministic random number generation and integer apportionment.
//
// All randomness in the library flows through Rng so that a run is fully
// reproducible from a single 64-bit seed. The uniform mapping and the
// Box-Muller normal are spelled out here rather than taken from
// std::*_distribution, whose algorithms are implementation-defined.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "iada/errors.hpp"

namespace iada {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; two uniforms per draw, no cached spare.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Uniform integer in [0, n) by rejection.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw ValueError("uniform_int: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  // Derive an independent stream for a sub-task (seed mixing via splitmix64).
  std::uint64_t fork_seed() {
    std::uint64_t z = engine_() + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Largest-remainder apportionment: integers summing to `total`, proportional
// to `weights`. Ties on the remainder are broken toward the lower index.
inline std::vector<long> largest_remainder(const std::vector<double>& weights,
                                           long total) {
  if (weights.empty()) throw ValueError("largest_remainder: empty weights");
  double wsum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw ValueError("largest_remainder: negative weight");
    wsum += w;
  }
  if (wsum <= 0.0) throw ValueError("largest_remainder: weights sum to zero");

  const std::size_t k = weights.size();
  std::vector<long> out(k, 0);
  std::vector<double> remainder(k, 0.0);
  long assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double ideal = static_cast<double>(total) * weights[i] / wsum;
    out[i] = static_cast<long>(std::floor(ideal));
    remainder[i] = ideal - static_cast<double>(out[i]);
    assigned += out[i];
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return remainder[a] > remainder[b];
  });
  for (long r = total - assigned, i = 0; r > 0; --r, ++i) {
    out[order[static_cast<std::size_t>(i)]] += 1;
  }
  return out;
}

// Largest-remainder apportionment with a floor of one unit per entry.
// Entries whose proportional share falls below one are pinned to one and the
// rest of the budget is re-apportioned among the remainder.
inline std::vector<long> largest_remainder_min_one(
    const std::vector<double>& weights, long total) {
  const std::size_t k = weights.size();
  if (total < static_cast<long>(k))
    throw ValueError("largest_remainder_min_one: total below entry count");

  std::vector<bool> pinned(k, false);
  for (;;) {
    double free_weight = 0.0;
    long free_budget = total;
    for (std::size_t i = 0; i < k; ++i) {
      if (pinned[i]) free_budget -= 1;
      else free_weight += weights[i];
    }
    bool changed = false;
    for (std::size_t i = 0; i < k; ++i) {
      if (pinned[i]) continue;
      const double share = free_weight > 0.0
          ? static_cast<double>(free_budget) * weights[i] / free_weight
          : 0.0;
      if (share < 1.0) {
        pinned[i] = true;
        changed = true;
      }
    }
    if (!changed) break;
  }

  std::vector<double> free_w;
  std::vector<std::size_t> free_idx;
  long free_budget = total;
  for (std::size_t i = 0; i < k; ++i) {
    if (pinned[i]) free_budget -= 1;
    else {
      free_w.push_back(weights[i]);
      free_idx.push_back(i);
    }
  }
  std::vector<long> out(k, 1);
  if (!free_idx.empty()) {
    const std::vector<long> part = largest_remainder(free_w, free_budget);
    for (std::size_t i = 0; i < free_idx.size(); ++i) out[free_idx[i]] = part[i];
  }
  return out;
}

}  // namespace iada

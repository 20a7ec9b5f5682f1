#pragma once

// Two-sample Pitman permutation test on the difference of means. The pooled
// values are re-split into groups of the original sizes; the p-value is the
// share of splits whose |mean_A - mean_B| reaches the observed one.
//
// With N = n_A + n_B pooled values, the test is exact when 2^N is within
// the enumeration budget: it walks every N-bit mask and keeps the masks with
// n_A bits set. Larger inputs use seeded Monte-Carlo splits, reported as
// (hits + 1) / (samples + 1).

#include <cstddef>
#include <cstdint>
#include <span>

namespace debias {

struct PermutationOptions {
  unsigned max_exact_bits = 20;            // exact when n_A + n_B <= this
  std::size_t monte_carlo_samples = 100000;
  std::uint64_t seed = 0;
};

struct PermutationResult {
  double p_value = 1.0;
  double mean_a = 0.0;
  double mean_b = 0.0;
  double difference = 0.0;  // mean_a - mean_b
  bool exact = true;
  std::uint64_t permutations = 0;  // splits evaluated
  std::uint64_t extreme = 0;       // splits with |diff| >= observed
};

// Throws ConfigError when either side has fewer than two values.
PermutationResult pitman_permutation_test(std::span<const double> a, std::span<const double> b,
                                          const PermutationOptions& options = {});

namespace permutation_kernels {

struct Counts {
  std::uint64_t extreme = 0;
  std::uint64_t total = 0;
};

// |sum_A / n_a - (total - sum_A) / n_b| >= threshold, over all masks with
// n_a bits of pooled.size() bits.
namespace serial {
Counts exact(std::span<const double> pooled, std::size_t n_a, double threshold);
Counts sampled(std::span<const double> pooled, std::size_t n_a, double threshold,
               std::size_t samples, std::uint64_t seed);
}  // namespace serial

namespace parallel {
Counts exact(std::span<const double> pooled, std::size_t n_a, double threshold);
Counts sampled(std::span<const double> pooled, std::size_t n_a, double threshold,
               std::size_t samples, std::uint64_t seed);
}  // namespace parallel

// Monte-Carlo draws are generated in fixed-size chunks, each with its own
// derived seed, so the result does not depend on the thread count.
inline constexpr std::size_t kSampleChunk = 1024;

}  // namespace permutation_kernels

}  // namespace debias

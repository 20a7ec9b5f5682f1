#include "debias/significance.hpp"

#include <bit>
#include <cmath>
#include <numeric>
#include <vector>

#include "debias/errors.hpp"
#include "debias/random.hpp"

#ifdef DEBIAS_HAVE_OPENMP
#include <omp.h>
#endif

namespace debias {

namespace permutation_kernels {

namespace {

struct Split {
  double total;
  double n_a;
  double n_b;

  bool extreme(double sum_a, double threshold) const {
    return std::abs(sum_a / n_a - (total - sum_a) / n_b) >= threshold;
  }
};

Split make_split(std::span<const double> pooled, std::size_t n_a) {
  const double total = std::accumulate(pooled.begin(), pooled.end(), 0.0);
  return {total, static_cast<double>(n_a), static_cast<double>(pooled.size() - n_a)};
}

double masked_sum(std::span<const double> pooled, std::uint64_t mask) {
  double sum = 0.0;
  for (std::size_t j = 0; j < pooled.size(); ++j) {
    if ((mask >> j) & 1u) sum += pooled[j];
  }
  return sum;
}

// One chunk of Monte-Carlo splits: partial Fisher-Yates picks group A.
std::uint64_t sample_chunk(std::span<const double> pooled, std::size_t n_a, double threshold,
                           const Split& split, std::size_t draws, std::uint64_t chunk_seed) {
  Rng rng(chunk_seed);
  std::vector<std::size_t> perm(pooled.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::uint64_t hits = 0;
  for (std::size_t d = 0; d < draws; ++d) {
    double sum_a = 0.0;
    for (std::size_t j = 0; j < n_a; ++j) {
      std::uniform_int_distribution<std::size_t> pick(j, perm.size() - 1);
      std::swap(perm[j], perm[pick(rng)]);
      sum_a += pooled[perm[j]];
    }
    hits += split.extreme(sum_a, threshold);
  }
  return hits;
}

std::size_t chunk_count(std::size_t samples) {
  return (samples + kSampleChunk - 1) / kSampleChunk;
}

std::size_t chunk_draws(std::size_t samples, std::size_t chunk) {
  return std::min(kSampleChunk, samples - chunk * kSampleChunk);
}

}  // namespace

namespace serial {

Counts exact(std::span<const double> pooled, std::size_t n_a, double threshold) {
  const Split split = make_split(pooled, n_a);
  const std::uint64_t masks = std::uint64_t{1} << pooled.size();
  Counts c;
  for (std::uint64_t mask = 0; mask < masks; ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) != n_a) continue;
    ++c.total;
    c.extreme += split.extreme(masked_sum(pooled, mask), threshold);
  }
  return c;
}

Counts sampled(std::span<const double> pooled, std::size_t n_a, double threshold,
               std::size_t samples, std::uint64_t seed) {
  const Split split = make_split(pooled, n_a);
  Counts c;
  for (std::size_t chunk = 0; chunk < chunk_count(samples); ++chunk) {
    c.extreme += sample_chunk(pooled, n_a, threshold, split, chunk_draws(samples, chunk),
                              derive_seed(seed, stream::kPermutation, chunk));
  }
  c.total = samples;
  return c;
}

}  // namespace serial

namespace parallel {

Counts exact(std::span<const double> pooled, std::size_t n_a, double threshold) {
  const Split split = make_split(pooled, n_a);
  const auto masks = static_cast<std::int64_t>(std::uint64_t{1} << pooled.size());
  std::uint64_t total = 0, extreme = 0;
#pragma omp parallel for schedule(static) reduction(+ : total, extreme)
  for (std::int64_t m = 0; m < masks; ++m) {
    const auto mask = static_cast<std::uint64_t>(m);
    if (static_cast<std::size_t>(std::popcount(mask)) != n_a) continue;
    ++total;
    extreme += split.extreme(masked_sum(pooled, mask), threshold);
  }
  return {extreme, total};
}

Counts sampled(std::span<const double> pooled, std::size_t n_a, double threshold,
               std::size_t samples, std::uint64_t seed) {
  const Split split = make_split(pooled, n_a);
  const auto chunks = static_cast<std::int64_t>(chunk_count(samples));
  std::uint64_t extreme = 0;
#pragma omp parallel for schedule(dynamic) reduction(+ : extreme)
  for (std::int64_t chunk = 0; chunk < chunks; ++chunk) {
    const auto c = static_cast<std::size_t>(chunk);
    extreme += sample_chunk(pooled, n_a, threshold, split, chunk_draws(samples, c),
                            derive_seed(seed, stream::kPermutation, c));
  }
  return {extreme, samples};
}

}  // namespace parallel

}  // namespace permutation_kernels

PermutationResult pitman_permutation_test(std::span<const double> a, std::span<const double> b,
                                          const PermutationOptions& options) {
  if (a.size() < 2 || b.size() < 2) {
    throw ConfigError("permutation test needs at least two runs per side");
  }
  if (options.max_exact_bits > 30) throw ConfigError("max_exact_bits must be <= 30");
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  for (double v : pooled) {
    if (!std::isfinite(v)) throw ConfigError("permutation test values must be finite");
  }

  PermutationResult r;
  r.mean_a = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
  r.mean_b = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(b.size());
  r.difference = r.mean_a - r.mean_b;
  const double observed = std::abs(r.difference);
  // Re-summed splits differ from the observed statistic by rounding only.
  const double threshold = observed - 1e-12 * (1.0 + observed);

  bool parallel = false;
#ifdef DEBIAS_HAVE_OPENMP
  parallel = omp_get_max_threads() > 1 && !omp_in_parallel();
#endif
  namespace pk = permutation_kernels;
  pk::Counts counts;
  if (pooled.size() <= options.max_exact_bits) {
    counts = parallel ? pk::parallel::exact(pooled, a.size(), threshold)
                      : pk::serial::exact(pooled, a.size(), threshold);
    r.exact = true;
    r.p_value = static_cast<double>(counts.extreme) / static_cast<double>(counts.total);
  } else {
    if (options.monte_carlo_samples == 0) throw ConfigError("monte_carlo_samples must be > 0");
    counts = parallel ? pk::parallel::sampled(pooled, a.size(), threshold,
                                              options.monte_carlo_samples, options.seed)
                      : pk::serial::sampled(pooled, a.size(), threshold,
                                            options.monte_carlo_samples, options.seed);
    r.exact = false;
    r.p_value = static_cast<double>(counts.extreme + 1) / static_cast<double>(counts.total + 1);
  }
  r.permutations = counts.total;
  r.extreme = counts.extreme;
  return r;
}

}  // namespace debias

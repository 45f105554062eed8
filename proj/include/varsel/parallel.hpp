#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace varsel::par {

// Reductions are chunked into fixed-size blocks: block partials are computed
// in parallel and folded in block order, so the result is the same for any
// thread count (the association never depends on scheduling).
inline constexpr std::size_t kReduceBlock = 4096;

inline std::size_t block_count(std::size_t n) {
  return n == 0 ? 0 : (n + kReduceBlock - 1) / kReduceBlock;
}

template <typename BlockFn>
double blocked_sum(std::size_t n, BlockFn&& block_sum) {
  const std::size_t nblocks = block_count(n);
  if (nblocks == 0) return 0.0;
  std::vector<double> partial(nblocks, 0.0);
#pragma omp parallel for schedule(static)
  for (long long b = 0; b < static_cast<long long>(nblocks); ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kReduceBlock;
    const std::size_t hi = std::min(n, lo + kReduceBlock);
    partial[static_cast<std::size_t>(b)] = block_sum(lo, hi);
  }
  double acc = 0.0;
  for (double p : partial) acc += p;
  return acc;
}

template <typename BlockFn>
double blocked_max(std::size_t n, BlockFn&& block_max) {
  const std::size_t nblocks = block_count(n);
  if (nblocks == 0) return 0.0;
  std::vector<double> partial(nblocks, 0.0);
#pragma omp parallel for schedule(static)
  for (long long b = 0; b < static_cast<long long>(nblocks); ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kReduceBlock;
    const std::size_t hi = std::min(n, lo + kReduceBlock);
    partial[static_cast<std::size_t>(b)] = block_max(lo, hi);
  }
  double acc = partial[0];
  for (double p : partial) acc = std::max(acc, p);
  return acc;
}

// Index of the first element satisfying a predicate, or npos. Blocks are
// scanned in parallel; the minimum hit index wins, so the answer is
// deterministic.
inline constexpr std::size_t npos = static_cast<std::size_t>(-1);

template <typename BlockFn>
std::size_t blocked_first(std::size_t n, BlockFn&& block_first) {
  const std::size_t nblocks = block_count(n);
  if (nblocks == 0) return npos;
  std::vector<std::size_t> partial(nblocks, npos);
#pragma omp parallel for schedule(static)
  for (long long b = 0; b < static_cast<long long>(nblocks); ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kReduceBlock;
    const std::size_t hi = std::min(n, lo + kReduceBlock);
    partial[static_cast<std::size_t>(b)] = block_first(lo, hi);
  }
  for (std::size_t p : partial) {
    if (p != npos) return p;
  }
  return npos;
}

}  // namespace varsel::par

#pragma once

#include <shared_mutex>
#include <string>
#include <unordered_map>

#include "varsel/program.hpp"

namespace varsel {

/// Program complexity in bits (8 bits per byte of evidence). Non-negative
/// and finite by construction.
struct ComplexityBits {
  double bits = 0.0;
};

/// Canonical text a program is measured on: for DSL programs the canonical
/// rendering (already stored at construction), for external programs the raw
/// source with per-line trailing whitespace stripped. One LF per line.
std::string canonical_text(const Program& p);

/// Descriptive complexity estimate: 8 x bytes of the lzss-compressed
/// canonical source. Deterministic for the pinned coder configuration.
ComplexityBits k_plain(const Program& p);

/// Transformation-cost estimate of producing `p` when `reference` is known:
/// 8 x the byte payload of the minimal line diff reference -> p. Zero
/// exactly when the canonical sources match; directional, not symmetric.
ComplexityBits k_conditional(const Program& p, const Program& reference);

/// Memo for pairwise conditional complexities, keyed by (from id, to id).
/// Concurrent readers are fine; writers take the exclusive lock. Moving is
/// allowed while no other thread touches either side.
class ConditionalCache {
 public:
  ConditionalCache() = default;
  ConditionalCache(ConditionalCache&& other) noexcept : cache_(std::move(other.cache_)) {}
  ConditionalCache& operator=(ConditionalCache&& other) noexcept {
    cache_ = std::move(other.cache_);
    return *this;
  }

  double bits(const Program& p, const Program& reference);

 private:
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, double> cache_;
};

}  // namespace varsel

#include "varsel/complexity.hpp"

#include <mutex>

#include "varsel/diff.hpp"
#include "varsel/lzss.hpp"

namespace varsel {

std::string canonical_text(const Program& p) {
  std::string out;
  for (const std::string& line : diff::canonical_lines(p.source_text)) {
    out += line;
    out += '\n';
  }
  return out;
}

ComplexityBits k_plain(const Program& p) {
  return {8.0 * static_cast<double>(lzss::compressed_size(canonical_text(p)))};
}

ComplexityBits k_conditional(const Program& p, const Program& reference) {
  return {8.0 * static_cast<double>(
                    diff::payload_bytes(canonical_text(reference), canonical_text(p)))};
}

double ConditionalCache::bits(const Program& p, const Program& reference) {
  const std::string key = reference.id + '\x1f' + p.id;
  {
    std::shared_lock lock(mutex_);
    if (const auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  const double bits = k_conditional(p, reference).bits;
  std::unique_lock lock(mutex_);
  cache_.emplace(key, bits);
  return bits;
}

}  // namespace varsel

#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace varsel::lzss {

// Self-contained LZSS coder with every parameter pinned (4 KiB window,
// match lengths 4..18, greedy longest match, 6-byte header), so compressed
// sizes are identical across runs and platforms. Used as the fixed
// general-purpose compressor behind program-complexity estimates; the
// decoder exists to prove losslessness in tests.

std::vector<std::uint8_t> compress(std::span<const std::uint8_t> input);
std::vector<std::uint8_t> compress(std::string_view input);

/// Throws MalformedOutput on a corrupt stream.
std::vector<std::uint8_t> decompress(std::span<const std::uint8_t> input);

std::size_t compressed_size(std::string_view input);

}  // namespace varsel::lzss

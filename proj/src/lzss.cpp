#include "varsel/lzss.hpp"

#include <algorithm>
#include <cstring>

#include "varsel/errors.hpp"

namespace varsel::lzss {

namespace {

constexpr std::size_t kWindow = 4096;   // 12-bit offset, 1-based distance
constexpr std::size_t kMinMatch = 4;
constexpr std::size_t kMaxMatch = kMinMatch + 15;  // 4-bit length field
constexpr std::uint8_t kMagic0 = 'V';
constexpr std::uint8_t kMagic1 = 'Z';

struct Match {
  std::size_t distance = 0;
  std::size_t length = 0;
};

Match longest_match(std::span<const std::uint8_t> data, std::size_t pos) {
  Match best;
  const std::size_t window_start = pos > kWindow ? pos - kWindow : 0;
  const std::size_t max_len = std::min(kMaxMatch, data.size() - pos);
  if (max_len < kMinMatch) return best;
  for (std::size_t cand = window_start; cand < pos; ++cand) {
    std::size_t len = 0;
    while (len < max_len && data[cand + len] == data[pos + len]) ++len;
    // Strictly longer wins; equal length prefers the smaller distance.
    if (len > best.length) {
      best.length = len;
      best.distance = pos - cand;
    }
  }
  if (best.length < kMinMatch) return {};
  return best;
}

}  // namespace

std::vector<std::uint8_t> compress(std::span<const std::uint8_t> input) {
  std::vector<std::uint8_t> out;
  out.reserve(input.size() / 2 + 16);
  out.push_back(kMagic0);
  out.push_back(kMagic1);
  const std::uint32_t size = static_cast<std::uint32_t>(input.size());
  for (int shift = 0; shift < 32; shift += 8)
    out.push_back(static_cast<std::uint8_t>((size >> shift) & 0xff));

  std::size_t pos = 0;
  std::size_t flag_index = 0;
  int flag_bit = 8;  // forces a fresh flag byte on the first token
  while (pos < input.size()) {
    if (flag_bit == 8) {
      flag_index = out.size();
      out.push_back(0);
      flag_bit = 0;
    }
    const Match m = longest_match(input, pos);
    if (m.length >= kMinMatch) {
      // Match token: bit set, two bytes: dddddddd ddddllll (distance-1, len-4).
      out[flag_index] |= static_cast<std::uint8_t>(1u << flag_bit);
      const std::size_t d = m.distance - 1;
      const std::size_t l = m.length - kMinMatch;
      out.push_back(static_cast<std::uint8_t>(d & 0xff));
      out.push_back(static_cast<std::uint8_t>(((d >> 8) & 0x0f) | (l << 4)));
      pos += m.length;
    } else {
      out.push_back(input[pos]);
      ++pos;
    }
    ++flag_bit;
  }
  return out;
}

std::vector<std::uint8_t> compress(std::string_view input) {
  return compress(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(input.data()), input.size()));
}

std::vector<std::uint8_t> decompress(std::span<const std::uint8_t> input) {
  if (input.size() < 6 || input[0] != kMagic0 || input[1] != kMagic1)
    raise(Errc::MalformedOutput, "not an lzss stream");
  std::uint32_t size = 0;
  for (int i = 0; i < 4; ++i) size |= static_cast<std::uint32_t>(input[2 + i]) << (8 * i);

  std::vector<std::uint8_t> out;
  out.reserve(size);
  std::size_t pos = 6;
  std::uint8_t flags = 0;
  int flag_bit = 8;
  while (out.size() < size) {
    if (flag_bit == 8) {
      if (pos >= input.size()) raise(Errc::MalformedOutput, "truncated lzss stream");
      flags = input[pos++];
      flag_bit = 0;
    }
    if (flags & (1u << flag_bit)) {
      if (pos + 1 >= input.size()) raise(Errc::MalformedOutput, "truncated lzss match");
      const std::size_t lo = input[pos++];
      const std::size_t hi = input[pos++];
      const std::size_t distance = (lo | ((hi & 0x0f) << 8)) + 1;
      const std::size_t length = (hi >> 4) + kMinMatch;
      if (distance > out.size()) raise(Errc::MalformedOutput, "lzss match before start");
      for (std::size_t i = 0; i < length; ++i)
        out.push_back(out[out.size() - distance]);
    } else {
      if (pos >= input.size()) raise(Errc::MalformedOutput, "truncated lzss literal");
      out.push_back(input[pos++]);
    }
    ++flag_bit;
  }
  if (out.size() != size) raise(Errc::MalformedOutput, "lzss stream overran its header size");
  return out;
}

std::size_t compressed_size(std::string_view input) { return compress(input).size(); }

}  // namespace varsel::lzss

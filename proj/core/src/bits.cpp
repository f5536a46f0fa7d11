#include "retoksync/bits.hpp"

#include <bit>

#include "retoksync/errors.hpp"

namespace retoksync {

std::string to_ascii(const Bits& bits) {
  std::string out;
  out.reserve(bits.size());
  for (bool b : bits) out.push_back(b ? '1' : '0');
  return out;
}

Bits from_ascii(std::string_view text) {
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r' || text.back() == ' ' ||
                           text.back() == '\t')) {
    text.remove_suffix(1);
  }
  Bits out;
  out.reserve(text.size());
  for (char c : text) {
    if (c == '0') {
      out.push_back(false);
    } else if (c == '1') {
      out.push_back(true);
    } else {
      throw ConfigError("bitstring contains a character other than '0' or '1'");
    }
  }
  return out;
}

Bits from_bytes(std::span<const std::uint8_t> bytes) {
  Bits out;
  out.reserve(bytes.size() * 8);
  for (std::uint8_t byte : bytes) {
    for (int i = 7; i >= 0; --i) out.push_back(((byte >> i) & 1U) != 0);
  }
  return out;
}

std::vector<std::uint8_t> to_bytes(const Bits& bits) {
  std::vector<std::uint8_t> out((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) out[i / 8] |= static_cast<std::uint8_t>(0x80U >> (i % 8));
  }
  return out;
}

Bits bits_of(std::uint64_t value, unsigned width) {
  Bits out(width);
  for (unsigned i = 0; i < width; ++i) out[i] = ((value >> (width - 1 - i)) & 1U) != 0;
  return out;
}

std::uint64_t value_of(const Bits& bits) {
  std::uint64_t v = 0;
  for (bool b : bits) v = (v << 1) | (b ? 1U : 0U);
  return v;
}

std::size_t hamming(const Bits& a, const Bits& b) {
  const std::size_t common = std::min(a.size(), b.size());
  std::size_t d = std::max(a.size(), b.size()) - common;
  for (std::size_t i = 0; i < common; ++i) d += a[i] != b[i] ? 1 : 0;
  return d;
}

Bits slice(const Bits& bits, std::size_t offset, std::size_t length) {
  if (offset > bits.size()) return {};
  const std::size_t end = std::min(bits.size(), offset + length);
  return Bits(bits.begin() + static_cast<std::ptrdiff_t>(offset),
              bits.begin() + static_cast<std::ptrdiff_t>(end));
}

void append(Bits& dst, const Bits& src) { dst.insert(dst.end(), src.begin(), src.end()); }

unsigned ceil_log2(std::uint64_t range) {
  if (range <= 1) return 0;
  return static_cast<unsigned>(std::bit_width(range - 1));
}

void BitWriter::write(std::uint64_t value, unsigned width) {
  for (unsigned i = 0; i < width; ++i) bits_.push_back(((value >> (width - 1 - i)) & 1U) != 0);
}

void BitWriter::write(const Bits& bits) { append(bits_, bits); }

std::uint64_t BitReader::read(unsigned width) {
  if (width > remaining()) throw TruncationError("bit source exhausted mid-field");
  std::uint64_t v = 0;
  for (unsigned i = 0; i < width; ++i) v = (v << 1) | (bits_[pos_++] ? 1U : 0U);
  return v;
}

Bits BitReader::read_bits(std::size_t count) {
  if (count > remaining()) throw TruncationError("bit source exhausted mid-field");
  Bits out = slice(bits_, pos_, count);
  pos_ += count;
  return out;
}

}  // namespace retoksync

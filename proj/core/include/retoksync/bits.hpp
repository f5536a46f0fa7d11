#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace retoksync {

// Bit strings are kept MSB-first: bit 0 is the first bit on the wire.
using Bits = std::vector<bool>;

std::string to_ascii(const Bits& bits);

// Accepts '0'/'1' characters; trailing whitespace (newline) is ignored.
Bits from_ascii(std::string_view text);

Bits from_bytes(std::span<const std::uint8_t> bytes);

// Packs MSB-first, zero-padding the final byte.
std::vector<std::uint8_t> to_bytes(const Bits& bits);

// Low `width` bits of value, most significant first.
Bits bits_of(std::uint64_t value, unsigned width);

std::uint64_t value_of(const Bits& bits);

std::size_t hamming(const Bits& a, const Bits& b);

Bits slice(const Bits& bits, std::size_t offset, std::size_t length);

void append(Bits& dst, const Bits& src);

// Number of bits needed to address `range` distinct values; ceil(log2(range)),
// with 0 for range <= 1.
unsigned ceil_log2(std::uint64_t range);

class BitWriter {
 public:
  void write(std::uint64_t value, unsigned width);
  void write(const Bits& bits);
  std::size_t size() const { return bits_.size(); }
  const Bits& bits() const { return bits_; }
  Bits take() { return std::move(bits_); }

 private:
  Bits bits_;
};

// Reads throw TruncationError when the source runs out.
class BitReader {
 public:
  explicit BitReader(const Bits& bits) : bits_(bits) {}

  std::uint64_t read(unsigned width);
  Bits read_bits(std::size_t count);
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bits_.size() - pos_; }

 private:
  const Bits& bits_;
  std::size_t pos_ = 0;
};

}  // namespace retoksync

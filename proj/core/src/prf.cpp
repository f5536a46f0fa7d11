#include "retoksync/prf.hpp"

#include <sodium.h>

#include <cstdio>
#include <mutex>
#include <vector>

#include "retoksync/errors.hpp"

namespace retoksync {
namespace {

static_assert(crypto_shorthash_KEYBYTES == 16);
static_assert(crypto_shorthash_BYTES == 8);

void ensure_sodium() {
  static std::once_flag once;
  std::call_once(once, [] {
    if (sodium_init() < 0) throw Error("libsodium initialization failed");
  });
}

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

Key128 Key128::from_hex(std::string_view hex) {
  if (hex.size() != 32) throw ConfigError("key must be exactly 32 hex characters");
  Key128 key;
  for (std::size_t i = 0; i < 16; ++i) {
    const int hi = hex_digit(hex[2 * i]);
    const int lo = hex_digit(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw ConfigError("key contains a non-hex character");
    key.bytes[i] = static_cast<std::uint8_t>(hi * 16 + lo);
  }
  return key;
}

Key128 Key128::from_seed(std::uint64_t seed) {
  Key128 key;
  for (int i = 0; i < 8; ++i) key.bytes[i] = static_cast<std::uint8_t>(seed >> (8 * i));
  constexpr char kTail[8] = {'r', 'e', 't', 'o', 'k', 's', 'e', 'd'};
  for (int i = 0; i < 8; ++i) key.bytes[8 + i] = static_cast<std::uint8_t>(kTail[i]);
  return key;
}

std::string Key128::to_hex() const {
  std::string out;
  out.reserve(32);
  char buf[3];
  for (std::uint8_t b : bytes) {
    std::snprintf(buf, sizeof buf, "%02x", b);
    out += buf;
  }
  return out;
}

std::uint64_t prf64(const Key128& key, std::string_view domain,
                    std::span<const std::uint64_t> words) {
  ensure_sodium();
  thread_local std::vector<unsigned char> message;
  message.clear();
  put_u64(message, domain.size());
  message.insert(message.end(), domain.begin(), domain.end());
  put_u64(message, words.size());
  for (std::uint64_t w : words) put_u64(message, w);

  unsigned char out[crypto_shorthash_BYTES];
  crypto_shorthash(out, message.data(), message.size(), key.bytes.data());
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(out[i]) << (8 * i);
  return v;
}

Key128 derive_key(const Key128& key, std::string_view label,
                  std::initializer_list<std::uint64_t> words) {
  std::vector<std::uint64_t> input(words);
  input.push_back(0);
  const std::uint64_t a = prf64(key, label, input);
  input.back() = 1;
  const std::uint64_t b = prf64(key, label, input);
  Key128 out;
  for (int i = 0; i < 8; ++i) {
    out.bytes[i] = static_cast<std::uint8_t>(a >> (8 * i));
    out.bytes[8 + i] = static_cast<std::uint8_t>(b >> (8 * i));
  }
  return out;
}

double unit_interval(std::uint64_t word) {
  // 52 high bits, centred in their cell so 0 and 1 are never produced.
  return (static_cast<double>(word >> 12) + 0.5) * 0x1.0p-52;
}

}  // namespace retoksync

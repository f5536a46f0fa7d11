#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>

namespace retoksync {

// Name of the keyed hash behind every pseudorandom value in the library.
// Echoed into reports so runs can be reproduced across builds.
inline constexpr std::string_view kPrfName = "siphash-2-4/libsodium-crypto_shorthash";

struct Key128 {
  std::array<std::uint8_t, 16> bytes{};

  static Key128 from_hex(std::string_view hex);
  // Expands a 64-bit seed into a key (seed little-endian, fixed tail).
  static Key128 from_seed(std::uint64_t seed);
  std::string to_hex() const;

  friend bool operator==(const Key128&, const Key128&) = default;
};

// Keyed 64-bit PRF over (domain label, words). The serialization is
// length-prefixed so distinct (domain, words) tuples never collide as inputs.
std::uint64_t prf64(const Key128& key, std::string_view domain,
                    std::span<const std::uint64_t> words);

inline std::uint64_t prf64(const Key128& key, std::string_view domain,
                           std::initializer_list<std::uint64_t> words) {
  return prf64(key, domain, std::span<const std::uint64_t>(words.begin(), words.size()));
}

// Subkey derivation: two PRF words under `label`.
Key128 derive_key(const Key128& key, std::string_view label,
                  std::initializer_list<std::uint64_t> words = {});

// Maps a 64-bit word to a double in the open interval (0, 1).
double unit_interval(std::uint64_t word);

}  // namespace retoksync

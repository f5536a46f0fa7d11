#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "retoksync/codec.hpp"
#include "retoksync/provider.hpp"
#include "retoksync/tokenizer.hpp"

namespace retoksync {

struct Pool {
  std::vector<TokenId> members;  // canonical order of the source distribution
  std::uint64_t mass = 0;
};

// Candidate tokens grouped by the transitive closure of the surface
// byte-prefix relation. `pool_level` carries one entry per pool, keyed by the
// pool's smallest member id, so its canonical order is the pool order.
struct PoolPartition {
  std::vector<Pool> pools;
  QuantizedDistribution pool_level;

  std::optional<std::size_t> pool_of(TokenId id) const;
};

PoolPartition build_pools(const QuantizedDistribution& q, const TokenizerProfile& profile);

// Member of `pool` selected by an in-pool offset in [0, pool.mass).
TokenId pool_member(const Pool& pool, const QuantizedDistribution& q, std::uint64_t offset);

struct AuxConfig {
  CodecParams codec;
  std::size_t min_tokens = 1;
  std::size_t max_tokens = 4096;
  // Stop once every payload bit has been embedded (and min_tokens reached).
  bool stop_when_embedded = true;
};

struct AuxEmbedResult {
  std::string stego_text;  // context included
  TokenSeq tokens;         // generated tokens only
  std::size_t payload_bits = 0;
  std::size_t embedded_bits = 0;
  double pool_entropy_bits = 0.0;   // summed per step
  double token_entropy_bits = 0.0;  // summed per step, same candidate sets
  bool complete() const { return embedded_bits >= payload_bits; }
};

// Pool-level interval coding plus a payload-independent in-pool draw keyed
// by key' = PRF(key, "pool"). Generation is conditioned on the true token
// sequence, which the receiver reconstructs exactly.
AuxEmbedResult embed_aux(const Payload& payload, std::span<const TokenId> context,
                         const TokenizerProfile& profile, const Provider& provider,
                         const AuxConfig& config);

struct AuxExtraction {
  Bits bits;
  TokenSeq tokens;
};

// Walks the visible text: at each step, the candidates that are byte
// prefixes of the remaining text all sit in one pool; that pool yields the
// fragment, and replaying the in-pool draw yields the exact token.
// Throws SyncError when the text cannot be followed.
AuxExtraction extract_aux(std::string_view stego_text, std::span<const TokenId> context,
                          const TokenizerProfile& profile, const Provider& provider,
                          const CodecParams& params);

}  // namespace retoksync

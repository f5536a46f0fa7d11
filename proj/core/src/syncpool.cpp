#include "retoksync/syncpool.hpp"

#include <algorithm>
#include <numeric>

#include "retoksync/errors.hpp"

namespace retoksync {
namespace {

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

bool prefix_related(std::string_view a, std::string_view b) {
  return a.size() <= b.size() ? b.starts_with(a) : a.starts_with(b);
}

std::uint64_t draw_offset(const Key128& pool_key, std::uint64_t step, std::uint64_t digest,
                          std::uint64_t mass) {
  return prf64(pool_key, "pool-draw", {step, digest}) % mass;
}

MaskState state_at(const CodecParams& params, std::uint64_t step, std::uint64_t digest) {
  MaskState s;
  s.step = step;
  if (params.binding == MaskBinding::kContext) s.context_digest = digest;
  return s;
}

}  // namespace

std::optional<std::size_t> PoolPartition::pool_of(TokenId id) const {
  for (std::size_t i = 0; i < pools.size(); ++i) {
    if (std::find(pools[i].members.begin(), pools[i].members.end(), id) != pools[i].members.end()) {
      return i;
    }
  }
  return std::nullopt;
}

PoolPartition build_pools(const QuantizedDistribution& q, const TokenizerProfile& profile) {
  const std::size_t n = q.entries.size();
  std::vector<std::string_view> bytes(n);
  for (std::size_t i = 0; i < n; ++i) bytes[i] = profile.token_bytes(q.entries[i].id);

  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (prefix_related(bytes[a], bytes[b])) {
        const std::size_t ra = find_root(parent, a);
        const std::size_t rb = find_root(parent, b);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
      }
    }
  }

  std::vector<Pool> by_root(n);
  for (std::size_t i = 0; i < n; ++i) {
    Pool& pool = by_root[find_root(parent, i)];
    pool.members.push_back(q.entries[i].id);
    pool.mass += q.entries[i].mass;
  }

  PoolPartition out;
  out.pool_level.precision = q.precision;
  for (Pool& pool : by_root) {
    if (pool.members.empty()) continue;
    const TokenId label = *std::min_element(pool.members.begin(), pool.members.end());
    out.pool_level.entries.push_back({label, pool.mass});
    out.pools.push_back(std::move(pool));
  }
  std::vector<std::size_t> order(out.pools.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const QuantizedEntry& x = out.pool_level.entries[a];
    const QuantizedEntry& y = out.pool_level.entries[b];
    if (x.mass != y.mass) return x.mass > y.mass;
    return x.id < y.id;
  });
  PoolPartition sorted;
  sorted.pool_level.precision = q.precision;
  for (std::size_t i : order) {
    sorted.pools.push_back(std::move(out.pools[i]));
    sorted.pool_level.entries.push_back(out.pool_level.entries[i]);
  }
  return sorted;
}

TokenId pool_member(const Pool& pool, const QuantizedDistribution& q, std::uint64_t offset) {
  std::uint64_t hi = 0;
  for (TokenId id : pool.members) {
    const auto index = q.index_of(id);
    if (!index) throw DomainError("pool member missing from candidate set");
    hi += q.entries[*index].mass;
    if (offset < hi) return id;
  }
  throw DomainError("in-pool offset outside pool mass");
}

AuxEmbedResult embed_aux(const Payload& payload, std::span<const TokenId> context,
                         const TokenizerProfile& profile, const Provider& provider,
                         const AuxConfig& config) {
  const CodecParams& params = config.codec;
  const Key128 pool_key = derive_key(params.key, "pool");
  AuxEmbedResult out;
  out.payload_bits = payload.size();
  TokenSeq tokens(context.begin(), context.end());
  std::uint64_t digest = context_digest(params.key, tokens);
  std::size_t pointer = 0;

  for (std::size_t u = 0; u < config.max_tokens; ++u) {
    if (config.stop_when_embedded && pointer >= payload.size() && u >= config.min_tokens) break;
    const QuantizedDistribution q = candidate_set(provider, tokens, params.top_k, params.precision);
    const PoolPartition part = build_pools(q, profile);
    const std::uint64_t mask = mask_for(params, state_at(params, u, digest));
    const EncodedStep enc = enc_step(part.pool_level, payload, pointer, mask);
    const std::size_t pool_index = *part.pool_level.index_of(enc.outcome.token);
    const Pool& pool = part.pools[pool_index];
    const TokenId token = pool_member(pool, q, draw_offset(pool_key, u, digest, pool.mass));

    out.pool_entropy_bits += entropy_bits(part.pool_level);
    out.token_entropy_bits += entropy_bits(q);
    pointer = enc.next_pointer;
    tokens.push_back(token);
    out.tokens.push_back(token);
    digest = extend_digest(params.key, digest, token);
  }
  out.embedded_bits = pointer;
  out.stego_text = profile.decode(tokens);
  return out;
}

AuxExtraction extract_aux(std::string_view stego_text, std::span<const TokenId> context,
                          const TokenizerProfile& profile, const Provider& provider,
                          const CodecParams& params) {
  const Key128 pool_key = derive_key(params.key, "pool");
  const std::string prefix = profile.decode(context);
  if (!stego_text.starts_with(prefix)) {
    throw SyncError("auxiliary text does not start with the shared context");
  }
  AuxExtraction out;
  TokenSeq tokens(context.begin(), context.end());
  std::uint64_t digest = context_digest(params.key, tokens);
  std::size_t pos = prefix.size();

  for (std::uint64_t u = 0; pos < stego_text.size(); ++u) {
    const std::string_view rest = stego_text.substr(pos);
    const QuantizedDistribution q = candidate_set(provider, tokens, params.top_k, params.precision);
    const PoolPartition part = build_pools(q, profile);
    std::optional<std::size_t> pool_index;
    for (const QuantizedEntry& e : q.entries) {
      if (rest.starts_with(profile.token_bytes(e.id))) {
        pool_index = part.pool_of(e.id);
        break;
      }
    }
    if (!pool_index) {
      throw SyncError("no candidate matches the auxiliary text at byte " + std::to_string(pos));
    }
    const Pool& pool = part.pools[*pool_index];
    const TokenId label = part.pool_level.entries[*pool_index].id;
    const StepOutcome step =
        dec_step(part.pool_level, label, mask_for(params, state_at(params, u, digest)));
    const TokenId token = pool_member(pool, q, draw_offset(pool_key, u, digest, pool.mass));
    const std::string_view bytes = profile.token_bytes(token);
    if (!rest.starts_with(bytes)) {
      throw SyncError("in-pool draw disagrees with the auxiliary text at byte " +
                      std::to_string(pos));
    }
    append(out.bits, step.fragment);
    tokens.push_back(token);
    out.tokens.push_back(token);
    digest = extend_digest(params.key, digest, token);
    pos += bytes.size();
  }
  return out;
}

}  // namespace retoksync

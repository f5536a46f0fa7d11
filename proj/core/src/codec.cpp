#include "retoksync/codec.hpp"

#include <bit>

#include "retoksync/errors.hpp"

namespace retoksync {

Payload::Payload(Bits bits, const Key128& key)
    : bits_(std::move(bits)), pad_key_(derive_key(key, "pad")) {}

bool Payload::bit(std::size_t index) const {
  if (index < bits_.size()) return bits_[index];
  const std::size_t pad_index = index - bits_.size();
  const std::uint64_t word = prf64(pad_key_, "pad", {pad_index / 64});
  return ((word >> (63 - pad_index % 64)) & 1U) != 0;
}

std::uint64_t Payload::window(std::size_t offset, unsigned width) const {
  std::uint64_t value = 0;
  for (unsigned i = 0; i < width; ++i) value = (value << 1) | (bit(offset + i) ? 1U : 0U);
  return value;
}

Bits Payload::range(std::size_t offset, std::size_t length) const {
  Bits out(length);
  for (std::size_t i = 0; i < length; ++i) out[i] = bit(offset + i);
  return out;
}

std::uint64_t mask_block(const Key128& key, std::uint64_t step, unsigned precision) {
  return prf64(key, "mask", {step}) >> (64 - precision);
}

std::uint64_t mask_block(const Key128& key, std::uint64_t step, std::uint64_t context_digest,
                         unsigned precision) {
  return prf64(key, "mask-context", {step, context_digest}) >> (64 - precision);
}

std::uint64_t extend_digest(const Key128& key, std::uint64_t digest, TokenId token) {
  return prf64(key, "context", {digest, token});
}

std::uint64_t context_digest(const Key128& key, std::span<const TokenId> context) {
  std::uint64_t digest = prf64(key, "context-init", {});
  for (TokenId t : context) digest = extend_digest(key, digest, t);
  return digest;
}

MaskState mask_state_for(const CodecParams& params, std::span<const TokenId> context,
                         std::uint64_t step) {
  MaskState state;
  state.step = step;
  if (params.binding == MaskBinding::kContext) {
    state.context_digest = context_digest(params.key, context);
  }
  return state;
}

std::uint64_t mask_for(const CodecParams& params, const MaskState& state) {
  if (params.binding == MaskBinding::kContext) {
    return mask_block(params.key, state.step, state.context_digest, params.precision);
  }
  return mask_block(params.key, state.step, params.precision);
}

Interval interval_of(const QuantizedDistribution& q, std::size_t index) {
  std::uint64_t lo = 0;
  for (std::size_t i = 0; i < index; ++i) lo += q.entries[i].mass;
  return {lo, lo + q.entries[index].mass};
}

unsigned shared_prefix_len(Interval iv, unsigned precision) {
  const std::uint64_t diff = iv.lo ^ (iv.hi - 1);
  return precision - static_cast<unsigned>(std::bit_width(diff));
}

std::size_t select_index(const QuantizedDistribution& q, std::uint64_t r) {
  std::uint64_t hi = 0;
  for (std::size_t i = 0; i < q.entries.size(); ++i) {
    hi += q.entries[i].mass;
    if (r < hi) return i;
  }
  throw DomainError("value outside the quantized range");
}

EncodedStep enc_step(const QuantizedDistribution& q, const Payload& payload, std::size_t pointer,
                     std::uint64_t mask) {
  const unsigned p = q.precision;
  const std::uint64_t r = mask ^ payload.window(pointer, p);
  const std::size_t index = select_index(q, r);
  const unsigned len = shared_prefix_len(interval_of(q, index), p);

  EncodedStep out;
  out.outcome.token = q.entries[index].id;
  out.outcome.fragment_len = len;
  out.outcome.fragment = payload.range(pointer, len);
  out.outcome.synthetic = pointer + len > payload.size();
  out.next_pointer = pointer + len;
  return out;
}

StepOutcome dec_step(const QuantizedDistribution& q, TokenId token, std::uint64_t mask) {
  const auto index = q.index_of(token);
  if (!index) throw DecodeError("token " + std::to_string(token) + " outside candidate set", 0);
  const unsigned p = q.precision;
  const Interval iv = interval_of(q, *index);
  const unsigned len = shared_prefix_len(iv, p);

  StepOutcome out;
  out.token = token;
  out.fragment_len = len;
  if (len > 0) out.fragment = bits_of((iv.lo ^ mask) >> (p - len), len);
  return out;
}

Extractor::Extractor(const Provider& provider, const CodecParams& params, bool skip_x,
                     TokenSeq context)
    : provider_(&provider), params_(params), skip_x_(skip_x), context_len_(context.size()),
      tokens_(std::move(context)) {
  digests_.reserve(tokens_.size() + 1);
  digests_.push_back(context_digest(params_.key, {}));
  for (TokenId t : tokens_) digests_.push_back(extend_digest(params_.key, digests_.back(), t));
  refresh_state();
}

void Extractor::refresh_state() {
  result_.state.step = result_.steps.size();
  result_.state.context_digest =
      params_.binding == MaskBinding::kContext ? digests_.back() : 0;
}

const StepOutcome& Extractor::push(TokenId token) {
  const QuantizedDistribution q =
      candidate_set(*provider_, tokens_, params_.top_k, params_.precision);
  StepOutcome outcome;
  if (!q.contains(token)) {
    if (!skip_x_) {
      throw DecodeError("token " + std::to_string(token) + " outside candidate set at position " +
                            std::to_string(size()),
                        size());
    }
    outcome.token = token;
    outcome.skipped = true;
  } else {
    outcome = dec_step(q, token, mask_for(params_, result_.state));
  }
  push_known(std::move(outcome));
  return result_.steps.back();
}

void Extractor::push_known(StepOutcome outcome) {
  outcome.synthetic = false;
  result_.offsets.push_back(result_.pointer);
  result_.pointer += outcome.fragment_len;
  append(result_.bits, outcome.fragment);
  tokens_.push_back(outcome.token);
  digests_.push_back(extend_digest(params_.key, digests_.back(), outcome.token));
  result_.steps.push_back(std::move(outcome));
  refresh_state();
}

void Extractor::truncate(std::size_t steps) {
  if (steps >= size()) return;
  result_.pointer = result_.offsets[steps];
  result_.steps.resize(steps);
  result_.offsets.resize(steps);
  result_.bits.resize(result_.pointer);
  tokens_.resize(context_len_ + steps);
  digests_.resize(tokens_.size() + 1);
  refresh_state();
}

std::span<const TokenId> Extractor::sequence() const {
  return std::span<const TokenId>(tokens_).subspan(context_len_);
}

ExtractionResult dec(std::span<const TokenId> sequence, std::span<const TokenId> context,
                     const Provider& provider, const CodecParams& params, bool skip_x) {
  Extractor extractor(provider, params, skip_x, TokenSeq(context.begin(), context.end()));
  for (TokenId t : sequence) extractor.push(t);
  return extractor.result();
}

std::map<TokenId, double> marginal_check(const QuantizedDistribution& q, std::size_t trials,
                                         std::mt19937_64& rng) {
  if (trials == 0) throw DomainError("marginal_check needs at least one trial");
  const unsigned p = q.precision;
  const Key128 pad_key{};
  std::map<TokenId, std::uint64_t> counts;
  for (std::size_t t = 0; t < trials; ++t) {
    Payload payload(bits_of(rng() >> (64 - p), p), pad_key);
    const std::uint64_t mask = rng() >> (64 - p);
    ++counts[enc_step(q, payload, 0, mask).outcome.token];
  }
  std::map<TokenId, double> freq;
  for (const auto& [id, c] : counts) {
    freq[id] = static_cast<double>(c) / static_cast<double>(trials);
  }
  return freq;
}

std::map<TokenId, std::uint64_t> exhaustive_marginal(const QuantizedDistribution& q,
                                                     const Payload& payload,
                                                     std::size_t pointer) {
  if (q.precision > 24) throw PrecisionError("exhaustive marginal limited to P <= 24");
  std::map<TokenId, std::uint64_t> counts;
  for (std::uint64_t mask = 0; mask < q.scale(); ++mask) {
    ++counts[enc_step(q, payload, pointer, mask).outcome.token];
  }
  return counts;
}

}  // namespace retoksync

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <vector>

#include "retoksync/bits.hpp"
#include "retoksync/prf.hpp"
#include "retoksync/provider.hpp"
#include "retoksync/tokenizer.hpp"

namespace retoksync {

// What the per-step mask is keyed on besides the secret.
//  kContext:  (receiver-view index u, digest of the full token context)
//  kPosition: receiver-view index u only
// Both are computable by the receiver. kPosition repeats a mask whenever a
// merge shrinks the receiver view and the same index is generated again.
enum class MaskBinding { kContext, kPosition };

struct CodecParams {
  Key128 key;
  std::size_t top_k = 32;
  unsigned precision = kDefaultPrecision;
  MaskBinding binding = MaskBinding::kContext;
};

// The payload m followed by an endless keyed pad, so r stays uniform after
// the message runs out. Bits at index >= size() are synthetic.
class Payload {
 public:
  Payload(Bits bits, const Key128& key);

  std::size_t size() const { return bits_.size(); }
  const Bits& bits() const { return bits_; }
  bool bit(std::size_t index) const;
  // `width` bits starting at `offset`, first bit most significant.
  std::uint64_t window(std::size_t offset, unsigned width) const;
  Bits range(std::size_t offset, std::size_t length) const;

 private:
  Bits bits_;
  Key128 pad_key_;
};

// Receiver-reproducible mask state: everything here is derived from the
// receiver-view prefix, so resetting it is a matter of recomputing.
struct MaskState {
  std::uint64_t step = 0;
  std::uint64_t context_digest = 0;

  friend bool operator==(const MaskState&, const MaskState&) = default;
};

// P-bit mask from PRF(key, step).
std::uint64_t mask_block(const Key128& key, std::uint64_t step, unsigned precision);
// P-bit mask from PRF(key, step, context digest).
std::uint64_t mask_block(const Key128& key, std::uint64_t step, std::uint64_t context_digest,
                         unsigned precision);
// Chained digest of a token sequence: extend_digest folds in one token.
std::uint64_t context_digest(const Key128& key, std::span<const TokenId> context);
std::uint64_t extend_digest(const Key128& key, std::uint64_t digest, TokenId token);

// State and mask for generating receiver-view index `step` after `context`.
MaskState mask_state_for(const CodecParams& params, std::span<const TokenId> context,
                         std::uint64_t step);
std::uint64_t mask_for(const CodecParams& params, const MaskState& state);

struct StepOutcome {
  TokenId token = 0;
  unsigned fragment_len = 0;
  Bits fragment;
  bool skipped = false;    // X-token under Skip-X
  bool synthetic = false;  // fragment reaches past the payload into the pad

  friend bool operator==(const StepOutcome&, const StepOutcome&) = default;
};

struct Interval {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;  // exclusive
};

Interval interval_of(const QuantizedDistribution& q, std::size_t index);

// Length of the common binary prefix of lo and hi-1 as P-bit numbers.
unsigned shared_prefix_len(Interval iv, unsigned precision);

struct EncodedStep {
  StepOutcome outcome;
  std::size_t next_pointer = 0;
};

// r = mask XOR payload window(j, P); emits the token whose interval holds r
// and consumes the interval's shared prefix length in payload bits.
EncodedStep enc_step(const QuantizedDistribution& q, const Payload& payload, std::size_t pointer,
                     std::uint64_t mask);

// Same as enc_step but with r supplied directly (used by oracles).
std::size_t select_index(const QuantizedDistribution& q, std::uint64_t r);

// Inverse of enc_step for the selected token. Throws DecodeError if the
// token is not in q.
StepOutcome dec_step(const QuantizedDistribution& q, TokenId token, std::uint64_t mask);

struct ExtractionResult {
  std::vector<StepOutcome> steps;
  std::vector<std::size_t> offsets;  // pointer before each step
  Bits bits;                         // m-hat
  std::size_t pointer = 0;           // j-hat
  MaskState state;                   // s-hat: state for the next step

  friend bool operator==(const ExtractionResult&, const ExtractionResult&) = default;
};

// Left-to-right Dec with an explicit checkpoint API. Results for a prefix
// never depend on later tokens, so truncating and re-pushing reproduces a
// full restart exactly.
class Extractor {
 public:
  Extractor(const Provider& provider, const CodecParams& params, bool skip_x, TokenSeq context);

  // Decodes one receiver-view token (computes C_u itself).
  const StepOutcome& push(TokenId token);
  // Records an outcome already known to equal what push() would produce.
  void push_known(StepOutcome outcome);
  void truncate(std::size_t steps);

  std::size_t size() const { return result_.steps.size(); }
  std::span<const TokenId> sequence() const;
  const ExtractionResult& result() const { return result_; }
  std::size_t pointer() const { return result_.pointer; }

 private:
  void refresh_state();

  const Provider* provider_;
  CodecParams params_;
  bool skip_x_;
  std::size_t context_len_;
  TokenSeq tokens_;  // context followed by decoded tokens
  std::vector<std::uint64_t> digests_;  // digest of each prefix of tokens_
  ExtractionResult result_;
};

// Dec(sequence, s0) with optional Skip-X. `context` is the shared prefix the
// sequence follows. Throws DecodeError on an out-of-support token when
// skip_x is false.
ExtractionResult dec(std::span<const TokenId> sequence, std::span<const TokenId> context,
                     const Provider& provider, const CodecParams& params, bool skip_x);

// Empirical token frequencies of enc_step under uniformly random payload
// bits and mask.
std::map<TokenId, double> marginal_check(const QuantizedDistribution& q, std::size_t trials,
                                         std::mt19937_64& rng);

// Token counts of enc_step over every mask value in [0, 2^P) with a fixed
// payload. Requires P <= 24.
std::map<TokenId, std::uint64_t> exhaustive_marginal(const QuantizedDistribution& q,
                                                     const Payload& payload,
                                                     std::size_t pointer = 0);

}  // namespace retoksync

#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "retoksync/codec.hpp"
#include "retoksync/correction.hpp"
#include "retoksync/provider.hpp"
#include "retoksync/tokenizer.hpp"

namespace retoksync {

enum class ResetMode {
  kFullRestart,  // Dec over the whole receiver view from s0
  kIncremental,  // resume Dec from the last position shared with the old view
};

struct EmbedConfig {
  CodecParams codec;
  std::size_t tokens = 100;  // generation steps T
  bool detection = true;     // off: base codec only, no re-tokenization
  bool skip_x = true;
  bool buffering = true;
  bool anchor_deferral = true;
  ResetMode reset = ResetMode::kFullRestart;
  // Re-checks the receiver-view and pointer invariants after every
  // non-deferred step. Quadratic; keep off for timing runs.
  bool check_invariants = false;
};

struct AmbiguityEvent {
  std::size_t step = 0;        // generation index t (0-based)
  std::size_t first_diff = 0;  // receiver-view index after the context
  TokenSeq pred;               // x~pred from first_diff on
  TokenSeq retok;              // x~retok from first_diff on
  std::size_t pointer_before = 0;
  std::size_t pointer_after = 0;
};

struct StepStats {
  TokenId token = 0;
  double model_prob = 0.0;    // untruncated p(token | x~)
  double kld_bits = 0.0;      // codec vs truncated model at this step
  double entropy_bits = 0.0;  // of the quantized candidate set
  unsigned fragment_len = 0;
  bool retokenized = false;
  bool deferred = false;
  bool event = false;
};

struct EmbedResult {
  std::string stego_text;  // Detok(x), context included
  TokenSeq context;
  TokenSeq true_sequence;  // x, context included
  TokenSeq receiver_view;  // final x~ = Tok(stego_text)
  std::vector<AmbiguityEvent> events;
  std::vector<FragmentRecord> ledger;  // one per receiver-view token after the context
  std::vector<StepStats> steps;
  std::size_t payload_bits = 0;
  std::size_t embedded_bits = 0;  // final pointer j (= receiver j-hat)
  std::size_t provider_calls = 0;
  std::chrono::nanoseconds elapsed{0};

  std::size_t generated_tokens() const { return true_sequence.size() - context.size(); }
};

// The sender loop, one generation step at a time. Copyable, so oracles can
// branch a run at any step.
class Sender {
 public:
  Sender(const TokenizerProfile& profile, const Provider& provider, Payload payload,
         TokenSeq context, EmbedConfig config);

  bool done() const { return t_ >= config_.tokens; }
  void step();
  // Replaces the PRF mask of the next step only. Used by exhaustive oracles
  // that enumerate the encoder's randomness.
  void override_next_mask(std::uint64_t mask) { mask_override_ = mask; }
  // Runs the end-of-generation detection pass and returns the result.
  EmbedResult finish();

  std::span<const TokenId> receiver_view() const { return view_; }
  std::size_t pointer() const { return pointer_; }
  const std::string& text() const { return retok_.text(); }

 private:
  // Compares x~pred with Tok(Detok(x)); `outcome` is null for the final pass.
  void full_check(std::size_t t, StepOutcome* outcome);
  void check_invariants() const;
  std::vector<FragmentRecord> build_ledger() const;

  const TokenizerProfile* profile_;
  const Provider* provider_;
  Payload payload_;
  EmbedConfig config_;
  std::size_t context_len_;

  TokenSeq true_;              // x
  TokenSeq view_;              // x~
  IncrementalTokenizer retok_;  // tracks Tok(Detok(x))
  TokenSeq buffer_;            // B
  Extractor records_;          // Dec of x~ (after context), kept in sync
  std::size_t pointer_ = 0;    // j
  MaskState mask_state_;       // s
  std::size_t t_ = 0;
  bool pending_ = false;       // a deferred append is awaiting a full check
  std::optional<std::uint64_t> mask_override_;

  std::vector<AmbiguityEvent> events_;
  std::vector<StepStats> steps_;
  std::size_t provider_calls_ = 0;
  std::chrono::nanoseconds elapsed_{0};
};

EmbedResult embed(const Payload& payload, std::span<const TokenId> context,
                  const TokenizerProfile& profile, const Provider& provider,
                  const EmbedConfig& config);

// True iff the sequences differ in length or at any position.
bool detect_ambiguity(std::span<const TokenId> pred, std::span<const TokenId> retok);

struct ResetPoint {
  std::size_t pointer = 0;
  MaskState state;
};

// (j-hat, s-hat) <- Dec(retok, s0). `retok` excludes the shared context.
ResetPoint corrective_reset(std::span<const TokenId> retok, std::span<const TokenId> context,
                            const Provider& provider, const CodecParams& params, bool skip_x);

// Receiver side: Tok(stego_text), strip the context prefix, Dec.
// Throws SyncError when the text does not start with the context tokens.
ExtractionResult extract(std::string_view stego_text, std::span<const TokenId> context,
                         const TokenizerProfile& profile, const Provider& provider,
                         const CodecParams& params, bool skip_x);

struct AmbiguityTrace {
  bool ambiguous = false;
  std::size_t trigger_count = 0;
  std::size_t token_count = 0;
};

AmbiguityTrace ambiguity_trace(const EmbedResult& result);

// Receiver-view indices (after the context) touched by any event: the union
// of [first_diff, |retok|) over events.
std::vector<bool> event_affected_positions(const EmbedResult& result);

}  // namespace retoksync

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "retoksync/bits.hpp"
#include "retoksync/core.hpp"
#include "retoksync/correction.hpp"
#include "retoksync/provider.hpp"
#include "retoksync/syncpool.hpp"
#include "retoksync/tokenizer.hpp"

namespace retoksync {

struct SessionConfig {
  std::size_t group_size = 10;
  std::size_t sample_count = 50;  // rounded down to whole groups
  std::size_t sample_tokens = 100;
  std::size_t payload_bits = 0;   // per sample; 0 means precision * tokens
  EmbedConfig primary;            // tokens is overridden by sample_tokens
  std::size_t aux_top_k = 64;
  std::size_t aux_max_tokens = 4096;
  std::vector<std::string> contexts;  // cycled over samples
  std::string aux_context;
  Key128 key;
  std::uint64_t payload_seed = 1;
  std::size_t jobs = 1;  // groups simulated concurrently
};

struct GroupReport {
  std::size_t group = 0;
  std::size_t samples = 0;
  std::size_t tokens = 0;  // L, receiver-view tokens in the group
  std::size_t generated_tokens = 0;
  std::size_t embedded_bits = 0;
  std::size_t residual_bit_errors = 0;  // before correction
  std::size_t erroneous_tokens = 0;
  std::size_t correction_items = 0;
  std::size_t correction_bits = 0;
  std::size_t aux_tokens = 0;
  double primary_entropy_bits = 0.0;
  double aux_entropy_bits = 0.0;
  std::size_t events = 0;
  Bits correction_message;
  bool success = false;
  std::string failure;
};

struct SessionReport {
  std::vector<GroupReport> groups;
  double success_rate = 0.0;
  double avg_errors = 0.0;  // residual bit errors per group
  double avg_correction_bits = 0.0;
  std::size_t max_correction_bits = 0;
  double primary_utilization = 0.0;
  double aux_utilization = 0.0;
  double bit_error_ratio = 0.0;
  double token_error_ratio = 0.0;
  double corr_to_embed_ratio = 0.0;

  static SessionReport aggregate(std::vector<GroupReport> groups);
};

struct SenderOutput {
  std::vector<std::string> primary_texts;
  std::string aux_text;
  std::vector<EmbedResult> runs;
  GroupLedger ledger;
  std::vector<CorrectionItem> items;
  Bits message;
  AuxEmbedResult aux;
};

struct ReceiverOutput {
  std::vector<Bits> payloads;     // corrected, truncated to payload lengths
  std::vector<Bits> uncorrected;  // straight primary extraction
  std::vector<CorrectionItem> items;
};

// Two-channel orchestration: n ReTokSync samples per group plus one
// Syncpool sample carrying the group's correction message. Sample keys and
// contexts follow a fixed public schedule.
class Session {
 public:
  Session(const TokenizerProfile& profile, const Provider& primary, const Provider& aux,
          SessionConfig config);

  SenderOutput run_sender(std::size_t group, std::span<const Bits> payloads) const;
  ReceiverOutput run_receiver(std::size_t group, std::span<const std::string> primary_texts,
                              const std::string& aux_text,
                              std::span<const std::size_t> payload_lengths) const;
  SessionReport simulate() const;

  const SessionConfig& config() const { return config_; }
  std::vector<Bits> make_payloads(std::size_t group) const;
  Key128 sample_key(std::size_t group, std::size_t index) const;
  Key128 aux_key(std::size_t group) const;
  const std::string& context_for(std::size_t group, std::size_t index) const;

 private:
  const TokenizerProfile* profile_;
  const Provider* primary_;
  const Provider* aux_;
  SessionConfig config_;
};

}  // namespace retoksync

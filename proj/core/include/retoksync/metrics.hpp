#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "retoksync/core.hpp"
#include "retoksync/provider.hpp"
#include "retoksync/session.hpp"
#include "retoksync/tokenizer.hpp"

namespace retoksync {

// KL(p || q) in bits. Throws DivergenceError if p has mass outside supp(q).
double kld_bits(const Distribution& p, const Distribution& q);

// Codec sampling distribution (masses / 2^P) against the truncated,
// renormalized model distribution.
double step_kld_bits(const QuantizedDistribution& codec, const Distribution& truncated);

// 2^(-(1/N) sum log2 p_i). Returns +infinity if any probability is zero.
double ppl(std::span<const double> probs);

struct CapacityUtilization {
  double capacity = 0.0;     // bits per generated token
  double utilization = 0.0;  // embedded bits / available entropy
};

// Throws DomainError when tokens == 0.
CapacityUtilization capacity_and_utilization(std::size_t embedded_bits, std::size_t tokens,
                                             double entropy_bits_sum);
CapacityUtilization capacity_and_utilization(const EmbedResult& run);

// Percent. Throws DomainError for a non-positive baseline.
double rto(double t_method, double t_baseline);

struct AmbiguityStatistics {
  std::size_t samples = 0;
  std::size_t ambiguous_samples = 0;
  std::size_t triggers = 0;
  std::size_t tokens = 0;
  double sample_rate = 0.0;
  double token_rate = 0.0;
};

AmbiguityStatistics ambiguity_statistics(std::span<const AmbiguityTrace> runs);

struct ErrorRatios {
  double bit_error_ratio = 0.0;
  double token_error_ratio = 0.0;
  double corr_to_embed_ratio = 0.0;
};

ErrorRatios error_ratios(std::span<const GroupReport> groups);

// Per-run measurements feeding the summary report.
struct RunMetrics {
  double ppl = 0.0;
  double ave_kld = 0.0;
  double max_kld = 0.0;
  std::size_t embedded_bits = 0;
  std::size_t tokens = 0;
  double entropy_bits = 0.0;
  std::size_t compared_bits = 0;
  std::size_t bit_errors = 0;
  std::size_t erroneous_tokens = 0;
  AmbiguityTrace trace;
  double seconds = 0.0;
};

// `extracted` is the receiver's m-hat; accuracy is measured over the
// embedded payload prefix.
RunMetrics measure_run(const EmbedResult& run, const Bits& payload, const Bits& extracted);

struct MetricsReport {
  double ave_ppl = 0.0;
  double ave_kld = 0.0;
  double max_kld = 0.0;
  double capacity = 0.0;
  double utilization = 0.0;
  double total_time = 0.0;  // seconds
  double rto = 0.0;         // percent, against the supplied baseline time
  double accuracy = 0.0;
  double sample_ambiguity_rate = 0.0;
  double token_trigger_rate = 0.0;
  double bit_error_ratio = 0.0;
  double token_error_ratio = 0.0;
};

// Aggregates runs; rto is filled only when baseline_seconds > 0.
MetricsReport summarize(std::span<const RunMetrics> runs, double baseline_seconds = 0.0);

// ---- Visible-text transcript oracle ----------------------------------

using TextDistribution = std::map<std::string, double>;

double total_variation(const TextDistribution& a, const TextDistribution& b);

struct TranscriptSetup {
  const TokenizerProfile* profile = nullptr;
  const Provider* provider = nullptr;
  TokenSeq context;
  std::size_t top_k = 32;
  unsigned precision = kDefaultPrecision;
  std::size_t steps = 3;
};

// Exact natural channel: Q_nat applied `steps` times, where the one-step map
// is Phi(y, v) = Detok(Tok(y) || [v]) and v follows the codec's sampling
// distribution C(. | Tok(y)).
TextDistribution natural_channel_exact(const TranscriptSetup& setup);

// Monte-Carlo natural channel.
TextDistribution natural_channel_sample(const TranscriptSetup& setup, std::size_t trials,
                                        std::mt19937_64& rng);

// Monte-Carlo ReTokSync channel; fresh random key and payload per trial.
TextDistribution retoksync_channel_sample(const TranscriptSetup& setup, EmbedConfig config,
                                          std::size_t trials, std::mt19937_64& rng);

// Exact ReTokSync channel: every mask value in [0, 2^P) is tried at every
// step. Branches that reach the same sender state (text, receiver view,
// pointer) are merged, since their futures coincide. Requires P <= 16.
TextDistribution retoksync_channel_exhaustive(const TranscriptSetup& setup, EmbedConfig config);

struct TranscriptComparison {
  TextDistribution natural;
  TextDistribution stego;
  double tv = 0.0;
};

// Exact natural channel against `trials` sampled ReTokSync transcripts.
TranscriptComparison transcript_oracle(const TranscriptSetup& setup, const EmbedConfig& config,
                                       std::size_t trials, std::uint64_t seed);

}  // namespace retoksync

#include "retoksync/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <unordered_map>

#include "retoksync/errors.hpp"

namespace retoksync {

double kld_bits(const Distribution& p, const Distribution& q) {
  std::unordered_map<TokenId, double> qmap;
  for (const TokenProb& e : q.entries) qmap[e.id] += e.prob;
  double sum = 0.0;
  for (const TokenProb& e : p.entries) {
    if (e.prob <= 0.0) continue;
    const auto it = qmap.find(e.id);
    if (it == qmap.end() || it->second <= 0.0) {
      throw DivergenceError("token " + std::to_string(e.id) + " outside the reference support");
    }
    sum += e.prob * std::log2(e.prob / it->second);
  }
  return std::max(sum, 0.0);
}

double step_kld_bits(const QuantizedDistribution& codec, const Distribution& truncated) {
  Distribution p;
  p.entries.reserve(codec.entries.size());
  const double scale = static_cast<double>(codec.scale());
  for (const QuantizedEntry& e : codec.entries) {
    p.entries.push_back({e.id, static_cast<double>(e.mass) / scale});
  }
  return kld_bits(p, truncated);
}

double ppl(std::span<const double> probs) {
  if (probs.empty()) throw DomainError("perplexity needs at least one token");
  double log_sum = 0.0;
  for (double p : probs) {
    if (!(p > 0.0)) return std::numeric_limits<double>::infinity();
    log_sum += std::log2(p);
  }
  return std::exp2(-log_sum / static_cast<double>(probs.size()));
}

CapacityUtilization capacity_and_utilization(std::size_t embedded_bits, std::size_t tokens,
                                             double entropy_bits_sum) {
  if (tokens == 0) throw DomainError("capacity is undefined for zero tokens");
  CapacityUtilization out;
  out.capacity = static_cast<double>(embedded_bits) / static_cast<double>(tokens);
  out.utilization =
      entropy_bits_sum > 0.0 ? static_cast<double>(embedded_bits) / entropy_bits_sum : 0.0;
  return out;
}

CapacityUtilization capacity_and_utilization(const EmbedResult& run) {
  double entropy = 0.0;
  for (const StepStats& s : run.steps) entropy += s.entropy_bits;
  return capacity_and_utilization(std::min(run.embedded_bits, run.payload_bits),
                                  run.generated_tokens(), entropy);
}

double rto(double t_method, double t_baseline) {
  if (!(t_baseline > 0.0)) throw DomainError("baseline time must be positive");
  return (t_method - t_baseline) / t_baseline * 100.0;
}

AmbiguityStatistics ambiguity_statistics(std::span<const AmbiguityTrace> runs) {
  AmbiguityStatistics s;
  s.samples = runs.size();
  for (const AmbiguityTrace& r : runs) {
    s.ambiguous_samples += r.ambiguous ? 1 : 0;
    s.triggers += r.trigger_count;
    s.tokens += r.token_count;
  }
  if (s.samples > 0) {
    s.sample_rate = static_cast<double>(s.ambiguous_samples) / static_cast<double>(s.samples);
  }
  if (s.tokens > 0) s.token_rate = static_cast<double>(s.triggers) / static_cast<double>(s.tokens);
  return s;
}

ErrorRatios error_ratios(std::span<const GroupReport> groups) {
  std::size_t bit_errors = 0;
  std::size_t embedded = 0;
  std::size_t bad_tokens = 0;
  std::size_t tokens = 0;
  std::size_t correction = 0;
  for (const GroupReport& g : groups) {
    bit_errors += g.residual_bit_errors;
    embedded += g.embedded_bits;
    bad_tokens += g.erroneous_tokens;
    tokens += g.generated_tokens;
    correction += g.correction_bits;
  }
  ErrorRatios r;
  if (embedded > 0) {
    r.bit_error_ratio = static_cast<double>(bit_errors) / static_cast<double>(embedded);
    r.corr_to_embed_ratio = static_cast<double>(correction) / static_cast<double>(embedded);
  }
  if (tokens > 0) r.token_error_ratio = static_cast<double>(bad_tokens) / static_cast<double>(tokens);
  return r;
}

RunMetrics measure_run(const EmbedResult& run, const Bits& payload, const Bits& extracted) {
  RunMetrics m;
  std::vector<double> probs;
  probs.reserve(run.steps.size());
  double kld_sum = 0.0;
  for (const StepStats& s : run.steps) {
    probs.push_back(s.model_prob);
    kld_sum += s.kld_bits;
    m.max_kld = std::max(m.max_kld, s.kld_bits);
    m.entropy_bits += s.entropy_bits;
  }
  if (!probs.empty()) {
    m.ppl = ppl(probs);
    m.ave_kld = kld_sum / static_cast<double>(probs.size());
  }
  m.embedded_bits = std::min(run.embedded_bits, payload.size());
  m.tokens = run.generated_tokens();
  m.compared_bits = m.embedded_bits;
  for (std::size_t i = 0; i < m.compared_bits; ++i) {
    if (i >= extracted.size() || extracted[i] != payload[i]) ++m.bit_errors;
  }
  for (const FragmentRecord& r : run.ledger) {
    if (r.received != r.intended) ++m.erroneous_tokens;
  }
  m.trace = ambiguity_trace(run);
  m.seconds = std::chrono::duration<double>(run.elapsed).count();
  return m;
}

MetricsReport summarize(std::span<const RunMetrics> runs, double baseline_seconds) {
  MetricsReport r;
  if (runs.empty()) return r;
  double ppl_sum = 0.0;
  double kld_sum = 0.0;
  std::size_t steps = 0;
  std::size_t embedded = 0;
  std::size_t tokens = 0;
  double entropy = 0.0;
  std::size_t compared = 0;
  std::size_t errors = 0;
  std::size_t bad_tokens = 0;
  std::vector<AmbiguityTrace> traces;
  for (const RunMetrics& m : runs) {
    ppl_sum += m.ppl;
    kld_sum += m.ave_kld * static_cast<double>(m.tokens);
    steps += m.tokens;
    r.max_kld = std::max(r.max_kld, m.max_kld);
    embedded += m.embedded_bits;
    tokens += m.tokens;
    entropy += m.entropy_bits;
    compared += m.compared_bits;
    errors += m.bit_errors;
    bad_tokens += m.erroneous_tokens;
    r.total_time += m.seconds;
    traces.push_back(m.trace);
  }
  r.ave_ppl = ppl_sum / static_cast<double>(runs.size());
  if (steps > 0) r.ave_kld = kld_sum / static_cast<double>(steps);
  if (tokens > 0) {
    const CapacityUtilization cu = capacity_and_utilization(embedded, tokens, entropy);
    r.capacity = cu.capacity;
    r.utilization = cu.utilization;
    r.token_error_ratio = static_cast<double>(bad_tokens) / static_cast<double>(tokens);
  }
  if (baseline_seconds > 0.0) r.rto = rto(r.total_time, baseline_seconds);
  r.accuracy = compared > 0 ? 1.0 - static_cast<double>(errors) / static_cast<double>(compared) : 1.0;
  if (embedded > 0) r.bit_error_ratio = static_cast<double>(errors) / static_cast<double>(embedded);
  const AmbiguityStatistics stats = ambiguity_statistics(traces);
  r.sample_ambiguity_rate = stats.sample_rate;
  r.token_trigger_rate = stats.token_rate;
  return r;
}

double total_variation(const TextDistribution& a, const TextDistribution& b) {
  double sum = 0.0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      sum += std::fabs(ia->second);
      ++ia;
    } else if (ia == a.end() || ib->first < ia->first) {
      sum += std::fabs(ib->second);
      ++ib;
    } else {
      sum += std::fabs(ia->second - ib->second);
      ++ia;
      ++ib;
    }
  }
  return sum / 2.0;
}

namespace {

void check_setup(const TranscriptSetup& setup) {
  if (setup.profile == nullptr || setup.provider == nullptr) {
    throw ConfigError("transcript setup needs a profile and a provider");
  }
}

TextDistribution normalize(const std::map<std::string, std::uint64_t>& counts,
                           std::size_t trials) {
  TextDistribution out;
  for (const auto& [text, c] : counts) {
    out[text] = static_cast<double>(c) / static_cast<double>(trials);
  }
  return out;
}

}  // namespace

TextDistribution natural_channel_exact(const TranscriptSetup& setup) {
  check_setup(setup);
  TextDistribution current{{setup.profile->decode(setup.context), 1.0}};
  for (std::size_t step = 0; step < setup.steps; ++step) {
    TextDistribution next;
    for (const auto& [text, prob] : current) {
      const TokenSeq tokens = setup.profile->encode(text);
      const QuantizedDistribution q =
          candidate_set(*setup.provider, tokens, setup.top_k, setup.precision);
      const double scale = static_cast<double>(q.scale());
      for (const QuantizedEntry& e : q.entries) {
        TokenSeq extended = tokens;
        extended.push_back(e.id);
        next[setup.profile->decode(extended)] += prob * static_cast<double>(e.mass) / scale;
      }
    }
    current = std::move(next);
  }
  return current;
}

TextDistribution natural_channel_sample(const TranscriptSetup& setup, std::size_t trials,
                                        std::mt19937_64& rng) {
  check_setup(setup);
  std::map<std::string, std::uint64_t> counts;
  const std::string start = setup.profile->decode(setup.context);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    std::string text = start;
    for (std::size_t step = 0; step < setup.steps; ++step) {
      const TokenSeq tokens = setup.profile->encode(text);
      const QuantizedDistribution q =
          candidate_set(*setup.provider, tokens, setup.top_k, setup.precision);
      const std::uint64_t r = rng() >> (64 - q.precision);
      text += setup.profile->token_bytes(q.entries[select_index(q, r)].id);
    }
    ++counts[text];
  }
  return normalize(counts, trials);
}

TextDistribution retoksync_channel_sample(const TranscriptSetup& setup, EmbedConfig config,
                                          std::size_t trials, std::mt19937_64& rng) {
  check_setup(setup);
  config.tokens = setup.steps;
  config.codec.top_k = setup.top_k;
  config.codec.precision = setup.precision;
  const std::size_t payload_len = setup.precision * (setup.steps + 1);
  std::map<std::string, std::uint64_t> counts;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    for (auto& byte : config.codec.key.bytes) byte = static_cast<std::uint8_t>(rng());
    Bits bits(payload_len);
    for (std::size_t i = 0; i < payload_len; ++i) bits[i] = (rng() >> 63) != 0;
    const EmbedResult run = embed(Payload(std::move(bits), config.codec.key), setup.context,
                                  *setup.profile, *setup.provider, config);
    ++counts[run.stego_text];
  }
  return normalize(counts, trials);
}

TextDistribution retoksync_channel_exhaustive(const TranscriptSetup& setup, EmbedConfig config) {
  check_setup(setup);
  if (setup.precision > 16) throw PrecisionError("exhaustive transcript limited to P <= 16");
  config.tokens = setup.steps;
  config.codec.top_k = setup.top_k;
  config.codec.precision = setup.precision;
  const std::uint64_t scale = std::uint64_t{1} << setup.precision;
  const Payload payload(Bits(setup.precision * (setup.steps + 1), false), config.codec.key);

  TextDistribution out;
  const std::function<void(const Sender&, double)> walk = [&](const Sender& sender, double prob) {
    if (sender.done()) {
      Sender last = sender;
      out[last.finish().stego_text] += prob;
      return;
    }
    struct Branch {
      Sender sender;
      std::uint64_t count;
    };
    std::map<std::tuple<std::string, TokenSeq, std::size_t>, Branch> branches;
    for (std::uint64_t mask = 0; mask < scale; ++mask) {
      Sender child = sender;
      child.override_next_mask(mask);
      child.step();
      auto key = std::make_tuple(child.text(), TokenSeq(child.receiver_view().begin(),
                                                        child.receiver_view().end()),
                                 child.pointer());
      auto it = branches.find(key);
      if (it == branches.end()) {
        branches.emplace(std::move(key), Branch{std::move(child), 1});
      } else {
        ++it->second.count;
      }
    }
    for (const auto& [key, branch] : branches) {
      walk(branch.sender, prob * static_cast<double>(branch.count) / static_cast<double>(scale));
    }
  };
  walk(Sender(*setup.profile, *setup.provider, payload, setup.context, config), 1.0);
  return out;
}

TranscriptComparison transcript_oracle(const TranscriptSetup& setup, const EmbedConfig& config,
                                       std::size_t trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TranscriptComparison c;
  c.natural = natural_channel_exact(setup);
  c.stego = retoksync_channel_sample(setup, config, trials, rng);
  c.tv = total_variation(c.natural, c.stego);
  return c;
}

}  // namespace retoksync

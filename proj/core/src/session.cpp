#include "retoksync/session.hpp"

#include <algorithm>
#include <atomic>
#include <random>
#include <thread>

#include "retoksync/errors.hpp"
#include "retoksync/metrics.hpp"

namespace retoksync {
namespace {

bool is_prefix(const Bits& prefix, const Bits& whole) {
  return prefix.size() <= whole.size() && std::equal(prefix.begin(), prefix.end(), whole.begin());
}

}  // namespace

SessionReport SessionReport::aggregate(std::vector<GroupReport> groups) {
  SessionReport r;
  r.groups = std::move(groups);
  if (r.groups.empty()) return r;
  std::size_t successes = 0;
  std::size_t errors = 0;
  std::size_t correction = 0;
  std::size_t embedded = 0;
  double primary_entropy = 0.0;
  double aux_entropy = 0.0;
  for (const GroupReport& g : r.groups) {
    successes += g.success ? 1 : 0;
    errors += g.residual_bit_errors;
    correction += g.correction_bits;
    r.max_correction_bits = std::max(r.max_correction_bits, g.correction_bits);
    embedded += g.embedded_bits;
    primary_entropy += g.primary_entropy_bits;
    aux_entropy += g.aux_entropy_bits;
  }
  const auto n = static_cast<double>(r.groups.size());
  r.success_rate = static_cast<double>(successes) / n;
  r.avg_errors = static_cast<double>(errors) / n;
  r.avg_correction_bits = static_cast<double>(correction) / n;
  r.primary_utilization = primary_entropy > 0.0 ? static_cast<double>(embedded) / primary_entropy : 0.0;
  r.aux_utilization = aux_entropy > 0.0 ? static_cast<double>(correction) / aux_entropy : 0.0;
  const ErrorRatios ratios = error_ratios(r.groups);
  r.bit_error_ratio = ratios.bit_error_ratio;
  r.token_error_ratio = ratios.token_error_ratio;
  r.corr_to_embed_ratio = ratios.corr_to_embed_ratio;
  return r;
}

Session::Session(const TokenizerProfile& profile, const Provider& primary, const Provider& aux,
                 SessionConfig config)
    : profile_(&profile), primary_(&primary), aux_(&aux), config_(std::move(config)) {
  if (config_.group_size == 0) throw ConfigError("group size must be at least 1");
  if (config_.sample_count < config_.group_size) {
    throw ConfigError("sample count must cover at least one group");
  }
  if (config_.contexts.empty()) config_.contexts.emplace_back();
  if (config_.jobs == 0) config_.jobs = 1;
}

Key128 Session::sample_key(std::size_t group, std::size_t index) const {
  return derive_key(config_.key, "sample", {group, index});
}

Key128 Session::aux_key(std::size_t group) const {
  return derive_key(config_.key, "aux", {group});
}

const std::string& Session::context_for(std::size_t group, std::size_t index) const {
  return config_.contexts[(group * config_.group_size + index) % config_.contexts.size()];
}

std::vector<Bits> Session::make_payloads(std::size_t group) const {
  const std::size_t length = config_.payload_bits != 0
                                 ? config_.payload_bits
                                 : config_.primary.codec.precision * config_.sample_tokens;
  const Key128 seed_key = Key128::from_seed(config_.payload_seed);
  std::vector<Bits> out;
  for (std::size_t i = 0; i < config_.group_size; ++i) {
    std::mt19937_64 rng(prf64(seed_key, "payload", {group, i}));
    Bits bits(length);
    for (std::size_t b = 0; b < length; ++b) bits[b] = (rng() >> 63) != 0;
    out.push_back(std::move(bits));
  }
  return out;
}

SenderOutput Session::run_sender(std::size_t group, std::span<const Bits> payloads) const {
  if (payloads.size() != config_.group_size) throw ConfigError("one payload per sample expected");
  SenderOutput out;
  for (std::size_t i = 0; i < payloads.size(); ++i) {
    EmbedConfig ec = config_.primary;
    ec.tokens = config_.sample_tokens;
    ec.codec.key = sample_key(group, i);
    const TokenSeq context = profile_->encode(context_for(group, i));
    EmbedResult run = embed(Payload(payloads[i], ec.codec.key), context, *profile_, *primary_, ec);
    out.primary_texts.push_back(run.stego_text);
    out.ledger.records.insert(out.ledger.records.end(), run.ledger.begin(), run.ledger.end());
    out.ledger.sample_ends.push_back(out.ledger.records.size());
    out.runs.push_back(std::move(run));
  }
  out.items = diff_group(out.ledger);
  out.message = encode_message(out.items, out.ledger.size());

  AuxConfig ac;
  ac.codec = config_.primary.codec;
  ac.codec.key = aux_key(group);
  ac.codec.top_k = config_.aux_top_k;
  ac.max_tokens = config_.aux_max_tokens;
  out.aux = embed_aux(Payload(out.message, ac.codec.key), profile_->encode(config_.aux_context),
                      *profile_, *aux_, ac);
  out.aux_text = out.aux.stego_text;
  return out;
}

ReceiverOutput Session::run_receiver(std::size_t group, std::span<const std::string> primary_texts,
                                     const std::string& aux_text,
                                     std::span<const std::size_t> payload_lengths) const {
  if (primary_texts.size() != config_.group_size || payload_lengths.size() != config_.group_size) {
    throw ConfigError("one text and payload length per sample expected");
  }
  ReceiverOutput out;
  std::vector<Bits> fragments;
  std::vector<std::size_t> lengths;
  std::vector<std::size_t> sample_ends;
  for (std::size_t i = 0; i < primary_texts.size(); ++i) {
    CodecParams params = config_.primary.codec;
    params.key = sample_key(group, i);
    const ExtractionResult ex = extract(primary_texts[i], profile_->encode(context_for(group, i)),
                                        *profile_, *primary_, params, config_.primary.skip_x);
    for (const StepOutcome& s : ex.steps) {
      fragments.push_back(s.fragment);
      lengths.push_back(s.fragment_len);
    }
    sample_ends.push_back(fragments.size());
    Bits bits = ex.bits;
    if (bits.size() > payload_lengths[i]) bits.resize(payload_lengths[i]);
    out.uncorrected.push_back(std::move(bits));
  }

  CodecParams aux_params = config_.primary.codec;
  aux_params.key = aux_key(group);
  aux_params.top_k = config_.aux_top_k;
  const AuxExtraction aux = extract_aux(aux_text, profile_->encode(config_.aux_context), *profile_,
                                        *aux_, aux_params);
  out.items = parse_message(aux.bits, lengths, fragments.size());
  out.payloads = apply_corrections(out.items, fragments, sample_ends);
  for (std::size_t i = 0; i < out.payloads.size(); ++i) {
    if (out.payloads[i].size() > payload_lengths[i]) out.payloads[i].resize(payload_lengths[i]);
  }
  return out;
}

SessionReport Session::simulate() const {
  const std::size_t group_count = config_.sample_count / config_.group_size;
  std::vector<GroupReport> reports(group_count);

  const auto run_group = [&](std::size_t g) {
    GroupReport& rep = reports[g];
    rep.group = g;
    rep.samples = config_.group_size;
    try {
      const std::vector<Bits> payloads = make_payloads(g);
      const SenderOutput so = run_sender(g, payloads);
      std::vector<std::size_t> lengths;
      for (std::size_t i = 0; i < so.runs.size(); ++i) {
        const EmbedResult& run = so.runs[i];
        lengths.push_back(payloads[i].size());
        rep.generated_tokens += run.generated_tokens();
        rep.embedded_bits += std::min(run.embedded_bits, payloads[i].size());
        rep.events += run.events.size();
        for (const StepStats& s : run.steps) rep.primary_entropy_bits += s.entropy_bits;
      }
      rep.tokens = so.ledger.size();
      for (const FragmentRecord& r : so.ledger.records) {
        rep.residual_bit_errors += hamming(r.received, r.intended);
      }
      rep.erroneous_tokens = so.items.size();
      rep.correction_items = so.items.size();
      rep.correction_bits = so.message.size();
      rep.correction_message = so.message;
      rep.aux_tokens = so.aux.tokens.size();
      rep.aux_entropy_bits = so.aux.pool_entropy_bits;
      if (!so.aux.complete()) {
        rep.failure = "auxiliary sample ran out of tokens before embedding the correction message";
        return;
      }

      const ReceiverOutput ro = run_receiver(g, so.primary_texts, so.aux_text, lengths);
      for (std::size_t i = 0; i < payloads.size(); ++i) {
        const std::size_t expected = std::min(so.runs[i].embedded_bits, payloads[i].size());
        if (ro.payloads[i].size() != expected || !is_prefix(ro.payloads[i], payloads[i])) {
          rep.failure = "sample " + std::to_string(i) + " not recovered";
          return;
        }
      }
      rep.success = true;
    } catch (const Error& e) {
      rep.failure = e.what();
    }
  };

  const std::size_t workers = std::min(config_.jobs, std::max<std::size_t>(group_count, 1));
  if (workers <= 1) {
    for (std::size_t g = 0; g < group_count; ++g) run_group(g);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t g = next++; g < group_count; g = next++) run_group(g);
      });
    }
    for (std::thread& t : pool) t.join();
  }
  return SessionReport::aggregate(std::move(reports));
}

}  // namespace retoksync

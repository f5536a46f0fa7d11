// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "retoksync/codec.hpp"
#include "retoksync/config.hpp"
#include "retoksync/core.hpp"
#include "retoksync/correction.hpp"
#include "retoksync/errors.hpp"
#include "retoksync/metrics.hpp"
#include "retoksync/session.hpp"
#include "retoksync/syncpool.hpp"
#include "retoksync/toy.hpp"

using namespace retoksync;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [violated: " << what << "]";
    }
  }
};

int failures = 0;

void report(int id, const std::string& name, const std::function<void(Verdict&)>& body) {
  Verdict v;
  const auto start = Clock::now();
  try {
    body(v);
  } catch (const std::exception& e) {
    v.pass = false;
    v.detail << " [exception: " << e.what() << "]";
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  if (!v.pass) ++failures;
  std::printf("%s %2d %s:%s (%.2fs)\n", v.pass ? "PASS" : "FAIL", id, name.c_str(),
              v.detail.str().c_str(), secs);
  std::fflush(stdout);
}

Bits random_bits(std::mt19937_64& rng, std::size_t n) {
  Bits b(n);
  for (std::size_t i = 0; i < n; ++i) b[i] = (rng() >> 63) != 0;
  return b;
}

Key128 random_key(std::mt19937_64& rng) {
  Key128 k;
  for (auto& byte : k.bytes) byte = static_cast<std::uint8_t>(rng());
  return k;
}

double elapsed_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Random quantized distribution on 2^P with n >= 1 entries, canonical order.
QuantizedDistribution random_q(std::mt19937_64& rng, unsigned precision) {
  const std::uint64_t scale = std::uint64_t{1} << precision;
  const std::size_t n = 1 + rng() % std::min<std::uint64_t>(scale, 40);
  std::vector<std::uint64_t> cuts{0, scale};
  while (cuts.size() < n + 1) {
    const std::uint64_t c = 1 + rng() % (scale - 1);
    if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
  }
  std::sort(cuts.begin(), cuts.end());
  QuantizedDistribution q;
  q.precision = precision;
  for (std::size_t i = 0; i < n; ++i) {
    q.entries.push_back({static_cast<TokenId>(rng() % 5000 * 64 + i), cuts[i + 1] - cuts[i]});
  }
  std::sort(q.entries.begin(), q.entries.end(), [](const auto& a, const auto& b) {
    return a.mass != b.mass ? a.mass > b.mass : a.id < b.id;
  });
  return q;
}

// Natural channel on visible text, computed directly: re-tokenize, draw from
// the quantized candidate set, append, detokenize.
std::map<std::string, double> natural_oracle(const TokenizerProfile& profile,
                                             const Provider& provider, const std::string& start,
                                             std::size_t steps, std::size_t k, unsigned precision) {
  std::map<std::string, double> cur{{start, 1.0}};
  for (std::size_t s = 0; s < steps; ++s) {
    std::map<std::string, double> next;
    for (const auto& [text, p] : cur) {
      const TokenSeq toks = profile.encode(text);
      const Distribution full = provider.next_distribution(toks);
      const QuantizedDistribution q = quantize(top_k_truncate(full, k), precision);
      for (const auto& e : q.entries) {
        next[text + std::string(profile.token_bytes(e.id))] +=
            p * static_cast<double>(e.mass) / std::ldexp(1.0, static_cast<int>(precision));
      }
    }
    cur = std::move(next);
  }
  return cur;
}

double tv(const std::map<std::string, double>& a, const std::map<std::string, double>& b) {
  double sum = 0.0;
  for (const auto& [k, v] : a) sum += std::fabs(v - (b.count(k) ? b.at(k) : 0.0));
  for (const auto& [k, v] : b) {
    if (!a.count(k)) sum += v;
  }
  return sum / 2.0;
}

// ---------------------------------------------------------------------------

void criterion1(Verdict& v) {
  std::mt19937_64 rng(101);
  std::size_t distributions = 0;
  std::size_t mismatches = 0;
  const auto start = Clock::now();
  for (unsigned P = 1; P <= 12; ++P) {
    for (int trial = 0; trial < 60; ++trial) {
      const QuantizedDistribution q = random_q(rng, P);
      const Payload payload(random_bits(rng, 64), random_key(rng));
      const std::size_t pointer = rng() % 32;
      std::map<TokenId, std::uint64_t> counts;
      for (std::uint64_t mask = 0; mask < q.scale(); ++mask) {
        ++counts[enc_step(q, payload, pointer, mask).outcome.token];
      }
      for (const auto& e : q.entries) {
        if (counts[e.id] != e.mass) ++mismatches;
      }
      if (counts.size() != q.entries.size()) ++mismatches;
      ++distributions;
    }
  }
  const double secs = elapsed_since(start);
  v.detail << " " << distributions << " distributions, P=1..12, " << mismatches
           << " count mismatches";
  v.require(mismatches == 0, "P(token i) = m_i / 2^P for every mask enumeration");
  v.require(secs < 10.0, "runtime < 10 s");
}

void criterion2(Verdict& v) {
  const TokenizerProfile profile = toy::english_profile();
  const PrfToyProvider model(7, toy::printable_slice(profile));
  const auto contexts = toy::english_contexts();
  std::mt19937_64 rng(202);
  double max_kld = 0.0;
  double sum_kld = 0.0;
  std::size_t steps = 0;
  double oracle_max = 0.0;
  const auto start = Clock::now();
  for (int run = 0; run < 100; ++run) {
    EmbedConfig cfg;
    cfg.codec.key = random_key(rng);
    cfg.codec.precision = 30;
    cfg.codec.top_k = 32;
    cfg.tokens = 100;
    const TokenSeq ctx = profile.encode(contexts[run % contexts.size()]);
    const EmbedResult r = embed(Payload(random_bits(rng, 3000), cfg.codec.key), ctx, profile,
                                model, cfg);
    for (const StepStats& s : r.steps) {
      max_kld = std::max(max_kld, s.kld_bits);
      sum_kld += s.kld_bits;
      ++steps;
    }
    // Independent evaluation on the first step of each run.
    const Distribution full = model.next_distribution(ctx);
    std::vector<TokenProb> kept = full.entries;
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
      return a.prob != b.prob ? a.prob > b.prob : a.id < b.id;
    });
    kept.resize(std::min<std::size_t>(kept.size(), 32));
    double z = 0.0;
    for (const auto& e : kept) z += e.prob;
    const QuantizedDistribution q = candidate_set(model, ctx, 32, 30);
    double kl = 0.0;
    for (const auto& e : q.entries) {
      const double pc = static_cast<double>(e.mass) / std::ldexp(1.0, 30);
      double pm = 0.0;
      for (const auto& k : kept) {
        if (k.id == e.id) pm = k.prob / z;
      }
      kl += pc * std::log2(pc / pm);
    }
    oracle_max = std::max(oracle_max, std::fabs(kl));
  }
  const double secs = elapsed_since(start);
  char shown[32];
  std::snprintf(shown, sizeof shown, "%.2f", sum_kld / static_cast<double>(steps));
  v.detail << " 100 runs x 100 steps at P=30, ave KLD " << sum_kld / static_cast<double>(steps)
           << " (shown " << shown << "), max " << max_kld << ", oracle max " << oracle_max;
  v.require(max_kld <= 1e-6, "per-step KLD <= 1e-6 bits");
  v.require(oracle_max <= 1e-6, "independent KLD <= 1e-6 bits");
  v.require(std::string(shown) == "0.00", "displays as 0.00");
  v.require(secs < 30.0, "runtime < 30 s");
}

void criterion3(Verdict& v) {
  const auto start = Clock::now();
  // Ambiguity-rich half.
  const TokenizerProfile minimal = toy::minimal_profile();
  const PrfToyProvider model(7, toy::resolve_slice(minimal, "ids:97,98,256,257"));
  TranscriptSetup setup;
  setup.profile = &minimal;
  setup.provider = &model;
  setup.context = minimal.encode("x.");
  setup.top_k = 4;
  setup.precision = 30;
  setup.steps = 3;
  EmbedConfig cfg;
  cfg.codec.binding = MaskBinding::kContext;

  const auto oracle = natural_oracle(minimal, model, "x.", 3, 4, 30);
  const double lib_vs_oracle = tv(oracle, natural_channel_exact(setup));
  const TranscriptComparison cmp = transcript_oracle(setup, cfg, 100000, 303);
  const double tv_mc = tv(oracle, cmp.stego);

  std::mt19937_64 rng(304);
  std::size_t triggers = 0;
  std::size_t steps = 0;
  for (int i = 0; i < 20000; ++i) {
    EmbedConfig c = cfg;
    c.codec.key = random_key(rng);
    c.codec.top_k = 4;
    c.tokens = 3;
    const EmbedResult r =
        embed(Payload(random_bits(rng, 120), c.codec.key), setup.context, minimal, model, c);
    triggers += r.events.size();
    steps += r.steps.size();
  }
  const double trigger_rate = static_cast<double>(triggers) / static_cast<double>(steps);

  // Zero-ambiguity half, exhaustive over every mask at P=8.
  const TokenizerProfile clean = toy::clean_profile();
  const PrfToyProvider clean_model(7, toy::resolve_slice(clean, "ids:97,98,99"));
  TranscriptSetup exact = setup;
  exact.profile = &clean;
  exact.provider = &clean_model;
  exact.context = clean.encode("x.");
  exact.top_k = 3;
  exact.precision = 8;
  EmbedConfig ecfg;
  ecfg.codec.key = Key128::from_seed(305);
  const auto clean_oracle = natural_oracle(clean, clean_model, "x.", 3, 3, 8);
  const auto clean_stego = retoksync_channel_exhaustive(exact, ecfg);
  const double tv_exact = tv(clean_oracle, clean_stego);
  bool same_support = clean_oracle.size() == clean_stego.size();
  for (const auto& [text, p] : clean_oracle) same_support = same_support && clean_stego.count(text);

  const double secs = elapsed_since(start);
  v.detail << " minimal profile T=3 k=4: trigger rate " << trigger_rate << ", TV " << tv_mc
           << " over 1e5 trials (" << oracle.size() << " texts); clean profile P=8 exhaustive TV "
           << tv_exact << " over " << clean_oracle.size() << " texts";
  v.require(lib_vs_oracle < 1e-12, "library natural channel matches the oracle");
  v.require(trigger_rate >= 0.05, "per-step trigger probability >= 5%");
  v.require(tv_mc <= 0.02, "TV <= 0.02");
  v.require(same_support && tv_exact <= 1e-12, "exact equality under exhaustive enumeration");
  v.require(secs < 300.0, "runtime < 5 min");
}

void criterion4(Verdict& v) {
  const TokenizerProfile profile = toy::clean_profile();
  const std::vector<std::string> slices{"letters", "printable", "all", "ids:97,98"};
  std::mt19937_64 rng(404);
  std::size_t runs = 0;
  std::size_t events = 0;
  std::size_t compared = 0;
  std::size_t errors = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const PrfToyProvider model(rng(), toy::resolve_slice(profile, slices[trial % slices.size()]),
                               0.5 + static_cast<double>(rng() % 200) / 100.0);
    EmbedConfig cfg;
    cfg.codec.key = random_key(rng);
    cfg.codec.top_k = 2 + rng() % 63;
    cfg.codec.precision = 8 + rng() % 45;
    cfg.tokens = 1 + rng() % 100;
    cfg.skip_x = rng() & 1;
    const Bits bits = random_bits(rng, rng() % 800);
    const TokenSeq ctx = profile.encode("Context " + std::to_string(trial) + ".");
    const EmbedResult r = embed(Payload(bits, cfg.codec.key), ctx, profile, model, cfg);
    events += r.events.size();
    ++runs;
    const ExtractionResult x = extract(r.stego_text, ctx, profile, model, cfg.codec, cfg.skip_x);
    const std::size_t n = std::min(x.pointer, bits.size());
    compared += n;
    if (x.pointer != r.embedded_bits) ++errors;
    for (std::size_t i = 0; i < n; ++i) errors += x.bits[i] != bits[i];
  }
  const double accuracy =
      compared ? 1.0 - static_cast<double>(errors) / static_cast<double>(compared) : 0.0;
  v.detail << " " << runs << " runs, " << events << " events, " << compared
           << " bits compared, accuracy " << accuracy;
  v.require(events == 0, "zero events");
  v.require(errors == 0 && compared > 0, "bit accuracy exactly 1.0");
}

void criterion5(Verdict& v) {
  const TokenizerProfile profile = toy::sparse_profile();
  const PrfToyProvider model(11, toy::resolve_slice(profile, "letters+merged"));
  std::mt19937_64 rng(505);
  std::size_t embedded = 0;
  std::size_t errors = 0;
  std::size_t nonlocal = 0;
  std::size_t events = 0;
  std::size_t ambiguous_runs = 0;
  for (int run = 0; run < 1000; ++run) {
    EmbedConfig cfg;
    cfg.codec.key = random_key(rng);
    cfg.codec.top_k = 32;
    cfg.tokens = 100;
    cfg.skip_x = false;
    const Bits bits = random_bits(rng, 3000);
    const TokenSeq ctx = profile.encode("Go.");
    const EmbedResult r = embed(Payload(bits, cfg.codec.key), ctx, profile, model, cfg);
    const ExtractionResult x = extract(r.stego_text, ctx, profile, model, cfg.codec, false);
    const std::vector<bool> affected = event_affected_positions(r);
    events += r.events.size();
    ambiguous_runs += !r.events.empty();
    embedded += std::min(r.embedded_bits, bits.size());
    for (std::size_t i = 0; i < x.steps.size(); ++i) {
      for (std::size_t b = 0; b < x.steps[i].fragment_len; ++b) {
        const std::size_t pos = x.offsets[i] + b;
        if (pos >= bits.size() || x.bits[pos] == bits[pos]) continue;
        ++errors;
        if (!affected[i]) ++nonlocal;
      }
    }
  }
  const double ber = static_cast<double>(errors) / static_cast<double>(embedded);
  v.detail << " 1000 runs (" << ambiguous_runs << " ambiguous, " << events << " events), "
           << errors << " bit errors / " << embedded << " bits, BER " << ber * 100.0 << "%, "
           << nonlocal << " outside event-affected fragments";
  v.require(ambiguous_runs > 0, "ambiguous runs present");
  v.require(nonlocal == 0, "every mismatch inside an event-affected fragment");
  v.require(ber < 0.01, "BER < 1%");
}

void criterion6(Verdict& v) {
  const TokenizerProfile profile = toy::sparse_profile();
  const PrfToyProvider model(11, toy::letters_slice(profile));
  std::mt19937_64 rng(606);
  std::size_t skipped = 0;
  std::size_t skipped_consuming = 0;
  std::size_t merge_runs = 0;
  std::size_t compared = 0;
  std::size_t errors = 0;
  for (int run = 0; run < 1000; ++run) {
    EmbedConfig cfg;
    cfg.codec.key = random_key(rng);
    cfg.codec.top_k = 26;
    cfg.tokens = 60;
    const Bits bits = random_bits(rng, 2000);
    const TokenSeq ctx = profile.encode("Go.");
    const EmbedResult r = embed(Payload(bits, cfg.codec.key), ctx, profile, model, cfg);
    const ExtractionResult x = extract(r.stego_text, ctx, profile, model, cfg.codec, true);
    bool merged = false;
    for (std::size_t i = 0; i < x.steps.size(); ++i) {
      const TokenSeq& seq = r.receiver_view;
      const TokenId tok = seq[ctx.size() + i];
      const bool outside = std::find(model.slice().begin(), model.slice().end(), tok) ==
                           model.slice().end();
      if (outside) {
        merged = true;
        ++skipped;
        const std::size_t next = i + 1 < x.offsets.size() ? x.offsets[i + 1] : x.pointer;
        if (!x.steps[i].skipped || x.steps[i].fragment_len != 0 || next != x.offsets[i]) {
          ++skipped_consuming;
        }
      }
    }
    merge_runs += merged;
    const std::size_t n = std::min(x.pointer, bits.size());
    compared += n;
    for (std::size_t i = 0; i < n; ++i) errors += x.bits[i] != bits[i];
  }
  const double accuracy = 1.0 - static_cast<double>(errors) / static_cast<double>(compared);
  v.detail << " 1000 runs, " << merge_runs << " with merge-to-out-of-support, " << skipped
           << " X-tokens, " << skipped_consuming << " consumed bits, accuracy " << accuracy;
  v.require(merge_runs > 0, "constructed out-of-support merges occur");
  v.require(skipped_consuming == 0, "X-tokens skipped with zero bits");
  v.require(errors == 0, "extraction accuracy = 1.0");
}

void criterion7(Verdict& v) {
  const auto start = Clock::now();
  std::mt19937_64 rng(707);
  std::size_t identity = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t L = 1 + rng() % 2000;
    std::vector<std::size_t> lengths(L);
    for (auto& l : lengths) l = rng() % 8;
    std::vector<std::size_t> positions(L);
    std::iota(positions.begin(), positions.end(), 0);
    std::shuffle(positions.begin(), positions.end(), rng);
    positions.resize(rng() % std::min<std::size_t>(L + 1, 256));
    std::sort(positions.begin(), positions.end());
    std::vector<CorrectionItem> items;
    for (std::size_t p : positions) items.push_back({p, random_bits(rng, lengths[p])});
    Bits msg = encode_message(items, L);
    append(msg, random_bits(rng, rng() % 16));
    identity += parse_message(msg, lengths, L) == items;
  }

  // Hand-encoded reference message.
  const std::vector<CorrectionItem> worked{{3, from_ascii("01")}, {9, from_ascii("101")}};
  const bool worked_ok =
      to_ascii(encode_message(worked, 16)) == "00000010" "0011" "01" "0101" "101";

  std::size_t restored = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    GroupLedger g;
    std::vector<Bits> truth;
    const std::size_t samples = 1 + rng() % 20;
    for (std::size_t s = 0; s < samples; ++s) {
      Bits payload;
      const std::size_t tokens = 1 + rng() % 100;
      for (std::size_t t = 0; t < tokens; ++t) {
        FragmentRecord rec;
        rec.intended = random_bits(rng, rng() % 6);
        rec.received = rec.intended;
        append(payload, rec.intended);
        g.records.push_back(rec);
      }
      g.sample_ends.push_back(g.records.size());
      truth.push_back(payload);
    }
    const std::size_t corrupt = 1 + rng() % 30;
    for (std::size_t c = 0; c < corrupt; ++c) {
      FragmentRecord& rec = g.records[rng() % g.records.size()];
      if (!rec.received.empty()) rec.received = random_bits(rng, rec.received.size());
    }
    std::vector<std::size_t> lengths;
    std::vector<Bits> received;
    for (const auto& rec : g.records) {
      lengths.push_back(rec.received.size());
      received.push_back(rec.received);
    }
    const auto items = diff_group(g);
    const auto parsed = parse_message(encode_message(items, g.size()), lengths, g.size());
    restored += apply_corrections(parsed, received, g.sample_ends) == truth;
  }
  const double secs = elapsed_since(start);
  v.detail << " encode/parse identity " << identity << "/10000, restored " << restored
           << "/1000 corrupted groups";
  v.require(worked_ok, "L=16 reference message");
  v.require(identity == 10000, "identity 100%");
  v.require(restored == 1000, "restoration 100%");
  v.require(secs < 60.0, "runtime < 1 min");
}

void criterion8(Verdict& v) {
  const TokenizerProfile profile = toy::english_profile();
  const PrfToyProvider model(7, toy::printable_slice(profile));
  bool all_ok = true;
  bool ratios_ok = true;
  for (std::size_t n : {5, 10, 20}) {
    SessionConfig c;
    c.group_size = n;
    c.sample_count = 50 * n;
    c.sample_tokens = 100;
    c.primary.codec.top_k = 32;
    c.aux_top_k = 64;
    c.contexts = toy::english_contexts();
    c.aux_context = "Postscript.";
    c.key = Key128::from_seed(800 + n);
    c.payload_seed = 808;
    const SessionReport rep = Session(profile, model, model, c).simulate();
    std::size_t events = 0;
    for (const auto& g : rep.groups) events += g.events;
    v.detail << " n=" << n << ": " << rep.groups.size() << " groups, success "
             << rep.success_rate << ", events " << events << ", c2e "
             << rep.corr_to_embed_ratio * 100.0 << "%;";
    all_ok = all_ok && rep.groups.size() == 50 && rep.success_rate == 1.0;
    ratios_ok = ratios_ok && std::isfinite(rep.corr_to_embed_ratio) &&
                rep.corr_to_embed_ratio < 0.10;
    for (const auto& g : rep.groups) {
      if (!g.success) v.detail << " group " << g.group << " failed: " << g.failure << ";";
    }
  }
  v.require(all_ok, "100% recovery over 50 groups per size");
  v.require(ratios_ok, "correction-to-embedding ratio finite and < 10%");
}

void criterion9(Verdict& v) {
  std::mt19937_64 rng(909);
  std::size_t failures_seen = 0;
  std::size_t compared = 0;
  const std::vector<std::string> names{"minimal", "sparse", "english", "clean"};
  for (int trial = 0; trial < 1000; ++trial) {
    const std::string& name = names[trial % names.size()];
    const TokenizerProfile profile = toy::builtin_profile(name);
    const auto ids = name == "english" || name == "clean" ? toy::printable_slice(profile)
                                                            : toy::resolve_slice(profile, "all");
    const PrfToyProvider model(rng(), ids);
    AuxConfig cfg;
    cfg.codec.key = random_key(rng);
    cfg.codec.top_k = 2 + rng() % 100;
    const Bits bits = random_bits(rng, rng() % 200);
    const TokenSeq ctx = profile.encode("Aux " + std::to_string(trial) + ".");
    const AuxEmbedResult r = embed_aux(Payload(bits, cfg.codec.key), ctx, profile, model, cfg);
    const AuxExtraction x = extract_aux(r.stego_text, ctx, profile, model, cfg.codec);
    compared += bits.size();
    if (!r.complete() || x.bits.size() < bits.size() || slice(x.bits, 0, bits.size()) != bits) {
      ++failures_seen;
    }
  }

  // Capacity on identical contexts: fixed length, long payload.
  const TokenizerProfile profile = toy::english_profile();
  const PrfToyProvider model(7, toy::printable_slice(profile));
  std::size_t aux_bits = 0, aux_tokens = 0, base_bits = 0, base_tokens = 0;
  bool entropy_order = true;
  for (int run = 0; run < 100; ++run) {
    const Key128 key = random_key(rng);
    const Bits bits = random_bits(rng, 2000);
    const TokenSeq ctx = profile.encode(toy::english_contexts()[run % 8]);
    AuxConfig ac;
    ac.codec.key = key;
    ac.codec.top_k = 32;
    ac.min_tokens = ac.max_tokens = 100;
    ac.stop_when_embedded = false;
    const AuxEmbedResult a = embed_aux(Payload(bits, key), ctx, profile, model, ac);
    aux_bits += a.embedded_bits;
    aux_tokens += a.tokens.size();
    entropy_order = entropy_order && a.pool_entropy_bits <= a.token_entropy_bits + 1e-9;
    EmbedConfig ec;
    ec.codec.key = key;
    ec.codec.top_k = 32;
    ec.tokens = 100;
    ec.detection = false;
    const EmbedResult b = embed(Payload(bits, key), ctx, profile, model, ec);
    base_bits += b.embedded_bits;
    base_tokens += b.generated_tokens();
  }
  const double aux_cap = static_cast<double>(aux_bits) / static_cast<double>(aux_tokens);
  const double base_cap = static_cast<double>(base_bits) / static_cast<double>(base_tokens);
  v.detail << " 1000 aux round trips, " << failures_seen << " failures over " << compared
           << " bits; capacity aux " << aux_cap << " vs base " << base_cap << " bits/token";
  v.require(failures_seen == 0, "aux accuracy 1.0");
  v.require(aux_cap <= base_cap, "aux capacity <= base codec capacity");
  v.require(entropy_order, "pool entropy <= token entropy");
}

void criterion10(Verdict& v) {
  const double r = rto(5.27, 5.18);
  const double uniform[] = {0.25, 0.25, 0.25, 0.25};
  const double p = ppl(uniform);
  Distribution a, b;
  a.entries = {{0, 0.5}, {1, 0.5}};
  b.entries = {{0, 0.25}, {1, 0.75}};
  const double k = kld_bits(a, b);
  v.detail << " rto(5.27, 5.18) = " << r << "%, ppl(uniform-4) = " << p << ", kld = " << k;
  v.require(std::fabs(r - 1.74) <= 0.01, "rto 1.74 +- 0.01");
  v.require(p == 4.0, "ppl exactly 4");
  v.require(std::fabs(k - 0.2075) <= 1e-4, "kld 0.2075 +- 1e-4");
}

void criterion11(Verdict& v) {
  const TokenizerProfile profile = toy::english_profile();
  const PrfToyProvider model(7, toy::printable_slice(profile));
  const auto contexts = toy::english_contexts();
  std::vector<double> rates;
  bool consistent = true;
  for (std::size_t length : {25, 50, 100}) {
    std::vector<AmbiguityTrace> traces;
    for (std::size_t i = 0; i < 200; ++i) {
      EmbedConfig cfg;
      cfg.codec.key = Key128::from_seed(i);
      cfg.codec.top_k = 32;
      cfg.tokens = length;
      std::mt19937_64 rng(i);
      const Bits bits = random_bits(rng, 3000);
      const EmbedResult r = embed(Payload(bits, cfg.codec.key),
                                  profile.encode(contexts[i % contexts.size()]), profile, model,
                                  cfg);
      traces.push_back(ambiguity_trace(r));
    }
    const AmbiguityStatistics s = ambiguity_statistics(traces);
    consistent = consistent && s.triggers >= s.ambiguous_samples;
    rates.push_back(s.sample_rate);
    v.detail << " T=" << length << ": sample rate " << s.sample_rate << ", token rate "
             << s.token_rate << " (" << s.triggers << " triggers, " << s.ambiguous_samples
             << " ambiguous);";
  }
  v.require(consistent, "sum of triggers >= ambiguous samples");
  v.require(rates[0] <= rates[1] && rates[1] <= rates[2], "sample rate non-decreasing in length");
}

void criterion12(Verdict& v) {
  const TokenizerProfile profile = toy::clean_profile();
  const PrfToyProvider model(7, toy::letters_slice(profile));
  const TokenSeq ctx = profile.encode("Timing.");
  std::vector<double> rtos;
  for (int rep = 0; rep < 3; ++rep) {
    std::mt19937_64 rng(1212 + rep);
    double with = 0.0, without = 0.0;
    for (int run = 0; run < 100; ++run) {
      const Key128 key = random_key(rng);
      const Bits bits = random_bits(rng, 3000);
      for (bool detection : {true, false}) {
        EmbedConfig cfg;
        cfg.codec.key = key;
        cfg.codec.top_k = 32;
        cfg.tokens = 100;
        cfg.detection = detection;
        cfg.reset = ResetMode::kIncremental;
        const EmbedResult r = embed(Payload(bits, key), ctx, profile, model, cfg);
        (detection ? with : without) += std::chrono::duration<double>(r.elapsed).count();
      }
    }
    rtos.push_back(rto(with, without));
  }
  std::sort(rtos.begin(), rtos.end());
  v.detail << " 3 x 100 clean runs, RTO " << rtos[0] << "% / " << rtos[1] << "% / " << rtos[2]
           << "%, median " << rtos[1] << "%";
  v.require(rtos[1] <= 25.0, "RTO <= 25%");
}

}  // namespace

int main() {
  std::printf("retoksync acceptance (%s)\n", version_string().c_str());
  report(1, "codec marginal exactness", criterion1);
  report(2, "zero KLD at P=30", criterion2);
  report(3, "visible-text transcript equivalence", criterion3);
  report(4, "ambiguity-free exactness", criterion4);
  report(5, "error locality", criterion5);
  report(6, "Skip-X", criterion6);
  report(7, "correction protocol", criterion7);
  report(8, "two-channel end-to-end", criterion8);
  report(9, "Syncpool exactness and capacity order", criterion9);
  report(10, "metric formulas", criterion10);
  report(11, "ambiguity statistics consistency", criterion11);
  report(12, "detection overhead", criterion12);
  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}

#include "commands.hpp"

#include <atomic>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "retoksync/errors.hpp"
#include "retoksync/metrics.hpp"
#include "retoksync/toy.hpp"

namespace retoksync::cli {
namespace {

void emit(const std::filesystem::path& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
  } else {
    write_file(path, text);
  }
}

std::string join_ids(std::span<const TokenId> ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) out += ' ';
    out += std::to_string(ids[i]);
  }
  return out;
}

Bits random_payload(std::uint64_t seed, std::uint64_t index, std::size_t length) {
  std::mt19937_64 rng(prf64(Key128::from_seed(seed), "cli-payload", {index}));
  Bits bits(length);
  for (std::size_t i = 0; i < length; ++i) bits[i] = (rng() >> 63) != 0;
  return bits;
}

std::size_t payload_length(const RunConfig& config, std::size_t tokens) {
  return config.payload_bits != 0 ? config.payload_bits : config.provider.precision * tokens;
}

// Runs fn(provider, index) for index in [0, count) over `jobs` workers, each
// with its own provider handle.
template <typename Fn>
void parallel_for(const RunConfig& config, const TokenizerProfile& profile, std::size_t count,
                  Fn fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min(config.jobs, count));
  if (workers == 1) {
    const auto provider = config.make_provider(profile);
    for (std::size_t i = 0; i < count; ++i) fn(*provider, i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        const auto provider = config.make_provider(profile);
        for (std::size_t i = next++; i < count; i = next++) fn(*provider, i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (std::thread& t : threads) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string fixed(double value, int digits) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << value;
  return ss.str();
}

}  // namespace

int cmd_tokenizer_train(const TrainOptions& options) {
  const std::string corpus = read_file(options.corpus);
  const TokenizerProfile profile = train_bpe(corpus, options.vocab_size);
  std::filesystem::create_directories(options.out_dir);
  write_file(options.out_dir / "vocab.txt", profile.vocab_text());
  write_file(options.out_dir / "merges.txt", profile.merges_text());
  std::cerr << "trained vocabulary of " << profile.vocab_size() << " tokens ("
            << profile.merges().size() << " merges) into " << options.out_dir.string() << "\n";
  return kExitOk;
}

int cmd_embed(const RunConfig& config, const EmbedOptions& options) {
  const TokenizerProfile profile = config.load_profile();
  const Bits bits = read_payload(options.payload, options.format);
  const TokenSeq context = profile.encode(config.context_text());
  std::ostringstream report;
  report << report_header(config);

  if (options.channel == "aux") {
    const auto provider = config.make_provider(profile, config.aux_top_k);
    AuxConfig ac;
    ac.codec = config.codec();
    ac.codec.top_k = config.aux_top_k;
    ac.max_tokens = config.aux_max_tokens;
    const AuxEmbedResult r = embed_aux(Payload(bits, ac.codec.key), context, profile, *provider, ac);
    write_file(options.out, r.stego_text);
    report << "channel\taux\n"
           << "payload_bits\t" << r.payload_bits << "\n"
           << "embedded_bits\t" << r.embedded_bits << "\n"
           << "tokens\t" << r.tokens.size() << "\n"
           << "pool_entropy_bits\t" << fixed(r.pool_entropy_bits, 4) << "\n"
           << "token_entropy_bits\t" << fixed(r.token_entropy_bits, 4) << "\n";
    if (!options.report.empty()) write_file(options.report, report.str());
    std::cerr << "aux: embedded " << std::min(r.embedded_bits, r.payload_bits) << "/"
              << r.payload_bits << " bits in " << r.tokens.size() << " tokens\n";
    if (!r.complete()) {
      std::cerr << "error: auxiliary sample hit aux_max_tokens before the payload was embedded\n";
      return kExitFailure;
    }
    return kExitOk;
  }

  const auto provider = config.make_provider(profile);
  const EmbedResult r = embed(Payload(bits, config.key), context, profile, *provider,
                              config.embed_config());
  write_file(options.out, r.stego_text);
  const CapacityUtilization cu = r.generated_tokens() > 0 ? capacity_and_utilization(r) : CapacityUtilization{};
  report << "channel\tprimary\n"
         << "payload_bits\t" << r.payload_bits << "\n"
         << "embedded_bits\t" << r.embedded_bits << "\n"
         << "tokens\t" << r.generated_tokens() << "\n"
         << "receiver_view_tokens\t" << r.receiver_view.size() - r.context.size() << "\n"
         << "events\t" << r.events.size() << "\n"
         << "capacity\t" << fixed(cu.capacity, 4) << "\n"
         << "utilization\t" << fixed(cu.utilization, 4) << "\n"
         << "provider_calls\t" << r.provider_calls << "\n"
         << "elapsed_seconds\t" << fixed(std::chrono::duration<double>(r.elapsed).count(), 6)
         << "\n";
  if (!options.report.empty()) write_file(options.report, report.str());
  if (!options.events.empty()) {
    std::ostringstream ev;
    ev << report_header(config) << "step\tfirst_diff\tpred\tretok\tj_before\tj_after\n";
    for (const AmbiguityEvent& e : r.events) {
      ev << e.step << '\t' << e.first_diff << '\t' << join_ids(e.pred) << '\t'
         << join_ids(e.retok) << '\t' << e.pointer_before << '\t' << e.pointer_after << '\n';
    }
    write_file(options.events, ev.str());
  }
  std::cerr << "primary: embedded " << std::min(r.embedded_bits, r.payload_bits) << "/"
            << r.payload_bits << " bits in " << r.generated_tokens() << " tokens, "
            << r.events.size() << " ambiguity events\n";
  return kExitOk;
}

int cmd_extract(const RunConfig& config, const ExtractOptions& options) {
  const TokenizerProfile profile = config.load_profile();
  const std::string text = read_file(options.stego);
  const TokenSeq context = profile.encode(config.context_text());
  Bits bits;
  if (options.channel == "aux") {
    const auto provider = config.make_provider(profile, config.aux_top_k);
    CodecParams params = config.codec();
    params.top_k = config.aux_top_k;
    bits = extract_aux(text, context, profile, *provider, params).bits;
  } else {
    const auto provider = config.make_provider(profile);
    bits = extract(text, context, profile, *provider, config.codec(), config.skip_x).bits;
  }
  const std::size_t total = bits.size();
  if (options.payload_bits != 0 && bits.size() > options.payload_bits) {
    bits.resize(options.payload_bits);
  }
  write_payload(options.out, bits, options.format);
  std::cerr << "extracted " << total << " bits, wrote " << bits.size() << "\n";
  return kExitOk;
}

int cmd_session_run(const RunConfig& config, const SessionOptions& options) {
  const TokenizerProfile profile = config.load_profile();
  const auto primary = config.make_provider(profile);
  const auto aux = config.make_provider(profile, config.aux_top_k);
  const Session session(profile, *primary, *aux, config.session_config());
  const SessionReport rep = session.simulate();

  std::ostringstream table;
  table << report_header(config)
        << "group\tsamples\ttokens\tembedded_bits\tresidual_bit_errors\terroneous_tokens\t"
           "correction_items\tcorrection_bits\taux_tokens\tevents\tsuccess\tfailure\n";
  for (const GroupReport& g : rep.groups) {
    table << g.group << '\t' << g.samples << '\t' << g.tokens << '\t' << g.embedded_bits << '\t'
          << g.residual_bit_errors << '\t' << g.erroneous_tokens << '\t' << g.correction_items
          << '\t' << g.correction_bits << '\t' << g.aux_tokens << '\t' << g.events << '\t'
          << (g.success ? 1 : 0) << '\t' << g.failure << '\n';
  }
  std::ostringstream summary;
  summary << report_header(config) << "groups\t" << rep.groups.size() << "\n"
          << "success_rate\t" << fixed(rep.success_rate, 4) << "\n"
          << "avg_errors\t" << fixed(rep.avg_errors, 4) << "\n"
          << "avg_correction_bits\t" << fixed(rep.avg_correction_bits, 2) << "\n"
          << "max_correction_bits\t" << rep.max_correction_bits << "\n"
          << "primary_utilization\t" << fixed(rep.primary_utilization, 4) << "\n"
          << "aux_utilization\t" << fixed(rep.aux_utilization, 4) << "\n"
          << "bit_error_ratio\t" << fixed(rep.bit_error_ratio, 6) << "\n"
          << "token_error_ratio\t" << fixed(rep.token_error_ratio, 6) << "\n"
          << "corr_to_embed_ratio\t" << fixed(rep.corr_to_embed_ratio, 6) << "\n";
  emit(options.report, table.str());
  if (!options.summary.empty()) {
    write_file(options.summary, summary.str());
  } else if (!options.report.empty()) {
    std::cout << summary.str();
  }
  if (!options.dump_corrections.empty()) {
    std::ostringstream dump;
    for (const GroupReport& g : rep.groups) {
      dump << g.group << '\t' << to_ascii(g.correction_message) << '\n';
    }
    write_file(options.dump_corrections, dump.str());
  }
  std::cerr << "session: " << rep.groups.size() << " groups, success rate "
            << fixed(rep.success_rate, 4) << "\n";
  return rep.success_rate == 1.0 ? kExitOk : kExitFailure;
}

int cmd_eval(const RunConfig& config, const EvalOptions& options) {
  if (options.runs == 0) throw ConfigError("eval needs at least one run");
  const TokenizerProfile profile = config.load_profile();
  const std::vector<std::string> contexts =
      config.context.empty() ? toy::english_contexts() : std::vector<std::string>{config.context};
  const std::size_t length = payload_length(config, config.tokens);

  std::vector<RunMetrics> method(options.runs);
  std::vector<RunMetrics> baseline(options.runs);
  parallel_for(config, profile, options.runs, [&](const Provider& provider, std::size_t i) {
    const TokenSeq context = profile.encode(contexts[i % contexts.size()]);
    EmbedConfig ec = config.embed_config();
    ec.codec.key = derive_key(config.key, "eval", {i});
    const Bits bits = random_payload(config.seed, i, length);
    for (bool detection : {true, false}) {
      EmbedConfig run_config = ec;
      run_config.detection = detection;
      const EmbedResult r = embed(Payload(bits, ec.codec.key), context, profile, provider,
                                  run_config);
      Bits extracted;
      try {
        extracted = extract(r.stego_text, context, profile, provider, ec.codec, ec.skip_x).bits;
      } catch (const DecodeError&) {
        extracted.clear();
      }
      (detection ? method : baseline)[i] = measure_run(r, bits, extracted);
    }
  });

  double baseline_seconds = 0.0;
  for (const RunMetrics& m : baseline) baseline_seconds += m.seconds;
  const MetricsReport with = summarize(method, baseline_seconds);
  const MetricsReport without = summarize(baseline);

  std::ostringstream out;
  out << report_header(config)
      << "run\tmethod\tppl\tave_kld\tmax_kld\tembedded_bits\ttokens\tbit_errors\tevents\tseconds\n";
  for (std::size_t i = 0; i < options.runs; ++i) {
    for (const auto* set : {&method, &baseline}) {
      const RunMetrics& m = (*set)[i];
      out << i << '\t' << (set == &method ? "retoksync" : "baseline") << '\t' << fixed(m.ppl, 4)
          << '\t' << std::scientific << std::setprecision(3) << m.ave_kld << '\t' << m.max_kld
          << std::defaultfloat << '\t' << m.embedded_bits << '\t' << m.tokens << '\t'
          << m.bit_errors << '\t' << m.trace.trigger_count << '\t' << fixed(m.seconds, 6) << '\n';
    }
  }
  out << "\nmethod\tave_ppl\tave_kld\tave_kld_rounded\tmax_kld\tcapacity\tutilization\t"
         "total_time\trto_percent\taccuracy\tsample_ambiguity_rate\ttoken_trigger_rate\t"
         "bit_error_ratio\ttoken_error_ratio\n";
  for (const auto& [name, r] : {std::pair{"retoksync", with}, std::pair{"baseline", without}}) {
    out << name << '\t' << fixed(r.ave_ppl, 4) << '\t' << std::scientific << std::setprecision(3)
        << r.ave_kld << std::defaultfloat << '\t' << fixed(r.ave_kld, 2) << '\t'
        << std::scientific << std::setprecision(3) << r.max_kld << std::defaultfloat << '\t'
        << fixed(r.capacity, 4) << '\t' << fixed(r.utilization, 4) << '\t'
        << fixed(r.total_time, 6) << '\t'
        << (std::string(name) == "retoksync" ? fixed(r.rto, 2) : "-") << '\t'
        << fixed(r.accuracy, 6) << '\t' << fixed(r.sample_ambiguity_rate, 4) << '\t'
        << fixed(r.token_trigger_rate, 6) << '\t' << fixed(r.bit_error_ratio, 6) << '\t'
        << fixed(r.token_error_ratio, 6) << '\n';
  }
  emit(options.report, out.str());
  std::cerr << "eval: " << options.runs << " runs, accuracy " << fixed(with.accuracy, 6)
            << ", rto " << fixed(with.rto, 2) << "%\n";
  return kExitOk;
}

int cmd_ambiguity_stats(const RunConfig& config, const AmbiguityOptions& options) {
  if (options.samples == 0) throw ConfigError("ambiguity-stats needs at least one sample");
  const TokenizerProfile profile = config.load_profile();
  const std::vector<std::string> contexts =
      config.context.empty() ? toy::english_contexts() : std::vector<std::string>{config.context};
  const std::vector<std::size_t> top_ks =
      options.top_ks.empty() ? std::vector<std::size_t>{config.provider.top_k} : options.top_ks;

  std::ostringstream out;
  out << report_header(config)
      << "length\ttop_k\tsamples\tambiguous_samples\tsample_rate\ttriggers\ttokens\ttoken_rate\t"
         "triggers_ge_ambiguous\n";
  bool consistent = true;
  for (std::size_t k : top_ks) {
    if (k < 2) throw ConfigError("top_k values must be >= 2");
    for (std::size_t length : options.lengths) {
      std::vector<AmbiguityTrace> traces(options.samples);
      parallel_for(config, profile, options.samples, [&](const Provider& provider, std::size_t i) {
        EmbedConfig ec = config.embed_config();
        ec.tokens = length;
        ec.codec.top_k = k;
        ec.codec.key = derive_key(config.key, "ambiguity", {i});
        const Bits bits = random_payload(config.seed, i, payload_length(config, length));
        const EmbedResult r = embed(Payload(bits, ec.codec.key),
                                    profile.encode(contexts[i % contexts.size()]), profile,
                                    provider, ec);
        traces[i] = ambiguity_trace(r);
      });
      const AmbiguityStatistics s = ambiguity_statistics(traces);
      const bool ok = s.triggers >= s.ambiguous_samples;
      consistent = consistent && ok;
      out << length << '\t' << k << '\t' << s.samples << '\t' << s.ambiguous_samples << '\t'
          << fixed(s.sample_rate, 4) << '\t' << s.triggers << '\t' << s.tokens << '\t'
          << fixed(s.token_rate, 6) << '\t' << (ok ? "yes" : "no") << '\n';
    }
  }
  emit(options.report, out.str());
  return consistent ? kExitOk : kExitInternal;
}

}  // namespace retoksync::cli

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"
#include "retoksync/errors.hpp"

using namespace retoksync;
using namespace retoksync::cli;

namespace {

// Shorthand flags; each one sets a config key.
const std::vector<std::pair<std::string, std::string>> kFlagKeys = {
    {"--profile", "tokenizer.profile"},   {"--vocab", "tokenizer.vocab"},
    {"--merges", "tokenizer.merges"},     {"--provider", "provider.kind"},
    {"--model-seed", "provider.seed"},    {"--slice", "provider.slice"},
    {"--endpoint", "provider.endpoint"},  {"--top-k", "provider.top_k"},
    {"--precision", "provider.precision"}, {"--key", "codec.key"},
    {"--mask-binding", "codec.mask_binding"}, {"--tokens", "embed.tokens"},
    {"--context", "embed.context"},       {"--detection", "embed.detection"},
    {"--skip-x", "embed.skip_x"},         {"--buffering", "embed.buffering"},
    {"--anchor-deferral", "embed.anchor_deferral"}, {"--reset", "embed.reset"},
    {"--check-invariants", "embed.check_invariants"}, {"--group-size", "session.group_size"},
    {"--samples", "session.samples"},     {"--aux-top-k", "session.aux_top_k"},
    {"--seed", "run.seed"},               {"--jobs", "run.jobs"},
};

RunConfig resolve_config(const std::string& config_path,
                         const std::map<std::string, std::string>& flag_values,
                         const std::vector<std::string>& sets) {
  ConfigMap map = config_path.empty() ? ConfigMap{} : ConfigMap::load(config_path);
  map.apply_env(kEnvPrefix, RunConfig::known_keys());
  for (const auto& [key, value] : flag_values) map.set(key, value);
  for (const std::string& s : sets) {
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("--set expects section.key=value, got '" + s + "'");
    }
    map.set(s.substr(0, eq), s.substr(eq + 1));
  }
  return RunConfig::from_map(map);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tokenization-consistent linguistic steganography toolkit"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flag_values;
  app.add_option("-c,--config", config_path, "Config file (key = value with [section] headers)");
  app.add_option("--set", sets, "Override any config key: section.key=value (repeatable)");
  std::vector<std::pair<CLI::Option*, std::string>> flag_options;
  std::vector<std::string> flag_storage(kFlagKeys.size());
  for (std::size_t i = 0; i < kFlagKeys.size(); ++i) {
    flag_options.emplace_back(
        app.add_option(kFlagKeys[i].first, flag_storage[i], "Sets " + kFlagKeys[i].second),
        kFlagKeys[i].second);
  }
  std::string format_name = "ascii";
  const auto add_format = [&](CLI::App* sub) {
    sub->add_option("--payload-format", format_name, "Payload encoding: ascii or binary")
        ->check(CLI::IsMember({"ascii", "binary"}));
  };

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("tokenizer-train", "Train a BPE profile on a corpus");
  train_cmd->add_option("--corpus", train.corpus, "Training text")->required();
  train_cmd->add_option("--vocab-size", train.vocab_size, "Target vocabulary size (>= 256)");
  train_cmd->add_option("--out-dir", train.out_dir, "Directory for vocab.txt and merges.txt");

  EmbedOptions embed_opts;
  auto* embed_cmd = app.add_subcommand("embed", "Hide a payload in generated text");
  embed_cmd->add_option("--payload", embed_opts.payload, "Payload file")->required();
  embed_cmd->add_option("-o,--out", embed_opts.out, "Stego text output")->required();
  embed_cmd->add_option("--channel", embed_opts.channel, "primary or aux")
      ->check(CLI::IsMember({"primary", "aux"}));
  embed_cmd->add_option("--report", embed_opts.report, "Run report output");
  embed_cmd->add_option("--events", embed_opts.events, "Ambiguity event trace output");
  add_format(embed_cmd);

  ExtractOptions extract_opts;
  auto* extract_cmd = app.add_subcommand("extract", "Recover a payload from stego text");
  extract_cmd->add_option("--stego", extract_opts.stego, "Stego text file")->required();
  extract_cmd->add_option("-o,--out", extract_opts.out, "Recovered payload output")->required();
  extract_cmd->add_option("--channel", extract_opts.channel, "primary or aux")
      ->check(CLI::IsMember({"primary", "aux"}));
  extract_cmd->add_option("--payload-bits", extract_opts.payload_bits,
                          "Truncate to this many bits (0 keeps all)");
  add_format(extract_cmd);

  SessionOptions session_opts;
  auto* session_cmd = app.add_subcommand("session-run", "Simulate grouped two-channel sessions");
  session_cmd->add_option("--report", session_opts.report, "Per-group table output");
  session_cmd->add_option("--summary", session_opts.summary, "Summary output");
  session_cmd->add_option("--dump-corrections", session_opts.dump_corrections,
                          "Debug: write each group's correction message as a bitstring");

  EvalOptions eval_opts;
  auto* eval_cmd = app.add_subcommand("eval", "Metrics against the detection-disabled baseline");
  eval_cmd->add_option("--runs", eval_opts.runs, "Number of samples");
  eval_cmd->add_option("--report", eval_opts.report, "Report output");

  AmbiguityOptions amb_opts;
  auto* amb_cmd = app.add_subcommand("ambiguity-stats", "Ambiguity frequency sweep");
  amb_cmd->add_option("--lengths", amb_opts.lengths, "Generation lengths")->delimiter(',');
  amb_cmd->add_option("--top-ks", amb_opts.top_ks, "top-k values (default: configured)")
      ->delimiter(',');
  amb_cmd->add_option("--per-cell", amb_opts.samples, "Samples per (length, top-k) cell");
  amb_cmd->add_option("--report", amb_opts.report, "Report output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    for (const auto& [opt, key] : flag_options) {
      if (opt->count() > 0) flag_values[key] = opt->as<std::string>();
    }
    if (train_cmd->parsed()) return cmd_tokenizer_train(train);

    const RunConfig config = resolve_config(config_path, flag_values, sets);
    const PayloadFormat format = parse_payload_format(format_name);
    embed_opts.format = format;
    extract_opts.format = format;
    if (embed_cmd->parsed()) return cmd_embed(config, embed_opts);
    if (extract_cmd->parsed()) return cmd_extract(config, extract_opts);
    if (session_cmd->parsed()) return cmd_session_run(config, session_opts);
    if (eval_cmd->parsed()) return cmd_eval(config, eval_opts);
    if (amb_cmd->parsed()) return cmd_ambiguity_stats(config, amb_opts);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const VocabularyError& e) {
    std::cerr << "tokenizer error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const PrecisionError& e) {
    std::cerr << "precision error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const TrainingError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const SyncError& e) {
    std::cerr << "sync error: " << e.what() << "\n";
    return kExitSync;
  } catch (const DecodeError& e) {
    std::cerr << "decode error: " << e.what() << "\n";
    return kExitDecode;
  } catch (const ProviderError& e) {
    std::cerr << "provider error (after " << e.attempts() << " attempts"
              << (e.retryable() ? ", retryable" : "") << "): " << e.what() << "\n";
    return kExitProvider;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << "\n";
    return kExitProtocol;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitFailure;
}

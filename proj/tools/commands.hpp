#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "io.hpp"
#include "retoksync/config.hpp"

namespace retoksync::cli {

// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,   // run finished but did not meet its goal
  kExitConfig = 2,    // bad flags, config file, or tokenizer files
  kExitSync = 3,      // context mismatch or unfollowable auxiliary text
  kExitDecode = 4,    // out-of-support token with Skip-X off
  kExitProvider = 5,  // language-model backend failure
  kExitIo = 6,        // unreadable or unwritable file
  kExitProtocol = 7,  // malformed correction message
  kExitInternal = 8,  // invariant violation or unexpected error
};

struct TrainOptions {
  std::filesystem::path corpus;
  std::size_t vocab_size = 384;
  std::filesystem::path out_dir = ".";
};

struct EmbedOptions {
  std::filesystem::path payload;
  PayloadFormat format = PayloadFormat::kAscii;
  std::filesystem::path out;
  std::string channel = "primary";
  std::filesystem::path report;
  std::filesystem::path events;
};

struct ExtractOptions {
  std::filesystem::path stego;
  std::filesystem::path out;
  PayloadFormat format = PayloadFormat::kAscii;
  std::string channel = "primary";
  std::size_t payload_bits = 0;  // 0 keeps everything extracted
};

struct SessionOptions {
  std::filesystem::path report;
  std::filesystem::path summary;
  std::filesystem::path dump_corrections;
};

struct EvalOptions {
  std::size_t runs = 100;
  std::filesystem::path report;
};

struct AmbiguityOptions {
  std::vector<std::size_t> lengths{25, 50, 100};
  std::vector<std::size_t> top_ks;  // empty: the configured top_k
  std::size_t samples = 200;
  std::filesystem::path report;
};

int cmd_tokenizer_train(const TrainOptions& options);
int cmd_embed(const RunConfig& config, const EmbedOptions& options);
int cmd_extract(const RunConfig& config, const ExtractOptions& options);
int cmd_session_run(const RunConfig& config, const SessionOptions& options);
int cmd_eval(const RunConfig& config, const EvalOptions& options);
int cmd_ambiguity_stats(const RunConfig& config, const AmbiguityOptions& options);

}  // namespace retoksync::cli

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "retoksync/core.hpp"
#include "retoksync/prf.hpp"
#include "retoksync/provider.hpp"
#include "retoksync/session.hpp"
#include "retoksync/tokenizer.hpp"

namespace retoksync {

// Flat `key = value` configuration with `[section]` headers. Keys are
// stored as "section.key". Lines starting with '#' or ';' are comments.
class ConfigMap {
 public:
  static ConfigMap parse(std::string_view text);
  static ConfigMap load(const std::filesystem::path& file);

  std::optional<std::string> get(const std::string& key) const;
  void set(const std::string& key, std::string value);
  // Applies PREFIX_SECTION_KEY environment variables (upper case, '.'
  // replaced by '_') on top of existing or known keys.
  void apply_env(std::string_view prefix, std::span<const std::string> known_keys);
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

inline constexpr std::string_view kEnvPrefix = "RETOKSYNC_";

struct ProviderConfig {
  enum class Kind { kPrfToy, kNgram, kRemote };
  Kind kind = Kind::kPrfToy;
  std::uint64_t seed = 7;
  std::size_t top_k = 32;
  unsigned precision = kDefaultPrecision;
  unsigned order = 2;
  double temperature = 1.2;
  std::string slice = "printable";
  std::filesystem::path corpus;  // ngram training text; built-in corpus if empty
  std::string endpoint;
};

struct RunConfig {
  // Tokenizer: files when both are set, otherwise the named built-in.
  std::string profile = "english";
  std::filesystem::path vocab_file;
  std::filesystem::path merges_file;

  ProviderConfig provider;

  Key128 key = Key128::from_seed(0);
  MaskBinding mask_binding = MaskBinding::kContext;

  std::size_t tokens = 100;
  std::string context;
  bool detection = true;
  bool skip_x = true;
  bool buffering = true;
  bool anchor_deferral = true;
  ResetMode reset = ResetMode::kFullRestart;
  bool check_invariants = false;

  std::size_t group_size = 10;
  std::size_t samples = 50;
  std::size_t aux_top_k = 64;
  std::size_t aux_max_tokens = 4096;
  std::string aux_context;
  std::size_t payload_bits = 0;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;

  static const std::vector<std::string>& known_keys();
  // Throws ConfigError on unknown keys or malformed values.
  static RunConfig from_map(const ConfigMap& map);
  void validate() const;
  // Canonical `section.key = value` lines, one per known key.
  std::string to_text() const;

  TokenizerProfile load_profile() const;
  std::unique_ptr<Provider> make_provider(const TokenizerProfile& profile) const;
  std::unique_ptr<Provider> make_provider(const TokenizerProfile& profile, std::size_t top_k) const;
  CodecParams codec() const;
  EmbedConfig embed_config() const;
  SessionConfig session_config() const;
  // The context text, or the first built-in context when unset.
  std::string context_text() const;
};

std::string version_string();

// "# retoksync <version> (<prf>)" followed by the resolved config, each
// line prefixed with "# ".
std::string report_header(const RunConfig& config);

}  // namespace retoksync

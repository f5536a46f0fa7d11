#include "retoksync/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "retoksync/errors.hpp"
#include "retoksync/toy.hpp"

#ifndef RETOKSYNC_VERSION
#define RETOKSYNC_VERSION "0.0.0"
#endif

namespace retoksync {
namespace {

constexpr std::string_view kDefaultAuxContext = "Postscript.";

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_unsigned(const std::string& key, const std::string& value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + value + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double out = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  std::string v = value;
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + value + "'");
}

const char* bool_text(bool b) { return b ? "true" : "false"; }

std::string kind_text(ProviderConfig::Kind k) {
  switch (k) {
    case ProviderConfig::Kind::kPrfToy:
      return "prf-toy";
    case ProviderConfig::Kind::kNgram:
      return "ngram";
    case ProviderConfig::Kind::kRemote:
      return "remote";
  }
  return "prf-toy";
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

ConfigMap ConfigMap::parse(std::string_view text) {
  ConfigMap map;
  std::string section;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = trim(text.substr(start, end - start));
    ++line_no;
    start = end + 1;
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("config line " + std::to_string(line_no) + ": unterminated section");
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    map.set(section.empty() ? key : section + "." + key, std::string(trim(line.substr(eq + 1))));
  }
  return map;
}

ConfigMap ConfigMap::load(const std::filesystem::path& file) { return parse(read_text(file)); }

std::optional<std::string> ConfigMap::get(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ConfigMap::set(const std::string& key, std::string value) {
  entries_[key] = std::move(value);
}

void ConfigMap::apply_env(std::string_view prefix, std::span<const std::string> known_keys) {
  for (const std::string& key : known_keys) {
    std::string name(prefix);
    for (char c : key) {
      name.push_back(c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    if (const char* value = std::getenv(name.c_str())) set(key, value);
  }
}

const std::vector<std::string>& RunConfig::known_keys() {
  static const std::vector<std::string> keys = {
      "tokenizer.profile",      "tokenizer.vocab",        "tokenizer.merges",
      "provider.kind",          "provider.seed",          "provider.slice",
      "provider.temperature",   "provider.order",         "provider.corpus",
      "provider.endpoint",      "provider.top_k",         "provider.precision",
      "codec.key",              "codec.mask_binding",     "embed.tokens",
      "embed.context",          "embed.detection",        "embed.skip_x",
      "embed.buffering",        "embed.anchor_deferral",  "embed.reset",
      "embed.check_invariants", "session.group_size",     "session.samples",
      "session.aux_top_k",      "session.aux_max_tokens", "session.aux_context",
      "session.payload_bits",   "run.seed",               "run.jobs",
  };
  return keys;
}

RunConfig RunConfig::from_map(const ConfigMap& map) {
  const auto& known = known_keys();
  for (const auto& [key, value] : map.entries()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  RunConfig c;
  const auto with = [&](const std::string& key, auto&& apply) {
    if (auto v = map.get(key)) apply(key, *v);
  };
  with("tokenizer.profile", [&](auto&, auto& v) { c.profile = v; });
  with("tokenizer.vocab", [&](auto&, auto& v) { c.vocab_file = v; });
  with("tokenizer.merges", [&](auto&, auto& v) { c.merges_file = v; });
  with("provider.kind", [&](auto& k, auto& v) {
    if (v == "prf-toy") {
      c.provider.kind = ProviderConfig::Kind::kPrfToy;
    } else if (v == "ngram") {
      c.provider.kind = ProviderConfig::Kind::kNgram;
    } else if (v == "remote") {
      c.provider.kind = ProviderConfig::Kind::kRemote;
    } else {
      throw ConfigError(k + ": expected prf-toy, ngram or remote, got '" + v + "'");
    }
  });
  with("provider.seed", [&](auto& k, auto& v) { c.provider.seed = parse_unsigned<std::uint64_t>(k, v); });
  with("provider.slice", [&](auto&, auto& v) { c.provider.slice = v; });
  with("provider.temperature", [&](auto& k, auto& v) { c.provider.temperature = parse_double(k, v); });
  with("provider.order", [&](auto& k, auto& v) { c.provider.order = parse_unsigned<unsigned>(k, v); });
  with("provider.corpus", [&](auto&, auto& v) { c.provider.corpus = v; });
  with("provider.endpoint", [&](auto&, auto& v) { c.provider.endpoint = v; });
  with("provider.top_k", [&](auto& k, auto& v) { c.provider.top_k = parse_unsigned<std::size_t>(k, v); });
  with("provider.precision", [&](auto& k, auto& v) { c.provider.precision = parse_unsigned<unsigned>(k, v); });
  with("codec.key", [&](auto& k, auto& v) {
    try {
      c.key = Key128::from_hex(v);
    } catch (const Error& e) {
      throw ConfigError(k + ": " + e.what());
    }
  });
  with("codec.mask_binding", [&](auto& k, auto& v) {
    if (v == "context") {
      c.mask_binding = MaskBinding::kContext;
    } else if (v == "position") {
      c.mask_binding = MaskBinding::kPosition;
    } else {
      throw ConfigError(k + ": expected context or position, got '" + v + "'");
    }
  });
  with("embed.tokens", [&](auto& k, auto& v) { c.tokens = parse_unsigned<std::size_t>(k, v); });
  with("embed.context", [&](auto&, auto& v) { c.context = v; });
  with("embed.detection", [&](auto& k, auto& v) { c.detection = parse_bool(k, v); });
  with("embed.skip_x", [&](auto& k, auto& v) { c.skip_x = parse_bool(k, v); });
  with("embed.buffering", [&](auto& k, auto& v) { c.buffering = parse_bool(k, v); });
  with("embed.anchor_deferral", [&](auto& k, auto& v) { c.anchor_deferral = parse_bool(k, v); });
  with("embed.reset", [&](auto& k, auto& v) {
    if (v == "full") {
      c.reset = ResetMode::kFullRestart;
    } else if (v == "incremental") {
      c.reset = ResetMode::kIncremental;
    } else {
      throw ConfigError(k + ": expected full or incremental, got '" + v + "'");
    }
  });
  with("embed.check_invariants", [&](auto& k, auto& v) { c.check_invariants = parse_bool(k, v); });
  with("session.group_size", [&](auto& k, auto& v) { c.group_size = parse_unsigned<std::size_t>(k, v); });
  with("session.samples", [&](auto& k, auto& v) { c.samples = parse_unsigned<std::size_t>(k, v); });
  with("session.aux_top_k", [&](auto& k, auto& v) { c.aux_top_k = parse_unsigned<std::size_t>(k, v); });
  with("session.aux_max_tokens", [&](auto& k, auto& v) { c.aux_max_tokens = parse_unsigned<std::size_t>(k, v); });
  with("session.aux_context", [&](auto&, auto& v) { c.aux_context = v; });
  with("session.payload_bits", [&](auto& k, auto& v) { c.payload_bits = parse_unsigned<std::size_t>(k, v); });
  with("run.seed", [&](auto& k, auto& v) { c.seed = parse_unsigned<std::uint64_t>(k, v); });
  with("run.jobs", [&](auto& k, auto& v) { c.jobs = parse_unsigned<std::size_t>(k, v); });
  c.validate();
  return c;
}

void RunConfig::validate() const {
  if (provider.top_k < 2) throw ConfigError("provider.top_k must be >= 2");
  if (provider.precision < kMinPrecision || provider.precision > kMaxPrecision) {
    throw ConfigError("provider.precision must lie in [" + std::to_string(kMinPrecision) + ", " +
                      std::to_string(kMaxPrecision) + "]");
  }
  if (!(provider.temperature > 0.0)) throw ConfigError("provider.temperature must be positive");
  if (provider.kind == ProviderConfig::Kind::kRemote && provider.endpoint.empty()) {
    throw ConfigError("provider.endpoint is required for the remote provider");
  }
  if (vocab_file.empty() != merges_file.empty()) {
    throw ConfigError("tokenizer.vocab and tokenizer.merges must be given together");
  }
  if (group_size == 0) throw ConfigError("session.group_size must be >= 1");
  if (samples < group_size) throw ConfigError("session.samples must be >= session.group_size");
  if (aux_top_k < 2) throw ConfigError("session.aux_top_k must be >= 2");
  if (jobs == 0) throw ConfigError("run.jobs must be >= 1");
}

std::string RunConfig::to_text() const {
  std::ostringstream ss;
  ss.precision(17);
  ss << "tokenizer.profile = " << profile << '\n'
     << "tokenizer.vocab = " << vocab_file.string() << '\n'
     << "tokenizer.merges = " << merges_file.string() << '\n'
     << "provider.kind = " << kind_text(provider.kind) << '\n'
     << "provider.seed = " << provider.seed << '\n'
     << "provider.slice = " << provider.slice << '\n'
     << "provider.temperature = " << provider.temperature << '\n'
     << "provider.order = " << provider.order << '\n'
     << "provider.corpus = " << provider.corpus.string() << '\n'
     << "provider.endpoint = " << provider.endpoint << '\n'
     << "provider.top_k = " << provider.top_k << '\n'
     << "provider.precision = " << provider.precision << '\n'
     << "codec.key = " << key.to_hex() << '\n'
     << "codec.mask_binding = "
     << (mask_binding == MaskBinding::kContext ? "context" : "position") << '\n'
     << "embed.tokens = " << tokens << '\n'
     << "embed.context = " << context << '\n'
     << "embed.detection = " << bool_text(detection) << '\n'
     << "embed.skip_x = " << bool_text(skip_x) << '\n'
     << "embed.buffering = " << bool_text(buffering) << '\n'
     << "embed.anchor_deferral = " << bool_text(anchor_deferral) << '\n'
     << "embed.reset = " << (reset == ResetMode::kFullRestart ? "full" : "incremental") << '\n'
     << "embed.check_invariants = " << bool_text(check_invariants) << '\n'
     << "session.group_size = " << group_size << '\n'
     << "session.samples = " << samples << '\n'
     << "session.aux_top_k = " << aux_top_k << '\n'
     << "session.aux_max_tokens = " << aux_max_tokens << '\n'
     << "session.aux_context = " << aux_context << '\n'
     << "session.payload_bits = " << payload_bits << '\n'
     << "run.seed = " << seed << '\n'
     << "run.jobs = " << jobs << '\n';
  return ss.str();
}

TokenizerProfile RunConfig::load_profile() const {
  if (!vocab_file.empty()) return TokenizerProfile::load(vocab_file, merges_file);
  return toy::builtin_profile(profile);
}

std::unique_ptr<Provider> RunConfig::make_provider(const TokenizerProfile& tokenizer) const {
  return make_provider(tokenizer, provider.top_k);
}

std::unique_ptr<Provider> RunConfig::make_provider(const TokenizerProfile& tokenizer,
                                                   std::size_t top_k) const {
  switch (provider.kind) {
    case ProviderConfig::Kind::kPrfToy:
      return std::make_unique<PrfToyProvider>(
          provider.seed, toy::resolve_slice(tokenizer, provider.slice), provider.temperature);
    case ProviderConfig::Kind::kNgram: {
      const std::string text = provider.corpus.empty() ? std::string(toy::english_corpus())
                                                       : read_text(provider.corpus);
      const TokenSeq corpus = tokenizer.encode(text);
      return std::make_unique<NgramProvider>(NgramProvider::train(corpus, provider.order));
    }
    case ProviderConfig::Kind::kRemote:
      return std::make_unique<RemoteProvider>(RemoteEndpoint::parse(provider.endpoint), top_k);
  }
  throw ConfigError("unknown provider kind");
}

CodecParams RunConfig::codec() const {
  CodecParams p;
  p.key = key;
  p.top_k = provider.top_k;
  p.precision = provider.precision;
  p.binding = mask_binding;
  return p;
}

EmbedConfig RunConfig::embed_config() const {
  EmbedConfig e;
  e.codec = codec();
  e.tokens = tokens;
  e.detection = detection;
  e.skip_x = skip_x;
  e.buffering = buffering;
  e.anchor_deferral = anchor_deferral;
  e.reset = reset;
  e.check_invariants = check_invariants;
  return e;
}

SessionConfig RunConfig::session_config() const {
  SessionConfig s;
  s.group_size = group_size;
  s.sample_count = samples;
  s.sample_tokens = tokens;
  s.payload_bits = payload_bits;
  s.primary = embed_config();
  s.aux_top_k = aux_top_k;
  s.aux_max_tokens = aux_max_tokens;
  s.contexts = context.empty() ? toy::english_contexts() : std::vector<std::string>{context};
  s.aux_context = aux_context.empty() ? std::string(kDefaultAuxContext) : aux_context;
  s.key = key;
  s.payload_seed = seed;
  s.jobs = jobs;
  return s;
}

std::string RunConfig::context_text() const {
  return context.empty() ? toy::english_contexts().front() : context;
}

std::string version_string() { return RETOKSYNC_VERSION; }

std::string report_header(const RunConfig& config) {
  std::string out = "# retoksync " + version_string() + " (" + std::string(kPrfName) + ")\n";
  std::istringstream lines(config.to_text());
  for (std::string line; std::getline(lines, line);) out += "# " + line + "\n";
  return out;
}

}  // namespace retoksync

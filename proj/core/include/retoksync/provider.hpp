#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "retoksync/prf.hpp"
#include "retoksync/tokenizer.hpp"

namespace retoksync {

struct TokenProb {
  TokenId id = 0;
  double prob = 0.0;
};

// Next-token distribution. Entries with zero probability are omitted.
struct Distribution {
  std::vector<TokenProb> entries;

  double prob_of(TokenId id) const;
  double total() const;
  // Descending probability, ascending id on ties.
  void canonicalize();
};

struct QuantizedEntry {
  TokenId id = 0;
  std::uint64_t mass = 0;

  friend bool operator==(const QuantizedEntry&, const QuantizedEntry&) = default;
};

// Integer masses summing to exactly 2^precision, in canonical order
// (descending mass, ascending id on ties). Every mass is at least 1.
struct QuantizedDistribution {
  std::vector<QuantizedEntry> entries;
  unsigned precision = 0;

  std::uint64_t scale() const { return std::uint64_t{1} << precision; }
  std::optional<std::size_t> index_of(TokenId id) const;
  bool contains(TokenId id) const { return index_of(id).has_value(); }

  friend bool operator==(const QuantizedDistribution&, const QuantizedDistribution&) = default;
};

// Bounds for configured runs; quantize itself accepts any P in [1, kMaxPrecision].
inline constexpr unsigned kMinPrecision = 8;
inline constexpr unsigned kMaxPrecision = 52;
inline constexpr unsigned kDefaultPrecision = 30;

// Keeps the k most probable entries (ties by ascending id) and renormalizes.
// Fewer than k entries are all kept. Requires k >= 2.
Distribution top_k_truncate(const Distribution& d, std::size_t k);

// floor(p * 2^P) clamped to >= 1, then largest-remainder correction to an
// exact 2^P total (ties by ascending id). Throws PrecisionError when the
// entry count exceeds 2^P or P is outside [1, kMaxPrecision].
QuantizedDistribution quantize(const Distribution& d, unsigned precision);

double entropy_bits(const QuantizedDistribution& q);

// p_theta(. | context). Implementations must be pure functions of their
// construction parameters and the context.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual Distribution next_distribution(std::span<const TokenId> context) const = 0;
  // Stable one-line description echoed into reports.
  virtual std::string describe() const = 0;
};

// C_u: quantize(top_k(p(. | context))).
QuantizedDistribution candidate_set(const Provider& provider, std::span<const TokenId> context,
                                    std::size_t k, unsigned precision);

// Deterministic toy model: logits are PRF(seed, context, id) mapped into
// (0, 1), softmaxed at the given temperature over a fixed vocabulary slice.
class PrfToyProvider final : public Provider {
 public:
  PrfToyProvider(std::uint64_t seed, std::vector<TokenId> slice, double temperature = 1.2);

  Distribution next_distribution(std::span<const TokenId> context) const override;
  std::string describe() const override;
  std::span<const TokenId> slice() const { return slice_; }

 private:
  std::uint64_t seed_;
  Key128 key_;
  std::vector<TokenId> slice_;
  double temperature_;
};

// Back-off n-gram model with add-epsilon smoothing over the observed
// continuation set of the longest matching context (order = context length).
class NgramProvider final : public Provider {
 public:
  static NgramProvider train(std::span<const TokenId> corpus, unsigned order,
                             double epsilon = 0.01);

  Distribution next_distribution(std::span<const TokenId> context) const override;
  std::string describe() const override;
  unsigned order() const { return order_; }

 private:
  NgramProvider(unsigned order, double epsilon) : order_(order), epsilon_(epsilon) {}

  unsigned order_;
  double epsilon_;
  // Keyed by the context suffix (length 0..order).
  std::map<TokenSeq, std::map<TokenId, std::uint64_t>> counts_;
};

// Where a remote provider lives: "tcp://host:port" or "stdio:<command>".
struct RemoteEndpoint {
  enum class Kind { kTcp, kStdio };
  Kind kind = Kind::kTcp;
  std::string host;
  std::uint16_t port = 0;
  std::string command;

  static RemoteEndpoint parse(std::string_view address);
  std::string to_string() const;
};

// Newline-delimited JSON client. Request: {"context": [...], "top_k": k};
// response: {"ids": [...], "probs": [...]}. Nothing is cached; every call is
// one round trip. Requests on one connection are serialized.
class RemoteProvider final : public Provider {
 public:
  RemoteProvider(RemoteEndpoint endpoint, std::size_t top_k, std::size_t max_attempts = 3);
  ~RemoteProvider() override;
  RemoteProvider(const RemoteProvider&) = delete;
  RemoteProvider& operator=(const RemoteProvider&) = delete;

  Distribution next_distribution(std::span<const TokenId> context) const override;
  std::string describe() const override;

  // Request/response codecs shared with the bridge side of the protocol.
  static std::string format_request(std::span<const TokenId> context, std::size_t top_k);
  // Validates ordering and normalization; throws ProviderError on violation.
  static Distribution parse_response(std::string_view line);

 private:
  struct Connection;
  RemoteEndpoint endpoint_;
  std::size_t top_k_;
  std::size_t max_attempts_;
  mutable std::mutex mutex_;
  mutable std::unique_ptr<Connection> conn_;
};

}  // namespace retoksync

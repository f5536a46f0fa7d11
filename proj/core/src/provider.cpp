#include "retoksync/provider.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "retoksync/errors.hpp"

namespace retoksync {
namespace {

bool canonical_less(const TokenProb& a, const TokenProb& b) {
  if (a.prob != b.prob) return a.prob > b.prob;
  return a.id < b.id;
}

std::vector<std::uint64_t> widen(std::span<const TokenId> ids) {
  return {ids.begin(), ids.end()};
}

}  // namespace

double Distribution::prob_of(TokenId id) const {
  for (const TokenProb& e : entries) {
    if (e.id == id) return e.prob;
  }
  return 0.0;
}

double Distribution::total() const {
  double sum = 0.0;
  for (const TokenProb& e : entries) sum += e.prob;
  return sum;
}

void Distribution::canonicalize() {
  std::sort(entries.begin(), entries.end(), canonical_less);
}

std::optional<std::size_t> QuantizedDistribution::index_of(TokenId id) const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].id == id) return i;
  }
  return std::nullopt;
}

Distribution top_k_truncate(const Distribution& d, std::size_t k) {
  if (k < 2) throw DomainError("top-k requires k >= 2");
  Distribution out = d;
  out.canonicalize();
  if (out.entries.size() > k) out.entries.resize(k);
  const double sum = out.total();
  if (sum <= 0.0) throw DomainError("distribution has no probability mass");
  for (TokenProb& e : out.entries) e.prob /= sum;
  return out;
}

QuantizedDistribution quantize(const Distribution& d, unsigned precision) {
  if (precision < 1 || precision > kMaxPrecision) {
    throw PrecisionError("precision " + std::to_string(precision) + " outside [1, " +
                         std::to_string(kMaxPrecision) + "]");
  }
  const std::uint64_t scale = std::uint64_t{1} << precision;
  const std::size_t n = d.entries.size();
  if (n == 0) throw PrecisionError("cannot quantize an empty distribution");
  if (n > scale) {
    throw PrecisionError(std::to_string(n) + " entries exceed 2^" + std::to_string(precision));
  }
  const double total = d.total();
  if (!(total > 0.0)) throw PrecisionError("distribution has no probability mass");

  struct Work {
    TokenId id;
    std::uint64_t mass;
    double remainder;
  };
  std::vector<Work> work;
  work.reserve(n);
  std::uint64_t sum = 0;
  for (const TokenProb& e : d.entries) {
    const double scaled = e.prob / total * static_cast<double>(scale);
    const double floor = std::floor(scaled);
    auto mass = static_cast<std::uint64_t>(floor);
    if (mass < 1) mass = 1;
    work.push_back({e.id, mass, scaled - floor});
    sum += mass;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (sum < scale) {
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (work[a].remainder != work[b].remainder) return work[a].remainder > work[b].remainder;
      return work[a].id < work[b].id;
    });
    for (std::size_t i = 0; sum < scale; i = (i + 1) % n) {
      ++work[order[i]].mass;
      ++sum;
    }
  } else if (sum > scale) {
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (work[a].remainder != work[b].remainder) return work[a].remainder < work[b].remainder;
      return work[a].id < work[b].id;
    });
    while (sum > scale) {
      for (std::size_t i : order) {
        if (sum == scale) break;
        if (work[i].mass > 1) {
          --work[i].mass;
          --sum;
        }
      }
    }
  }

  QuantizedDistribution q;
  q.precision = precision;
  q.entries.reserve(n);
  for (const Work& w : work) q.entries.push_back({w.id, w.mass});
  std::sort(q.entries.begin(), q.entries.end(),
            [](const QuantizedEntry& a, const QuantizedEntry& b) {
              if (a.mass != b.mass) return a.mass > b.mass;
              return a.id < b.id;
            });
  return q;
}

double entropy_bits(const QuantizedDistribution& q) {
  const double scale = static_cast<double>(q.scale());
  double h = 0.0;
  for (const QuantizedEntry& e : q.entries) {
    const double p = static_cast<double>(e.mass) / scale;
    if (p > 0.0) h -= p * std::log2(p);
  }
  return h;
}

QuantizedDistribution candidate_set(const Provider& provider, std::span<const TokenId> context,
                                    std::size_t k, unsigned precision) {
  return quantize(top_k_truncate(provider.next_distribution(context), k), precision);
}

PrfToyProvider::PrfToyProvider(std::uint64_t seed, std::vector<TokenId> slice, double temperature)
    : seed_(seed), key_(Key128::from_seed(seed)), slice_(std::move(slice)),
      temperature_(temperature) {
  if (slice_.empty()) throw ConfigError("prf-toy provider needs a non-empty vocabulary slice");
  if (!(temperature_ > 0.0)) throw ConfigError("prf-toy temperature must be positive");
  std::sort(slice_.begin(), slice_.end());
  slice_.erase(std::unique(slice_.begin(), slice_.end()), slice_.end());
}

Distribution PrfToyProvider::next_distribution(std::span<const TokenId> context) const {
  const std::vector<std::uint64_t> words = widen(context);
  const std::uint64_t ctx = prf64(key_, "toy-context", words);
  std::vector<double> logits(slice_.size());
  double max_logit = 0.0;
  for (std::size_t i = 0; i < slice_.size(); ++i) {
    logits[i] = unit_interval(prf64(key_, "toy-logit", {ctx, slice_[i]})) / temperature_;
    max_logit = std::max(max_logit, logits[i]);
  }
  Distribution d;
  d.entries.reserve(slice_.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < slice_.size(); ++i) {
    const double w = std::exp(logits[i] - max_logit);
    d.entries.push_back({slice_[i], w});
    sum += w;
  }
  for (TokenProb& e : d.entries) e.prob /= sum;
  return d;
}

std::string PrfToyProvider::describe() const {
  std::ostringstream ss;
  ss << "prf-toy seed=" << seed_ << " slice=" << slice_.size() << " temperature=" << temperature_;
  return ss.str();
}

NgramProvider NgramProvider::train(std::span<const TokenId> corpus, unsigned order,
                                   double epsilon) {
  if (corpus.empty()) throw TrainingError("empty n-gram corpus");
  if (!(epsilon > 0.0)) throw ConfigError("n-gram epsilon must be positive");
  NgramProvider model(order, epsilon);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (unsigned n = 0; n <= order && n <= i; ++n) {
      TokenSeq ctx(corpus.begin() + static_cast<std::ptrdiff_t>(i - n),
                   corpus.begin() + static_cast<std::ptrdiff_t>(i));
      ++model.counts_[std::move(ctx)][corpus[i]];
    }
  }
  return model;
}

Distribution NgramProvider::next_distribution(std::span<const TokenId> context) const {
  const std::size_t longest = std::min<std::size_t>(order_, context.size());
  for (std::size_t n = longest + 1; n-- > 0;) {
    TokenSeq key(context.end() - static_cast<std::ptrdiff_t>(n), context.end());
    const auto it = counts_.find(key);
    if (it == counts_.end()) continue;
    double total = 0.0;
    for (const auto& [id, count] : it->second) total += static_cast<double>(count) + epsilon_;
    Distribution d;
    for (const auto& [id, count] : it->second) {
      d.entries.push_back({id, (static_cast<double>(count) + epsilon_) / total});
    }
    return d;
  }
  throw DomainError("n-gram model has no statistics");
}

std::string NgramProvider::describe() const {
  std::ostringstream ss;
  ss << "ngram order=" << order_ << " epsilon=" << epsilon_ << " contexts=" << counts_.size();
  return ss.str();
}

}  // namespace retoksync

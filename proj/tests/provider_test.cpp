#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "retoksync/errors.hpp"
#include "retoksync/provider.hpp"
#include "retoksync/toy.hpp"
#include "test_support.hpp"

using namespace retoksync;
using retoksync::testing::dist;

namespace {

std::map<TokenId, std::uint64_t> masses(const QuantizedDistribution& q) {
  std::map<TokenId, std::uint64_t> out;
  for (const auto& e : q.entries) out[e.id] = e.mass;
  return out;
}

}  // namespace

TEST(TopK, RenormalizesKept) {
  const Distribution d = top_k_truncate(dist({{0, 0.5}, {1, 0.3}, {2, 0.2}}), 2);
  ASSERT_EQ(d.entries.size(), 2u);
  EXPECT_NEAR(d.prob_of(0), 0.625, 1e-12);
  EXPECT_NEAR(d.prob_of(1), 0.375, 1e-12);
}

TEST(TopK, KeepsAllWhenShort) {
  const Distribution in = dist({{4, 0.6}, {2, 0.4}});
  const Distribution d = top_k_truncate(in, 10);
  EXPECT_EQ(d.entries.size(), 2u);
  EXPECT_NEAR(d.prob_of(4), 0.6, 1e-12);
}

TEST(TopK, TieAtBoundaryKeepsLowerId) {
  const Distribution d = top_k_truncate(dist({{0, 0.4}, {7, 0.3}, {3, 0.3}}), 2);
  EXPECT_GT(d.prob_of(3), 0.0);
  EXPECT_EQ(d.prob_of(7), 0.0);
  EXPECT_THROW(top_k_truncate(d, 1), DomainError);
}

TEST(Quantize, DyadicIsExact) {
  const QuantizedDistribution q = quantize(dist({{0, 0.5}, {1, 0.25}, {2, 0.25}}), 4);
  EXPECT_EQ(masses(q), (std::map<TokenId, std::uint64_t>{{0, 8}, {1, 4}, {2, 4}}));
}

TEST(Quantize, LargestRemainderThirds) {
  const QuantizedDistribution q =
      quantize(dist({{0, 1.0 / 3}, {1, 1.0 / 3}, {2, 1.0 / 3}}), 4);
  EXPECT_EQ(masses(q), (std::map<TokenId, std::uint64_t>{{0, 6}, {1, 5}, {2, 5}}));
  EXPECT_EQ(q.entries.front().id, 0u);
}

TEST(Quantize, SingleEntryGetsEverything) {
  const QuantizedDistribution q = quantize(dist({{5, 1.0}}), 10);
  ASSERT_EQ(q.entries.size(), 1u);
  EXPECT_EQ(q.entries[0].mass, 1024u);
}

TEST(Quantize, Errors) {
  Distribution many;
  for (TokenId i = 0; i < 300; ++i) many.entries.push_back({i, 1.0 / 300});
  EXPECT_THROW(quantize(many, 8), PrecisionError);
  EXPECT_THROW(quantize(dist({{0, 1.0}}), 0), PrecisionError);
  EXPECT_THROW(quantize(dist({{0, 1.0}}), 60), PrecisionError);
}

TEST(Quantize, FuzzSumsAndFloors) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 2000; ++trial) {
    const unsigned precision = 8 + rng() % 23;
    const std::size_t n = 1 + rng() % std::min<std::size_t>(60, std::size_t{1} << (precision - 1));
    Distribution d;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = std::pow(std::uniform_real_distribution<double>(0.0, 1.0)(rng), 4) + 1e-9;
      d.entries.push_back({static_cast<TokenId>(i * 3), w});
      total += w;
    }
    for (auto& e : d.entries) e.prob /= total;
    d.canonicalize();
    const QuantizedDistribution q = quantize(d, precision);
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < q.entries.size(); ++i) {
      const auto& e = q.entries[i];
      ASSERT_GE(e.mass, 1u);
      sum += e.mass;
      const double exact = d.prob_of(e.id) * static_cast<double>(q.scale());
      ASSERT_LT(std::fabs(static_cast<double>(e.mass) - exact), static_cast<double>(n) + 1.0);
      if (i > 0) {
        const auto& prev = q.entries[i - 1];
        ASSERT_TRUE(prev.mass > e.mass || (prev.mass == e.mass && prev.id < e.id));
      }
    }
    ASSERT_EQ(sum, q.scale());
  }
}

TEST(Entropy, Examples) {
  EXPECT_DOUBLE_EQ(entropy_bits(retoksync::testing::qdist(4, {{0, 8}, {1, 8}})), 1.0);
  EXPECT_DOUBLE_EQ(entropy_bits(retoksync::testing::qdist(4, {{0, 16}})), 0.0);
  EXPECT_DOUBLE_EQ(entropy_bits(retoksync::testing::qdist(4, {{0, 8}, {1, 4}, {2, 4}})), 1.5);
}

TEST(PrfToy, DeterministicAndContextSensitive) {
  const TokenizerProfile p = toy::english_profile();
  const PrfToyProvider model(7, toy::printable_slice(p));
  const Distribution d0 = model.next_distribution({});
  const Distribution d1 = model.next_distribution({});
  ASSERT_EQ(d0.entries.size(), d1.entries.size());
  for (std::size_t i = 0; i < d0.entries.size(); ++i) {
    EXPECT_EQ(d0.entries[i].id, d1.entries[i].id);
    EXPECT_EQ(d0.entries[i].prob, d1.entries[i].prob);
  }
  EXPECT_NEAR(d0.total(), 1.0, 1e-9);
  const TokenSeq a{p.byte_token('a')};
  const TokenSeq b{p.byte_token('b')};
  const Distribution da = model.next_distribution(a);
  const Distribution db = model.next_distribution(b);
  bool differ = false;
  for (std::size_t i = 0; i < da.entries.size(); ++i) {
    differ |= da.entries[i].id != db.entries[i].id || da.entries[i].prob != db.entries[i].prob;
  }
  EXPECT_TRUE(differ);
  EXPECT_NE(PrfToyProvider(8, toy::printable_slice(p)).next_distribution({}).entries[0].prob,
            d0.entries[0].prob);
}

TEST(PrfToy, SupportIsTheSlice) {
  const TokenizerProfile p = toy::minimal_profile();
  const auto slice = toy::resolve_slice(p, "ids:97,98,256,257");
  const PrfToyProvider model(1, slice);
  const Distribution d = model.next_distribution({});
  EXPECT_EQ(d.entries.size(), 4u);
  for (const auto& e : d.entries) {
    EXPECT_NE(std::find(slice.begin(), slice.end(), e.id), slice.end());
  }
}

TEST(Ngram, BigramOnAbab) {
  const TokenizerProfile p = TokenizerProfile::byte_level();
  const TokenSeq corpus = p.encode("abab");
  const NgramProvider model = NgramProvider::train(corpus, 1, 0.01);
  const Distribution after_a = model.next_distribution(TokenSeq{p.byte_token('a')});
  ASSERT_EQ(after_a.entries.size(), 1u);
  EXPECT_EQ(after_a.entries[0].id, p.byte_token('b'));
  EXPECT_DOUBLE_EQ(after_a.entries[0].prob, 1.0);
  // Unseen context backs off to unigram counts: a:2, b:2.
  const Distribution fresh = model.next_distribution(TokenSeq{p.byte_token('z')});
  EXPECT_NEAR(fresh.prob_of(p.byte_token('a')), 0.5, 1e-12);
}

TEST(Ngram, SmoothingOverObservedContinuations) {
  const TokenizerProfile p = TokenizerProfile::byte_level();
  const NgramProvider model = NgramProvider::train(p.encode("abacab"), 1, 0.5);
  // After 'a': b twice, c once.
  const Distribution d = model.next_distribution(TokenSeq{p.byte_token('a')});
  EXPECT_NEAR(d.prob_of(p.byte_token('b')), 2.5 / 4.0, 1e-12);
  EXPECT_NEAR(d.prob_of(p.byte_token('c')), 1.5 / 4.0, 1e-12);
}

TEST(CandidateSet, TruncatesThenQuantizes) {
  retoksync::testing::TableProvider model(dist({{0, 0.5}, {1, 0.3}, {2, 0.2}}));
  const QuantizedDistribution q = candidate_set(model, {}, 2, 8);
  EXPECT_EQ(masses(q), (std::map<TokenId, std::uint64_t>{{0, 160}, {1, 96}}));
}

#include <gtest/gtest.h>

#include <random>

#include "retoksync/codec.hpp"
#include "retoksync/errors.hpp"
#include "retoksync/toy.hpp"
#include "test_support.hpp"

using namespace retoksync;
using retoksync::testing::binary;
using retoksync::testing::common_prefix_oracle;
using retoksync::testing::qdist;

namespace {

constexpr TokenId A = 0, B = 1, C = 2;

QuantizedDistribution abc() { return qdist(4, {{A, 8}, {B, 4}, {C, 4}}); }

QuantizedDistribution random_q(std::mt19937_64& rng, unsigned precision, std::size_t n) {
  std::vector<std::uint64_t> cuts;
  const std::uint64_t scale = std::uint64_t{1} << precision;
  while (cuts.size() < n - 1) {
    const std::uint64_t c = 1 + rng() % (scale - 1);
    if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
  }
  cuts.push_back(0);
  cuts.push_back(scale);
  std::sort(cuts.begin(), cuts.end());
  std::vector<QuantizedEntry> e;
  for (std::size_t i = 0; i < n; ++i) {
    e.push_back({static_cast<TokenId>(i * 5 + 1), cuts[i + 1] - cuts[i]});
  }
  std::sort(e.begin(), e.end(), [](const auto& x, const auto& y) {
    return x.mass != y.mass ? x.mass > y.mass : x.id < y.id;
  });
  QuantizedDistribution q;
  q.precision = precision;
  q.entries = e;
  return q;
}

Bits random_bits(std::mt19937_64& rng, std::size_t n) {
  Bits b(n);
  for (std::size_t i = 0; i < n; ++i) b[i] = rng() & 1;
  return b;
}

}  // namespace

TEST(MaskBlock, DeterministicAndKeyed) {
  const Key128 k = Key128::from_seed(1);
  EXPECT_EQ(mask_block(k, 0, 30), mask_block(k, 0, 30));
  EXPECT_NE(mask_block(k, 0, 30), mask_block(k, 1, 30));
  EXPECT_NE(mask_block(k, 0, 30), mask_block(Key128::from_seed(2), 0, 30));
  EXPECT_LT(mask_block(k, 5, 12), 1u << 12);
  EXPECT_NE(mask_block(k, 0, 7, 30), mask_block(k, 0, 8, 30));
}

TEST(ContextDigest, ChainsTokenByToken) {
  const Key128 k = Key128::from_seed(4);
  const TokenSeq seq{5, 6, 7};
  std::uint64_t d = context_digest(k, {});
  for (TokenId t : seq) d = extend_digest(k, d, t);
  EXPECT_EQ(d, context_digest(k, seq));
  EXPECT_NE(context_digest(k, TokenSeq{5, 6}), context_digest(k, TokenSeq{6, 5}));
}

TEST(Payload, PadIsKeyedAndStable) {
  const Payload p(from_ascii("1011"), Key128::from_seed(3));
  EXPECT_EQ(to_ascii(p.range(0, 4)), "1011");
  EXPECT_EQ(p.window(0, 4), 0b1011u);
  const Bits tail = p.range(4, 64);
  EXPECT_EQ(tail, Payload(from_ascii("0000"), Key128::from_seed(3)).range(4, 64));
  EXPECT_NE(tail, Payload(from_ascii("1011"), Key128::from_seed(4)).range(4, 64));
  EXPECT_EQ(p.window(2, 6), value_of(p.range(2, 6)));
}

TEST(EncStep, PinnedExamples) {
  const QuantizedDistribution q = abc();
  // With mask 0 the payload window is r itself.
  const Payload r0101(from_ascii("0101"), Key128::from_seed(0));
  const EncodedStep a = enc_step(q, r0101, 0, 0);
  EXPECT_EQ(a.outcome.token, A);
  EXPECT_EQ(a.outcome.fragment_len, 1u);
  EXPECT_EQ(to_ascii(a.outcome.fragment), "0");
  EXPECT_EQ(a.next_pointer, 1u);

  const Payload r1001(from_ascii("1001"), Key128::from_seed(0));
  const EncodedStep b = enc_step(q, r1001, 0, 0);
  EXPECT_EQ(b.outcome.token, B);
  EXPECT_EQ(b.outcome.fragment_len, 2u);
  EXPECT_EQ(to_ascii(b.outcome.fragment), "10");

  const EncodedStep x = enc_step(qdist(4, {{9, 16}}), r1001, 3, 0b0110);
  EXPECT_EQ(x.outcome.token, 9u);
  EXPECT_EQ(x.outcome.fragment_len, 0u);
  EXPECT_EQ(x.next_pointer, 3u);
}

TEST(EncStep, MaskIsXoredIn) {
  const QuantizedDistribution q = abc();
  const Payload p(from_ascii("0000"), Key128::from_seed(0));
  EXPECT_EQ(enc_step(q, p, 0, 0b1101).outcome.token, C);
  EXPECT_EQ(enc_step(q, p, 0, 0b1000).outcome.token, B);
}

TEST(DecStep, PinnedExample) {
  const StepOutcome c = dec_step(abc(), C, 0);
  EXPECT_EQ(c.fragment_len, 2u);
  EXPECT_EQ(to_ascii(c.fragment), "11");
  EXPECT_EQ(to_ascii(dec_step(abc(), C, 0b1111).fragment), "00");
  EXPECT_THROW(dec_step(abc(), 42, 0), DecodeError);
}

TEST(DecStep, FragmentMatchesIntervalPrefixOracle) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const unsigned P = 4 + rng() % 7;
    const QuantizedDistribution q = random_q(rng, P, 1 + rng() % 6);
    const std::uint64_t mask = rng() % q.scale();
    std::uint64_t lo = 0;
    for (const auto& e : q.entries) {
      const std::string prefix = common_prefix_oracle(lo, lo + e.mass, P);
      const StepOutcome o = dec_step(q, e.id, mask);
      ASSERT_EQ(o.fragment_len, prefix.size());
      const std::string masked = binary(mask >> (P - prefix.size()), prefix.size());
      std::string expect = prefix;
      for (std::size_t i = 0; i < expect.size(); ++i) expect[i] = expect[i] == masked[i] ? '0' : '1';
      ASSERT_EQ(to_ascii(o.fragment), expect);
      lo += e.mass;
    }
  }
}

TEST(EncDec, RoundTripFuzz) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 2000; ++trial) {
    const unsigned P = 8 + rng() % 20;
    const QuantizedDistribution q = random_q(rng, P, 2 + rng() % 10);
    const Bits bits = random_bits(rng, 64);
    const Payload payload(bits, Key128::from_seed(trial));
    const std::size_t j = rng() % 20;
    const std::uint64_t mask = rng() & (q.scale() - 1);
    const EncodedStep s = enc_step(q, payload, j, mask);
    const StepOutcome d = dec_step(q, s.outcome.token, mask);
    ASSERT_EQ(d.fragment, s.outcome.fragment);
    ASSERT_EQ(s.outcome.fragment, payload.range(j, s.outcome.fragment_len));
    ASSERT_EQ(s.next_pointer, j + s.outcome.fragment_len);
  }
}

TEST(Marginal, ExhaustiveSmallExample) {
  const auto counts = exhaustive_marginal(abc(), Payload(from_ascii("0110"), Key128::from_seed(2)));
  EXPECT_EQ(counts.at(A), 8u);
  EXPECT_EQ(counts.at(B), 4u);
  EXPECT_EQ(counts.at(C), 4u);
  const auto single = exhaustive_marginal(qdist(4, {{3, 16}}), Payload({}, Key128::from_seed(2)));
  EXPECT_EQ(single.at(3), 16u);
}

TEST(Marginal, MonteCarloTwoWay) {
  std::mt19937_64 rng(10);
  const auto freq = marginal_check(qdist(4, {{0, 8}, {1, 8}}), 100000, rng);
  const double sigma = std::sqrt(0.25 / 100000);
  EXPECT_NEAR(freq.at(0), 0.5, 3 * sigma);
  EXPECT_NEAR(freq.at(1), 0.5, 3 * sigma);
}

TEST(Extractor, EmptySequenceGivesInitialState) {
  retoksync::testing::TableProvider model(retoksync::testing::dist({{1, 0.5}, {2, 0.5}}));
  CodecParams params;
  params.key = Key128::from_seed(1);
  const TokenSeq ctx{7};
  const ExtractionResult r = dec({}, ctx, model, params, true);
  EXPECT_EQ(r.pointer, 0u);
  EXPECT_TRUE(r.bits.empty());
  EXPECT_EQ(r.state, mask_state_for(params, ctx, 0));
}

TEST(Extractor, SkipXConsumesNothing) {
  retoksync::testing::TableProvider model(retoksync::testing::dist({{1, 0.5}, {2, 0.5}}));
  CodecParams params;
  params.key = Key128::from_seed(1);
  params.precision = 8;
  const TokenSeq seq{1, 99, 2};
  const ExtractionResult r = dec(seq, {}, model, params, true);
  ASSERT_EQ(r.steps.size(), 3u);
  EXPECT_TRUE(r.steps[1].skipped);
  EXPECT_EQ(r.steps[1].fragment_len, 0u);
  EXPECT_EQ(r.pointer, 2u);
  EXPECT_EQ(r.offsets, (std::vector<std::size_t>{0, 1, 1}));
  try {
    dec(seq, {}, model, params, false);
    FAIL() << "expected DecodeError";
  } catch (const DecodeError& e) {
    EXPECT_EQ(e.position(), 1u);
  }
}

TEST(Extractor, TruncateAndRepushMatchesFullDecode) {
  const TokenizerProfile profile = toy::english_profile();
  const PrfToyProvider model(7, toy::printable_slice(profile));
  CodecParams params;
  params.key = Key128::from_seed(12);
  params.top_k = 8;
  std::mt19937_64 rng(13);
  const TokenSeq ctx = profile.encode("Hello.");
  for (int trial = 0; trial < 30; ++trial) {
    TokenSeq seq;
    Extractor ex(model, params, true, ctx);
    for (int i = 0; i < 20; ++i) {
      const TokenId t = toy::printable_slice(profile)[rng() % 40];
      seq.push_back(t);
      ex.push(t);
    }
    const std::size_t cut = rng() % 20;
    ex.truncate(cut);
    for (std::size_t i = cut; i < seq.size(); ++i) ex.push(seq[i]);
    ASSERT_EQ(ex.result(), dec(seq, ctx, model, params, true));
  }
}

TEST(MaskBinding, PositionIgnoresContext) {
  CodecParams params;
  params.key = Key128::from_seed(5);
  params.binding = MaskBinding::kPosition;
  const TokenSeq a{1, 2}, b{3, 4};
  EXPECT_EQ(mask_for(params, mask_state_for(params, a, 3)),
            mask_for(params, mask_state_for(params, b, 3)));
  params.binding = MaskBinding::kContext;
  EXPECT_NE(mask_for(params, mask_state_for(params, a, 3)),
            mask_for(params, mask_state_for(params, b, 3)));
}

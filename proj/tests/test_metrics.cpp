#include <gtest/gtest.h>

#include <algorithm>
#include <vector>

#include "apuf/metrics.hpp"
#include "apuf/puf_core.hpp"

namespace apuf {
namespace {

// Responds with a fixed word regardless of challenge.
struct ConstantPuf {
  Response word;
  std::size_t n = 8;
};

Response respond(const ConstantPuf& p, const BitWord&, std::optional<std::uint64_t> = std::nullopt) {
  return p.word;
}
std::size_t challenge_width(const ConstantPuf& p) { return p.n; }
std::size_t response_width(const ConstantPuf& p) { return p.word.width(); }
double noise_sigma(const ConstantPuf&) { return 0.0; }

// Bitwise complement of a chain's response.
struct ComplementPuf {
  ArbiterChain chain;
};

Response respond(const ComplementPuf& p, const BitWord& c, std::optional<std::uint64_t> s = std::nullopt) {
  Response r = apuf::respond(p.chain, c, s);
  r.flip(0);
  return r;
}
std::size_t challenge_width(const ComplementPuf& p) { return p.chain.stages(); }
std::size_t response_width(const ComplementPuf&) { return 1; }
double noise_sigma(const ComplementPuf& p) { return p.chain.noise_sigma(); }

std::vector<ArbiterChain> chains(std::size_t k, std::size_t n, std::uint64_t seed, double noise = 0.0) {
  std::vector<ArbiterChain> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(sample_chain(n, DelayParams{}, derive_seed(seed, i), noise));
  return out;
}

TEST(Uniformity, ConstantResponses) {
  const auto ch = random_challenges(8, 20, 1);
  Response ones(4);
  for (std::size_t b = 0; b < 4; ++b) ones.set(b, true);
  EXPECT_EQ(uniformity(ConstantPuf{Response(4)}, ch), 0.0);
  EXPECT_EQ(uniformity(ConstantPuf{ones}, ch), 1.0);
  EXPECT_THROW(uniformity(ConstantPuf{ones}, std::vector<Challenge>{}), InvalidParameter);
}

TEST(Uniformity, RandomChainsAverageToHalf) {
  const auto pufs = chains(50, 64, 11);
  const auto ch = random_challenges(64, 1000, 12);
  double mean = 0.0;
  for (const auto& p : pufs) {
    const double u = uniformity(p, ch);
    EXPECT_GE(u, 0.0);
    EXPECT_LE(u, 1.0);
    mean += u;
  }
  mean /= 50.0;
  EXPECT_GE(mean, 0.45);
  EXPECT_LE(mean, 0.55);
}

TEST(Uniqueness, IdenticalAndOpposite) {
  const ArbiterChain c = sample_chain(16, DelayParams{}, 3);
  const auto ch = random_challenges(16, 200, 4);
  const std::vector<ArbiterChain> same{c, c, c, c};
  EXPECT_EQ(uniqueness<ArbiterChain>(same, ch), 0.0);
  const std::vector<ComplementPuf> pair{ComplementPuf{c}, ComplementPuf{c}};
  EXPECT_EQ(uniqueness<ComplementPuf>(pair, ch), 0.0);
  std::vector<ConstantPuf> words{ConstantPuf{Response(BitWord::from_bits({0, 1, 0}))},
                                 ConstantPuf{Response(BitWord::from_bits({1, 0, 1}))}};
  EXPECT_EQ(uniqueness<ConstantPuf>(words, ch), 1.0);
}

TEST(Uniqueness, ChainAgainstItsComplementIsOne) {
  const ArbiterChain c = sample_chain(16, DelayParams{}, 5);
  const auto ch = random_challenges(16, 300, 6);
  std::size_t differing = 0;
  for (const auto& x : ch) differing += hamming_distance(respond(c, x), respond(ComplementPuf{c}, x));
  EXPECT_EQ(differing, ch.size());
}

TEST(Uniqueness, IndependentInstancesNearHalf) {
  const auto pufs = chains(20, 64, 21);
  const auto ch = random_challenges(64, 1000, 22);
  const double u = uniqueness<ArbiterChain>(pufs, ch);
  EXPECT_NEAR(u, 0.5, 0.05);
  std::vector<ArbiterChain> reversed(pufs.rbegin(), pufs.rend());
  EXPECT_DOUBLE_EQ(uniqueness<ArbiterChain>(reversed, ch), u);
  EXPECT_DOUBLE_EQ(uniqueness<ArbiterChain>(pufs, ch, 4), u);
}

TEST(Uniqueness, NeedsTwoInstances) {
  const auto pufs = chains(1, 8, 1);
  EXPECT_THROW(uniqueness<ArbiterChain>(pufs, random_challenges(8, 5, 1)), InvalidParameter);
}

TEST(Reliability, ZeroNoiseIsExactlyOne) {
  const ArbiterChain c = sample_chain(64, DelayParams{}, 1);
  EXPECT_EQ(reliability(c, random_challenges(64, 200, 2), 5, 3), 1.0);
}

TEST(Reliability, HugeNoiseIsCoinFlip) {
  const ArbiterChain c = sample_chain(64, DelayParams{}, 1, 1000.0 * DelayParams{}.sigma);
  const double r = reliability(c, random_challenges(64, 1000, 2), 10, 3);
  EXPECT_NEAR(r, 0.5, 0.05);
}

TEST(Reliability, NonIncreasingInNoise) {
  const ArbiterChain base = sample_chain(64, DelayParams{}, 8);
  const auto ch = random_challenges(64, 1000, 9);
  double previous = 1.0;
  for (double sigma : {0.01, 0.1, 1.0}) {
    const double r = reliability(base.with_noise(sigma), ch, 10, 77);
    EXPECT_LE(r, previous) << "sigma " << sigma;
    previous = r;
  }
  EXPECT_LT(previous, 1.0);
}

TEST(Reliability, NeedsRepetitionsUnderNoise) {
  const ArbiterChain c = sample_chain(8, DelayParams{}, 1, 0.5);
  EXPECT_THROW(reliability(c, random_challenges(8, 5, 1), 1, 0), InvalidParameter);
}

TEST(BitAliasing, ZeroResponses) {
  const std::vector<ConstantPuf> pufs{ConstantPuf{Response(3)}, ConstantPuf{Response(3)}};
  EXPECT_EQ(bit_aliasing<ConstantPuf>(pufs, random_challenges(8, 10, 1)), std::vector<double>(3, 0.0));
}

TEST(BitAliasing, IndependentInstancesUnbiased) {
  std::vector<MultiBitPuf> pufs;
  for (std::uint64_t i = 0; i < 50; ++i) pufs.push_back(sample_multibit(16, DelayParams{}, derive_seed(30, i)));
  const auto ba = bit_aliasing<MultiBitPuf>(pufs, random_challenges(16, 1000, 31));
  ASSERT_EQ(ba.size(), 16U);
  for (double v : ba) {
    EXPECT_GE(v, 0.4);
    EXPECT_LE(v, 0.6);
  }
}

TEST(BitAliasing, SingleBitEqualsPooledUniformity) {
  const auto pufs = chains(10, 32, 40);
  const auto ch = random_challenges(32, 300, 41);
  double pooled = 0.0;
  for (const auto& p : pufs) pooled += uniformity(p, ch);
  pooled /= 10.0;
  const auto ba = bit_aliasing<ArbiterChain>(pufs, ch);
  ASSERT_EQ(ba.size(), 1U);
  EXPECT_NEAR(ba[0], pooled, 1e-12);
}

TEST(Measure, ReportRangesAndSeeds) {
  const auto pufs = chains(8, 32, 50, 0.2);
  const auto ch = random_challenges(32, 200, 51);
  const MetricsReport r = measure<ArbiterChain>(pufs, ch, 4, 51, 52, 2);
  EXPECT_EQ(r.instances, 8U);
  EXPECT_EQ(r.challenges, 200U);
  EXPECT_EQ(r.repetitions, 4U);
  EXPECT_EQ(r.challenge_seed, 51U);
  EXPECT_EQ(r.noise_seed, 52U);
  ASSERT_TRUE(r.uniqueness.has_value());
  for (double v : {r.uniformity, *r.uniqueness, r.reliability}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_LT(r.reliability, 1.0);
  const MetricsReport serial = measure<ArbiterChain>(pufs, ch, 4, 51, 52, 1);
  EXPECT_EQ(to_csv(serial), to_csv(r));
}

}  // namespace
}  // namespace apuf

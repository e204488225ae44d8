#include "widepose/error.hpp"
#include "widepose/sampling.hpp"

#include <gtest/gtest.h>

#include <map>
#include <numeric>
#include <random>

namespace widepose {
namespace {

SamplingParams with_lambda(double lambda) {
  SamplingParams p;
  p.lambda = lambda;
  return p;
}

TEST(LevelDeltas, Examples) {
  const auto d = level_deltas(64.0, SamplingParams{});
  const double expected[] = {2, 1, 0, 1, 2};
  for (std::size_t k = 0; k < 5; ++k) EXPECT_DOUBLE_EQ(d[k], expected[k]);
  for (double s : {16.0, 32.0, 64.0, 128.0, 256.0}) {
    const auto dk = level_deltas(s, SamplingParams{});
    EXPECT_EQ(*std::min_element(dk.begin(), dk.end()), 0.0);
  }
  try {
    level_deltas(0.0, SamplingParams{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonPositiveSize);
  }
  EXPECT_THROW(level_deltas(-3.0, SamplingParams{}), Error);
}

TEST(SampleCounts, UniformAtLambdaZero) {
  for (double s : {3.0, 64.0, 90.0, 4000.0}) {
    for (double n : sample_counts(s, with_lambda(0.0)).expected) EXPECT_DOUBLE_EQ(n, 2.0);
  }
}

// Reference values from a 40-digit evaluation of the softmax.
TEST(SampleCounts, OracleValues) {
  const double s64[] = {0.103338640107833, 2.07561207147788, 5.64209857682857, 2.07561207147788,
                        0.103338640107833};
  const auto a = sample_counts(64.0, with_lambda(1.0)).expected;
  for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(a[k], s64[k], 1e-12);

  const double s100[] = {0.0052083588256118959, 0.37916716673183253, 3.735696504208643,
                         4.9810796320575059, 0.89884833817640671};
  const auto b = sample_counts(100.0, with_lambda(1.0)).expected;
  for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(b[k], s100[k], 1e-12);

  const double s20[] = {4.7060325478423844, 3.9383950846843762, 1.2125206762962597,
                        0.13732972281710023, 0.0057219683598794821};
  const auto c = sample_counts(20.0, with_lambda(0.5)).expected;
  for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(c[k], s20[k], 1e-12);
}

TEST(SampleCounts, HardAssignment) {
  const auto n = sample_counts(32.0, with_lambda(30.0)).expected;
  EXPECT_NEAR(n[1], 10.0, 1e-9);
  for (std::size_t k : {0u, 2u, 3u, 4u}) EXPECT_NEAR(n[k], 0.0, 1e-9);
}

TEST(SampleCounts, SumsToAlphaProperty) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> log_size(0.0, 12.0), lambda(0.0, 50.0), alpha(0.5, 40.0);
  for (int i = 0; i < 2000; ++i) {
    SamplingParams p;
    p.lambda = lambda(rng);
    p.alpha = alpha(rng);
    const auto n = sample_counts(std::exp2(log_size(rng)), p).expected;
    EXPECT_NEAR(std::accumulate(n.begin(), n.end(), 0.0), p.alpha, 1e-9 * p.alpha);
    for (double x : n) EXPECT_GE(x, 0.0);
  }
}

TEST(SampleCounts, SymmetricAroundMatchedLevel) {
  for (double lambda : {0.1, 1.0, 3.0}) {
    const auto n = sample_counts(64.0, with_lambda(lambda)).expected;
    EXPECT_DOUBLE_EQ(n[0], n[4]);
    EXPECT_DOUBLE_EQ(n[1], n[3]);
  }
}

TEST(SampleCounts, ConcentrationIsMonotoneInLambda) {
  for (std::size_t k = 0; k < 5; ++k) {
    const double s = 16.0 * std::exp2(static_cast<double>(k));
    double previous = 0.0;
    for (double lambda = 0.0; lambda <= 40.0; lambda += 0.5) {
      const double n = sample_counts(s, with_lambda(lambda)).expected[k];
      EXPECT_GE(n, previous - 1e-12);
      previous = n;
    }
    EXPECT_NEAR(previous, 10.0, 1e-9);
  }
}

TEST(SampleCounts, RejectsInvalidParams) {
  EXPECT_THROW(sample_counts(64.0, with_lambda(-1.0)), Error);
  SamplingParams p;
  p.alpha = 0.0;
  EXPECT_THROW(sample_counts(64.0, p), Error);
  p = SamplingParams{};
  p.reference_sizes = {16, 16, 64};
  EXPECT_THROW(sample_counts(64.0, p), Error);
}

TEST(RealizeCounts, IntegersPassThrough) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto n = realize_counts({2, 2, 2, 2, 2}, seed);
    for (auto x : n) EXPECT_EQ(x, 2u);
    EXPECT_EQ(realize_counts({0.0, 3.0}, seed)[0], 0u);
  }
}

TEST(RealizeCounts, UnbiasedMonteCarlo) {
  const std::vector<double> expected = {0.1033, 2.0756, 5.6421, 2.0756, 0.1033};
  std::vector<double> mean(5, 0.0);
  const int n = 100000;
  for (int s = 0; s < n; ++s) {
    const auto r = realize_counts(expected, static_cast<std::uint64_t>(s));
    for (std::size_t k = 0; k < 5; ++k) mean[k] += static_cast<double>(r[k]) / n;
  }
  for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(mean[k], expected[k], 0.01);
}

TEST(RealizeCounts, RoundedIsHalfUp) {
  const auto n = realize_counts_rounded({0.49, 0.5, 2.5, 5.6421, 0.0});
  EXPECT_EQ(n, (std::vector<std::size_t>{0, 1, 3, 6, 0}));
}

SegmentationMask square_mask(int side) {
  SegmentationMask mask(PyramidSpec::standard());
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) mask.set(0, {r, c}, true);
  }
  return mask;
}

TEST(SelectCells, ClampsToMaskAndIsDistinct) {
  const auto mask = square_mask(3);
  const auto all = select_cells(mask, {20, 0, 0, 0, 0}, 5);
  EXPECT_EQ(all[0].size(), 9u);
  auto sorted = all[0];
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(std::adjacent_find(sorted.begin(), sorted.end()), sorted.end());
  const auto some = select_cells(mask, {4, 3, 0, 0, 0}, 5);
  EXPECT_EQ(some[0].size(), 4u);
  EXPECT_TRUE(some[1].empty());  // level 2 mask is empty
  for (const auto& c : some[0]) EXPECT_TRUE(mask.contains(0, c));
}

TEST(SelectCells, Deterministic) {
  const auto mask = square_mask(6);
  EXPECT_EQ(select_cells(mask, {5, 0, 0, 0, 0}, 42), select_cells(mask, {5, 0, 0, 0, 0}, 42));
}

TEST(SelectCells, UniformOverMask) {
  const auto mask = square_mask(2);
  std::map<CellIndex, int> freq;
  for (std::uint64_t s = 0; s < 10000; ++s) freq[select_cells(mask, {1, 0, 0, 0, 0}, s)[0].at(0)]++;
  ASSERT_EQ(freq.size(), 4u);
  for (const auto& [cell, n] : freq) EXPECT_NEAR(n, 2500, 150);
}

}  // namespace
}  // namespace widepose

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "hicd/error.hpp"
#include "hicd/metrics.hpp"

namespace hicd {
namespace {

Confusion random_confusion(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::uint64_t> count(0, 1000);
  return {count(rng), count(rng), count(rng), count(rng)};
}

TEST(Accumulate, Examples) {
  std::vector<std::uint8_t> label(100, 0);
  std::fill(label.begin(), label.begin() + 10, 1);
  const Confusion same = hicd::accumulate(Confusion{}, label, label);
  EXPECT_EQ(same, (Confusion{10, 0, 0, 90}));

  const std::vector<std::uint8_t> ones(100, 1), zeros(100, 0);
  EXPECT_EQ(hicd::accumulate(Confusion{}, ones, zeros).fp, 100u);
  EXPECT_THROW(hicd::accumulate(Confusion{}, ones, std::vector<std::uint8_t>(99, 0)), DimensionError);
}

TEST(Accumulate, MatchesScalarLoop) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::uint8_t> pred(256), label(256);
    for (auto& v : pred) v = static_cast<std::uint8_t>(rng() % 2);
    for (auto& v : label) v = static_cast<std::uint8_t>(rng() % 2);
    Confusion expected;
    for (std::size_t i = 0; i < 256; ++i) {
      if (pred[i] && label[i]) ++expected.tp;
      if (pred[i] && !label[i]) ++expected.fp;
      if (!pred[i] && label[i]) ++expected.fn;
      if (!pred[i] && !label[i]) ++expected.tn;
    }
    const Confusion got = hicd::accumulate(Confusion{}, pred, label);
    ASSERT_EQ(got, expected);
    ASSERT_EQ(got.total(), 256u);
  }
}

TEST(Accumulate, MergeIsAssociativeAndCommutative) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const Confusion a = random_confusion(rng), b = random_confusion(rng), c = random_confusion(rng);
    Confusion ab_c = a;
    ab_c.merge(b).merge(c);
    Confusion bc = b;
    bc.merge(c);
    Confusion a_bc = a;
    a_bc.merge(bc);
    Confusion ba = b;
    ba.merge(a);
    Confusion ab = a;
    ab.merge(b);
    ASSERT_EQ(ab_c, a_bc);
    ASSERT_EQ(ab, ba);
  }
}

TEST(Scores, Examples) {
  const Scores s = scores({50, 10, 10, 0});
  EXPECT_NEAR(s.precision, 50.0 / 60.0, 1e-15);
  EXPECT_NEAR(s.recall, 50.0 / 60.0, 1e-15);
  EXPECT_NEAR(s.f1, 50.0 / 60.0, 1e-15);
  EXPECT_NEAR(s.iou, 50.0 / 70.0, 1e-15);

  const Scores empty = scores({0, 0, 0, 25});
  EXPECT_EQ(empty.precision, 0.0);
  EXPECT_EQ(empty.recall, 0.0);
  EXPECT_EQ(empty.f1, 0.0);
  EXPECT_EQ(empty.iou, 0.0);

  const Scores perfect = scores({7, 0, 0, 3});
  EXPECT_EQ(perfect.precision, 1.0);
  EXPECT_EQ(perfect.recall, 1.0);
  EXPECT_EQ(perfect.f1, 1.0);
  EXPECT_EQ(perfect.iou, 1.0);
}

TEST(ScoresProperty, MatchConfusionArithmetic) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10000; ++trial) {
    const Confusion c = random_confusion(rng);
    const Scores s = scores(c);
    const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    const double f1 = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    const double iou = tp + fp + fn > 0 ? tp / (tp + fp + fn) : 0.0;
    ASSERT_NEAR(s.precision, p, 1e-12);
    ASSERT_NEAR(s.recall, r, 1e-12);
    ASSERT_NEAR(s.f1, f1, 1e-12);
    ASSERT_NEAR(s.iou, iou, 1e-12);
    if (c.tp >= 1) ASSERT_NEAR(s.f1, 2 * s.iou / (1 + s.iou), 1e-12);
  }
}

TEST(ScoresProperty, InvariantUnderCountScaling) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    const Confusion c = random_confusion(rng);
    const std::uint64_t k = 1 + rng() % 50;
    const Scores a = scores(c), b = scores({c.tp * k, c.fp * k, c.fn * k, c.tn * k});
    ASSERT_NEAR(a.precision, b.precision, 1e-12);
    ASSERT_NEAR(a.recall, b.recall, 1e-12);
    ASSERT_NEAR(a.f1, b.f1, 1e-12);
    ASSERT_NEAR(a.iou, b.iou, 1e-12);
  }
}

TEST(Scores, SerializedForms) {
  EXPECT_EQ(csv_header(), "setting,f1,iou,precision,recall");
  const std::string row = csv_row("multi", scores({50, 10, 10, 0}));
  EXPECT_EQ(row.rfind("multi,", 0), 0u);
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), 4);
  const Confusion c{1, 2, 3, 4};
  EXPECT_EQ(nlohmann::json(c).get<Confusion>(), c);
  const auto j = nlohmann::json(scores(c));
  for (const char* key : {"f1", "iou", "precision", "recall"}) EXPECT_TRUE(j.contains(key)) << key;
}

}  // namespace
}  // namespace hicd

#include "roikit/eval.hpp"

#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "support/generators.hpp"
#include "support/oracles.hpp"

namespace roikit {
namespace {

constexpr auto TP = MatchLabel::TruePositive;
constexpr auto FP = MatchLabel::FalsePositive;

Box tall(Real x, Real h) { return {x, 0, x + 10, h}; }

TEST(ScaleBinTest, Boundaries) {
  EXPECT_EQ(scale_bin(20), ScaleBin::Small);
  EXPECT_EQ(scale_bin(50), ScaleBin::Medium);
  EXPECT_EQ(scale_bin(70), ScaleBin::Large);
  EXPECT_EQ(scale_bin(14), ScaleBin::Ignored);
  EXPECT_EQ(scale_bin(15), ScaleBin::Small);
  EXPECT_EQ(scale_bin(39), ScaleBin::Medium);
  EXPECT_EQ(scale_bin(66), ScaleBin::Medium);
  EXPECT_EQ(scale_bin(66.5), ScaleBin::Large);
  EXPECT_THROW(scale_bin(0), std::invalid_argument);
}

TEST(MatchTest, SingleHit) {
  const std::vector<Detection> dets{{0, 0.9, tall(0, 20)}};
  const std::vector<GroundTruth> gts{make_ground_truth(0, tall(0, 20))};
  const auto m = match_detections(dets, gts);
  EXPECT_EQ(m.labels(), (std::vector<MatchLabel>{TP}));
  EXPECT_EQ(m.n_positive, 1u);
}

TEST(MatchTest, DuplicateDetectionIsFalsePositive) {
  const std::vector<Detection> dets{{0, 0.8, tall(0, 20)}, {0, 0.9, tall(0, 20)}};
  const std::vector<GroundTruth> gts{make_ground_truth(0, tall(0, 20))};
  const auto m = match_detections(dets, gts);
  ASSERT_EQ(m.ranked.size(), 2u);
  EXPECT_EQ(m.ranked[0].detection, 1u);
  EXPECT_EQ(m.labels(), (std::vector<MatchLabel>{TP, FP}));
}

TEST(MatchTest, WrongClassOrLowIouIsFalsePositive) {
  const std::vector<Detection> dets{{1, 0.9, tall(0, 20)}, {0, 0.5, tall(4, 20)}};
  const std::vector<GroundTruth> gts{make_ground_truth(0, tall(0, 20))};
  EXPECT_EQ(match_detections(dets, gts).labels(), (std::vector<MatchLabel>{FP, FP}));
}

TEST(MatchTest, DontCareHitsAreDropped) {
  const std::vector<Detection> dets{{0, 0.9, tall(0, 10)}, {0, 0.8, tall(50, 30)}};
  const std::vector<GroundTruth> gts{make_ground_truth(0, tall(0, 10)), make_ground_truth(0, tall(50, 30), true)};
  const auto m = match_detections(dets, gts);
  EXPECT_TRUE(m.ranked.empty());
  EXPECT_EQ(m.dropped.size(), 2u);
  EXPECT_EQ(m.n_positive, 0u);
}

TEST(MatchTest, ConflictIsResolvedByReseating) {
  // The top detection overlaps both GTs equally; the second only reaches A.
  const std::vector<Detection> dets{{0, 0.9, {0.5, 0, 10.5, 20}}, {0, 0.8, {-1, 0, 9, 20}}};
  const std::vector<GroundTruth> gts{make_ground_truth(0, {0, 0, 10, 20}), make_ground_truth(0, {1, 0, 11, 20})};
  const auto m = match_detections(dets, gts);
  EXPECT_EQ(m.labels(), (std::vector<MatchLabel>{TP, TP}));
  EXPECT_EQ(m.ranked[0].ground_truth, 1u);
  EXPECT_EQ(m.ranked[1].ground_truth, 0u);
  EXPECT_EQ(oracle::exhaustive_match(dets, gts, 0.7).labels, (std::vector<bool>{true, true}));
}

TEST(MatchTest, RejectsBadThreshold) {
  EXPECT_THROW(match_detections({}, {}, 0), std::invalid_argument);
  EXPECT_THROW(match_detections({}, {}, 1.1), std::invalid_argument);
}

TEST(MatchTest, AgreesWithExhaustiveOracle) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const auto gts = testgen::random_ground_truth(rng, 4);
    const auto dets = testgen::detections_near(gts, rng, std::uniform_int_distribution<std::size_t>(0, 6)(rng));
    const auto m = match_detections(dets, gts, 0.7);
    const auto o = oracle::exhaustive_match(dets, gts, 0.7);
    std::vector<bool> got;
    for (auto l : m.labels()) got.push_back(l == TP);
    ASSERT_EQ(got, o.labels) << "trial " << trial;
    ASSERT_EQ(m.n_positive, o.n_positive);
    ASSERT_DOUBLE_EQ(average_precision(m.labels(), m.n_positive), o.ap);
  }
}

TEST(AveragePrecisionTest, HandTrace) {
  const std::vector<MatchLabel> labels{TP, FP, TP};
  EXPECT_EQ(average_precision(labels, 2), 5.0 / 6.0);
}

TEST(AveragePrecisionTest, EdgeCases) {
  EXPECT_EQ(average_precision({}, 3), 0);
  const std::vector<MatchLabel> fp{FP, FP};
  EXPECT_EQ(average_precision(fp, 0), 0);
  EXPECT_EQ(average_precision(fp, 2), 0);
  const std::vector<MatchLabel> perfect{TP, TP};
  EXPECT_EQ(average_precision(perfect, 2), 1.0);
  EXPECT_EQ(average_precision(perfect, 4), 0.5);
  EXPECT_THROW(average_precision(perfect, 1), std::invalid_argument);
}

TEST(AveragePrecisionTest, ElevenPoint) {
  const std::vector<MatchLabel> perfect{TP, TP};
  EXPECT_DOUBLE_EQ(average_precision(perfect, 2, ApMode::ElevenPoint), 1.0);
  // recall 0.5 at precision 1, recall 1 at precision 2/3
  const std::vector<MatchLabel> labels{TP, FP, TP};
  EXPECT_DOUBLE_EQ(average_precision(labels, 2, ApMode::ElevenPoint), (6 * 1.0 + 5 * (2.0 / 3)) / 11);
}

TEST(AveragePrecisionTest, MatchesOracleOnRandomLabels) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 20)(rng);
    std::vector<MatchLabel> labels;
    std::vector<bool> flags;
    for (std::size_t i = 0; i < n; ++i) {
      const bool tp = std::bernoulli_distribution(0.5)(rng);
      labels.push_back(tp ? TP : FP);
      flags.push_back(tp);
    }
    const std::size_t n_tp = static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
    const std::size_t n_pos = n_tp + std::uniform_int_distribution<std::size_t>(0, 3)(rng);
    if (n_pos == 0) continue;
    ASSERT_NEAR(average_precision(labels, n_pos), oracle::ap(flags, n_pos), 1e-12);
  }
}

TEST(EvaluateTest, BinsSplitTruePositives) {
  const std::vector<ImageGroundTruth> gts{{"a", make_ground_truth(0, tall(0, 20))},
                                          {"a", make_ground_truth(0, tall(100, 50))},
                                          {"b", make_ground_truth(0, tall(0, 70))},
                                          {"b", make_ground_truth(0, tall(100, 10))}};
  const std::vector<ImageDetection> dets{{"a", {0, 0.9, tall(0, 20)}},
                                         {"a", {0, 0.8, tall(100, 50)}},
                                         {"b", {0, 0.7, tall(200, 70)}},
                                         {"b", {0, 0.6, tall(100, 10)}}};
  const auto rows = evaluate(dets, gts);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_FALSE(rows[0].bin.has_value());
  EXPECT_EQ(rows[0].n_positive, 3u);
  EXPECT_EQ(rows[0].n_tp, 2u);
  EXPECT_EQ(rows[0].n_fp, 1u);
  EXPECT_DOUBLE_EQ(rows[0].ap, 2.0 / 3);
  EXPECT_EQ(rows[1].bin, ScaleBin::Small);
  EXPECT_EQ(rows[1].n_positive, 1u);
  EXPECT_DOUBLE_EQ(rows[1].ap, 1.0);
  EXPECT_EQ(rows[2].bin, ScaleBin::Medium);
  EXPECT_DOUBLE_EQ(rows[2].ap, 1.0);
  EXPECT_EQ(rows[3].bin, ScaleBin::Large);
  EXPECT_EQ(rows[3].n_positive, 1u);
  EXPECT_EQ(rows[3].ap, 0);
}

TEST(EvaluateTest, ImagesDoNotMatchAcrossEachOther) {
  const std::vector<ImageGroundTruth> gts{{"a", make_ground_truth(0, tall(0, 20))}};
  const std::vector<ImageDetection> dets{{"b", {0, 0.9, tall(0, 20)}}};
  const auto rows = evaluate(dets, gts);
  EXPECT_EQ(rows[0].n_tp, 0u);
  EXPECT_EQ(rows[0].n_fp, 1u);
}

TEST(EvaluateTest, EmptyInputGivesNoRows) { EXPECT_TRUE(evaluate({}, {}).empty()); }

}  // namespace
}  // namespace roikit

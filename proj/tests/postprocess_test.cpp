#include "roikit/postprocess.hpp"

#include <algorithm>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "support/generators.hpp"

namespace roikit {
namespace {

TEST(IouTest, Examples) {
  EXPECT_EQ(iou(Box{0, 0, 10, 10}, Box{0, 0, 10, 10}), 1.0);
  EXPECT_EQ(iou(Box{0, 0, 10, 10}, Box{20, 20, 30, 30}), 0.0);
  EXPECT_EQ(iou(Box{0, 0, 10, 10}, Box{10, 0, 20, 10}), 0.0);
  EXPECT_DOUBLE_EQ(iou(Box{0, 0, 10, 10}, Box{5, 0, 15, 10}), 1.0 / 3);
}

TEST(IouTest, SymmetricAndBounded) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const Box a = testgen::random_box(rng), b = testgen::random_box(rng);
    const Real v = iou(a, b);
    EXPECT_EQ(v, iou(b, a));
    EXPECT_GE(v, 0);
    EXPECT_LE(v, 1);
  }
}

TEST(NmsTest, Examples) {
  EXPECT_TRUE(nms({}).empty());
  const std::vector<Detection> dets{{0, 0.9, {0, 0, 10, 10}}, {0, 0.8, {1, 0, 11, 10}}, {0, 0.7, {50, 50, 60, 60}}};
  const auto out = nms(dets, 0.5);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0], dets[0]);
  EXPECT_EQ(out[1], dets[2]);
}

TEST(NmsTest, ClassesAreIndependent) {
  const std::vector<Detection> dets{{0, 0.9, {0, 0, 10, 10}}, {1, 0.8, {0, 0, 10, 10}}};
  EXPECT_EQ(nms(dets, 0.5).size(), 2u);
}

TEST(NmsTest, IouEqualToThresholdIsKept) {
  // IoU exactly 1/3: suppression needs strictly greater.
  const std::vector<Detection> dets{{0, 0.9, {0, 0, 10, 10}}, {0, 0.8, {5, 0, 15, 10}}};
  EXPECT_EQ(nms(dets, 1.0 / 3).size(), 2u);
  EXPECT_EQ(nms(dets, 0.3).size(), 1u);
}

TEST(NmsTest, TiesKeepLowerIndex) {
  const std::vector<Detection> dets{{0, 0.5, {0, 0, 10, 10}}, {0, 0.5, {0, 0, 10, 11}}};
  const auto out = nms(dets, 0.5);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0], dets[0]);
}

TEST(NmsTest, RejectsBadThreshold) {
  const std::vector<Detection> dets{{0, 0.5, {0, 0, 1, 1}}};
  EXPECT_THROW(nms(dets, -0.1), std::invalid_argument);
  EXPECT_THROW(nms(dets, 1.5), std::invalid_argument);
}

TEST(NmsTest, SurvivorsDoNotOverlapBeyondThreshold) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const auto out = nms(testgen::random_detections(rng, 12), 0.5);
    for (std::size_t i = 0; i < out.size(); ++i)
      for (std::size_t j = i + 1; j < out.size(); ++j)
        if (out[i].class_id == out[j].class_id) {
          ASSERT_LE(iou(out[i].box, out[j].box), 0.5);
        }
    ASSERT_TRUE(std::is_sorted(out.begin(), out.end(), [](auto& a, auto& b) { return a.score > b.score; }));
  }
}

TEST(SoftNmsTest, IdenticalBoxesCollapse) {
  const std::vector<Detection> dets{{0, 0.9, {0, 0, 10, 10}}, {0, 0.88, {0, 0, 10, 10}}};
  const auto out = soft_nms_avg(dets, 0.5, 0.9);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0], dets[0]);
}

TEST(SoftNmsTest, AveragesHighConfidenceMembers) {
  const std::vector<Detection> dets{{0, 0.9, {0, 0, 10, 10}}, {0, 0.89, {2, 0, 12, 10}}};
  const auto out = soft_nms_avg(dets, 0.5, 0.9);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].score, 0.9);
  EXPECT_EQ(out[0].box, (Box{1, 0, 11, 10}));
}

TEST(SoftNmsTest, LowConfidenceMembersAreOnlySuppressed) {
  const std::vector<Detection> dets{{0, 0.9, {0, 0, 10, 10}}, {0, 0.5, {2, 0, 12, 10}}};
  const auto out = soft_nms_avg(dets, 0.5, 0.9);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0], dets[0]);
}

TEST(SoftNmsTest, RejectsBadRho) {
  const std::vector<Detection> dets{{0, 0.5, {0, 0, 1, 1}}};
  EXPECT_THROW(soft_nms_avg(dets, 0.5, 0), std::invalid_argument);
  EXPECT_THROW(soft_nms_avg(dets, 0.5, 1.01), std::invalid_argument);
  EXPECT_THROW(soft_nms_avg(dets, 0.5, -1), std::invalid_argument);
  EXPECT_NO_THROW(soft_nms_avg(dets, 0.5, 1));
}

TEST(SoftNmsTest, ContractsAgainstNms) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const auto dets = testgen::random_detections(rng, 15);
    const auto hard = nms(dets, 0.5);
    const auto soft = soft_nms_avg(dets, 0.5, 0.8);
    ASSERT_EQ(hard.size(), soft.size());
    for (std::size_t i = 0; i < hard.size(); ++i) {
      ASSERT_EQ(hard[i].score, soft[i].score);
      ASSERT_EQ(hard[i].class_id, soft[i].class_id);
      ASSERT_TRUE(soft[i].box.well_formed());
    }
  }
}

TEST(SoftNmsTest, PermutationOfDistinctScoresDoesNotChangeOutput) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    auto dets = testgen::random_detections(rng, 10);
    for (std::size_t i = 0; i < dets.size(); ++i) dets[i].score = 0.01 * static_cast<Real>(i + 1);
    const auto a = soft_nms_avg(dets, 0.5, 0.7);
    std::shuffle(dets.begin(), dets.end(), rng);
    const auto b = soft_nms_avg(dets, 0.5, 0.7);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      ASSERT_EQ(a[i].score, b[i].score);
      ASSERT_NEAR(a[i].box.x1, b[i].box.x1, 1e-12);
      ASSERT_NEAR(a[i].box.y2, b[i].box.y2, 1e-12);
    }
  }
}

TEST(SoftNmsTest, RhoOneWithDistinctScoresEqualsNms) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    auto dets = testgen::random_detections(rng, 10);
    for (std::size_t i = 0; i < dets.size(); ++i) dets[i].score = 1.0 / static_cast<Real>(i + 2);
    EXPECT_EQ(soft_nms_avg(dets, 0.5, 1.0), nms(dets, 0.5));
  }
}

}  // namespace
}  // namespace roikit

/* Copyright 2026 The focusrl Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <gtest/gtest.h>

#include "focusrl/error.hpp"
#include "focusrl/metrics.hpp"
#include "oracles.hpp"

namespace focusrl {
namespace {

BoundingBox aligned(Rng& rng, int n = 16) {
  std::uniform_int_distribution<int> u(0, n);
  for (;;) {
    int a = u(rng), b = u(rng), c = u(rng), d = u(rng);
    if (a != b && c != d) {
      return {std::min(a, b) / double(n), std::min(c, d) / double(n),
              std::max(a, b) / double(n), std::max(c, d) / double(n)};
    }
  }
}

class MetricsTest : public ::testing::Test {
 protected:
  WorldConfig world;
  PolicyLayout layout = PolicyLayout::for_dims(
      {world.feature_dim(), world.query_dim(), 16, world.vocab_size(), 8});
};

TEST(DetectionAccuracy, PerfectAndDisjoint) {
  const std::vector<BoundingBox> gts = {{0, 0, 0.5, 0.5}, {0.5, 0.5, 1, 1}};
  EXPECT_EQ(detection_accuracy(gts, gts), 1.0);
  const std::vector<BoundingBox> off = {{0.5, 0.5, 1, 1}, {0, 0, 0.5, 0.5}};
  EXPECT_EQ(detection_accuracy(off, gts), 0.0);
  EXPECT_EQ(detection_accuracy({}, {}), 0.0);
}

TEST(DetectionAccuracy, MatchesRasterCount) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<BoundingBox> preds, gts;
    int hits = 0;
    for (int i = 0; i < 10; ++i) {
      preds.push_back(aligned(rng));
      gts.push_back(aligned(rng));
      hits += oracle::raster_iou(preds.back(), gts.back(), 64) > 0.5;
    }
    EXPECT_DOUBLE_EQ(detection_accuracy(preds, gts), hits / 10.0);
  }
}

TEST(DetectionAccuracy, StrictThresholdAndMonotone) {
  // iou exactly 0.5 does not count.
  const std::vector<BoundingBox> p = {{0, 0, 0.5, 1}}, g = {{0, 0, 1, 1}};
  EXPECT_EQ(detection_accuracy(p, g, 0.5), 0.0);
  Rng rng(4);
  std::vector<BoundingBox> preds, gts;
  for (int i = 0; i < 200; ++i) {
    preds.push_back(aligned(rng, 8));
    gts.push_back(aligned(rng, 8));
  }
  double last = 1.0;
  for (double t = 0.05; t < 1.0; t += 0.05) {
    const double a = detection_accuracy(preds, gts, t);
    EXPECT_LE(a, last);
    last = a;
  }
}

TEST(DetectionAccuracy, LengthMismatch) {
  const std::vector<BoundingBox> one = {BoundingBox::full()};
  try {
    detection_accuracy(one, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kLengthMismatch);
  }
}

TEST(AnswerAccuracy, Counts) {
  const std::vector<int> gt = {1, 2, 3, 4, 5};
  EXPECT_EQ(answer_accuracy(gt, gt), 1.0);
  EXPECT_EQ(answer_accuracy(std::vector<int>{0, 0, 0, 0, 0}, gt), 0.0);
  EXPECT_DOUBLE_EQ(answer_accuracy(std::vector<int>{1, 0, 3, 0, 0}, gt), 0.4);
  EXPECT_THROW(answer_accuracy(std::vector<int>{1}, gt), Error);
}

TEST_F(MetricsTest, FormatRatioOfSaturatedPolicies) {
  const std::vector<Task> tasks = generate_pool(world, 1, Pool::kEval, 50);
  PolicyParams sorted(layout);
  const int want[4] = {2, 3, 9, 11};
  for (int k = 0; k < 4; ++k) sorted.values()[layout.bbox.b2.offset + k * 16 + want[k]] = 60.0;
  Rng rng(1);
  EXPECT_EQ(bbox_format_ratio(sorted, tasks, world, rng), 1.0);
  PolicyParams equal(layout);
  for (int k = 0; k < 4; ++k) equal.values()[layout.bbox.b2.offset + k * 16 + 5] = 60.0;
  EXPECT_EQ(bbox_format_ratio(equal, tasks, world, rng), 0.0);
  EXPECT_THROW(bbox_format_ratio(sorted, {}, world, rng), Error);
}

TEST_F(MetricsTest, FormatRatioMatchesEnumeration) {
  Rng init(9);
  const PolicyParams p = PolicyParams::random(layout, 0.6, init);
  const Task t = generate_task(world, 2, Pool::kEval, 0);
  const auto table = log_probs(p, Head::kBbox, bbox_input(encode_features(t.scene, world),
                                                        encode_query(t.query.question, world)));
  auto ordered = [&](int lo_block, int hi_block) {
    double s = 0.0;
    for (int a = 0; a < 16; ++a)
      for (int b = a + 1; b < 16; ++b)
        s += std::exp(table[lo_block * 16 + a]) * std::exp(table[hi_block * 16 + b]);
    return s;
  };
  const double exact = ordered(0, 2) * ordered(1, 3);
  const std::vector<Task> tasks(10000, t);
  Rng rng(2);
  EXPECT_NEAR(bbox_format_ratio(p, tasks, world, rng), exact, 0.01);
}

TEST(DataQuality, PerfectWinsAndDisjointLosses) {
  WorldConfig world;
  const auto tasks = generate_pool(world, 3, Pool::kRl, 20);
  std::vector<PreferencePair> pairs;
  for (const auto& t : tasks) {
    PreferencePair p;
    p.task_id = t.scene.id;
    p.win.box = t.query.gt_region;
    const BoundingBox& g = t.query.gt_region;
    p.lose.box = g.x_lo >= 0.5 ? BoundingBox{0, 0, 0.25, 0.25} : BoundingBox{0.75, 0.75, 1, 1};
    if (iou(p.lose.box, g) > 0.0) continue;
    pairs.push_back(p);
  }
  const DataQuality q = data_quality_table(pairs, tasks);
  EXPECT_EQ(q.count, static_cast<std::int64_t>(pairs.size()));
  EXPECT_EQ(q.wp_ln(), 1.0);
}

TEST(DataQuality, EmptyIsUndefined) {
  const DataQuality q = data_quality_table({}, {});
  EXPECT_EQ(q.count, 0);
  EXPECT_FALSE(q.defined());
}

TEST(DataQuality, MatchesBruteForce) {
  WorldConfig world;
  const auto tasks = generate_pool(world, 4, Pool::kRl, 100);
  Rng rng(5);
  std::vector<PreferencePair> pairs;
  std::int64_t cells[4] = {0, 0, 0, 0};
  for (int i = 0; i < 1000; ++i) {
    const Task& t = tasks[static_cast<std::size_t>(i % 100)];
    PreferencePair p;
    p.task_id = t.scene.id;
    p.win.box = std::bernoulli_distribution(0.5)(rng) ? t.query.gt_region : aligned(rng, 8);
    p.lose.box = std::bernoulli_distribution(0.3)(rng) ? t.query.gt_region : aligned(rng, 8);
    const bool wp = oracle::raster_iou(p.win.box, t.query.gt_region, 64) > 0.5;
    const bool lp = oracle::raster_iou(p.lose.box, t.query.gt_region, 64) > 0.5;
    ++cells[(wp ? 0 : 2) + (lp ? 0 : 1)];
    pairs.push_back(p);
  }
  const DataQuality q = data_quality_table(pairs, tasks);
  EXPECT_EQ(q.n_wp_lp, cells[0]);
  EXPECT_EQ(q.n_wp_ln, cells[1]);
  EXPECT_EQ(q.n_wn_lp, cells[2]);
  EXPECT_EQ(q.n_wn_ln, cells[3]);
  EXPECT_NEAR(q.wp_lp() + q.wp_ln() + q.wn_lp() + q.wn_ln(), 1.0, 1e-9);
}

TEST(DataQuality, UnknownTaskIsMissingGroundTruth) {
  PreferencePair p;
  p.task_id = 12345;
  try {
    data_quality_table(std::vector<PreferencePair>{p}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingGroundTruth);
  }
}

TEST_F(MetricsTest, EvaluationIsPureAndDeterministic) {
  Rng init(1);
  const PolicyParams p = PolicyParams::random(layout, 0.5, init);
  const PolicyParams copy = p;
  const auto tasks = generate_pool(world, 5, Pool::kEval, 100);
  const EvalResult a = evaluate_policy(p, tasks, world, 5);
  const EvalResult b = evaluate_policy(p, tasks, world, 5);
  EXPECT_EQ(p, copy);
  EXPECT_EQ(a.count, 100);
  EXPECT_EQ(a.detection_acc, b.detection_acc);
  EXPECT_EQ(a.answer_acc, b.answer_acc);
  EXPECT_EQ(a.format_ratio, b.format_ratio);
}

}  // namespace
}  // namespace focusrl

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

#include "focusrl/metrics.hpp"

#include <string>
#include <unordered_map>

#include "focusrl/error.hpp"

namespace focusrl {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) {
    fail(ErrorCode::kLengthMismatch, "metric inputs differ in length (" +
                                         std::to_string(a) + " vs " +
                                         std::to_string(b) + ")");
  }
}

}  // namespace

double detection_accuracy(std::span<const BoundingBox> preds,
                          std::span<const BoundingBox> gts, double threshold) {
  check_lengths(preds.size(), gts.size());
  if (!(threshold > 0.0 && threshold < 1.0)) {
    fail(ErrorCode::kInvalidConfig, "detection threshold must lie in (0, 1)");
  }
  if (preds.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (iou(preds[i], gts[i]) > threshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double answer_accuracy(std::span<const int> responses, std::span<const int> gt_answers) {
  check_lengths(responses.size(), gt_answers.size());
  if (responses.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < responses.size(); ++i) {
    if (responses[i] == gt_answers[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(responses.size());
}

double bbox_format_ratio(const PolicyParams& policy, std::span<const Task> tasks,
                         const WorldConfig& world, Rng& rng, double temperature) {
  if (tasks.empty()) fail(ErrorCode::kEmptyPool, "format ratio needs tasks");
  const int bins = policy.layout().dims.bins;
  std::size_t ok = 0;
  for (const auto& task : tasks) {
    const auto features = encode_features(task.scene, world);
    const auto query = encode_query(task.query.question, world);
    if (tokens_well_formed(sample_bbox(policy, features, query, rng, temperature), bins)) {
      ++ok;
    }
  }
  return static_cast<double>(ok) / static_cast<double>(tasks.size());
}

DataQuality data_quality_table(std::span<const PreferencePair> pairs,
                               std::span<const Task> tasks) {
  std::unordered_map<std::int64_t, const Task*> by_id;
  for (const auto& t : tasks) by_id.emplace(t.scene.id, &t);
  DataQuality q;
  for (const auto& pair : pairs) {
    const auto it = by_id.find(pair.task_id);
    if (it == by_id.end()) {
      fail(ErrorCode::kMissingGroundTruth,
           "no ground truth for task " + std::to_string(pair.task_id));
    }
    const BoundingBox& gt = it->second->query.gt_region;
    const bool win_pos = iou(pair.win.box, gt) > 0.5;
    const bool lose_pos = iou(pair.lose.box, gt) > 0.5;
    ++q.count;
    if (win_pos && lose_pos) ++q.n_wp_lp;
    if (win_pos && !lose_pos) ++q.n_wp_ln;
    if (!win_pos && lose_pos) ++q.n_wn_lp;
    if (!win_pos && !lose_pos) ++q.n_wn_ln;
  }
  return q;
}

EvalResult evaluate_policy(const PolicyParams& policy, std::span<const Task> tasks,
                           const WorldConfig& world, std::uint64_t seed,
                           double temperature) {
  if (tasks.empty()) fail(ErrorCode::kEmptyPool, "evaluation needs tasks");
  const int bins = policy.layout().dims.bins;
  std::vector<BoundingBox> preds, gts;
  std::vector<int> answers, gt_answers;
  for (const auto& task : tasks) {
    const auto features = encode_features(task.scene, world);
    const auto query = encode_query(task.query.question, world);
    const BoundingBox box = box_from_tokens(greedy_bbox(policy, features, query), bins);
    const auto crop = crop_features(task.scene, box, world);
    preds.push_back(box);
    gts.push_back(task.query.gt_region);
    answers.push_back(greedy_response(policy, query, crop));
    gt_answers.push_back(task.query.gt_answer);
  }
  EvalResult r;
  r.count = static_cast<std::int64_t>(tasks.size());
  r.detection_acc = detection_accuracy(preds, gts, 0.5);
  r.answer_acc = answer_accuracy(answers, gt_answers);
  Rng rng = make_rng({seed, stream(Stream::kEval)});
  r.format_ratio = bbox_format_ratio(policy, tasks, world, rng, temperature);
  return r;
}

}  // namespace focusrl

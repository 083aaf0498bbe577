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

#pragma once

#include <cstdint>
#include <span>

#include "focusrl/datagen.hpp"
#include "focusrl/geometry.hpp"
#include "focusrl/policy.hpp"
#include "focusrl/synthworld.hpp"

namespace focusrl {

// Fraction of pairs with iou(pred, gt) > threshold. Empty lists give 0.
double detection_accuracy(std::span<const BoundingBox> preds,
                          std::span<const BoundingBox> gts, double threshold = 0.5);

double answer_accuracy(std::span<const int> responses, std::span<const int> gt_answers);

// Fraction of sampled box token tuples that are already sorted and
// non-degenerate. One draw per task.
double bbox_format_ratio(const PolicyParams& policy, std::span<const Task> tasks,
                         const WorldConfig& world, Rng& rng, double temperature = 1.0);

// A box is positive when iou(box, gt_region) > 0.5. Throws kMissingGroundTruth
// if a pair refers to a task not in `tasks`.
DataQuality data_quality_table(std::span<const PreferencePair> pairs,
                               std::span<const Task> tasks);

struct EvalResult {
  std::int64_t count = 0;
  double detection_acc = 0.0;
  double answer_acc = 0.0;
  double format_ratio = 0.0;
};

// Greedy box, crop, greedy answer on every task; format ratio from one
// sampled box per task on a dedicated stream.
EvalResult evaluate_policy(const PolicyParams& policy, std::span<const Task> tasks,
                           const WorldConfig& world, std::uint64_t seed,
                           double temperature = 1.0);

}  // namespace focusrl

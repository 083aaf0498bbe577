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

#include "focusrl/critic.hpp"

#include <algorithm>
#include <cmath>

#include "focusrl/error.hpp"

namespace focusrl {

void CriticConfig::validate() const {
  if (!(focus_ratio > 0.0)) {
    fail(ErrorCode::kInvalidConfig, "critic.focus_ratio must be positive");
  }
}

Score score_bbox(const QueryInstance& task, const Scene& /*scene*/,
                 const BoundingBox& box, const CriticConfig& cfg) {
  const BoundingBox& gt = task.gt_region;
  const double containment = intersection_area(gt, box) / gt.area();
  const double focus = std::min(1.0, cfg.focus_ratio * gt.area() / box.area());
  const auto s = static_cast<Score>(std::lround(kMaxScore * containment * focus));
  return std::clamp(s, 0, kMaxScore);
}

Score score_response(const QueryInstance& task, int response,
                     const WorldConfig& world) {
  if (response < 0 || response >= world.vocab_size()) {
    fail(ErrorCode::kInvalidToken, "response token outside the vocabulary");
  }
  return response == task.gt_answer ? kMaxScore : 0;
}

}  // namespace focusrl

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

#include "focusrl/geometry.hpp"
#include "focusrl/synthworld.hpp"

namespace focusrl {

// Oracle judge on a 0..10 scale. It is the only component besides metrics
// that reads ground-truth regions.
using Score = int;
constexpr Score kMaxScore = 10;

struct CriticConfig {
  // Box areas up to focus_ratio * area(gt) are not penalized.
  double focus_ratio = 4.0;

  void validate() const;
};

// round(10 * containment * focus) with containment the covered fraction of
// the ground-truth region and focus = min(1, ratio * area(gt) / area(box)).
Score score_bbox(const QueryInstance& task, const Scene& scene,
                 const BoundingBox& box, const CriticConfig& cfg = {});

// 10 for the ground-truth answer, 0 otherwise.
Score score_response(const QueryInstance& task, int response,
                     const WorldConfig& world);

}  // namespace focusrl

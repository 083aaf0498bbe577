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

#include "focusrl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "focusrl/error.hpp"

namespace focusrl {

namespace {

// Floating-point slack on the area tolerance check; coordinates computed from
// a target area reproduce it only up to rounding.
constexpr double kAreaSlack = 1e-12;

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

BoundingBox BoundingBox::make(double x_lo, double y_lo, double x_hi,
                              double y_hi) {
  BoundingBox b{x_lo, y_lo, x_hi, y_hi};
  if (!b.valid()) {
    fail(ErrorCode::kInvalidBox,
         "invalid box [" + std::to_string(x_lo) + ", " + std::to_string(y_lo) +
             ", " + std::to_string(x_hi) + ", " + std::to_string(y_hi) + "]");
  }
  return b;
}

bool BoundingBox::valid() const {
  return in_unit(x_lo) && in_unit(y_lo) && in_unit(x_hi) && in_unit(y_hi) &&
         x_lo < x_hi && y_lo < y_hi;
}

double intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const double w = std::min(a.x_hi, b.x_hi) - std::max(a.x_lo, b.x_lo);
  const double h = std::min(a.y_hi, b.y_hi) - std::max(a.y_lo, b.y_lo);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  if (a == b) return 1.0;
  const double inter = intersection_area(a, b);
  if (inter == 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double token_edge(int token, int bins) {
  if (token == bins - 1) return 1.0;
  return static_cast<double>(token) / static_cast<double>(bins);
}

int nearest_token(double coord, int bins) {
  int t = static_cast<int>(std::lround(coord * bins));
  t = std::clamp(t, 0, bins - 1);
  // Edge (bins-1)/bins is not representable; pick the closer neighbour.
  if (t == bins - 1) {
    const double below = token_edge(bins - 2, bins);
    if (std::abs(coord - below) < std::abs(coord - 1.0)) t = bins - 2;
  }
  return t;
}

namespace {

void check_tokens(const BboxTokens& tokens, int bins) {
  if (bins < 4) fail(ErrorCode::kInvalidToken, "bins must be >= 4");
  for (int t : tokens) {
    if (t < 0 || t >= bins) {
      fail(ErrorCode::kInvalidToken,
           "bbox token " + std::to_string(t) + " outside [0, " +
               std::to_string(bins - 1) + "]");
    }
  }
}

// Sorted, widened token pair for one axis.
std::pair<int, int> repair_axis(int a, int b, int bins) {
  int lo = std::min(a, b);
  int hi = std::max(a, b);
  if (lo == hi) {
    if (hi < bins - 1) {
      ++hi;
    } else {
      lo = bins - 2;
    }
  }
  return {lo, hi};
}

}  // namespace

BoundingBox box_from_tokens(const BboxTokens& tokens, int bins,
                            double min_box_area) {
  check_tokens(tokens, bins);
  const auto [xl, xh] = repair_axis(tokens[0], tokens[2], bins);
  const auto [yl, yh] = repair_axis(tokens[1], tokens[3], bins);
  BoundingBox box = BoundingBox::make(token_edge(xl, bins), token_edge(yl, bins),
                                      token_edge(xh, bins), token_edge(yh, bins));
  if (box.area() < min_box_area) {
    fail(ErrorCode::kInvalidBox, "repaired box below min_box_area");
  }
  return box;
}

bool tokens_well_formed(const BboxTokens& tokens, int bins) {
  check_tokens(tokens, bins);
  return tokens[0] < tokens[2] && tokens[1] < tokens[3];
}

BboxTokens box_to_tokens(const BoundingBox& box, int bins) {
  return {nearest_token(box.x_lo, bins), nearest_token(box.y_lo, bins),
          nearest_token(box.x_hi, bins), nearest_token(box.y_hi, bins)};
}

void DiversityParams::validate() const {
  if (!(reject_threshold >= 0.0 && reject_threshold <= 1.0)) {
    fail(ErrorCode::kInvalidConfig, "reject_threshold must lie in [0, 1]");
  }
  if (!(area_tolerance >= 0.0 && area_tolerance <= 1.0)) {
    fail(ErrorCode::kInvalidConfig, "area_tolerance must lie in [0, 1]");
  }
  if (max_rejection_attempts <= 0) {
    fail(ErrorCode::kInvalidConfig, "max_rejection_attempts must be positive");
  }
  if (min_box_area < 0.0) {
    fail(ErrorCode::kInvalidConfig, "min_box_area must be non-negative");
  }
}

namespace {

std::vector<BoundingBox> strips_around(const BoundingBox& b1) {
  std::vector<BoundingBox> strips;
  if (b1.x_lo > 0.0) strips.push_back({0.0, 0.0, b1.x_lo, 1.0});
  if (b1.x_hi < 1.0) strips.push_back({b1.x_hi, 0.0, 1.0, 1.0});
  if (b1.y_lo > 0.0) strips.push_back({0.0, 0.0, 1.0, b1.y_lo});
  if (b1.y_hi < 1.0) strips.push_back({0.0, b1.y_hi, 1.0, 1.0});
  return strips;
}

struct AreaRange {
  double lo;
  double hi;
};

bool acceptable(const BoundingBox& box, const BoundingBox& b1,
                const DiversityParams& params) {
  return box.valid() && intersection_area(box, b1) == 0.0 &&
         std::abs(box.area() - b1.area()) <= params.area_tolerance + kAreaSlack &&
         box.area() >= params.min_box_area;
}

double uniform(Rng& rng, double lo, double hi) {
  if (!(hi > lo)) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Uniform center and area, aspect ratio jittered by up to 2x around b1's.
BoundingBox propose_center_uniform(const BoundingBox& b1, AreaRange range,
                                   Rng& rng) {
  const double area = uniform(rng, range.lo, range.hi);
  const double aspect =
      (b1.width() / b1.height()) * std::exp(uniform(rng, -std::log(2.0), std::log(2.0)));
  const double w = std::sqrt(area * aspect);
  const double h = area / w;
  if (w > 1.0 || h > 1.0) return {0.0, 0.0, 0.0, 0.0};
  const double cx = uniform(rng, w / 2.0, 1.0 - w / 2.0);
  const double cy = uniform(rng, h / 2.0, 1.0 - h / 2.0);
  const double x_lo = std::max(0.0, cx - w / 2.0);
  const double y_lo = std::max(0.0, cy - h / 2.0);
  return {x_lo, y_lo, std::min(1.0, x_lo + w), std::min(1.0, y_lo + h)};
}

// Proposal restricted to one strip that can hold the target area.
BoundingBox propose_in_strip(const std::vector<BoundingBox>& strips,
                             AreaRange range, Rng& rng) {
  std::vector<const BoundingBox*> eligible;
  for (const auto& s : strips) {
    if (s.area() >= range.lo) eligible.push_back(&s);
  }
  if (eligible.empty()) return {0.0, 0.0, 0.0, 0.0};
  const auto pick = std::uniform_int_distribution<std::size_t>(
      0, eligible.size() - 1)(rng);
  const BoundingBox& s = *eligible[pick];
  const double area = uniform(rng, range.lo, std::min(range.hi, s.area()));
  const double w_min = area / s.height();
  const double w_max = s.width();
  const double w = std::exp(uniform(rng, std::log(w_min), std::log(w_max)));
  const double h = area / w;
  const double x_lo = uniform(rng, s.x_lo, std::max(s.x_lo, s.x_hi - w));
  const double y_lo = uniform(rng, s.y_lo, std::max(s.y_lo, s.y_hi - h));
  return {x_lo, y_lo, std::min(s.x_hi, x_lo + w), std::min(s.y_hi, y_lo + h)};
}

}  // namespace

double max_disjoint_area(const BoundingBox& b1) {
  double best = 0.0;
  for (const auto& s : strips_around(b1)) best = std::max(best, s.area());
  return best;
}

BoundingBox sample_disjoint_box(const BoundingBox& b1,
                                const DiversityParams& params, Rng& rng) {
  params.validate();
  const double a1 = b1.area();
  AreaRange range{std::max({a1 - params.area_tolerance, params.min_box_area,
                            std::numeric_limits<double>::min()}),
                  std::min(a1 + params.area_tolerance, 1.0)};
  if (range.lo > range.hi || max_disjoint_area(b1) < range.lo) {
    fail(ErrorCode::kNoFeasibleBox,
         "no box disjoint from b1 within the area tolerance");
  }
  const auto strips = strips_around(b1);
  // Center-uniform proposals first; the strip proposals in the second half
  // of the budget keep narrow feasible regions reachable.
  const int budget = params.max_rejection_attempts;
  for (int attempt = 0; attempt < budget; ++attempt) {
    const BoundingBox candidate = attempt < (budget + 1) / 2
                                      ? propose_center_uniform(b1, range, rng)
                                      : propose_in_strip(strips, range, rng);
    if (acceptable(candidate, b1, params)) return candidate;
  }
  fail(ErrorCode::kNoFeasibleBox, "rejection budget exhausted");
}

DiversityOutcome diversity_adjust(const BoundingBox& b1, const BoundingBox& b2,
                                  const DiversityParams& params, Rng& rng) {
  if (iou(b1, b2) < params.reject_threshold) return {b2, false};
  return {sample_disjoint_box(b1, params, rng), true};
}

}  // namespace focusrl

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

#include <array>

#include "focusrl/rng.hpp"

namespace focusrl {

// Axis-aligned rectangle in normalized image coordinates. Construct through
// BoundingBox::make to get the invariants checked.
struct BoundingBox {
  double x_lo = 0.0;
  double y_lo = 0.0;
  double x_hi = 1.0;
  double y_hi = 1.0;

  // Throws kInvalidBox unless 0 <= lo < hi <= 1 on both axes.
  static BoundingBox make(double x_lo, double y_lo, double x_hi, double y_hi);
  static BoundingBox full() { return {0.0, 0.0, 1.0, 1.0}; }

  double width() const { return x_hi - x_lo; }
  double height() const { return y_hi - y_lo; }
  double area() const { return width() * height(); }
  bool contains_point(double x, double y) const {
    return x >= x_lo && x <= x_hi && y >= y_lo && y <= y_hi;
  }
  bool contains(const BoundingBox& o) const {
    return o.x_lo >= x_lo && o.x_hi <= x_hi && o.y_lo >= y_lo &&
           o.y_hi <= y_hi;
  }
  bool valid() const;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

// Raw coordinate tokens (x_a, y_a, x_b, y_b), each in [0, bins - 1].
using BboxTokens = std::array<int, 4>;

double intersection_area(const BoundingBox& a, const BoundingBox& b);
double iou(const BoundingBox& a, const BoundingBox& b);

// Normalized coordinate of a token edge. Token t maps to t / bins, except the
// last token which maps to the image border.
double token_edge(int token, int bins);

// Nearest token whose edge is closest to `coord`.
int nearest_token(double coord, int bins);

// Sorts each axis pair and widens degenerate axes by one bin. Throws
// kInvalidToken for out-of-range tokens and kInvalidBox if the repaired box
// is smaller than min_box_area.
BoundingBox box_from_tokens(const BboxTokens& tokens, int bins,
                            double min_box_area = 0.0);

// True when the tokens already describe a sorted, non-degenerate box, i.e.
// box_from_tokens does not need to repair them.
bool tokens_well_formed(const BboxTokens& tokens, int bins);

// Inverse quantization: tokens whose box is nearest to `box`. Exact inverse on
// boxes produced by box_from_tokens.
BboxTokens box_to_tokens(const BoundingBox& box, int bins);

struct DiversityParams {
  double reject_threshold = 0.5;
  // Absolute tolerance on |area(out) - area(b1)|.
  double area_tolerance = 0.0;
  int max_rejection_attempts = 200;
  double min_box_area = 0.0;

  void validate() const;
};

// Largest area of a box inside the unit square whose interior is disjoint
// from b1. Any such box lies entirely in one of the four strips around b1.
double max_disjoint_area(const BoundingBox& b1);

// Draws a box inside the image, disjoint from b1, with area within
// area_tolerance of area(b1). Throws kNoFeasibleBox when no box satisfies the
// constraints.
BoundingBox sample_disjoint_box(const BoundingBox& b1,
                                const DiversityParams& params, Rng& rng);

struct DiversityOutcome {
  BoundingBox box;
  bool replaced = false;
};

// Keeps b2 when iou(b1, b2) < reject_threshold, otherwise replaces it with a
// disjoint box of comparable area.
DiversityOutcome diversity_adjust(const BoundingBox& b1, const BoundingBox& b2,
                                  const DiversityParams& params, Rng& rng);

}  // namespace focusrl

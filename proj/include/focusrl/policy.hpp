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

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "focusrl/geometry.hpp"
#include "focusrl/rng.hpp"

namespace focusrl {

// Two-head categorical policy. Each head is a one-hidden-layer tanh MLP:
//
//   bbox head:     features ++ query -> tanh(H) -> 4 blocks of `bins` logits
//   response head: query ++ crop     -> tanh(H) -> `vocab` logits
//
// Every parameter lives in one flat vector; PolicyLayout records where.

enum class Head { kBbox, kResponse };

struct PolicyDims {
  int feature_dim = 0;
  int query_dim = 0;
  int bins = 16;
  int vocab = 10;
  int hidden = 64;

  int input_dim() const { return feature_dim + query_dim; }
  friend bool operator==(const PolicyDims&, const PolicyDims&) = default;
};

struct TensorSlot {
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 1;

  std::size_t size() const { return rows * cols; }
  std::size_t end() const { return offset + size(); }
  friend bool operator==(const TensorSlot&, const TensorSlot&) = default;
};

struct HeadSlots {
  TensorSlot w1;  // input_dim x hidden, one row per input
  TensorSlot b1;  // hidden
  TensorSlot w2;  // outputs x hidden, one row per output logit
  TensorSlot b2;  // outputs

  std::size_t begin() const { return w1.offset; }
  std::size_t end() const { return b2.end(); }
  friend bool operator==(const HeadSlots&, const HeadSlots&) = default;
};

struct PolicyLayout {
  PolicyDims dims;
  HeadSlots bbox;
  HeadSlots response;
  std::size_t size = 0;

  static PolicyLayout for_dims(const PolicyDims& dims);
  const HeadSlots& slots(Head head) const {
    return head == Head::kBbox ? bbox : response;
  }
  std::size_t outputs(Head head) const {
    return head == Head::kBbox ? 4 * static_cast<std::size_t>(dims.bins)
                               : static_cast<std::size_t>(dims.vocab);
  }
  friend bool operator==(const PolicyLayout&, const PolicyLayout&) = default;
};

class PolicyParams {
 public:
  PolicyParams() = default;
  explicit PolicyParams(const PolicyLayout& layout)
      : layout_(layout), values_(layout.size, 0.0) {}
  PolicyParams(const PolicyLayout& layout, std::vector<double> values);

  // Every entry uniform in [-scale, scale].
  static PolicyParams random(const PolicyLayout& layout, double scale, Rng& rng);

  const PolicyLayout& layout() const { return layout_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::size_t size() const { return values_.size(); }
  bool finite() const;

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;

 private:
  PolicyLayout layout_;
  std::vector<double> values_;
};

// The two halves of a head's input, concatenated logically.
struct HeadInput {
  std::span<const double> first;
  std::span<const double> second;
};

inline HeadInput bbox_input(std::span<const double> features,
                            std::span<const double> query) {
  return {features, query};
}
inline HeadInput response_input(std::span<const double> query,
                                std::span<const double> crop) {
  return {query, crop};
}

struct Provenance {
  enum class Kind { kPostSft, kPostStage1, kIteration, kInitial };
  Kind kind = Kind::kInitial;
  int iteration = 0;

  std::string to_string() const;
  static Provenance parse(const std::string& text);
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

// Frozen copy of a parameter vector. Copies share the same immutable storage.
class ReferenceSnapshot {
 public:
  ReferenceSnapshot(const PolicyParams& params, Provenance provenance)
      : params_(std::make_shared<const PolicyParams>(params)),
        provenance_(provenance) {}

  const PolicyParams& params() const { return *params_; }
  const Provenance& provenance() const { return provenance_; }

 private:
  std::shared_ptr<const PolicyParams> params_;
  Provenance provenance_;
};

ReferenceSnapshot snapshot(const PolicyParams& params, Provenance provenance);

// Per-token log-softmax table: 4 * bins entries for the bbox head (block k
// holds token k), vocab entries for the response head.
std::vector<double> log_probs(const PolicyParams& params, Head head,
                              const HeadInput& input);

BboxTokens sample_bbox(const PolicyParams& params, std::span<const double> features,
                       std::span<const double> query, Rng& rng,
                       double temperature = 1.0);
int sample_response(const PolicyParams& params, std::span<const double> query,
                    std::span<const double> crop, Rng& rng,
                    double temperature = 1.0);

BboxTokens greedy_bbox(const PolicyParams& params, std::span<const double> features,
                       std::span<const double> query);
int greedy_response(const PolicyParams& params, std::span<const double> query,
                    std::span<const double> crop);

// Exact log pi(tokens | input); the bbox head sums its four token terms.
// Throws kInvalidToken when tokens do not fit the head.
double logprob(const PolicyParams& params, Head head, const HeadInput& input,
               std::span<const int> tokens);

// grad += scale * d logprob / d params. Only the head's own block is touched.
void accumulate_grad_logprob(const PolicyParams& params, Head head,
                             const HeadInput& input, std::span<const int> tokens,
                             double scale, std::span<double> grad);

std::vector<double> grad_logprob(const PolicyParams& params, Head head,
                                 const HeadInput& input, std::span<const int> tokens);

}  // namespace focusrl

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

#include "focusrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "focusrl/error.hpp"

namespace focusrl {

PolicyLayout PolicyLayout::for_dims(const PolicyDims& dims) {
  if (dims.feature_dim <= 0 || dims.query_dim <= 0 || dims.bins < 4 ||
      dims.vocab < 2 || dims.hidden <= 0) {
    fail(ErrorCode::kInvalidConfig, "invalid policy dimensions");
  }
  PolicyLayout layout;
  layout.dims = dims;
  const auto in = static_cast<std::size_t>(dims.input_dim());
  const auto h = static_cast<std::size_t>(dims.hidden);
  std::size_t offset = 0;
  auto place = [&](std::size_t rows, std::size_t cols) {
    TensorSlot s{offset, rows, cols};
    offset += s.size();
    return s;
  };
  for (Head head : {Head::kBbox, Head::kResponse}) {
    HeadSlots& s = head == Head::kBbox ? layout.bbox : layout.response;
    s.w1 = place(in, h);
    s.b1 = place(h, 1);
    s.w2 = place(layout.outputs(head), h);
    s.b2 = place(layout.outputs(head), 1);
  }
  layout.size = offset;
  return layout;
}

PolicyParams::PolicyParams(const PolicyLayout& layout, std::vector<double> values)
    : layout_(layout), values_(std::move(values)) {
  if (values_.size() != layout_.size) {
    fail(ErrorCode::kSchema, "parameter count does not match the layout");
  }
}

PolicyParams PolicyParams::random(const PolicyLayout& layout, double scale, Rng& rng) {
  PolicyParams p(layout);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double& v : p.values_) v = u(rng);
  return p;
}

bool PolicyParams::finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

std::string Provenance::to_string() const {
  switch (kind) {
    case Kind::kPostSft:
      return "post-sft";
    case Kind::kPostStage1:
      return "post-stage1";
    case Kind::kIteration:
      return "iteration-" + std::to_string(iteration);
    case Kind::kInitial:
      return "initial";
  }
  return "initial";
}

Provenance Provenance::parse(const std::string& text) {
  if (text == "post-sft") return {Kind::kPostSft, 0};
  if (text == "post-stage1") return {Kind::kPostStage1, 0};
  if (text == "initial") return {Kind::kInitial, 0};
  const std::string prefix = "iteration-";
  if (text.rfind(prefix, 0) == 0) {
    try {
      return {Kind::kIteration, std::stoi(text.substr(prefix.size()))};
    } catch (const std::exception&) {
    }
  }
  fail(ErrorCode::kSchema, "unknown provenance tag '" + text + "'");
}

ReferenceSnapshot snapshot(const PolicyParams& params, Provenance provenance) {
  return ReferenceSnapshot(params, provenance);
}

namespace {

struct Pass {
  std::vector<std::size_t> active;  // indices of nonzero inputs
  std::vector<double> active_values;
  std::vector<double> hidden;
  std::vector<double> logits;
};

Pass forward(const PolicyParams& params, Head head, const HeadInput& input) {
  const PolicyLayout& layout = params.layout();
  const HeadSlots& s = layout.slots(head);
  const std::size_t h = static_cast<std::size_t>(layout.dims.hidden);
  const std::size_t expected_first = static_cast<std::size_t>(
      head == Head::kBbox ? layout.dims.feature_dim : layout.dims.query_dim);
  if (input.first.size() != expected_first ||
      input.first.size() + input.second.size() != s.w1.rows) {
    fail(ErrorCode::kLengthMismatch, "head input size does not match the layout");
  }
  const auto v = params.values();

  Pass pass;
  pass.hidden.assign(v.begin() + s.b1.offset, v.begin() + s.b1.end());
  auto visit = [&](std::span<const double> part, std::size_t base) {
    for (std::size_t i = 0; i < part.size(); ++i) {
      const double x = part[i];
      if (x == 0.0) continue;
      const std::size_t row = base + i;
      pass.active.push_back(row);
      pass.active_values.push_back(x);
      const double* w = v.data() + s.w1.offset + row * h;
      for (std::size_t j = 0; j < h; ++j) pass.hidden[j] += x * w[j];
    }
  };
  visit(input.first, 0);
  visit(input.second, input.first.size());
  for (double& a : pass.hidden) a = std::tanh(a);

  const std::size_t outputs = s.b2.rows;
  pass.logits.resize(outputs);
  for (std::size_t o = 0; o < outputs; ++o) {
    const double* w = v.data() + s.w2.offset + o * h;
    double acc = v[s.b2.offset + o];
    for (std::size_t j = 0; j < h; ++j) acc += w[j] * pass.hidden[j];
    pass.logits[o] = acc;
  }
  return pass;
}

std::size_t block_count(Head head) { return head == Head::kBbox ? 4 : 1; }

// In-place log-softmax over consecutive blocks of `width` entries.
void log_softmax_blocks(std::vector<double>& x, std::size_t width) {
  for (std::size_t b = 0; b < x.size(); b += width) {
    const auto first = x.begin() + static_cast<std::ptrdiff_t>(b);
    const auto last = first + static_cast<std::ptrdiff_t>(width);
    const double m = *std::max_element(first, last);
    double sum = 0.0;
    for (auto it = first; it != last; ++it) sum += std::exp(*it - m);
    const double lse = m + std::log(sum);
    for (auto it = first; it != last; ++it) *it -= lse;
  }
}

std::size_t block_width(const PolicyLayout& layout, Head head) {
  return layout.outputs(head) / block_count(head);
}

void check_head_tokens(const PolicyLayout& layout, Head head,
                       std::span<const int> tokens) {
  const std::size_t width = block_width(layout, head);
  if (tokens.size() != block_count(head)) {
    fail(ErrorCode::kInvalidToken, "wrong number of tokens for head");
  }
  for (int t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= width) {
      fail(ErrorCode::kInvalidToken,
           "token " + std::to_string(t) + " outside the head vocabulary");
    }
  }
}

int draw(std::span<const double> logits, double temperature, Rng& rng) {
  if (!(temperature > 0.0)) fail(ErrorCode::kInvalidConfig, "temperature must be > 0");
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp((logits[i] - m) / temperature);
    sum += p[i];
  }
  double u = std::uniform_real_distribution<double>(0.0, sum)(rng);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (u < p[i]) return static_cast<int>(i);
    u -= p[i];
  }
  // Rounding left u past the last bucket.
  for (std::size_t i = p.size(); i-- > 0;) {
    if (p[i] > 0.0) return static_cast<int>(i);
  }
  return 0;
}

int argmax(std::span<const double> x) {
  return static_cast<int>(std::max_element(x.begin(), x.end()) - x.begin());
}

}  // namespace

std::vector<double> log_probs(const PolicyParams& params, Head head,
                              const HeadInput& input) {
  Pass pass = forward(params, head, input);
  log_softmax_blocks(pass.logits, block_width(params.layout(), head));
  return pass.logits;
}

BboxTokens sample_bbox(const PolicyParams& params, std::span<const double> features,
                       std::span<const double> query, Rng& rng, double temperature) {
  const Pass pass = forward(params, Head::kBbox, bbox_input(features, query));
  const std::size_t g = static_cast<std::size_t>(params.layout().dims.bins);
  BboxTokens tokens{};
  for (std::size_t k = 0; k < 4; ++k) {
    tokens[k] = draw(std::span<const double>(pass.logits).subspan(k * g, g),
                     temperature, rng);
  }
  return tokens;
}

int sample_response(const PolicyParams& params, std::span<const double> query,
                    std::span<const double> crop, Rng& rng, double temperature) {
  const Pass pass = forward(params, Head::kResponse, response_input(query, crop));
  return draw(pass.logits, temperature, rng);
}

BboxTokens greedy_bbox(const PolicyParams& params, std::span<const double> features,
                       std::span<const double> query) {
  const Pass pass = forward(params, Head::kBbox, bbox_input(features, query));
  const std::size_t g = static_cast<std::size_t>(params.layout().dims.bins);
  BboxTokens tokens{};
  for (std::size_t k = 0; k < 4; ++k) {
    tokens[k] = argmax(std::span<const double>(pass.logits).subspan(k * g, g));
  }
  return tokens;
}

int greedy_response(const PolicyParams& params, std::span<const double> query,
                    std::span<const double> crop) {
  return argmax(forward(params, Head::kResponse, response_input(query, crop)).logits);
}

double logprob(const PolicyParams& params, Head head, const HeadInput& input,
               std::span<const int> tokens) {
  check_head_tokens(params.layout(), head, tokens);
  const std::vector<double> table = log_probs(params, head, input);
  const std::size_t width = block_width(params.layout(), head);
  double total = 0.0;
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    total += table[k * width + static_cast<std::size_t>(tokens[k])];
  }
  return total;
}

void accumulate_grad_logprob(const PolicyParams& params, Head head,
                             const HeadInput& input, std::span<const int> tokens,
                             double scale, std::span<double> grad) {
  const PolicyLayout& layout = params.layout();
  check_head_tokens(layout, head, tokens);
  if (grad.size() != layout.size) {
    fail(ErrorCode::kLengthMismatch, "gradient buffer does not match the layout");
  }
  if (scale == 0.0) return;
  const Pass pass = forward(params, head, input);
  const HeadSlots& s = layout.slots(head);
  const std::size_t h = static_cast<std::size_t>(layout.dims.hidden);
  const std::size_t width = block_width(layout, head);
  const auto v = params.values();

  // d logprob / d logits = onehot(token) - softmax, per block.
  std::vector<double> g_logits = pass.logits;
  log_softmax_blocks(g_logits, width);
  for (double& x : g_logits) x = -std::exp(x) * scale;
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    g_logits[k * width + static_cast<std::size_t>(tokens[k])] += scale;
  }

  std::vector<double> g_hidden(h, 0.0);
  for (std::size_t o = 0; o < g_logits.size(); ++o) {
    const double go = g_logits[o];
    grad[s.b2.offset + o] += go;
    const double* w = v.data() + s.w2.offset + o * h;
    double* gw = grad.data() + s.w2.offset + o * h;
    for (std::size_t j = 0; j < h; ++j) {
      gw[j] += go * pass.hidden[j];
      g_hidden[j] += go * w[j];
    }
  }
  for (std::size_t j = 0; j < h; ++j) {
    g_hidden[j] *= 1.0 - pass.hidden[j] * pass.hidden[j];
    grad[s.b1.offset + j] += g_hidden[j];
  }
  for (std::size_t a = 0; a < pass.active.size(); ++a) {
    const double x = pass.active_values[a];
    double* gw = grad.data() + s.w1.offset + pass.active[a] * h;
    for (std::size_t j = 0; j < h; ++j) gw[j] += x * g_hidden[j];
  }
}

std::vector<double> grad_logprob(const PolicyParams& params, Head head,
                                 const HeadInput& input, std::span<const int> tokens) {
  std::vector<double> grad(params.size(), 0.0);
  accumulate_grad_logprob(params, head, input, tokens, 1.0, grad);
  return grad;
}

}  // namespace focusrl

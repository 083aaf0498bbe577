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

#include "focusrl/dpo.hpp"

#include <cmath>
#include <string>
#include <unordered_map>

#include "focusrl/error.hpp"

namespace focusrl {

void DpoHyper::validate() const {
  if (!(beta > 0.0 && beta1 > 0.0 && beta2 > 0.0)) {
    fail(ErrorCode::kInvalidConfig, "dpo betas must be positive");
  }
  if (!(lambda_b >= 0.0 && lambda_r >= 0.0) || !(lambda_b + lambda_r > 0.0)) {
    fail(ErrorCode::kInvalidConfig,
         "dpo lambdas must be non-negative with a positive sum");
  }
}

TrainingPair make_training_pair(const PreferencePair& pair, const Task& task,
                                const WorldConfig& world) {
  TrainingPair tp;
  tp.pair = pair;
  tp.features = encode_features(task.scene, world);
  tp.query = encode_query(task.query.question, world);
  tp.win_crop = crop_features(task.scene, pair.win.box, world);
  return tp;
}

std::vector<TrainingPair> make_training_pairs(std::span<const PreferencePair> pairs,
                                              std::span<const Task> tasks,
                                              const WorldConfig& world) {
  std::unordered_map<std::int64_t, const Task*> by_id;
  for (const auto& t : tasks) by_id.emplace(t.scene.id, &t);
  std::vector<TrainingPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    const auto it = by_id.find(p.task_id);
    if (it == by_id.end()) {
      fail(ErrorCode::kMissingInput,
           "preference pair refers to unknown task " + std::to_string(p.task_id));
    }
    out.push_back(make_training_pair(p, *it->second, world));
  }
  return out;
}

namespace {

std::span<const int> box_tokens(const CandidatePath& p) { return p.bbox_tokens; }
std::span<const int> answer_token(const CandidatePath& p) { return {&p.response, 1}; }

double log_ratio(const PolicyParams& policy, const PolicyParams& ref, Head head,
                 const HeadInput& in, std::span<const int> win,
                 std::span<const int> lose) {
  return (logprob(policy, head, in, win) - logprob(ref, head, in, win)) -
         (logprob(policy, head, in, lose) - logprob(ref, head, in, lose));
}

// Adds scale * d loss_pair / d params for one head; returns the pair loss.
double accumulate_pair(const PolicyParams& policy, const PolicyParams& ref, Head head,
                       const HeadInput& in, std::span<const int> win,
                       std::span<const int> lose, double beta, double scale,
                       std::span<double> grad) {
  const double z = log_ratio(policy, ref, head, in, win, lose);
  const double dz = dpo_pair_loss_dz(z, beta) * scale;
  accumulate_grad_logprob(policy, head, in, win, dz, grad);
  accumulate_grad_logprob(policy, head, in, lose, -dz, grad);
  return dpo_pair_loss(z, beta);
}

void require_batch(std::size_t n) {
  if (n == 0) fail(ErrorCode::kEmptyBatch, "DPO batch is empty");
}

}  // namespace

double pair_log_ratio(const PolicyParams& policy, const ReferenceSnapshot& ref,
                      const TrainingPair& pair, Head head) {
  if (head == Head::kBbox) {
    return log_ratio(policy, ref.params(), head, pair.box_input(),
                     box_tokens(pair.pair.win), box_tokens(pair.pair.lose));
  }
  return log_ratio(policy, ref.params(), head, pair.answer_input(),
                   answer_token(pair.pair.win), answer_token(pair.pair.lose));
}

double dpo_pair_loss(double z, double beta) {
  const double x = -beta * z;
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double dpo_pair_loss_dz(double z, double beta) {
  const double x = beta * z;
  // sigmoid(-x), split by sign to avoid overflow.
  const double s = x >= 0.0 ? std::exp(-x) / (1.0 + std::exp(-x))
                            : 1.0 / (1.0 + std::exp(x));
  return -beta * s;
}

BatchResult stage1_batch(const PolicyParams& policy, const ReferenceSnapshot& ref,
                         std::span<const TrainingPair> batch, double beta1) {
  require_batch(batch.size());
  BatchResult r;
  r.grad.assign(policy.size(), 0.0);
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const auto& tp : batch) {
    r.loss += accumulate_pair(policy, ref.params(), Head::kBbox, tp.box_input(),
                              box_tokens(tp.pair.win), box_tokens(tp.pair.lose),
                              beta1, scale, r.grad);
  }
  r.loss *= scale;
  return r;
}

BatchResult stage2_batch(const PolicyParams& policy, const ReferenceSnapshot& ref_hat,
                         std::span<const TrainingPair> batch, const DpoHyper& hyper) {
  require_batch(batch.size());
  hyper.validate();
  if (ref_hat.provenance().kind != Provenance::Kind::kPostStage1) {
    fail(ErrorCode::kWrongReference, "stage 2 needs the post-stage-1 reference, got " +
                                         ref_hat.provenance().to_string());
  }
  BatchResult r;
  r.grad.assign(policy.size(), 0.0);
  const double scale = 1.0 / static_cast<double>(batch.size());
  double box_loss = 0.0;
  double answer_loss = 0.0;
  for (const auto& tp : batch) {
    if (hyper.lambda_b != 0.0) {
      box_loss += accumulate_pair(policy, ref_hat.params(), Head::kBbox,
                                  tp.box_input(), box_tokens(tp.pair.win),
                                  box_tokens(tp.pair.lose), hyper.beta2,
                                  hyper.lambda_b * scale, r.grad);
    }
    if (hyper.lambda_r != 0.0) {
      answer_loss += accumulate_pair(policy, ref_hat.params(), Head::kResponse,
                                     tp.answer_input(), answer_token(tp.pair.win),
                                     answer_token(tp.pair.lose), hyper.beta2,
                                     hyper.lambda_r * scale, r.grad);
    }
  }
  r.loss = hyper.lambda_b * (box_loss * scale) + hyper.lambda_r * (answer_loss * scale);
  return r;
}

BatchResult response_batch(const PolicyParams& policy, const ReferenceSnapshot& ref,
                           std::span<const ResponsePair> batch, double beta) {
  require_batch(batch.size());
  BatchResult r;
  r.grad.assign(policy.size(), 0.0);
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const auto& rp : batch) {
    const int win[1] = {rp.win};
    const int lose[1] = {rp.lose};
    r.loss += accumulate_pair(policy, ref.params(), Head::kResponse,
                              response_input(rp.query, rp.context), win, lose, beta,
                              scale, r.grad);
  }
  r.loss *= scale;
  return r;
}

}  // namespace focusrl

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

#include <span>
#include <vector>

#include "focusrl/datagen.hpp"
#include "focusrl/policy.hpp"
#include "focusrl/synthworld.hpp"

namespace focusrl {

struct DpoHyper {
  double beta = 0.1;   // plain pairwise objective
  double beta1 = 0.1;  // stage 1, box tokens
  double beta2 = 0.1;  // stage 2, box and response
  double lambda_b = 1.0;
  double lambda_r = 1.0;

  void validate() const;
};

// A preference pair with the policy inputs it is scored under: x = (Q, I) for
// the box tokens, and x_hat = (Q, I, crop of the WIN box) for both responses.
struct TrainingPair {
  PreferencePair pair;
  std::vector<double> features;
  std::vector<double> query;
  std::vector<double> win_crop;

  HeadInput box_input() const { return bbox_input(features, query); }
  HeadInput answer_input() const { return response_input(query, win_crop); }
};

TrainingPair make_training_pair(const PreferencePair& pair, const Task& task,
                                const WorldConfig& world);

// Pairs joined with their tasks by id. Throws kMissingInput for unknown ids.
std::vector<TrainingPair> make_training_pairs(std::span<const PreferencePair> pairs,
                                              std::span<const Task> tasks,
                                              const WorldConfig& world);

// z = [log pi(win) - log pi_ref(win)] - [log pi(lose) - log pi_ref(lose)]
double pair_log_ratio(const PolicyParams& policy, const ReferenceSnapshot& ref,
                      const TrainingPair& pair, Head head);

// -log sigmoid(beta * z), evaluated as softplus(-beta * z).
double dpo_pair_loss(double z, double beta);

// d/dz of dpo_pair_loss: -beta * sigmoid(-beta * z).
double dpo_pair_loss_dz(double z, double beta);

struct BatchResult {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d params, full layout
};

// Mean box-token DPO loss. Throws kEmptyBatch.
BatchResult stage1_batch(const PolicyParams& policy, const ReferenceSnapshot& ref,
                         std::span<const TrainingPair> batch, double beta1);

// lambda_b * mean box loss + lambda_r * mean response loss, both at beta2.
// ref_hat must be the post-stage-1 snapshot (kWrongReference otherwise).
BatchResult stage2_batch(const PolicyParams& policy, const ReferenceSnapshot& ref_hat,
                         std::span<const TrainingPair> batch, const DpoHyper& hyper);

// Response preference without a box step: both answers scored under the
// same context (the full image for the response-only baseline).
struct ResponsePair {
  std::int64_t task_id = 0;
  std::vector<double> query;
  std::vector<double> context;
  int win = 0;
  int lose = 0;
};

BatchResult response_batch(const PolicyParams& policy, const ReferenceSnapshot& ref,
                           std::span<const ResponsePair> batch, double beta);

}  // namespace focusrl

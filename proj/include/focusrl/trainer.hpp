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

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "focusrl/config.hpp"
#include "focusrl/datagen.hpp"
#include "focusrl/dpo.hpp"
#include "focusrl/io.hpp"
#include "focusrl/metrics.hpp"
#include "focusrl/policy.hpp"
#include "focusrl/synthworld.hpp"

namespace focusrl {

struct PhaseResult {
  PolicyParams params;
  // losses[0] is the full-set loss before the first update, losses[e] after
  // epoch e.
  std::vector<double> losses;
};

// Fresh parameters drawn from the config's init stream.
PolicyParams initial_params(const TrainConfig& cfg);

// Supervised warm-up on annotated tasks: cross-entropy of the quantized
// ground-truth box tokens given (Q, I) plus the ground-truth answer given the
// ground-truth crop. Throws kEmptyPool.
PhaseResult sft_warmup(const PolicyParams& params, std::span<const Task> annotated,
                       const TrainConfig& cfg);

// Box-token DPO against `ref`. Throws kEmptyDataset.
PhaseResult train_stage1(const PolicyParams& params, const ReferenceSnapshot& ref,
                         std::span<const TrainingPair> data, const TrainConfig& cfg,
                         int iteration = 0);

// Joint box + response DPO. Snapshots `params` as the post-stage-1 reference
// before the first update.
PhaseResult train_stage2(const PolicyParams& params, std::span<const TrainingPair> data,
                         const TrainConfig& cfg, int iteration = 0);

// Stage 2 against an explicit reference; throws kWrongReference unless it is
// the post-stage-1 snapshot.
PhaseResult train_stage2_with(const PolicyParams& params, const ReferenceSnapshot& ref_hat,
                              std::span<const TrainingPair> data, const TrainConfig& cfg,
                              int iteration = 0);

// Response-only pairs: 2N answers sampled from the full-image context, the
// first correct one against the first wrong one.
std::vector<ResponsePair> build_response_pairs(const PolicyParams& params,
                                               std::span<const Task> tasks,
                                               const TrainConfig& cfg, int iteration);

struct BaselineResult {
  PolicyParams params;
  std::vector<std::vector<double>> losses;  // per iteration
  std::vector<std::int64_t> pair_counts;
};

// Plain DPO on the final response only, with no box step, run for the same
// number of iterations as the full pipeline. Throws kEmptyDataset.
BaselineResult train_response_only_dpo(const PolicyParams& params, const TrainConfig& cfg,
                                       std::span<const Task> tasks);

struct PhaseLog {
  std::string phase;  // sft | stage1 | stage2 | baseline
  int iteration = 0;
  std::vector<double> losses;
  EvalResult eval;
};

struct IterationLog {
  int iteration = 0;
  GenerationStats stats;
  std::string dataset;
};

struct RunReport {
  RunStamp stamp;
  Json config;
  std::vector<PhaseLog> phases;
  std::vector<IterationLog> datagen;
  std::vector<std::string> checkpoints;
  bool complete = false;
  std::string error;

  // Eval of the last phase with the given name and iteration, if recorded.
  std::optional<EvalResult> eval_of(const std::string& phase, int iteration) const;
  Json to_json() const;
};

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;
  std::function<void(const std::string&)> log;
};

// SFT once, then K rounds of preference generation with the current model,
// stage 1 and stage 2. Writes world pools, preference data, checkpoints,
// metrics CSV and the report under out_dir when given. On a phase error the
// partial report is written before the error propagates.
RunReport run_iterations(const TrainConfig& cfg, const RunOptions& options = {});

// Tasks of one pool for this config (seeded by cfg.seed).
std::vector<Task> make_pool(const TrainConfig& cfg, Pool pool);

RunStamp stamp_of(const TrainConfig& cfg);

// CSV rows "run_id,phase,iteration,metric,value" for each phase's eval.
std::vector<std::string> metric_rows(const RunStamp& stamp, const PhaseLog& log);
void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<std::string>& rows);

}  // namespace focusrl

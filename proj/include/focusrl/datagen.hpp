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
#include <optional>
#include <span>
#include <vector>

#include "focusrl/critic.hpp"
#include "focusrl/geometry.hpp"
#include "focusrl/policy.hpp"
#include "focusrl/synthworld.hpp"

namespace focusrl {

// One sampled reasoning path: box tokens, the repaired (or replaced) box, the
// response produced from its crop, and both critic scores.
struct CandidatePath {
  std::int64_t task_id = 0;
  BboxTokens bbox_tokens{};
  BoundingBox box;
  int response = 0;
  Score s_b = 0;
  Score s_r = 0;
  bool diversity_replaced = false;

  friend bool operator==(const CandidatePath&, const CandidatePath&) = default;
};

struct FilterThresholds {
  Score t_b_max = 8;
  Score t_b_min = 5;
  Score t_r_max = 8;
  Score t_r_min = 5;

  void validate() const;
};

struct PreferencePair {
  std::int64_t task_id = 0;
  CandidatePath win;
  CandidatePath lose;

  friend bool operator==(const PreferencePair&, const PreferencePair&) = default;
};

struct DatagenConfig {
  int rounds = 4;  // N; up to 2N candidates per task
  double reject_threshold = 0.5;
  // S = area_tolerance_fraction * area(B1)
  double area_tolerance_fraction = 0.5;
  int max_rejection_attempts = 200;
  double temperature = 1.0;
  FilterThresholds thresholds;
  CriticConfig critic;

  void validate() const;
  DiversityParams diversity_for(const BoundingBox& b1, double min_box_area) const;
};

// N rounds of: sample B1 and B2, apply the diversity controller to B2, crop,
// sample a response per crop and score both paths. A round whose
// replacement is infeasible contributes only its B1 path.
std::vector<CandidatePath> generate_candidates(const PolicyParams& policy,
                                               const Task& task,
                                               const WorldConfig& world,
                                               const DatagenConfig& cfg, Rng& rng);

struct FilteredCandidates {
  std::vector<CandidatePath> win;
  std::vector<CandidatePath> lose;
};

// Win: both scores at or above the upper thresholds. Lose: both scores below
// the lower thresholds. Order-preserving.
FilteredCandidates filter_candidates(std::span<const CandidatePath> paths,
                                     const FilterThresholds& th);

// Index of the first element whose s_b and s_r are both maximal (or both
// minimal), if any.
std::optional<std::size_t> simultaneous_max(std::span<const CandidatePath> paths);
std::optional<std::size_t> simultaneous_min(std::span<const CandidatePath> paths);

std::optional<PreferencePair> select_pair(std::span<const CandidatePath> win,
                                          std::span<const CandidatePath> lose);

// Win/lose box positivity breakdown over a preference dataset. Cell counts
// are exact; fractions are derived from them and undefined when count == 0.
struct DataQuality {
  std::int64_t count = 0;
  std::int64_t n_wp_lp = 0;
  std::int64_t n_wp_ln = 0;
  std::int64_t n_wn_lp = 0;
  std::int64_t n_wn_ln = 0;

  bool defined() const { return count > 0; }
  double wp_lp() const { return fraction(n_wp_lp); }
  double wp_ln() const { return fraction(n_wp_ln); }
  double wn_lp() const { return fraction(n_wn_lp); }
  double wn_ln() const { return fraction(n_wn_ln); }

 private:
  double fraction(std::int64_t n) const {
    return count > 0 ? static_cast<double>(n) / static_cast<double>(count) : 0.0;
  }
};

struct GenerationStats {
  std::int64_t tasks = 0;
  std::int64_t retained = 0;
  std::int64_t too_easy = 0;      // no lose candidate
  std::int64_t too_hard = 0;      // no win candidate
  std::int64_t non_extremal = 0;  // no simultaneous extremum
  std::int64_t infeasible = 0;    // every diversity replacement failed
  std::int64_t candidates = 0;
  std::int64_t replaced_rounds = 0;
  std::int64_t infeasible_rounds = 0;
  DataQuality quality;
};

struct PreferenceDataset {
  std::vector<PreferencePair> pairs;
  GenerationStats stats;
};

enum class DropReason { kNone, kTooEasy, kTooHard, kNonExtremal, kInfeasible };

struct TaskOutcome {
  std::vector<CandidatePath> candidates;
  std::optional<PreferencePair> pair;
  DropReason reason = DropReason::kNone;
  int replaced_rounds = 0;
  int infeasible_rounds = 0;
};

TaskOutcome process_task(const PolicyParams& policy, const Task& task,
                         const WorldConfig& world, const DatagenConfig& cfg,
                         Rng& rng);

// Generate, filter and select for every task, one stream per (seed,
// iteration, task id). The result does not depend on the worker count. Throws
// kEmptyPool for no tasks and kEmptyDataset when no pair survives.
PreferenceDataset build_preference_dataset(const PolicyParams& policy,
                                           std::span<const Task> tasks,
                                           const WorldConfig& world,
                                           const DatagenConfig& cfg,
                                           std::uint64_t seed, int iteration,
                                           int workers = 1);

}  // namespace focusrl

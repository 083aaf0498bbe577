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

#include "focusrl/datagen.hpp"

#include <algorithm>
#include <string>

#include "focusrl/error.hpp"
#include "focusrl/metrics.hpp"
#include "focusrl/parallel.hpp"

namespace focusrl {

void FilterThresholds::validate() const {
  if (t_b_max < t_b_min || t_r_max < t_r_min) {
    fail(ErrorCode::kInvalidConfig, "filter thresholds need max >= min");
  }
}

void DatagenConfig::validate() const {
  if (rounds < 1) fail(ErrorCode::kInvalidConfig, "datagen.rounds must be >= 1");
  if (!(area_tolerance_fraction >= 0.0)) {
    fail(ErrorCode::kInvalidConfig, "area_tolerance_fraction must be >= 0");
  }
  if (!(temperature > 0.0)) {
    fail(ErrorCode::kInvalidConfig, "sampling temperature must be > 0");
  }
  thresholds.validate();
  critic.validate();
  DiversityParams{reject_threshold, 0.0, max_rejection_attempts, 0.0}.validate();
}

DiversityParams DatagenConfig::diversity_for(const BoundingBox& b1,
                                             double min_box_area) const {
  DiversityParams p;
  p.reject_threshold = reject_threshold;
  p.area_tolerance = std::min(1.0, area_tolerance_fraction * b1.area());
  p.max_rejection_attempts = max_rejection_attempts;
  p.min_box_area = min_box_area;
  return p;
}

namespace {

CandidatePath score_path(const PolicyParams& policy, const Task& task,
                         const WorldConfig& world, const DatagenConfig& cfg,
                         const std::vector<double>& query, const BboxTokens& tokens,
                         const BoundingBox& box, bool replaced, Rng& rng) {
  CandidatePath p;
  p.task_id = task.scene.id;
  p.bbox_tokens = tokens;
  p.box = box;
  p.diversity_replaced = replaced;
  const FeatureVector crop = crop_features(task.scene, box, world);
  p.response = sample_response(policy, query, crop, rng, cfg.temperature);
  p.s_b = score_bbox(task.query, task.scene, box, cfg.critic);
  p.s_r = score_response(task.query, p.response, world);
  return p;
}

struct RoundCounts {
  int replaced = 0;
  int infeasible = 0;
};

std::vector<CandidatePath> candidates_impl(const PolicyParams& policy,
                                           const Task& task, const WorldConfig& world,
                                           const DatagenConfig& cfg, Rng& rng,
                                           RoundCounts& counts) {
  if (cfg.rounds < 1) fail(ErrorCode::kInvalidConfig, "datagen.rounds must be >= 1");
  const int bins = policy.layout().dims.bins;
  const FeatureVector features = encode_features(task.scene, world);
  const std::vector<double> query = encode_query(task.query.question, world);

  std::vector<CandidatePath> out;
  out.reserve(2 * static_cast<std::size_t>(cfg.rounds));
  for (int round = 0; round < cfg.rounds; ++round) {
    const BboxTokens t1 = sample_bbox(policy, features, query, rng, cfg.temperature);
    BboxTokens t2 = sample_bbox(policy, features, query, rng, cfg.temperature);
    const BoundingBox b1 = box_from_tokens(t1, bins);
    const BoundingBox b2 = box_from_tokens(t2, bins);
    std::optional<DiversityOutcome> adjusted;
    try {
      adjusted = diversity_adjust(b1, b2, cfg.diversity_for(b1, 0.0), rng);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoFeasibleBox) throw;
      ++counts.infeasible;
    }
    out.push_back(score_path(policy, task, world, cfg, query, t1, b1, false, rng));
    if (!adjusted) continue;
    if (adjusted->replaced) {
      ++counts.replaced;
      t2 = box_to_tokens(adjusted->box, bins);
    }
    out.push_back(score_path(policy, task, world, cfg, query, t2, adjusted->box,
                             adjusted->replaced, rng));
  }
  return out;
}

template <typename Better>
std::optional<std::size_t> simultaneous_extremum(std::span<const CandidatePath> paths,
                                                 Better better) {
  if (paths.empty()) return std::nullopt;
  Score best_b = paths[0].s_b;
  Score best_r = paths[0].s_r;
  for (const auto& p : paths) {
    if (better(p.s_b, best_b)) best_b = p.s_b;
    if (better(p.s_r, best_r)) best_r = p.s_r;
  }
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (paths[i].s_b == best_b && paths[i].s_r == best_r) return i;
  }
  return std::nullopt;
}

}  // namespace

std::vector<CandidatePath> generate_candidates(const PolicyParams& policy,
                                               const Task& task,
                                               const WorldConfig& world,
                                               const DatagenConfig& cfg, Rng& rng) {
  RoundCounts counts;
  return candidates_impl(policy, task, world, cfg, rng, counts);
}

FilteredCandidates filter_candidates(std::span<const CandidatePath> paths,
                                     const FilterThresholds& th) {
  th.validate();
  FilteredCandidates out;
  for (const auto& p : paths) {
    if (p.s_b >= th.t_b_max && p.s_r >= th.t_r_max) {
      out.win.push_back(p);
    } else if (p.s_b < th.t_b_min && p.s_r < th.t_r_min) {
      out.lose.push_back(p);
    }
  }
  return out;
}

std::optional<std::size_t> simultaneous_max(std::span<const CandidatePath> paths) {
  return simultaneous_extremum(paths, [](Score a, Score b) { return a > b; });
}

std::optional<std::size_t> simultaneous_min(std::span<const CandidatePath> paths) {
  return simultaneous_extremum(paths, [](Score a, Score b) { return a < b; });
}

std::optional<PreferencePair> select_pair(std::span<const CandidatePath> win,
                                          std::span<const CandidatePath> lose) {
  const auto w = simultaneous_max(win);
  const auto l = simultaneous_min(lose);
  if (!w || !l) return std::nullopt;
  return PreferencePair{win[*w].task_id, win[*w], lose[*l]};
}

TaskOutcome process_task(const PolicyParams& policy, const Task& task,
                         const WorldConfig& world, const DatagenConfig& cfg,
                         Rng& rng) {
  TaskOutcome out;
  RoundCounts counts;
  out.candidates = candidates_impl(policy, task, world, cfg, rng, counts);
  out.replaced_rounds = counts.replaced;
  out.infeasible_rounds = counts.infeasible;
  const auto filtered = filter_candidates(out.candidates, cfg.thresholds);
  out.pair = select_pair(filtered.win, filtered.lose);
  if (out.pair) {
    out.reason = DropReason::kNone;
  } else if (counts.infeasible == cfg.rounds) {
    out.reason = DropReason::kInfeasible;
  } else if (filtered.win.empty()) {
    out.reason = DropReason::kTooHard;
  } else if (filtered.lose.empty()) {
    out.reason = DropReason::kTooEasy;
  } else {
    out.reason = DropReason::kNonExtremal;
  }
  return out;
}

PreferenceDataset build_preference_dataset(const PolicyParams& policy,
                                           std::span<const Task> tasks,
                                           const WorldConfig& world,
                                           const DatagenConfig& cfg,
                                           std::uint64_t seed, int iteration,
                                           int workers) {
  if (tasks.empty()) fail(ErrorCode::kEmptyPool, "preference generation needs tasks");
  cfg.validate();
  std::vector<TaskOutcome> outcomes(tasks.size());
  parallel_for(tasks.size(), workers, [&](std::size_t i) {
    Rng rng = make_rng({seed, stream(Stream::kDatagen),
                        static_cast<std::uint64_t>(iteration),
                        static_cast<std::uint64_t>(tasks[i].scene.id)});
    outcomes[i] = process_task(policy, tasks[i], world, cfg, rng);
  });

  PreferenceDataset data;
  auto& st = data.stats;
  st.tasks = static_cast<std::int64_t>(tasks.size());
  for (auto& o : outcomes) {
    st.candidates += static_cast<std::int64_t>(o.candidates.size());
    st.replaced_rounds += o.replaced_rounds;
    st.infeasible_rounds += o.infeasible_rounds;
    switch (o.reason) {
      case DropReason::kNone:
        data.pairs.push_back(std::move(*o.pair));
        break;
      case DropReason::kTooEasy:
        ++st.too_easy;
        break;
      case DropReason::kTooHard:
        ++st.too_hard;
        break;
      case DropReason::kNonExtremal:
        ++st.non_extremal;
        break;
      case DropReason::kInfeasible:
        ++st.infeasible;
        break;
    }
  }
  st.retained = static_cast<std::int64_t>(data.pairs.size());
  if (data.pairs.empty()) {
    fail(ErrorCode::kEmptyDataset,
         "no preference pair survived filtering over " + std::to_string(st.tasks) +
             " tasks");
  }
  st.quality = data_quality_table(data.pairs, tasks);
  return data;
}

}  // namespace focusrl

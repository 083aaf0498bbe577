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

#include "focusrl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "focusrl/error.hpp"
#include "focusrl/parallel.hpp"

namespace focusrl {

namespace fs = std::filesystem;

namespace {

void apply_step(PolicyParams& params, std::vector<double>& grad, double lr, double clip) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  const double scale = norm > clip ? clip / norm : 1.0;
  auto v = params.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * scale * grad[i];
}

// Shuffled minibatch epochs. batch_fn(params, items) returns {loss, grad};
// losses are recorded on the whole set before training and after each epoch.
template <typename Item, typename BatchFn>
PhaseResult run_epochs(const PolicyParams& start, std::span<const Item> items,
                       const PhaseSchedule& schedule, double clip, Rng rng,
                       BatchFn batch_fn) {
  PhaseResult r{start, {}};
  r.losses.push_back(batch_fn(r.params, items).loss);
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Item> batch;
  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < order.size();
         b += static_cast<std::size_t>(schedule.batch_size)) {
      const std::size_t e =
          std::min(order.size(), b + static_cast<std::size_t>(schedule.batch_size));
      batch.clear();
      for (std::size_t i = b; i < e; ++i) batch.push_back(items[order[i]]);
      auto result = batch_fn(r.params, std::span<const Item>(batch));
      apply_step(r.params, result.grad, schedule.lr, clip);
    }
    r.losses.push_back(batch_fn(r.params, items).loss);
  }
  return r;
}

struct SftExample {
  std::vector<double> features;
  std::vector<double> query;
  std::vector<double> gt_crop;
  BboxTokens box_tokens{};
  int answer = 0;
};

BatchResult sft_batch(const PolicyParams& params, std::span<const SftExample> batch) {
  BatchResult r;
  r.grad.assign(params.size(), 0.0);
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) {
    const HeadInput box_in = bbox_input(ex.features, ex.query);
    const HeadInput ans_in = response_input(ex.query, ex.gt_crop);
    const int answer[1] = {ex.answer};
    r.loss -= logprob(params, Head::kBbox, box_in, ex.box_tokens) +
              logprob(params, Head::kResponse, ans_in, answer);
    accumulate_grad_logprob(params, Head::kBbox, box_in, ex.box_tokens, -scale, r.grad);
    accumulate_grad_logprob(params, Head::kResponse, ans_in, answer, -scale, r.grad);
  }
  r.loss *= scale;
  return r;
}

void log_line(const RunOptions& options, const std::string& line) {
  if (options.log) options.log(line);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

Json phase_json(const PhaseLog& p) {
  return {{"phase", p.phase},
          {"iteration", p.iteration},
          {"losses", p.losses},
          {"eval", eval_to_json(p.eval)}};
}

}  // namespace

PolicyParams initial_params(const TrainConfig& cfg) {
  Rng rng = make_rng({cfg.seed, stream(Stream::kInit)});
  return PolicyParams::random(cfg.policy_layout(), cfg.init_scale, rng);
}

PhaseResult sft_warmup(const PolicyParams& params, std::span<const Task> annotated,
                       const TrainConfig& cfg) {
  if (annotated.empty()) fail(ErrorCode::kEmptyPool, "SFT needs annotated tasks");
  const int bins = params.layout().dims.bins;
  std::vector<SftExample> examples;
  examples.reserve(annotated.size());
  for (const auto& t : annotated) {
    SftExample ex;
    ex.features = encode_features(t.scene, cfg.world);
    ex.query = encode_query(t.query.question, cfg.world);
    ex.gt_crop = crop_features(t.scene, t.query.gt_region, cfg.world);
    ex.box_tokens = box_to_tokens(t.query.gt_region, bins);
    ex.answer = t.query.gt_answer;
    examples.push_back(std::move(ex));
  }
  return run_epochs<SftExample>(params, examples, cfg.sft, cfg.grad_clip,
                                make_rng({cfg.seed, stream(Stream::kSft)}), sft_batch);
}

PhaseResult train_stage1(const PolicyParams& params, const ReferenceSnapshot& ref,
                         std::span<const TrainingPair> data, const TrainConfig& cfg,
                         int iteration) {
  if (data.empty()) fail(ErrorCode::kEmptyDataset, "stage 1 needs preference pairs");
  return run_epochs<TrainingPair>(
      params, data, cfg.stage1, cfg.grad_clip,
      make_rng({cfg.seed, stream(Stream::kStage1), static_cast<std::uint64_t>(iteration)}),
      [&](const PolicyParams& p, std::span<const TrainingPair> batch) {
        return stage1_batch(p, ref, batch, cfg.dpo.beta1);
      });
}

PhaseResult train_stage2_with(const PolicyParams& params, const ReferenceSnapshot& ref_hat,
                              std::span<const TrainingPair> data, const TrainConfig& cfg,
                              int iteration) {
  if (data.empty()) fail(ErrorCode::kEmptyDataset, "stage 2 needs preference pairs");
  if (ref_hat.provenance().kind != Provenance::Kind::kPostStage1) {
    fail(ErrorCode::kWrongReference, "stage 2 needs the post-stage-1 reference, got " +
                                         ref_hat.provenance().to_string());
  }
  return run_epochs<TrainingPair>(
      params, data, cfg.stage2, cfg.grad_clip,
      make_rng({cfg.seed, stream(Stream::kStage2), static_cast<std::uint64_t>(iteration)}),
      [&](const PolicyParams& p, std::span<const TrainingPair> batch) {
        return stage2_batch(p, ref_hat, batch, cfg.dpo);
      });
}

PhaseResult train_stage2(const PolicyParams& params, std::span<const TrainingPair> data,
                         const TrainConfig& cfg, int iteration) {
  const ReferenceSnapshot ref_hat =
      snapshot(params, {Provenance::Kind::kPostStage1, iteration});
  return train_stage2_with(params, ref_hat, data, cfg, iteration);
}

std::vector<ResponsePair> build_response_pairs(const PolicyParams& params,
                                               std::span<const Task> tasks,
                                               const TrainConfig& cfg, int iteration) {
  const auto& th = cfg.datagen.thresholds;
  std::vector<std::optional<ResponsePair>> slots(tasks.size());
  parallel_for(tasks.size(), cfg.workers, [&](std::size_t i) {
    const Task& t = tasks[i];
    Rng rng = make_rng({cfg.seed, stream(Stream::kBaseline),
                        static_cast<std::uint64_t>(iteration),
                        static_cast<std::uint64_t>(t.scene.id)});
    ResponsePair rp;
    rp.task_id = t.scene.id;
    rp.query = encode_query(t.query.question, cfg.world);
    rp.context = encode_features(t.scene, cfg.world);
    std::optional<int> win, lose;
    for (int k = 0; k < 2 * cfg.datagen.rounds; ++k) {
      const int r = sample_response(params, rp.query, rp.context, rng,
                                    cfg.datagen.temperature);
      const Score s = score_response(t.query, r, cfg.world);
      if (s >= th.t_r_max && !win) win = r;
      if (s < th.t_r_min && !lose) lose = r;
    }
    if (win && lose) {
      rp.win = *win;
      rp.lose = *lose;
      slots[i] = std::move(rp);
    }
  });
  std::vector<ResponsePair> pairs;
  for (auto& s : slots) {
    if (s) pairs.push_back(std::move(*s));
  }
  return pairs;
}

BaselineResult train_response_only_dpo(const PolicyParams& params, const TrainConfig& cfg,
                                       std::span<const Task> tasks) {
  if (tasks.empty()) fail(ErrorCode::kEmptyPool, "baseline needs tasks");
  BaselineResult out{params, {}, {}};
  const int rounds = std::max(1, cfg.iterations);
  for (int k = 0; k < rounds; ++k) {
    const auto pairs = build_response_pairs(out.params, tasks, cfg, k);
    if (pairs.empty()) {
      fail(ErrorCode::kEmptyDataset, "no response-only preference pair in round " +
                                         std::to_string(k));
    }
    const ReferenceSnapshot ref = snapshot(out.params, {Provenance::Kind::kIteration, k});
    auto r = run_epochs<ResponsePair>(
        out.params, pairs, cfg.baseline, cfg.grad_clip,
        make_rng({cfg.seed, stream(Stream::kBaseline), 1000u + static_cast<std::uint64_t>(k)}),
        [&](const PolicyParams& p, std::span<const ResponsePair> batch) {
          return response_batch(p, ref, batch, cfg.dpo.beta);
        });
    out.params = std::move(r.params);
    out.losses.push_back(std::move(r.losses));
    out.pair_counts.push_back(static_cast<std::int64_t>(pairs.size()));
  }
  return out;
}

std::optional<EvalResult> RunReport::eval_of(const std::string& phase, int iteration) const {
  std::optional<EvalResult> found;
  for (const auto& p : phases) {
    if (p.phase == phase && p.iteration == iteration) found = p.eval;
  }
  return found;
}

Json RunReport::to_json() const {
  Json phases_j = Json::array();
  for (const auto& p : phases) phases_j.push_back(phase_json(p));
  Json datagen_j = Json::array();
  for (const auto& d : datagen) {
    datagen_j.push_back({{"iteration", d.iteration},
                         {"dataset", d.dataset},
                         {"stats", stats_to_json(d.stats)}});
  }
  return {{"config_hash", stamp.config_hash},
          {"seed", stamp.seed},
          {"run_id", stamp.run_id()},
          {"critic",
           "oracle: scores crops and answers from ground truth in place of the "
           "original-model judge; the learner never sees ground-truth regions"},
          {"config", config},
          {"phases", phases_j},
          {"datagen", datagen_j},
          {"checkpoints", checkpoints},
          {"complete", complete},
          {"error", error.empty() ? Json(nullptr) : Json(error)}};
}

RunStamp stamp_of(const TrainConfig& cfg) { return {config_hash(cfg), cfg.seed}; }

std::vector<Task> make_pool(const TrainConfig& cfg, Pool pool) {
  const int count = pool == Pool::kSft  ? cfg.sft_tasks
                    : pool == Pool::kRl ? cfg.rl_tasks
                                        : cfg.eval_tasks;
  return generate_pool(cfg.world, cfg.seed, pool, count, cfg.workers);
}

std::vector<std::string> metric_rows(const RunStamp& stamp, const PhaseLog& log) {
  std::vector<std::string> rows;
  const std::string prefix =
      stamp.run_id() + "," + log.phase + "," + std::to_string(log.iteration) + ",";
  rows.push_back(prefix + "detection_acc," + fmt(log.eval.detection_acc));
  rows.push_back(prefix + "answer_acc," + fmt(log.eval.answer_acc));
  rows.push_back(prefix + "bbox_format_ratio," + fmt(log.eval.format_ratio));
  return rows;
}

void write_metrics_csv(const fs::path& path, const std::vector<std::string>& rows) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << "run_id,phase,iteration,metric,value\n";
  for (const auto& r : rows) out << r << "\n";
}

RunReport run_iterations(const TrainConfig& cfg, const RunOptions& options) {
  cfg.validate();
  RunReport report;
  report.stamp = stamp_of(cfg);
  report.config = config_to_json(cfg);
  const auto& out_dir = options.out_dir;

  auto finish = [&] {
    if (!out_dir) return;
    std::vector<std::string> rows;
    for (const auto& p : report.phases) {
      for (auto& r : metric_rows(report.stamp, p)) rows.push_back(std::move(r));
    }
    write_metrics_csv(*out_dir / "metrics.csv", rows);
    write_json(*out_dir / "report.json", report.to_json());
  };

  try {
    log_line(options, "generating task pools");
    const auto sft_pool = make_pool(cfg, Pool::kSft);
    const auto rl_pool = make_pool(cfg, Pool::kRl);
    const auto eval_pool = make_pool(cfg, Pool::kEval);
    if (out_dir) {
      write_tasks(*out_dir / "world" / "sft.jsonl", sft_pool, cfg.world, report.stamp);
      write_tasks(*out_dir / "world" / "rl.jsonl", rl_pool, cfg.world, report.stamp);
      write_tasks(*out_dir / "world" / "eval.jsonl", eval_pool, cfg.world, report.stamp);
    }
    const std::uint64_t eval_seed = cfg.seed;
    auto record = [&](const std::string& phase, int iteration, const PhaseResult& r) {
      PhaseLog log{phase, iteration, r.losses,
                   evaluate_policy(r.params, eval_pool, cfg.world, eval_seed)};
      log_line(options, phase + " " + std::to_string(iteration) +
                            ": det " + fmt(log.eval.detection_acc) + " ans " +
                            fmt(log.eval.answer_acc) + " fmt " + fmt(log.eval.format_ratio));
      report.phases.push_back(std::move(log));
    };
    auto save = [&](const std::string& name, const PolicyParams& p, Provenance prov) {
      if (!out_dir) return;
      save_checkpoint(*out_dir / "checkpoints" / name, p, prov, report.stamp);
      report.checkpoints.push_back("checkpoints/" + name);
    };

    log_line(options, "sft warm-up");
    PhaseResult sft = sft_warmup(initial_params(cfg), sft_pool, cfg);
    record("sft", 0, sft);
    save("sft", sft.params, {Provenance::Kind::kPostSft, 0});
    PolicyParams current = std::move(sft.params);

    for (int k = 0; k < cfg.iterations; ++k) {
      log_line(options, "iteration " + std::to_string(k + 1) + ": preference data");
      PreferenceDataset data =
          build_preference_dataset(current, rl_pool, cfg.world, cfg.datagen, cfg.seed, k,
                                   cfg.workers);
      IterationLog it{k, data.stats, ""};
      if (out_dir) {
        it.dataset = "prefs/iter_" + std::to_string(k) + ".jsonl";
        write_pairs(*out_dir / it.dataset, data.pairs, cfg.world, report.stamp);
        Json stats = stats_to_json(data.stats);
        stats["config_hash"] = report.stamp.config_hash;
        stats["seed"] = report.stamp.seed;
        stats["iteration"] = k;
        write_json(*out_dir / "prefs" / ("iter_" + std::to_string(k) + ".stats.json"), stats);
      }
      log_line(options, "  retained " + std::to_string(data.stats.retained) + " pairs, wp_ln " +
                            fmt(data.stats.quality.wp_ln()));
      report.datagen.push_back(it);

      const auto pairs = make_training_pairs(data.pairs, rl_pool, cfg.world);
      const Provenance ref_tag = k == 0 ? Provenance{Provenance::Kind::kPostSft, 0}
                                        : Provenance{Provenance::Kind::kIteration, k};
      const ReferenceSnapshot ref = snapshot(current, ref_tag);
      PhaseResult s1 = train_stage1(current, ref, pairs, cfg, k);
      record("stage1", k + 1, s1);
      PhaseResult s2 = train_stage2(s1.params, pairs, cfg, k);
      record("stage2", k + 1, s2);
      current = std::move(s2.params);
      save("iter_" + std::to_string(k + 1), current, {Provenance::Kind::kIteration, k + 1});
    }
    report.complete = true;
  } catch (const Error& e) {
    report.error = std::string(error_name(e.code())) + ": " + e.what();
    finish();
    throw;
  }
  finish();
  return report;
}

}  // namespace focusrl

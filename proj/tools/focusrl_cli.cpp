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

// focusrl command-line driver. Phase commands share one output directory:
//
//   world/{sft,rl,eval}.jsonl     task pools (gen-world)
//   checkpoints/<name>.{meta.json,bin}
//   prefs/iter_<k>.jsonl          preference pairs (gen-prefs, iterate)
//   report.json, metrics.csv      iterate
//   baseline.json, eval.csv       baseline-dpo, eval
//   summary.json                  report
//
// Errors print one JSON object on stderr and exit with the error's status.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "focusrl/config.hpp"
#include "focusrl/datagen.hpp"
#include "focusrl/dpo.hpp"
#include "focusrl/error.hpp"
#include "focusrl/io.hpp"
#include "focusrl/metrics.hpp"
#include "focusrl/policy.hpp"
#include "focusrl/synthworld.hpp"
#include "focusrl/trainer.hpp"

namespace fs = std::filesystem;
using focusrl::ErrorCode;
using focusrl::Json;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  int workers = 0;  // 0 keeps the config value
  bool quiet = false;
};

struct Context {
  focusrl::TrainConfig cfg;
  focusrl::RunStamp stamp;
  fs::path out;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "TOML config file (defaults when omitted)");
  sub->add_option("--seed", c.seed, "master seed, overrides the config");
  sub->add_option("--out", c.out, "output directory")->capture_default_str();
  sub->add_option("--workers", c.workers, "worker threads for task generation and datagen")
      ->check(CLI::NonNegativeNumber);
  sub->add_flag("--quiet", c.quiet, "no progress lines on stderr");
}

Context open(const Common& c) {
  Context ctx;
  ctx.cfg = c.config.empty() ? focusrl::TrainConfig{} : focusrl::load_config(c.config);
  if (c.seed) ctx.cfg.seed = *c.seed;
  if (c.workers > 0) ctx.cfg.workers = c.workers;
  ctx.cfg.validate();
  ctx.stamp = focusrl::stamp_of(ctx.cfg);
  ctx.out = c.out;
  return ctx;
}

void progress(const Common& c, const std::string& line) {
  if (!c.quiet) std::cerr << line << std::endl;
}

std::vector<focusrl::Task> pool(const Context& ctx, const std::string& name) {
  const fs::path p = ctx.out / "world" / (name + ".jsonl");
  if (!fs::exists(p)) {
    focusrl::fail(ErrorCode::kMissingInput, p.string() + " not found; run gen-world first");
  }
  return focusrl::read_tasks(p, ctx.cfg.world, &ctx.stamp);
}

focusrl::Checkpoint checkpoint(const Context& ctx, const fs::path& prefix) {
  const fs::path full = prefix.is_absolute() ? prefix : ctx.out / prefix;
  focusrl::Checkpoint ck = focusrl::load_checkpoint(full);
  if (!(ck.stamp == ctx.stamp)) {
    focusrl::fail(ErrorCode::kHashMismatch,
                  full.string() + " belongs to run " + ck.stamp.run_id() + ", not " +
                      ctx.stamp.run_id());
  }
  if (!(ck.params.layout() == ctx.cfg.policy_layout())) {
    focusrl::fail(ErrorCode::kSchema, full.string() + " does not match the config's layout");
  }
  return ck;
}

std::string policy_for_iteration(int k) {
  return k == 0 ? "checkpoints/sft" : "checkpoints/iter_" + std::to_string(k);
}

std::string prefs_for_iteration(int k) { return "prefs/iter_" + std::to_string(k) + ".jsonl"; }

Json stamped(Json j, const focusrl::RunStamp& stamp) {
  j["config_hash"] = stamp.config_hash;
  j["seed"] = stamp.seed;
  return j;
}

void emit(const Json& j) { std::cout << j.dump() << std::endl; }

Json losses_summary(const std::vector<double>& losses) {
  return {{"initial", losses.front()}, {"final", losses.back()},
          {"epochs", losses.size() - 1}};
}

void cmd_gen_world(const Common& c) {
  const Context ctx = open(c);
  Json counts;
  for (auto [name, kind] : {std::pair{"sft", focusrl::Pool::kSft},
                            std::pair{"rl", focusrl::Pool::kRl},
                            std::pair{"eval", focusrl::Pool::kEval}}) {
    const auto tasks = focusrl::make_pool(ctx.cfg, kind);
    focusrl::write_tasks(ctx.out / "world" / (std::string(name) + ".jsonl"), tasks,
                         ctx.cfg.world, ctx.stamp);
    counts[name] = tasks.size();
    progress(c, std::string(name) + ": " + std::to_string(tasks.size()) + " tasks");
  }
  emit({{"command", "gen-world"}, {"run_id", ctx.stamp.run_id()}, {"tasks", counts}});
}

void cmd_sft(const Common& c) {
  const Context ctx = open(c);
  const auto tasks = pool(ctx, "sft");
  progress(c, "sft warm-up on " + std::to_string(tasks.size()) + " tasks");
  const auto r = focusrl::sft_warmup(focusrl::initial_params(ctx.cfg), tasks, ctx.cfg);
  focusrl::save_checkpoint(ctx.out / "checkpoints" / "sft", r.params,
                           {focusrl::Provenance::Kind::kPostSft, 0}, ctx.stamp);
  emit({{"command", "sft"}, {"checkpoint", "checkpoints/sft"}, {"loss", losses_summary(r.losses)}});
}

void cmd_gen_prefs(const Common& c, int k, const std::string& policy_arg) {
  const Context ctx = open(c);
  const std::string policy = policy_arg.empty() ? policy_for_iteration(k) : policy_arg;
  const auto ck = checkpoint(ctx, policy);
  const auto tasks = pool(ctx, "rl");
  progress(c, "preference data from " + policy + " over " + std::to_string(tasks.size()) +
                  " tasks");
  const auto data = focusrl::build_preference_dataset(ck.params, tasks, ctx.cfg.world,
                                                      ctx.cfg.datagen, ctx.cfg.seed, k,
                                                      ctx.cfg.workers);
  const std::string path = prefs_for_iteration(k);
  focusrl::write_pairs(ctx.out / path, data.pairs, ctx.cfg.world, ctx.stamp);
  Json stats = stamped(focusrl::stats_to_json(data.stats), ctx.stamp);
  stats["iteration"] = k;
  focusrl::write_json(ctx.out / "prefs" / ("iter_" + std::to_string(k) + ".stats.json"), stats);
  emit({{"command", "gen-prefs"}, {"dataset", path}, {"stats", stats}});
}

std::vector<focusrl::TrainingPair> training_pairs(const Context& ctx, int k,
                                                  const std::string& prefs_arg) {
  const fs::path prefs = ctx.out / (prefs_arg.empty() ? prefs_for_iteration(k) : prefs_arg);
  const auto pairs =
      focusrl::read_pairs(prefs, ctx.cfg.world, ctx.cfg.bins, &ctx.stamp);
  return focusrl::make_training_pairs(pairs, pool(ctx, "rl"), ctx.cfg.world);
}

void cmd_rl1(const Common& c, int k, const std::string& policy_arg,
             const std::string& prefs_arg) {
  const Context ctx = open(c);
  const std::string policy = policy_arg.empty() ? policy_for_iteration(k) : policy_arg;
  const auto ck = checkpoint(ctx, policy);
  const auto pairs = training_pairs(ctx, k, prefs_arg);
  const auto ref = focusrl::snapshot(ck.params, ck.provenance);
  progress(c, "stage 1 on " + std::to_string(pairs.size()) + " pairs");
  const auto r = focusrl::train_stage1(ck.params, ref, pairs, ctx.cfg, k);
  const std::string name = "stage1_" + std::to_string(k + 1);
  focusrl::save_checkpoint(ctx.out / "checkpoints" / name, r.params,
                           {focusrl::Provenance::Kind::kPostStage1, 0}, ctx.stamp);
  emit({{"command", "rl1"}, {"checkpoint", "checkpoints/" + name},
        {"loss", losses_summary(r.losses)}});
}

void cmd_rl2(const Common& c, int k, const std::string& policy_arg,
             const std::string& prefs_arg) {
  const Context ctx = open(c);
  const std::string policy =
      policy_arg.empty() ? "checkpoints/stage1_" + std::to_string(k + 1) : policy_arg;
  const auto ck = checkpoint(ctx, policy);
  const auto pairs = training_pairs(ctx, k, prefs_arg);
  // The loaded policy is its own reference; anything but a post-stage-1
  // checkpoint is refused here.
  const auto ref_hat = focusrl::snapshot(ck.params, ck.provenance);
  progress(c, "stage 2 on " + std::to_string(pairs.size()) + " pairs");
  const auto r = focusrl::train_stage2_with(ck.params, ref_hat, pairs, ctx.cfg, k);
  const std::string name = "iter_" + std::to_string(k + 1);
  focusrl::save_checkpoint(ctx.out / "checkpoints" / name, r.params,
                           {focusrl::Provenance::Kind::kIteration, k + 1}, ctx.stamp);
  emit({{"command", "rl2"}, {"checkpoint", "checkpoints/" + name},
        {"loss", losses_summary(r.losses)}});
}

void cmd_iterate(const Common& c) {
  const Context ctx = open(c);
  focusrl::RunOptions options;
  options.out_dir = ctx.out;
  options.log = [&](const std::string& line) { progress(c, line); };
  const auto report = focusrl::run_iterations(ctx.cfg, options);
  Json j{{"command", "iterate"}, {"run_id", ctx.stamp.run_id()}, {"report", "report.json"}};
  if (const auto first = report.eval_of("sft", 0)) j["sft"] = focusrl::eval_to_json(*first);
  if (!report.phases.empty()) j["final"] = focusrl::eval_to_json(report.phases.back().eval);
  emit(j);
}

void cmd_baseline(const Common& c, const std::string& policy_arg) {
  const Context ctx = open(c);
  const std::string policy = policy_arg.empty() ? "checkpoints/sft" : policy_arg;
  const auto ck = checkpoint(ctx, policy);
  const auto tasks = pool(ctx, "rl");
  const auto eval_tasks = pool(ctx, "eval");
  progress(c, "response-only DPO from " + policy);
  const auto r = focusrl::train_response_only_dpo(ck.params, ctx.cfg, tasks);
  focusrl::save_checkpoint(ctx.out / "checkpoints" / "baseline", r.params,
                           {focusrl::Provenance::Kind::kIteration,
                            static_cast<int>(r.losses.size())},
                           ctx.stamp);
  const auto eval = focusrl::evaluate_policy(r.params, eval_tasks, ctx.cfg.world, ctx.cfg.seed);
  Json rounds = Json::array();
  for (std::size_t i = 0; i < r.losses.size(); ++i) {
    rounds.push_back({{"round", i}, {"pairs", r.pair_counts[i]}, {"losses", r.losses[i]}});
  }
  const Json j = stamped({{"start", policy},
                          {"checkpoint", "checkpoints/baseline"},
                          {"rounds", rounds},
                          {"eval", focusrl::eval_to_json(eval)}},
                         ctx.stamp);
  focusrl::write_json(ctx.out / "baseline.json", j);
  emit({{"command", "baseline-dpo"}, {"eval", j["eval"]}});
}

void cmd_eval(const Common& c, const std::vector<std::string>& checkpoints) {
  const Context ctx = open(c);
  std::vector<std::string> prefixes = checkpoints;
  if (prefixes.empty()) {
    for (int k = 1; k <= ctx.cfg.iterations; ++k) prefixes.push_back(policy_for_iteration(k));
  }
  const auto tasks = pool(ctx, "eval");
  std::vector<std::string> rows;
  for (const auto& prefix : prefixes) {
    const auto ck = checkpoint(ctx, prefix);
    focusrl::PhaseLog log;
    log.phase = "eval";
    log.iteration = ck.provenance.kind == focusrl::Provenance::Kind::kIteration
                        ? ck.provenance.iteration
                        : 0;
    log.eval = focusrl::evaluate_policy(ck.params, tasks, ctx.cfg.world, ctx.cfg.seed);
    progress(c, prefix + ": det " + std::to_string(log.eval.detection_acc) + " ans " +
                    std::to_string(log.eval.answer_acc));
    for (auto& row : focusrl::metric_rows(ctx.stamp, log)) rows.push_back(std::move(row));
  }
  focusrl::write_metrics_csv(ctx.out / "eval.csv", rows);
  emit({{"command", "eval"}, {"csv", "eval.csv"}, {"rows", rows.size()}});
}

void check_stamp(const Json& j, const focusrl::RunStamp& stamp, const std::string& what) {
  const focusrl::RunStamp got{j.value("config_hash", std::string()),
                              j.value("seed", std::uint64_t{0})};
  if (!(got == stamp)) {
    focusrl::fail(ErrorCode::kHashMismatch,
                  what + " belongs to run " + got.run_id() + ", not " + stamp.run_id());
  }
}

// Rows of a metrics CSV must all carry this run's id.
void check_csv(const fs::path& path, const focusrl::RunStamp& stamp) {
  std::ifstream in(path);
  if (!in) focusrl::fail(ErrorCode::kIo, "cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.substr(0, line.find(',')) != stamp.run_id()) {
      focusrl::fail(ErrorCode::kHashMismatch, path.string() + " holds rows of another run");
    }
  }
}

void cmd_report(const Common& c) {
  const Context ctx = open(c);
  const fs::path report_path = ctx.out / "report.json";
  if (!fs::exists(report_path)) {
    focusrl::fail(ErrorCode::kMissingInput, report_path.string() + " not found; run iterate first");
  }
  const Json report = focusrl::read_json(report_path);
  check_stamp(report, ctx.stamp, report_path.string());
  for (const auto& d : report.at("datagen")) {
    const std::string ds = d.at("dataset").get<std::string>();
    if (!ds.empty()) {
      focusrl::read_pairs(ctx.out / ds, ctx.cfg.world, ctx.cfg.bins, &ctx.stamp);
    }
  }
  for (const auto& ck : report.at("checkpoints")) checkpoint(ctx, ck.get<std::string>());
  for (const char* csv : {"metrics.csv", "eval.csv"}) {
    if (fs::exists(ctx.out / csv)) check_csv(ctx.out / csv, ctx.stamp);
  }

  Json summary = stamped({{"run_id", ctx.stamp.run_id()}, {"complete", report.at("complete")}},
                         ctx.stamp);
  const Json& phases = report.at("phases");
  if (!phases.empty()) {
    const Json& first = phases.front().at("eval");
    const Json& last = phases.back().at("eval");
    summary["sft"] = first;
    summary["final"] = last;
    summary["gain"] = {
        {"detection_acc", last.at("detection_acc").get<double>() -
                              first.at("detection_acc").get<double>()},
        {"answer_acc",
         last.at("answer_acc").get<double>() - first.at("answer_acc").get<double>()}};
  }
  Json per_iteration = Json::array();
  for (const auto& p : phases) {
    if (p.at("phase") == "stage2") {
      per_iteration.push_back({{"iteration", p.at("iteration")}, {"eval", p.at("eval")}});
    }
  }
  summary["iterations"] = per_iteration;
  Json data = Json::array();
  for (const auto& d : report.at("datagen")) {
    const Json& s = d.at("stats");
    data.push_back({{"iteration", d.at("iteration")},
                    {"retained", s.at("retained")},
                    {"quality", s.at("quality")}});
  }
  summary["datagen"] = data;
  const fs::path baseline_path = ctx.out / "baseline.json";
  if (fs::exists(baseline_path)) {
    const Json baseline = focusrl::read_json(baseline_path);
    check_stamp(baseline, ctx.stamp, baseline_path.string());
    summary["baseline"] = baseline.at("eval");
  }
  focusrl::write_json(ctx.out / "summary.json", summary);
  emit({{"command", "report"}, {"summary", "summary.json"}});
}

int report_error(std::string_view name, const std::string& message, int status) {
  std::cerr << Json{{"error", name}, {"message", message}, {"exit_status", status}}.dump()
            << std::endl;
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"focusrl: preference-data generation and step-level DPO on a grid world"};
  app.require_subcommand(1);
  Common common;
  int iteration = 0;
  std::string policy;
  std::string prefs;
  std::vector<std::string> checkpoints;

  auto* gen_world = app.add_subcommand("gen-world", "write the sft, rl and eval task pools");
  auto* sft = app.add_subcommand("sft", "supervised warm-up from world/sft.jsonl");
  auto* gen_prefs = app.add_subcommand("gen-prefs", "build the preference data of one iteration");
  auto* rl1 = app.add_subcommand("rl1", "stage 1: box-token DPO");
  auto* rl2 = app.add_subcommand("rl2", "stage 2: joint box and response DPO");
  auto* iterate = app.add_subcommand("iterate", "sft plus the full self-evolution loop");
  auto* baseline = app.add_subcommand("baseline-dpo", "response-only DPO from the sft checkpoint");
  auto* eval = app.add_subcommand("eval", "metrics CSV for checkpoints");
  auto* report = app.add_subcommand("report", "aggregate the run's artifacts into summary.json");
  for (auto* sub : {gen_world, sft, gen_prefs, rl1, rl2, iterate, baseline, eval, report}) {
    add_common(sub, common);
  }
  for (auto* sub : {gen_prefs, rl1, rl2}) {
    sub->add_option("--iteration", iteration, "self-evolution round k, from 0")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--policy", policy, "checkpoint prefix relative to --out");
  }
  baseline->add_option("--policy", policy, "checkpoint prefix relative to --out");
  for (auto* sub : {rl1, rl2}) {
    sub->add_option("--prefs", prefs, "preference JSONL relative to --out");
  }
  eval->add_option("--checkpoint", checkpoints,
                   "checkpoint prefixes (default: iter_1 .. iter_K)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("Usage", e.what(), 64);
  }

  try {
    if (*gen_world) cmd_gen_world(common);
    else if (*sft) cmd_sft(common);
    else if (*gen_prefs) cmd_gen_prefs(common, iteration, policy);
    else if (*rl1) cmd_rl1(common, iteration, policy, prefs);
    else if (*rl2) cmd_rl2(common, iteration, policy, prefs);
    else if (*iterate) cmd_iterate(common);
    else if (*baseline) cmd_baseline(common, policy);
    else if (*eval) cmd_eval(common, checkpoints);
    else if (*report) cmd_report(common);
  } catch (const focusrl::Error& e) {
    return report_error(focusrl::error_name(e.code()), e.what(), focusrl::exit_status(e.code()));
  } catch (const std::exception& e) {
    return report_error("Internal", e.what(), 1);
  }
  return 0;
}

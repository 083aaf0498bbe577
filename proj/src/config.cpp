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

#include "focusrl/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "focusrl/error.hpp"

namespace focusrl {

namespace {

// Reads typed keys from one TOML table and rejects keys nobody asked for.
class TableReader {
 public:
  TableReader(const toml::table* table, std::string name)
      : table_(table), name_(std::move(name)) {}

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (table_ == nullptr) return;
    const toml::node* node = table_->get(key);
    if (node == nullptr) return;
    if constexpr (std::is_floating_point_v<T>) {
      if (auto v = node->value<double>()) {
        out = *v;
        return;
      }
    } else {
      if (auto v = node->value<std::int64_t>()) {
        if constexpr (std::is_unsigned_v<T>) {
          if (*v < 0) bad(key);
        }
        out = static_cast<T>(*v);
        return;
      }
    }
    bad(key);
  }

  void finish() const {
    if (table_ == nullptr) return;
    for (const auto& [k, v] : *table_) {
      if (v.is_table()) continue;
      if (!seen_.count(std::string(k.str()))) {
        fail(ErrorCode::kConfigParse, "unknown config key '" + qualified(k.str()) + "'");
      }
    }
  }

 private:
  [[noreturn]] void bad(const char* key) const {
    fail(ErrorCode::kConfigParse, "config key '" + qualified(key) + "' has the wrong type");
  }
  std::string qualified(std::string_view key) const {
    return name_.empty() ? std::string(key) : name_ + "." + std::string(key);
  }

  const toml::table* table_;
  std::string name_;
  std::set<std::string> seen_;
};

void read_schedule(const toml::table& root, const char* name, PhaseSchedule& s) {
  TableReader r(root[name].as_table(), name);
  r.get("epochs", s.epochs);
  r.get("lr", s.lr);
  r.get("batch_size", s.batch_size);
  r.finish();
}

nlohmann::json schedule_json(const PhaseSchedule& s) {
  return {{"epochs", s.epochs}, {"lr", s.lr}, {"batch_size", s.batch_size}};
}

void validate_schedule(const PhaseSchedule& s, const char* name) {
  if (s.epochs < 0 || !(s.lr >= 0.0) || s.batch_size <= 0) {
    fail(ErrorCode::kInvalidConfig,
         std::string(name) + ": needs epochs >= 0, lr >= 0, batch_size > 0");
  }
}

}  // namespace

void TrainConfig::validate() const {
  world.validate();
  dpo.validate();
  datagen.validate();
  auto require = [](bool ok, const char* what) {
    if (!ok) fail(ErrorCode::kInvalidConfig, what);
  };
  require(bins >= 4, "policy.bins must be >= 4");
  require(hidden >= 1, "policy.hidden must be >= 1");
  require(init_scale >= 0.0, "policy.init_scale must be >= 0");
  require(sft_tasks > 0 && rl_tasks > 0 && eval_tasks > 0, "pool sizes must be positive");
  require(sft_tasks < kPoolStride && rl_tasks < kPoolStride && eval_tasks < kPoolStride,
          "pool sizes must stay below the id stride so pools are disjoint");
  require(iterations >= 0, "iterations must be >= 0");
  require(grad_clip > 0.0, "grad_clip must be positive");
  require(workers >= 1, "workers must be >= 1");
  validate_schedule(sft, "sft");
  validate_schedule(stage1, "stage1");
  validate_schedule(stage2, "stage2");
  validate_schedule(baseline, "baseline");
}

PolicyDims TrainConfig::policy_dims() const {
  PolicyDims d;
  d.feature_dim = world.feature_dim();
  d.query_dim = world.query_dim();
  d.bins = bins;
  d.vocab = world.vocab_size();
  d.hidden = hidden;
  return d;
}

TrainConfig parse_config(const std::string& toml_text) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "TOML parse error: " << e.description() << " at line "
        << e.source().begin.line;
    fail(ErrorCode::kConfigParse, msg.str());
  }
  static const std::set<std::string> kSections = {
      "world", "policy", "dpo", "datagen", "filter", "critic", "data",
      "sft", "stage1", "stage2", "baseline"};
  for (const auto& [k, v] : root) {
    if (v.is_table() && !kSections.count(std::string(k.str()))) {
      fail(ErrorCode::kConfigParse, "unknown config section '" + std::string(k.str()) + "'");
    }
  }

  TrainConfig cfg;
  TableReader top(&root, "");
  top.get("seed", cfg.seed);
  top.get("workers", cfg.workers);
  top.get("iterations", cfg.iterations);
  top.get("grad_clip", cfg.grad_clip);
  top.finish();

  {
    TableReader r(root["world"].as_table(), "world");
    auto& w = cfg.world;
    r.get("grid", w.grid);
    r.get("shapes", w.num_shapes);
    r.get("colors", w.num_colors);
    r.get("min_objects", w.min_objects);
    r.get("max_objects", w.max_objects);
    r.get("max_object_width", w.max_object_width);
    r.get("max_object_height", w.max_object_height);
    r.get("min_gap", w.min_gap);
    r.get("placement_attempts", w.placement_attempts);
    r.get("weight_shape", w.weight_shape);
    r.get("weight_color", w.weight_color);
    r.get("weight_position", w.weight_position);
    r.finish();
  }
  {
    TableReader r(root["policy"].as_table(), "policy");
    r.get("bins", cfg.bins);
    r.get("hidden", cfg.hidden);
    r.get("init_scale", cfg.init_scale);
    r.finish();
  }
  {
    TableReader r(root["dpo"].as_table(), "dpo");
    r.get("beta", cfg.dpo.beta);
    r.get("beta1", cfg.dpo.beta1);
    r.get("beta2", cfg.dpo.beta2);
    r.get("lambda_b", cfg.dpo.lambda_b);
    r.get("lambda_r", cfg.dpo.lambda_r);
    r.finish();
  }
  {
    TableReader r(root["datagen"].as_table(), "datagen");
    auto& d = cfg.datagen;
    r.get("rounds", d.rounds);
    r.get("reject_threshold", d.reject_threshold);
    r.get("area_tolerance_fraction", d.area_tolerance_fraction);
    r.get("max_rejection_attempts", d.max_rejection_attempts);
    r.get("temperature", d.temperature);
    r.finish();
  }
  {
    TableReader r(root["filter"].as_table(), "filter");
    auto& t = cfg.datagen.thresholds;
    r.get("t_b_max", t.t_b_max);
    r.get("t_b_min", t.t_b_min);
    r.get("t_r_max", t.t_r_max);
    r.get("t_r_min", t.t_r_min);
    r.finish();
  }
  {
    TableReader r(root["critic"].as_table(), "critic");
    r.get("focus_ratio", cfg.datagen.critic.focus_ratio);
    r.finish();
  }
  {
    TableReader r(root["data"].as_table(), "data");
    r.get("sft_tasks", cfg.sft_tasks);
    r.get("rl_tasks", cfg.rl_tasks);
    r.get("eval_tasks", cfg.eval_tasks);
    r.finish();
  }
  read_schedule(root, "sft", cfg.sft);
  read_schedule(root, "stage1", cfg.stage1);
  read_schedule(root, "stage2", cfg.stage2);
  read_schedule(root, "baseline", cfg.baseline);

  cfg.validate();
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kMissingInput, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

nlohmann::json config_to_json(const TrainConfig& cfg) {
  const auto& w = cfg.world;
  const auto& d = cfg.datagen;
  return {
      {"world",
       {{"grid", w.grid},
        {"shapes", w.num_shapes},
        {"colors", w.num_colors},
        {"min_objects", w.min_objects},
        {"max_objects", w.max_objects},
        {"max_object_width", w.max_object_width},
        {"max_object_height", w.max_object_height},
        {"min_gap", w.min_gap},
        {"placement_attempts", w.placement_attempts},
        {"weight_shape", w.weight_shape},
        {"weight_color", w.weight_color},
        {"weight_position", w.weight_position}}},
      {"policy", {{"bins", cfg.bins}, {"hidden", cfg.hidden}, {"init_scale", cfg.init_scale}}},
      {"dpo",
       {{"beta", cfg.dpo.beta},
        {"beta1", cfg.dpo.beta1},
        {"beta2", cfg.dpo.beta2},
        {"lambda_b", cfg.dpo.lambda_b},
        {"lambda_r", cfg.dpo.lambda_r}}},
      {"datagen",
       {{"rounds", d.rounds},
        {"reject_threshold", d.reject_threshold},
        {"area_tolerance_fraction", d.area_tolerance_fraction},
        {"max_rejection_attempts", d.max_rejection_attempts},
        {"temperature", d.temperature}}},
      {"filter",
       {{"t_b_max", d.thresholds.t_b_max},
        {"t_b_min", d.thresholds.t_b_min},
        {"t_r_max", d.thresholds.t_r_max},
        {"t_r_min", d.thresholds.t_r_min}}},
      {"critic", {{"focus_ratio", d.critic.focus_ratio}}},
      {"data",
       {{"sft_tasks", cfg.sft_tasks},
        {"rl_tasks", cfg.rl_tasks},
        {"eval_tasks", cfg.eval_tasks}}},
      {"sft", schedule_json(cfg.sft)},
      {"stage1", schedule_json(cfg.stage1)},
      {"stage2", schedule_json(cfg.stage2)},
      {"baseline", schedule_json(cfg.baseline)},
      {"iterations", cfg.iterations},
      {"grad_clip", cfg.grad_clip},
  };
}

std::string config_hash(const TrainConfig& cfg) {
  const std::string text = config_to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace focusrl

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
#include <filesystem>
#include <string>

#include <json.hpp>

#include "focusrl/datagen.hpp"
#include "focusrl/dpo.hpp"
#include "focusrl/policy.hpp"
#include "focusrl/synthworld.hpp"

namespace focusrl {

struct PhaseSchedule {
  int epochs = 3;
  double lr = 1e-2;
  int batch_size = 8;

  friend bool operator==(const PhaseSchedule&, const PhaseSchedule&) = default;
};

// Every knob of a run. Loaded from TOML; unspecified keys keep these
// defaults.
struct TrainConfig {
  WorldConfig world;

  // policy
  int bins = 16;
  int hidden = 64;
  double init_scale = 0.05;

  DpoHyper dpo;
  DatagenConfig datagen;

  int sft_tasks = 500;
  int rl_tasks = 5000;
  int eval_tasks = 1000;

  PhaseSchedule sft{60, 0.1, 8};
  PhaseSchedule stage1{3, 1e-2, 8};
  PhaseSchedule stage2{3, 1e-2, 8};
  PhaseSchedule baseline{3, 1e-2, 8};
  double grad_clip = 10.0;
  int iterations = 3;  // K

  std::uint64_t seed = 42;
  int workers = 1;

  void validate() const;
  PolicyDims policy_dims() const;
  PolicyLayout policy_layout() const { return PolicyLayout::for_dims(policy_dims()); }
};

// Throws kConfigParse on malformed TOML or unknown keys, kInvalidConfig on
// values violating invariants.
TrainConfig load_config(const std::filesystem::path& path);
TrainConfig parse_config(const std::string& toml_text);

// Canonical JSON echo of every field except seed and workers.
nlohmann::json config_to_json(const TrainConfig& cfg);

// 16 hex digits; stable across runs and platforms for equal configs.
std::string config_hash(const TrainConfig& cfg);

}  // namespace focusrl

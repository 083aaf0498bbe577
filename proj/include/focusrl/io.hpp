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
#include <vector>

#include <json.hpp>

#include "focusrl/datagen.hpp"
#include "focusrl/metrics.hpp"
#include "focusrl/policy.hpp"
#include "focusrl/synthworld.hpp"

namespace focusrl {

using Json = nlohmann::json;

// Identifies the run an artifact belongs to.
struct RunStamp {
  std::string config_hash;
  std::uint64_t seed = 0;

  std::string run_id() const { return config_hash + "-" + std::to_string(seed); }
  friend bool operator==(const RunStamp&, const RunStamp&) = default;
};

// Boxes are [x_lo, y_lo, x_hi, y_hi] rounded to 6 decimals.
Json box_to_json(const BoundingBox& box);
BoundingBox box_from_json(const Json& j);

Json task_to_json(const Task& task, const WorldConfig& world);
Task task_from_json(const Json& j, const WorldConfig& world);

Json path_to_json(const CandidatePath& p, const WorldConfig& world);
CandidatePath path_from_json(const Json& j, std::int64_t task_id,
                             const WorldConfig& world, int bins);

Json pair_to_json(const PreferencePair& pair, const WorldConfig& world);
PreferencePair pair_from_json(const Json& j, const WorldConfig& world, int bins);

Json stats_to_json(const GenerationStats& stats);
Json quality_to_json(const DataQuality& q);
Json eval_to_json(const EvalResult& r);

// JSONL files: one record per line, each stamped with config_hash and seed.
void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& records,
                 const RunStamp& stamp);
// Throws kMissingInput if absent, kSchema on malformed lines, kHashMismatch
// when a record's stamp differs from `expected` (if given).
std::vector<Json> read_jsonl(const std::filesystem::path& path,
                             const RunStamp* expected = nullptr);

void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);

void write_tasks(const std::filesystem::path& path, const std::vector<Task>& tasks,
                 const WorldConfig& world, const RunStamp& stamp);
std::vector<Task> read_tasks(const std::filesystem::path& path, const WorldConfig& world,
                             const RunStamp* expected = nullptr);

void write_pairs(const std::filesystem::path& path,
                 const std::vector<PreferencePair>& pairs, const WorldConfig& world,
                 const RunStamp& stamp);
std::vector<PreferencePair> read_pairs(const std::filesystem::path& path,
                                       const WorldConfig& world, int bins,
                                       const RunStamp* expected = nullptr);

// Checkpoint = <prefix>.meta.json (layout, provenance, stamp) plus
// <prefix>.bin (little-endian float64 values in layout order).
void save_checkpoint(const std::filesystem::path& prefix, const PolicyParams& params,
                     const Provenance& provenance, const RunStamp& stamp);

struct Checkpoint {
  PolicyParams params;
  Provenance provenance;
  RunStamp stamp;
};

Checkpoint load_checkpoint(const std::filesystem::path& prefix);

}  // namespace focusrl

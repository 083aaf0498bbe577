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

#include <filesystem>
#include <fstream>
#include <functional>
#include <set>

#include <gtest/gtest.h>

#include "focusrl/config.hpp"
#include "focusrl/error.hpp"
#include "focusrl/io.hpp"

namespace focusrl {
namespace {

namespace fs = std::filesystem;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kIo;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "focusrl_unit" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(Config, EmptyTextGivesDefaults) {
  const TrainConfig cfg = parse_config("");
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.iterations, 3);
  EXPECT_EQ(cfg.datagen.rounds, 4);
  EXPECT_EQ(cfg.datagen.thresholds.t_b_max, 8);
  EXPECT_EQ(cfg.datagen.thresholds.t_r_min, 5);
  EXPECT_EQ(cfg.dpo.beta1, 0.1);
  EXPECT_EQ(cfg.sft_tasks, 500);
  EXPECT_EQ(cfg.rl_tasks, 5000);
  EXPECT_EQ(cfg.eval_tasks, 1000);
}

TEST(Config, ReadsSections) {
  const TrainConfig cfg = parse_config(R"(
seed = 9
iterations = 2
[world]
grid = 6
[policy]
hidden = 32
[dpo]
beta2 = 0.5
[filter]
t_b_max = 9
[data]
rl_tasks = 100
[stage1]
epochs = 7
lr = 0.05
)");
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.world.grid, 6);
  EXPECT_EQ(cfg.hidden, 32);
  EXPECT_EQ(cfg.dpo.beta2, 0.5);
  EXPECT_EQ(cfg.datagen.thresholds.t_b_max, 9);
  EXPECT_EQ(cfg.rl_tasks, 100);
  EXPECT_EQ(cfg.stage1.epochs, 7);
  EXPECT_EQ(cfg.stage1.lr, 0.05);
}

TEST(Config, RejectsUnknownKeysAndSyntax) {
  EXPECT_EQ(code_of([] { parse_config("nonsense = 1"); }), ErrorCode::kConfigParse);
  EXPECT_EQ(code_of([] { parse_config("[world]\ncolour = 3"); }), ErrorCode::kConfigParse);
  EXPECT_EQ(code_of([] { parse_config("[mystery]\nx = 1"); }), ErrorCode::kConfigParse);
  EXPECT_EQ(code_of([] { parse_config("seed = = 4"); }), ErrorCode::kConfigParse);
  EXPECT_EQ(code_of([] { parse_config("[world]\ngrid = \"eight\""); }), ErrorCode::kConfigParse);
}

TEST(Config, RejectsInvalidValues) {
  EXPECT_EQ(code_of([] { parse_config("[dpo]\nlambda_b = 0.0\nlambda_r = 0.0"); }),
            ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of([] { parse_config("[filter]\nt_b_max = 3"); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of([] { parse_config("[data]\nsft_tasks = 0"); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of([] { parse_config("iterations = -1"); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of([] { parse_config("[sft]\nbatch_size = 0"); }), ErrorCode::kInvalidConfig);
}

TEST(Config, MissingFile) {
  EXPECT_EQ(code_of([] { load_config("/nonexistent/focusrl.toml"); }), ErrorCode::kMissingInput);
}

TEST(ConfigHash, IgnoresSeedAndWorkers) {
  const TrainConfig a = parse_config("seed = 1\nworkers = 1");
  const TrainConfig b = parse_config("seed = 2\nworkers = 8");
  const TrainConfig c = parse_config("[dpo]\nbeta1 = 0.2");
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_NE(config_hash(a), config_hash(c));
  EXPECT_EQ(config_hash(a).size(), 16u);
  EXPECT_EQ(config_to_json(a), config_to_json(b));
}

TEST(Io, BoxesUseSixDecimals) {
  const Json j = box_to_json({1.0 / 3, 0.25, 0.123456789, 0.9});
  EXPECT_EQ(j.dump(), "[0.333333,0.25,0.123457,0.9]");
  EXPECT_EQ(code_of([] { box_from_json(Json::array({0.5, 0.1, 0.2, 0.3})); }), ErrorCode::kSchema);
}

TEST(Io, TasksRoundTrip) {
  WorldConfig world;
  const RunStamp stamp{"abcdef0123456789", 42};
  const auto tasks = generate_pool(world, 42, Pool::kRl, 200);
  const fs::path p = scratch("tasks") / "rl.jsonl";
  write_tasks(p, tasks, world, stamp);
  EXPECT_EQ(read_tasks(p, world, &stamp), tasks);
  const RunStamp other{"abcdef0123456789", 43};
  EXPECT_EQ(code_of([&] { read_tasks(p, world, &other); }), ErrorCode::kHashMismatch);
}

TEST(Io, PairsRoundTrip) {
  WorldConfig world;
  const RunStamp stamp{"0000000000000001", 7};
  PreferencePair pair;
  pair.task_id = 1000003;
  pair.win = {pair.task_id, {1, 2, 5, 6}, box_from_tokens({1, 2, 5, 6}, 16), 4, 10, 10, false};
  pair.lose = {pair.task_id, {8, 8, 12, 12}, {0.5, 0.5, 0.75, 0.75}, 9, 0, 0, true};
  const fs::path p = scratch("pairs") / "iter_0.jsonl";
  write_pairs(p, {pair}, world, stamp);
  const auto back = read_pairs(p, world, 16, &stamp);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0], pair);
}

TEST(Io, PairBoxMustMatchTokens) {
  WorldConfig world;
  Json j = pair_to_json(
      {5, {5, {1, 2, 5, 6}, box_from_tokens({1, 2, 5, 6}, 16), 0, 10, 10, false},
       {5, {1, 2, 5, 6}, box_from_tokens({1, 2, 5, 6}, 16), 1, 0, 0, false}},
      world);
  j["win"]["box"] = Json::array({0.0, 0.0, 0.5, 0.5});
  EXPECT_EQ(code_of([&] { pair_from_json(j, world, 16); }), ErrorCode::kSchema);
}

TEST(Io, JsonlErrors) {
  const fs::path dir = scratch("jsonl");
  EXPECT_EQ(code_of([&] { read_jsonl(dir / "absent.jsonl"); }), ErrorCode::kMissingInput);
  std::ofstream(dir / "bad.jsonl") << "{\"a\": 1}\n{not json\n";
  EXPECT_EQ(code_of([&] { read_jsonl(dir / "bad.jsonl"); }), ErrorCode::kSchema);
}

TEST(Io, CheckpointRoundTripIsBitExact) {
  WorldConfig world;
  const PolicyLayout layout =
      PolicyLayout::for_dims({world.feature_dim(), world.query_dim(), 16, 10, 6});
  Rng rng(3);
  const PolicyParams p = PolicyParams::random(layout, 1.0, rng);
  const RunStamp stamp{"fedcba9876543210", 11};
  const fs::path prefix = scratch("ckpt") / "iter_2";
  save_checkpoint(prefix, p, {Provenance::Kind::kIteration, 2}, stamp);
  const Checkpoint ck = load_checkpoint(prefix);
  EXPECT_EQ(ck.params, p);
  EXPECT_EQ(ck.provenance, (Provenance{Provenance::Kind::kIteration, 2}));
  EXPECT_EQ(ck.stamp, stamp);

  fs::resize_file(prefix.string() + ".bin", layout.size * 8 - 8);
  EXPECT_EQ(code_of([&] { load_checkpoint(prefix); }), ErrorCode::kSchema);
  EXPECT_EQ(code_of([&] { load_checkpoint(prefix.parent_path() / "none"); }),
            ErrorCode::kMissingInput);
}

TEST(Errors, ExitStatusesAreDistinctAndNonzero) {
  std::set<int> seen;
  for (int c = 0; c <= static_cast<int>(ErrorCode::kIo); ++c) {
    const int s = exit_status(static_cast<ErrorCode>(c));
    EXPECT_NE(s, 0);
    EXPECT_TRUE(seen.insert(s).second);
    EXPECT_FALSE(error_name(static_cast<ErrorCode>(c)).empty());
  }
}

}  // namespace
}  // namespace focusrl

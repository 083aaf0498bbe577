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
#include <string>
#include <vector>

#include "focusrl/geometry.hpp"
#include "focusrl/rng.hpp"

namespace focusrl {

// A procedural grid world: objects of a few shapes and colors occupy
// rectangular groups of cells, and a structured question asks for one
// attribute of exactly one object.
struct WorldConfig {
  int grid = 8;  // cells per side
  int num_shapes = 4;
  int num_colors = 6;
  int min_objects = 2;
  int max_objects = 5;
  int max_object_width = 2;   // max object extent in cells, x axis
  int max_object_height = 2;  // same, y axis
  int min_gap = 1;           // empty cells required between objects
  int placement_attempts = 1000;
  // Relative frequency of each selector kind in make_task.
  double weight_shape = 1.0;
  double weight_color = 1.0;
  double weight_position = 1.0;

  void validate() const;

  int cells() const { return grid * grid; }
  int cell_width() const { return num_shapes + num_colors + 1; }
  int feature_dim() const { return cells() * cell_width(); }
  int vocab_size() const { return num_shapes + num_colors; }
  // kind(3) + shape + color + cell row + cell column + asked attribute(2)
  int query_dim() const { return 3 + num_shapes + num_colors + 2 * grid + 2; }
};

struct SceneObject {
  int shape = 0;
  int color = 0;
  int cell_x = 0;  // lowest cell column
  int cell_y = 0;  // lowest cell row
  int cells_w = 1;
  int cells_h = 1;
  BoundingBox bbox;

  bool occupies(int cx, int cy) const {
    return cx >= cell_x && cx < cell_x + cells_w && cy >= cell_y &&
           cy < cell_y + cells_h;
  }
  friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

struct Scene {
  std::int64_t id = 0;
  int grid = 8;
  std::vector<SceneObject> objects;

  friend bool operator==(const Scene&, const Scene&) = default;
};

enum class SelectorKind { kShape = 0, kColor = 1, kPosition = 2 };
enum class Attribute { kShape = 0, kColor = 1 };

struct Selector {
  SelectorKind kind = SelectorKind::kShape;
  // Shape index, color index or cell index (row * grid + column).
  int value = 0;

  friend bool operator==(const Selector&, const Selector&) = default;
};

struct Question {
  Selector selector;
  Attribute asked = Attribute::kColor;

  friend bool operator==(const Question&, const Question&) = default;
};

// Learner-visible question plus evaluation-only ground truth.
struct QueryInstance {
  std::int64_t scene_id = 0;
  Question question;
  int gt_answer = 0;  // answer vocabulary token
  BoundingBox gt_region;

  friend bool operator==(const QueryInstance&, const QueryInstance&) = default;
};

struct Task {
  Scene scene;
  QueryInstance query;

  friend bool operator==(const Task&, const Task&) = default;
};

using FeatureVector = std::vector<double>;

// Vocabulary: shapes first, then colors.
std::string shape_name(int shape);
std::string color_name(int color);
std::string token_name(int token, const WorldConfig& cfg);
int token_from_name(const std::string& name, const WorldConfig& cfg);
int shape_from_name(const std::string& name, const WorldConfig& cfg);
int color_from_name(const std::string& name, const WorldConfig& cfg);
int answer_token(const SceneObject& obj, Attribute asked, const WorldConfig& cfg);

BoundingBox cell_box(int cell_x, int cell_y, int cells_w, int cells_h, int grid);

// Throws kPlacementFailure when the objects cannot be placed.
Scene generate_scene(const WorldConfig& cfg, Rng& rng, std::int64_t id = 0);

// Objects matching the selector.
std::vector<int> matching_objects(const Scene& scene, const Selector& sel);

// Throws kNoUnambiguousQuery if no enabled selector kind picks out a unique
// object.
QueryInstance make_task(const Scene& scene, const WorldConfig& cfg, Rng& rng);

FeatureVector encode_features(const Scene& scene, const WorldConfig& cfg);
FeatureVector crop_features(const Scene& scene, const BoundingBox& box,
                            const WorldConfig& cfg);
std::vector<double> encode_query(const Question& question, const WorldConfig& cfg);

enum class Pool : std::int64_t { kSft = 0, kRl = 1, kEval = 2 };

// Scene ids of different pools never collide.
constexpr std::int64_t kPoolStride = 1'000'000;
std::int64_t task_id(Pool pool, std::int64_t index);

// Deterministic task for (seed, pool, index); regenerates the scene until an
// unambiguous question exists.
Task generate_task(const WorldConfig& cfg, std::uint64_t seed, Pool pool,
                   std::int64_t index);
std::vector<Task> generate_pool(const WorldConfig& cfg, std::uint64_t seed,
                                Pool pool, std::int64_t count, int workers = 1);

}  // namespace focusrl

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

#include "focusrl/synthworld.hpp"

#include <array>
#include <string>

#include "focusrl/error.hpp"
#include "focusrl/parallel.hpp"

namespace focusrl {

namespace {

constexpr std::array<const char*, 4> kShapeNames = {"circle", "square",
                                                    "triangle", "star"};
constexpr std::array<const char*, 6> kColorNames = {"red",    "green", "blue",
                                                    "yellow", "purple", "orange"};

constexpr int kMaxTaskAttempts = 1000;

}  // namespace

void WorldConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) fail(ErrorCode::kInvalidConfig, what);
  };
  require(grid >= 2, "world.grid must be >= 2");
  require(num_shapes >= 1 && num_colors >= 1, "world needs shapes and colors");
  require(min_objects >= 2, "world.min_objects must be >= 2");
  require(max_objects >= min_objects, "world.max_objects < world.min_objects");
  require(max_object_width >= 1 && max_object_width <= grid,
          "world.max_object_width out of range");
  require(max_object_height >= 1 && max_object_height <= grid,
          "world.max_object_height out of range");
  require(min_gap >= 0, "world.min_gap must be >= 0");
  require(placement_attempts > 0, "world.placement_attempts must be positive");
  require(weight_shape >= 0 && weight_color >= 0 && weight_position >= 0 &&
              weight_shape + weight_color + weight_position > 0,
          "selector weights must be non-negative with a positive sum");
}

std::string shape_name(int shape) {
  if (shape >= 0 && shape < static_cast<int>(kShapeNames.size())) {
    return kShapeNames[shape];
  }
  return "shape" + std::to_string(shape);
}

std::string color_name(int color) {
  if (color >= 0 && color < static_cast<int>(kColorNames.size())) {
    return kColorNames[color];
  }
  return "color" + std::to_string(color);
}

std::string token_name(int token, const WorldConfig& cfg) {
  if (token < 0 || token >= cfg.vocab_size()) {
    fail(ErrorCode::kInvalidToken, "answer token out of range");
  }
  return token < cfg.num_shapes ? shape_name(token)
                                : color_name(token - cfg.num_shapes);
}

int shape_from_name(const std::string& name, const WorldConfig& cfg) {
  for (int s = 0; s < cfg.num_shapes; ++s) {
    if (shape_name(s) == name) return s;
  }
  fail(ErrorCode::kSchema, "unknown shape '" + name + "'");
}

int color_from_name(const std::string& name, const WorldConfig& cfg) {
  for (int c = 0; c < cfg.num_colors; ++c) {
    if (color_name(c) == name) return c;
  }
  fail(ErrorCode::kSchema, "unknown color '" + name + "'");
}

int token_from_name(const std::string& name, const WorldConfig& cfg) {
  for (int t = 0; t < cfg.vocab_size(); ++t) {
    if (token_name(t, cfg) == name) return t;
  }
  fail(ErrorCode::kInvalidToken, "unknown answer token '" + name + "'");
}

int answer_token(const SceneObject& obj, Attribute asked, const WorldConfig& cfg) {
  return asked == Attribute::kShape ? obj.shape : cfg.num_shapes + obj.color;
}

BoundingBox cell_box(int cell_x, int cell_y, int cells_w, int cells_h, int grid) {
  const double g = grid;
  return BoundingBox::make(cell_x / g, cell_y / g, (cell_x + cells_w) / g,
                           (cell_y + cells_h) / g);
}

Scene generate_scene(const WorldConfig& cfg, Rng& rng, std::int64_t id) {
  cfg.validate();
  if (cfg.max_objects > cfg.cells()) {
    fail(ErrorCode::kPlacementFailure,
         "max_objects exceeds the number of grid cells");
  }
  Scene scene;
  scene.id = id;
  scene.grid = cfg.grid;
  const int count =
      std::uniform_int_distribution<int>(cfg.min_objects, cfg.max_objects)(rng);
  std::uniform_int_distribution<int> width(1, cfg.max_object_width);
  std::uniform_int_distribution<int> height(1, cfg.max_object_height);
  std::uniform_int_distribution<int> shape(0, cfg.num_shapes - 1);
  std::uniform_int_distribution<int> color(0, cfg.num_colors - 1);

  for (int n = 0; n < count; ++n) {
    bool placed = false;
    for (int attempt = 0; attempt < cfg.placement_attempts && !placed; ++attempt) {
      SceneObject obj;
      obj.cells_w = width(rng);
      obj.cells_h = height(rng);
      obj.cell_x = std::uniform_int_distribution<int>(0, cfg.grid - obj.cells_w)(rng);
      obj.cell_y = std::uniform_int_distribution<int>(0, cfg.grid - obj.cells_h)(rng);
      bool clash = false;
      for (const auto& o : scene.objects) {
        const int g = cfg.min_gap;
        if (obj.cell_x < o.cell_x + o.cells_w + g &&
            o.cell_x < obj.cell_x + obj.cells_w + g &&
            obj.cell_y < o.cell_y + o.cells_h + g &&
            o.cell_y < obj.cell_y + obj.cells_h + g) {
          clash = true;
          break;
        }
      }
      if (clash) continue;
      obj.shape = shape(rng);
      obj.color = color(rng);
      obj.bbox = cell_box(obj.cell_x, obj.cell_y, obj.cells_w, obj.cells_h, cfg.grid);
      scene.objects.push_back(obj);
      placed = true;
    }
    if (!placed) {
      fail(ErrorCode::kPlacementFailure,
           "could not place object " + std::to_string(n) + " of scene " +
               std::to_string(id));
    }
  }
  return scene;
}

std::vector<int> matching_objects(const Scene& scene, const Selector& sel) {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(scene.objects.size()); ++i) {
    const auto& o = scene.objects[i];
    bool match = false;
    switch (sel.kind) {
      case SelectorKind::kShape:
        match = o.shape == sel.value;
        break;
      case SelectorKind::kColor:
        match = o.color == sel.value;
        break;
      case SelectorKind::kPosition:
        match = o.occupies(sel.value % scene.grid, sel.value / scene.grid);
        break;
    }
    if (match) out.push_back(i);
  }
  return out;
}

QueryInstance make_task(const Scene& scene, const WorldConfig& cfg, Rng& rng) {
  struct Candidate {
    Selector selector;
    int object;
  };
  std::array<std::vector<Candidate>, 3> by_kind;
  for (int s = 0; s < cfg.num_shapes; ++s) {
    Selector sel{SelectorKind::kShape, s};
    auto m = matching_objects(scene, sel);
    if (m.size() == 1) by_kind[0].push_back({sel, m[0]});
  }
  for (int c = 0; c < cfg.num_colors; ++c) {
    Selector sel{SelectorKind::kColor, c};
    auto m = matching_objects(scene, sel);
    if (m.size() == 1) by_kind[1].push_back({sel, m[0]});
  }
  // Position selectors name an object by its lowest (anchor) cell.
  for (int i = 0; i < static_cast<int>(scene.objects.size()); ++i) {
    const auto& o = scene.objects[i];
    by_kind[2].push_back({{SelectorKind::kPosition, o.cell_y * scene.grid + o.cell_x}, i});
  }
  const std::array<double, 3> base = {cfg.weight_shape, cfg.weight_color,
                                      cfg.weight_position};
  std::array<double, 3> weights{};
  double total = 0.0;
  for (int k = 0; k < 3; ++k) {
    weights[k] = by_kind[k].empty() ? 0.0 : base[k];
    total += weights[k];
  }
  if (total <= 0.0) {
    fail(ErrorCode::kNoUnambiguousQuery,
         "scene " + std::to_string(scene.id) + " has no unambiguous selector");
  }
  const int kind =
      std::discrete_distribution<int>(weights.begin(), weights.end())(rng);
  const auto& pool = by_kind[kind];
  const Candidate& pick = pool[std::uniform_int_distribution<std::size_t>(
      0, pool.size() - 1)(rng)];

  QueryInstance q;
  q.scene_id = scene.id;
  q.question.selector = pick.selector;
  switch (pick.selector.kind) {
    case SelectorKind::kShape:
      q.question.asked = Attribute::kColor;
      break;
    case SelectorKind::kColor:
      q.question.asked = Attribute::kShape;
      break;
    case SelectorKind::kPosition:
      q.question.asked = std::bernoulli_distribution(0.5)(rng) ? Attribute::kColor
                                                                : Attribute::kShape;
      break;
  }
  const auto& target = scene.objects[pick.object];
  q.gt_answer = answer_token(target, q.question.asked, cfg);
  q.gt_region = target.bbox;
  return q;
}

FeatureVector encode_features(const Scene& scene, const WorldConfig& cfg) {
  FeatureVector f(static_cast<std::size_t>(cfg.feature_dim()), 0.0);
  const int width = cfg.cell_width();
  for (const auto& o : scene.objects) {
    for (int cy = o.cell_y; cy < o.cell_y + o.cells_h; ++cy) {
      for (int cx = o.cell_x; cx < o.cell_x + o.cells_w; ++cx) {
        const std::size_t base = static_cast<std::size_t>((cy * cfg.grid + cx) * width);
        f[base + o.shape] = 1.0;
        f[base + cfg.num_shapes + o.color] = 1.0;
        f[base + width - 1] = 1.0;
      }
    }
  }
  return f;
}

FeatureVector crop_features(const Scene& scene, const BoundingBox& box,
                            const WorldConfig& cfg) {
  FeatureVector f = encode_features(scene, cfg);
  const int width = cfg.cell_width();
  const double g = cfg.grid;
  for (int cy = 0; cy < cfg.grid; ++cy) {
    for (int cx = 0; cx < cfg.grid; ++cx) {
      if (box.contains_point((cx + 0.5) / g, (cy + 0.5) / g)) continue;
      const auto base = f.begin() + (cy * cfg.grid + cx) * width;
      std::fill(base, base + width, 0.0);
    }
  }
  return f;
}

std::vector<double> encode_query(const Question& question, const WorldConfig& cfg) {
  std::vector<double> q(static_cast<std::size_t>(cfg.query_dim()), 0.0);
  const auto& sel = question.selector;
  q[static_cast<std::size_t>(sel.kind)] = 1.0;
  std::size_t offset = 3;
  switch (sel.kind) {
    case SelectorKind::kShape:
      q[offset + sel.value] = 1.0;
      break;
    case SelectorKind::kColor:
      q[offset + cfg.num_shapes + sel.value] = 1.0;
      break;
    case SelectorKind::kPosition: {
      // Row and column get separate one-hot blocks.
      const std::size_t cells = offset + cfg.num_shapes + cfg.num_colors;
      q[cells + sel.value / cfg.grid] = 1.0;
      q[cells + cfg.grid + sel.value % cfg.grid] = 1.0;
      break;
    }
  }
  offset += cfg.num_shapes + cfg.num_colors + 2 * cfg.grid;
  q[offset + static_cast<std::size_t>(question.asked)] = 1.0;
  return q;
}

std::int64_t task_id(Pool pool, std::int64_t index) {
  return static_cast<std::int64_t>(pool) * kPoolStride + index;
}

Task generate_task(const WorldConfig& cfg, std::uint64_t seed, Pool pool,
                   std::int64_t index) {
  const std::int64_t id = task_id(pool, index);
  for (int attempt = 0; attempt < kMaxTaskAttempts; ++attempt) {
    Rng rng = make_rng({seed, stream(Stream::kScene),
                        static_cast<std::uint64_t>(id),
                        static_cast<std::uint64_t>(attempt)});
    try {
      Task task;
      task.scene = generate_scene(cfg, rng, id);
      task.query = make_task(task.scene, cfg, rng);
      return task;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kPlacementFailure &&
          cfg.max_objects > cfg.cells()) {
        throw;
      }
      if (e.code() != ErrorCode::kPlacementFailure &&
          e.code() != ErrorCode::kNoUnambiguousQuery) {
        throw;
      }
    }
  }
  fail(ErrorCode::kPlacementFailure,
       "no valid task for id " + std::to_string(id) + " after retries");
}

std::vector<Task> generate_pool(const WorldConfig& cfg, std::uint64_t seed,
                                Pool pool, std::int64_t count, int workers) {
  if (count >= kPoolStride) {
    fail(ErrorCode::kInvalidConfig, "pool size exceeds the id stride");
  }
  std::vector<Task> tasks(static_cast<std::size_t>(count));
  parallel_for(tasks.size(), workers, [&](std::size_t i) {
    tasks[i] = generate_task(cfg, seed, pool, static_cast<std::int64_t>(i));
  });
  return tasks;
}

}  // namespace focusrl

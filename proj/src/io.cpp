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

#include "focusrl/io.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "focusrl/error.hpp"

namespace focusrl {

namespace fs = std::filesystem;

namespace {

double round6(double v) { return std::round(v * 1e6) / 1e6; }

[[noreturn]] void schema_error(const std::string& what) {
  fail(ErrorCode::kSchema, what);
}

template <typename T>
T field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    schema_error(std::string("missing field '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    schema_error(std::string("field '") + key + "' has the wrong type");
  }
}

std::string selector_kind_name(SelectorKind k) {
  switch (k) {
    case SelectorKind::kShape:
      return "shape";
    case SelectorKind::kColor:
      return "color";
    case SelectorKind::kPosition:
      return "position";
  }
  return "shape";
}

std::string attribute_name(Attribute a) {
  return a == Attribute::kShape ? "shape" : "color";
}

}  // namespace

Json box_to_json(const BoundingBox& box) {
  return Json::array({round6(box.x_lo), round6(box.y_lo), round6(box.x_hi),
                      round6(box.y_hi)});
}

BoundingBox box_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 4) schema_error("box must be a 4-element array");
  try {
    return BoundingBox::make(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                             j[3].get<double>());
  } catch (const nlohmann::json::exception&) {
    schema_error("box coordinates must be numbers");
  } catch (const Error& e) {
    schema_error(e.what());
  }
}

Json task_to_json(const Task& task, const WorldConfig& world) {
  Json objects = Json::array();
  for (const auto& o : task.scene.objects) {
    objects.push_back({{"shape", shape_name(o.shape)},
                       {"color", color_name(o.color)},
                       {"bbox", box_to_json(o.bbox)}});
  }
  const auto& sel = task.query.question.selector;
  Json selector = {{"kind", selector_kind_name(sel.kind)}};
  switch (sel.kind) {
    case SelectorKind::kShape:
      selector["value"] = shape_name(sel.value);
      break;
    case SelectorKind::kColor:
      selector["value"] = color_name(sel.value);
      break;
    case SelectorKind::kPosition:
      selector["cell"] = {sel.value % world.grid, sel.value / world.grid};
      break;
  }
  return {{"id", task.scene.id},
          {"objects", objects},
          {"question",
           {{"selector", selector}, {"attribute", attribute_name(task.query.question.asked)}}},
          {"gt_answer", token_name(task.query.gt_answer, world)},
          {"gt_region", box_to_json(task.query.gt_region)}};
}

Task task_from_json(const Json& j, const WorldConfig& world) {
  Task t;
  t.scene.id = field<std::int64_t>(j, "id");
  t.scene.grid = world.grid;
  const Json objects = field<Json>(j, "objects");
  if (!objects.is_array()) schema_error("objects must be an array");
  const double g = world.grid;
  for (const auto& oj : objects) {
    SceneObject o;
    o.shape = shape_from_name(field<std::string>(oj, "shape"), world);
    o.color = color_from_name(field<std::string>(oj, "color"), world);
    const BoundingBox b = box_from_json(field<Json>(oj, "bbox"));
    o.cell_x = static_cast<int>(std::lround(b.x_lo * g));
    o.cell_y = static_cast<int>(std::lround(b.y_lo * g));
    o.cells_w = static_cast<int>(std::lround(b.x_hi * g)) - o.cell_x;
    o.cells_h = static_cast<int>(std::lround(b.y_hi * g)) - o.cell_y;
    if (o.cells_w <= 0 || o.cells_h <= 0) schema_error("object box is not cell aligned");
    o.bbox = cell_box(o.cell_x, o.cell_y, o.cells_w, o.cells_h, world.grid);
    t.scene.objects.push_back(o);
  }
  const Json q = field<Json>(j, "question");
  const Json sel = field<Json>(q, "selector");
  const std::string kind = field<std::string>(sel, "kind");
  auto& s = t.query.question.selector;
  if (kind == "shape") {
    s = {SelectorKind::kShape, shape_from_name(field<std::string>(sel, "value"), world)};
  } else if (kind == "color") {
    s = {SelectorKind::kColor, color_from_name(field<std::string>(sel, "value"), world)};
  } else if (kind == "position") {
    const auto cell = field<std::vector<int>>(sel, "cell");
    if (cell.size() != 2) schema_error("position selector needs [column, row]");
    s = {SelectorKind::kPosition, cell[1] * world.grid + cell[0]};
  } else {
    schema_error("unknown selector kind '" + kind + "'");
  }
  const std::string attr = field<std::string>(q, "attribute");
  if (attr != "shape" && attr != "color") schema_error("unknown attribute '" + attr + "'");
  t.query.question.asked = attr == "shape" ? Attribute::kShape : Attribute::kColor;
  t.query.scene_id = t.scene.id;
  t.query.gt_answer = token_from_name(field<std::string>(j, "gt_answer"), world);
  const BoundingBox gt = box_from_json(field<Json>(j, "gt_region"));
  const auto match = matching_objects(t.scene, s);
  if (match.size() != 1) schema_error("task selector does not pick exactly one object");
  t.query.gt_region = t.scene.objects[match[0]].bbox;
  if (std::abs(gt.x_lo - t.query.gt_region.x_lo) > 1e-6 ||
      std::abs(gt.x_hi - t.query.gt_region.x_hi) > 1e-6 ||
      std::abs(gt.y_lo - t.query.gt_region.y_lo) > 1e-6 ||
      std::abs(gt.y_hi - t.query.gt_region.y_hi) > 1e-6) {
    schema_error("gt_region does not match the selected object");
  }
  return t;
}

Json path_to_json(const CandidatePath& p, const WorldConfig& world) {
  return {{"bbox_tokens", p.bbox_tokens},
          {"box", box_to_json(p.box)},
          {"response", token_name(p.response, world)},
          {"s_b", p.s_b},
          {"s_r", p.s_r},
          {"diversity_replaced", p.diversity_replaced}};
}

CandidatePath path_from_json(const Json& j, std::int64_t task_id,
                             const WorldConfig& world, int bins) {
  CandidatePath p;
  p.task_id = task_id;
  const auto tokens = field<std::vector<int>>(j, "bbox_tokens");
  if (tokens.size() != 4) schema_error("bbox_tokens must hold 4 tokens");
  std::copy(tokens.begin(), tokens.end(), p.bbox_tokens.begin());
  p.response = token_from_name(field<std::string>(j, "response"), world);
  p.s_b = field<int>(j, "s_b");
  p.s_r = field<int>(j, "s_r");
  if (p.s_b < 0 || p.s_b > kMaxScore || p.s_r < 0 || p.s_r > kMaxScore) {
    schema_error("scores must lie in [0, 10]");
  }
  p.diversity_replaced = j.is_object() && j.contains("diversity_replaced")
                             ? field<bool>(j, "diversity_replaced")
                             : false;
  const BoundingBox stored = box_from_json(field<Json>(j, "box"));
  if (p.diversity_replaced) {
    p.box = stored;
  } else {
    p.box = box_from_tokens(p.bbox_tokens, bins);
    if (std::abs(p.box.x_lo - stored.x_lo) > 1e-6 || std::abs(p.box.y_lo - stored.y_lo) > 1e-6 ||
        std::abs(p.box.x_hi - stored.x_hi) > 1e-6 || std::abs(p.box.y_hi - stored.y_hi) > 1e-6) {
      schema_error("box does not match its bbox_tokens");
    }
  }
  return p;
}

Json pair_to_json(const PreferencePair& pair, const WorldConfig& world) {
  return {{"task_id", pair.task_id},
          {"win", path_to_json(pair.win, world)},
          {"lose", path_to_json(pair.lose, world)}};
}

PreferencePair pair_from_json(const Json& j, const WorldConfig& world, int bins) {
  PreferencePair p;
  p.task_id = field<std::int64_t>(j, "task_id");
  p.win = path_from_json(field<Json>(j, "win"), p.task_id, world, bins);
  p.lose = path_from_json(field<Json>(j, "lose"), p.task_id, world, bins);
  return p;
}

Json quality_to_json(const DataQuality& q) {
  Json j = {{"count", q.count},
            {"n_wp_lp", q.n_wp_lp},
            {"n_wp_ln", q.n_wp_ln},
            {"n_wn_lp", q.n_wn_lp},
            {"n_wn_ln", q.n_wn_ln},
            {"defined", q.defined()}};
  auto frac = [&](double v) -> Json {
    if (!q.defined()) return nullptr;
    return std::round(v * 1e4) / 1e4;
  };
  j["wp_lp"] = frac(q.wp_lp());
  j["wp_ln"] = frac(q.wp_ln());
  j["wn_lp"] = frac(q.wn_lp());
  j["wn_ln"] = frac(q.wn_ln());
  return j;
}

Json stats_to_json(const GenerationStats& s) {
  return {{"tasks", s.tasks},
          {"retained", s.retained},
          {"dropped",
           {{"too_easy", s.too_easy},
            {"too_hard", s.too_hard},
            {"non_extremal", s.non_extremal},
            {"infeasible", s.infeasible}}},
          {"candidates", s.candidates},
          {"replaced_rounds", s.replaced_rounds},
          {"infeasible_rounds", s.infeasible_rounds},
          {"quality", quality_to_json(s.quality)}};
}

Json eval_to_json(const EvalResult& r) {
  return {{"count", r.count},
          {"detection_acc", r.detection_acc},
          {"answer_acc", r.answer_acc},
          {"bbox_format_ratio", r.format_ratio}};
}

void write_json(const fs::path& path, const Json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

Json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kMissingInput, "cannot read " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kSchema, path.string() + ": " + e.what());
  }
}

void write_jsonl(const fs::path& path, const std::vector<Json>& records,
                 const RunStamp& stamp) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  for (Json r : records) {
    r["config_hash"] = stamp.config_hash;
    r["seed"] = stamp.seed;
    out << r.dump() << "\n";
  }
}

std::vector<Json> read_jsonl(const fs::path& path, const RunStamp* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kMissingInput, "cannot read " + path.string());
  std::vector<Json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kSchema, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (expected != nullptr) {
      const RunStamp got{field<std::string>(j, "config_hash"),
                         field<std::uint64_t>(j, "seed")};
      if (!(got == *expected)) {
        fail(ErrorCode::kHashMismatch, path.string() + ":" + std::to_string(lineno) +
                                           ": record from run " + got.run_id() +
                                           ", expected " + expected->run_id());
      }
    }
    out.push_back(std::move(j));
  }
  return out;
}

void write_tasks(const fs::path& path, const std::vector<Task>& tasks,
                 const WorldConfig& world, const RunStamp& stamp) {
  std::vector<Json> records;
  records.reserve(tasks.size());
  for (const auto& t : tasks) records.push_back(task_to_json(t, world));
  write_jsonl(path, records, stamp);
}

std::vector<Task> read_tasks(const fs::path& path, const WorldConfig& world,
                             const RunStamp* expected) {
  std::vector<Task> tasks;
  for (const auto& j : read_jsonl(path, expected)) tasks.push_back(task_from_json(j, world));
  return tasks;
}

void write_pairs(const fs::path& path, const std::vector<PreferencePair>& pairs,
                 const WorldConfig& world, const RunStamp& stamp) {
  std::vector<Json> records;
  records.reserve(pairs.size());
  for (const auto& p : pairs) records.push_back(pair_to_json(p, world));
  write_jsonl(path, records, stamp);
}

std::vector<PreferencePair> read_pairs(const fs::path& path, const WorldConfig& world,
                                       int bins, const RunStamp* expected) {
  std::vector<PreferencePair> pairs;
  for (const auto& j : read_jsonl(path, expected)) {
    pairs.push_back(pair_from_json(j, world, bins));
  }
  return pairs;
}

namespace {

Json dims_to_json(const PolicyDims& d) {
  return {{"feature_dim", d.feature_dim},
          {"query_dim", d.query_dim},
          {"bins", d.bins},
          {"vocab", d.vocab},
          {"hidden", d.hidden}};
}

Json slot_json(const TensorSlot& s) {
  return {{"offset", s.offset}, {"rows", s.rows}, {"cols", s.cols}};
}

Json head_json(const HeadSlots& h) {
  return {{"w1", slot_json(h.w1)}, {"b1", slot_json(h.b1)},
          {"w2", slot_json(h.w2)}, {"b2", slot_json(h.b2)}};
}

fs::path with_suffix(const fs::path& prefix, const char* suffix) {
  return fs::path(prefix.string() + suffix);
}

}  // namespace

void save_checkpoint(const fs::path& prefix, const PolicyParams& params,
                     const Provenance& provenance, const RunStamp& stamp) {
  const PolicyLayout& layout = params.layout();
  Json meta = {{"format", "focusrl-params-v1"},
               {"dtype", "float64-le"},
               {"count", params.size()},
               {"dims", dims_to_json(layout.dims)},
               {"layout", {{"bbox", head_json(layout.bbox)},
                           {"response", head_json(layout.response)}}},
               {"provenance", provenance.to_string()},
               {"config_hash", stamp.config_hash},
               {"seed", stamp.seed}};
  write_json(with_suffix(prefix, ".meta.json"), meta);

  const fs::path bin = with_suffix(prefix, ".bin");
  std::ofstream out(bin, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + bin.string());
  std::vector<char> bytes(params.size() * 8);
  std::size_t k = 0;
  for (double v : params.values()) {
    auto u = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      bytes[k++] = static_cast<char>(u & 0xffU);
      u >>= 8;
    }
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const fs::path& prefix) {
  const Json meta = read_json(with_suffix(prefix, ".meta.json"));
  if (field<std::string>(meta, "format") != "focusrl-params-v1") {
    schema_error("unsupported checkpoint format");
  }
  const Json dj = field<Json>(meta, "dims");
  PolicyDims dims;
  dims.feature_dim = field<int>(dj, "feature_dim");
  dims.query_dim = field<int>(dj, "query_dim");
  dims.bins = field<int>(dj, "bins");
  dims.vocab = field<int>(dj, "vocab");
  dims.hidden = field<int>(dj, "hidden");
  const PolicyLayout layout = PolicyLayout::for_dims(dims);
  const auto count = field<std::size_t>(meta, "count");
  if (count != layout.size) schema_error("checkpoint count does not match its layout");

  const fs::path bin = with_suffix(prefix, ".bin");
  std::ifstream in(bin, std::ios::binary);
  if (!in) fail(ErrorCode::kMissingInput, "cannot read " + bin.string());
  std::vector<unsigned char> bytes(count * 8);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size() || in.peek() != EOF) {
    schema_error("checkpoint binary has the wrong size");
  }
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t u = 0;
    for (int b = 7; b >= 0; --b) u = (u << 8) | bytes[i * 8 + static_cast<std::size_t>(b)];
    values[i] = std::bit_cast<double>(u);
  }
  Checkpoint ck{PolicyParams(layout, std::move(values)),
                Provenance::parse(field<std::string>(meta, "provenance")),
                RunStamp{field<std::string>(meta, "config_hash"),
                         field<std::uint64_t>(meta, "seed")}};
  return ck;
}

}  // namespace focusrl

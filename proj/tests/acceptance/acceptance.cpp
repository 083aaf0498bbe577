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

// Acceptance run: prints one PASS/FAIL line per criterion. Criteria 1-6 run
// in process against the oracles; 7-10 drive the CLI on the reference config.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <CLI11.hpp>

#include "focusrl/config.hpp"
#include "focusrl/dpo.hpp"
#include "focusrl/error.hpp"
#include "focusrl/io.hpp"
#include "focusrl/trainer.hpp"
#include "oracles.hpp"

using namespace focusrl;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

BoundingBox random_box(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (;;) {
    const double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
    const BoundingBox box{std::min(a, b), std::min(c, d), std::max(a, b), std::max(c, d)};
    if (box.valid() && box.area() > 1e-4) return box;
  }
}

// Random pairs over the config's world with distinct win and lose tokens.
std::vector<TrainingPair> random_pairs(const TrainConfig& cfg, std::uint64_t seed, int n) {
  Rng rng(seed);
  std::uniform_int_distribution<int> tok(0, cfg.bins - 1);
  std::uniform_int_distribution<int> ans(0, cfg.world.vocab_size() - 1);
  std::vector<TrainingPair> out;
  for (int i = 0; i < n; ++i) {
    const Task t = generate_task(cfg.world, seed, Pool::kRl, i);
    PreferencePair p;
    p.task_id = t.scene.id;
    do {
      for (CandidatePath* c : {&p.win, &p.lose}) {
        c->task_id = t.scene.id;
        c->bbox_tokens = {tok(rng), tok(rng), tok(rng), tok(rng)};
        c->box = box_from_tokens(c->bbox_tokens, cfg.bins);
        c->response = ans(rng);
      }
    } while (p.win.bbox_tokens == p.lose.bbox_tokens || p.win.response == p.lose.response);
    out.push_back(make_training_pair(p, t, cfg.world));
  }
  return out;
}

PolicyParams random_params(const TrainConfig& cfg, std::uint64_t seed, double scale) {
  Rng rng(seed);
  return PolicyParams::random(cfg.policy_layout(), scale, rng);
}

Outcome dpo_identity(const TrainConfig& cfg) {
  const PolicyParams p = random_params(cfg, 101, 0.3);
  const auto batch = random_pairs(cfg, 102, 16);
  const double ln2 = std::log(2.0);
  double worst = 0.0;
  for (double beta : {0.05, 0.1, 1.0}) {
    const auto ref = snapshot(p, {Provenance::Kind::kPostStage1, 0});
    for (const auto& tp : batch) {
      for (Head h : {Head::kBbox, Head::kResponse}) {
        worst = std::max(worst, std::abs(dpo_pair_loss(pair_log_ratio(p, ref, tp, h), beta) - ln2));
      }
    }
    worst = std::max(worst, std::abs(stage1_batch(p, ref, batch, beta).loss - ln2));
    DpoHyper hyper = cfg.dpo;
    hyper.beta2 = beta;
    const double s2 = stage2_batch(p, ref, batch, hyper).loss;
    worst = std::max(worst, std::abs(s2 - (hyper.lambda_b + hyper.lambda_r) * ln2));
    std::vector<ResponsePair> rp;
    for (const auto& tp : batch) {
      rp.push_back({tp.pair.task_id, tp.query, tp.win_crop, tp.pair.win.response,
                    tp.pair.lose.response});
    }
    worst = std::max(worst, std::abs(response_batch(p, ref, rp, beta).loss - ln2));
  }
  return {worst <= 1e-9, "max |loss - ln 2| = " + sci(worst)};
}

// Max relative error against central differences on 64 coordinates with a
// nonzero analytic gradient.
double fd_error(const PolicyParams& at, const std::vector<double>& grad,
                const std::function<double(const PolicyParams&)>& loss, std::uint64_t seed) {
  std::vector<std::size_t> touched;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (grad[i] != 0.0) touched.push_back(i);
  }
  std::vector<double> x(at.values().begin(), at.values().end());
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, touched.size() - 1);
  double worst = 0.0;
  for (int k = 0; k < 64; ++k) {
    const std::size_t i = touched[pick(rng)];
    const double fd = oracle::central_difference(
        x, i, 1e-4, [&] { return loss(PolicyParams(at.layout(), x)); });
    worst = std::max(worst, oracle::relative_error(grad[i], fd));
  }
  return worst;
}

Outcome gradient_fidelity(const TrainConfig& cfg) {
  const PolicyParams p = random_params(cfg, 201, 0.3);
  const PolicyParams r = random_params(cfg, 202, 0.3);
  const auto batch = random_pairs(cfg, 203, 20);
  const auto ref1 = snapshot(r, {Provenance::Kind::kPostSft, 0});
  const auto ref2 = snapshot(r, {Provenance::Kind::kPostStage1, 0});
  const double e1 = fd_error(
      p, stage1_batch(p, ref1, batch, cfg.dpo.beta1).grad,
      [&](const PolicyParams& q) { return stage1_batch(q, ref1, batch, cfg.dpo.beta1).loss; },
      204);
  const double e2 = fd_error(
      p, stage2_batch(p, ref2, batch, cfg.dpo).grad,
      [&](const PolicyParams& q) { return stage2_batch(q, ref2, batch, cfg.dpo).loss; }, 205);
  return {std::max(e1, e2) < 1e-3,
          "max relative error stage1 " + sci(e1) + ", stage2 " + sci(e2)};
}

Outcome geometry_oracle(const TrainConfig& cfg) {
  Rng rng(301);
  std::uniform_int_distribution<int> tok(0, cfg.bins - 1);
  int mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const BoundingBox a = box_from_tokens({tok(rng), tok(rng), tok(rng), tok(rng)}, cfg.bins);
    const BoundingBox b = box_from_tokens({tok(rng), tok(rng), tok(rng), tok(rng)}, cfg.bins);
    mismatches += iou(a, b) != oracle::raster_iou(a, b, 512);
  }
  // Center sampling misses up to a pixel on thin overlaps, so the random
  // boxes are judged against the coverage raster; both errors are shown.
  double worst = 0.0, worst_centers = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const BoundingBox a = random_box(rng);
    const BoundingBox b = random_box(rng);
    worst = std::max(worst, std::abs(iou(a, b) - oracle::coverage_iou(a, b, 512)));
    worst_centers = std::max(worst_centers, std::abs(iou(a, b) - oracle::raster_iou(a, b, 512)));
  }
  return {mismatches == 0 && worst <= 5e-3,
          std::to_string(mismatches) + " aligned mismatches, random max err " + sci(worst) +
              " (center-sampled " + fmt(worst_centers, 4) + ")"};
}

Outcome diversity_contract(const TrainConfig& cfg) {
  Rng rng(401);
  const double t = cfg.datagen.reject_threshold;
  std::normal_distribution<double> jitter(0.0, 0.02);
  int invocations = 0, replaced = 0, infeasible = 0, violations = 0;
  while (invocations < 10000) {
    const BoundingBox b1 = random_box(rng);
    const BoundingBox b2{std::clamp(b1.x_lo + jitter(rng), 0.0, 1.0),
                         std::clamp(b1.y_lo + jitter(rng), 0.0, 1.0),
                         std::clamp(b1.x_hi + jitter(rng), 0.0, 1.0),
                         std::clamp(b1.y_hi + jitter(rng), 0.0, 1.0)};
    if (!b2.valid() || iou(b1, b2) < t) continue;
    ++invocations;
    const double s = cfg.datagen.area_tolerance_fraction * b1.area();
    const DiversityParams params{t, s, cfg.datagen.max_rejection_attempts, 0.0};
    // Any box disjoint from b1 lies in one full-height or full-width strip.
    const double widest = std::max({b1.x_lo, 1.0 - b1.x_hi, b1.y_lo, 1.0 - b1.y_hi});
    const bool feasible = widest >= b1.area() - s;
    try {
      const auto out = diversity_adjust(b1, b2, params, rng);
      const bool ok = out.replaced && out.box.valid() && intersection_area(out.box, b1) == 0.0 &&
                      std::abs(out.box.area() - b1.area()) <= s + 1e-12;
      violations += !ok;
      ++replaced;
    } catch (const Error& e) {
      ++infeasible;
      violations += e.code() != ErrorCode::kNoFeasibleBox || feasible;
    }
  }
  return {violations == 0, std::to_string(replaced) + " replaced, " + std::to_string(infeasible) +
                               " infeasible, " + std::to_string(violations) + " violations"};
}

Outcome filter_oracle(const TrainConfig& cfg) {
  Rng rng(501);
  std::uniform_int_distribution<int> size(0, 12), score(0, 10);
  const FilterThresholds& th = cfg.datagen.thresholds;
  int disagreements = 0, discards = 0, ties = 0, selected = 0;
  for (int pool = 0; pool < 1000; ++pool) {
    std::vector<CandidatePath> paths(static_cast<std::size_t>(size(rng)));
    for (std::size_t i = 0; i < paths.size(); ++i) {
      paths[i].response = static_cast<int>(i);
      paths[i].s_b = score(rng);
      paths[i].s_r = score(rng) < 5 ? 0 : score(rng) < 5 ? 10 : score(rng);
    }
    const auto f = filter_candidates(paths, th);
    const auto o = oracle::filter(paths, th);
    auto ids = [](const std::vector<CandidatePath>& v) {
      std::vector<std::size_t> r;
      for (const auto& c : v) r.push_back(static_cast<std::size_t>(c.response));
      return r;
    };
    disagreements += ids(f.win) != o.win || ids(f.lose) != o.lose;
    const auto got = select_pair(f.win, f.lose);
    const auto want = oracle::select(paths, th);
    if (got.has_value() != want.has_value()) {
      ++disagreements;
      continue;
    }
    if (got) {
      ++selected;
      disagreements += static_cast<std::size_t>(got->win.response) != want->first ||
                       static_cast<std::size_t>(got->lose.response) != want->second;
    } else if (!o.win.empty() && !o.lose.empty()) {
      ++discards;
    }
    // Pools where the chosen extremum is repeated exercise the tie rule.
    if (want) {
      const auto& w = paths[want->first];
      ties += std::count_if(o.win.begin(), o.win.end(), [&](std::size_t i) {
                return paths[i].s_b == w.s_b && paths[i].s_r == w.s_r;
              }) > 1;
    }
  }
  return {disagreements == 0 && discards > 0 && ties > 0,
          std::to_string(disagreements) + " disagreements (" + std::to_string(selected) +
              " selected, " + std::to_string(discards) + " discarded, " + std::to_string(ties) +
              " ties)"};
}

double margin(const PolicyParams& p, std::span<const TrainingPair> batch) {
  double m = 0.0;
  for (const auto& tp : batch) {
    m += logprob(p, Head::kBbox, tp.box_input(), tp.pair.win.bbox_tokens) -
         logprob(p, Head::kBbox, tp.box_input(), tp.pair.lose.bbox_tokens);
  }
  return m / static_cast<double>(batch.size());
}

Outcome descent(const TrainConfig& base) {
  TrainConfig cfg = base;
  cfg.stage1 = {1, 1e-2, 8};
  int up = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const PolicyParams p = random_params(cfg, 600 + trial, 0.3);
    const auto batch = random_pairs(cfg, 700 + trial, 8);
    const auto ref = snapshot(p, {Provenance::Kind::kPostSft, 0});
    const PolicyParams q = train_stage1(p, ref, batch, cfg).params;
    up += margin(q, batch) > margin(p, batch);
  }
  return {up == 100, std::to_string(up) + "/100 trials increased the margin"};
}

int run_cli(const std::string& cli, const std::string& args) {
  const std::string cmd = "\"" + cli + "\" " + args + " --quiet > /dev/null";
  const int rc = std::system(cmd.c_str());
  return rc == 0 ? 0 : (WIFEXITED(rc) ? WEXITSTATUS(rc) : 1);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

double stage2_or_sft(const Json& report, int iteration, const char* metric) {
  for (const auto& ph : report.at("phases")) {
    const std::string name = ph.at("phase");
    if ((iteration == 0 && name == "sft") ||
        (iteration > 0 && name == "stage2" && ph.at("iteration") == iteration)) {
      return ph.at("eval").at(metric);
    }
  }
  throw std::runtime_error("report lacks the eval for iteration " + std::to_string(iteration));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::string cli, config_path, work;
  std::vector<int> known;
  app.add_option("--cli", cli)->required();
  app.add_option("--config", config_path)->required();
  app.add_option("--work", work)->required();
  app.add_option("--known-deviation", known,
                 "criteria whose FAIL is a documented deviation and does not fail the run");
  CLI11_PARSE(app, argc, argv);

  const TrainConfig cfg = load_config(config_path);
  // ctest hides the output of passing tests; keep a copy of the verdicts.
  const fs::path results = fs::path(work).parent_path() / "acceptance_results.txt";
  std::ofstream results_file(results);
  int unexpected = 0;
  auto report_line = [&](int id, const std::string& name, const Outcome& o, double secs,
                         double limit) {
    const bool in_time = limit <= 0.0 || secs < limit;
    const bool pass = o.pass && in_time;
    std::string line = std::string(pass ? "PASS" : "FAIL") + "  " + std::to_string(id) + ". " +
                       name + ": " + o.detail + " [" + fmt(secs, 2) + " s";
    if (limit > 0.0) line += " < " + fmt(limit, 0) + " s";
    line += "]";
    const bool excused = std::find(known.begin(), known.end(), id) != known.end();
    if (!pass && excused) line += "  (known deviation)";
    std::printf("%s\n", line.c_str());
    results_file << line << "\n" << std::flush;
    std::fflush(stdout);
    unexpected += !pass && !excused;
  };
  auto timed = [&](int id, const std::string& name, double limit, auto&& fn) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    report_line(id, name, o, seconds_since(t0), limit);
  };

  timed(1, "DPO identity", 1.0, [&] { return dpo_identity(cfg); });
  timed(2, "gradient fidelity", 30.0, [&] { return gradient_fidelity(cfg); });
  timed(3, "geometry oracle", 10.0, [&] { return geometry_oracle(cfg); });
  timed(4, "diversity contract", 0.0, [&] { return diversity_contract(cfg); });
  timed(5, "filter/selection oracle", 0.0, [&] { return filter_oracle(cfg); });
  timed(6, "descent property", 0.0, [&] { return descent(cfg); });

  const fs::path dir_a = fs::path(work) / "a";
  const fs::path dir_b = fs::path(work) / "b";
  fs::remove_all(work);
  fs::create_directories(work);
  const std::string conf = "--config \"" + config_path + "\" --workers 1";

  const auto t_run = Clock::now();
  const int rc_a = run_cli(cli, "iterate " + conf + " --out \"" + dir_a.string() + "\"");
  const double run_secs = seconds_since(t_run);
  Json report;
  if (rc_a == 0) report = read_json(dir_a / "report.json");

  timed(7, "end-to-end desk run", 0.0, [&]() -> Outcome {
    if (rc_a != 0) return {false, "iterate exited " + std::to_string(rc_a)};
    const int k = cfg.iterations;
    const double fmt_sft = stage2_or_sft(report, 0, "bbox_format_ratio");
    const double det_gain = stage2_or_sft(report, k, "detection_acc") -
                            stage2_or_sft(report, 0, "detection_acc");
    const double ans_gain =
        stage2_or_sft(report, k, "answer_acc") - stage2_or_sft(report, 0, "answer_acc");
    double worst_drop = 0.0;
    for (int i = 1; i <= k; ++i) {
      for (const char* m : {"detection_acc", "answer_acc"}) {
        worst_drop = std::max(worst_drop, stage2_or_sft(report, i - 1, m) - stage2_or_sft(report, i, m));
      }
    }
    const bool a = fmt_sft >= 0.99;
    const bool b = det_gain >= 0.05 && ans_gain >= 0.05;
    const bool c = worst_drop <= 0.01;
    const bool fast = run_secs < 600.0;
    return {a && b && c && fast,
            std::string("(a) format ") + fmt(fmt_sft) + (a ? " ok" : " FAIL") +
                "; (b) detection " + fmt(100 * det_gain, 1) + " pt, answer " +
                fmt(100 * ans_gain, 1) + " pt" + (b ? " ok" : " FAIL") +
                "; (c) worst drop " + fmt(100 * worst_drop, 1) + " pt" + (c ? " ok" : " FAIL") +
                "; iterate " + fmt(run_secs, 1) + " s" + (fast ? " < 600 s" : " FAIL")};
  });

  timed(8, "data-quality trend", 0.0, [&]() -> Outcome {
    if (rc_a != 0) return {false, "iterate exited " + std::to_string(rc_a)};
    std::string trend;
    bool ok = true;
    double prev_wp_ln = -1.0;
    std::int64_t prev_retained = -1;
    for (const auto& d : report.at("datagen")) {
      const double wp_ln = d.at("stats").at("quality").at("wp_ln");
      const std::int64_t retained = d.at("stats").at("retained");
      ok = ok && wp_ln >= prev_wp_ln - 0.01 && retained >= prev_retained;
      prev_wp_ln = wp_ln;
      prev_retained = retained;
      trend += (trend.empty() ? "" : " -> ") + std::to_string(retained) + " @ " + fmt(wp_ln, 3);
    }
    return {ok, "retained @ WP-LN: " + trend};
  });

  timed(9, "determinism", 0.0, [&]() -> Outcome {
    if (rc_a != 0) return {false, "iterate exited " + std::to_string(rc_a)};
    const int rc_b = run_cli(cli, "iterate " + conf + " --out \"" + dir_b.string() + "\"");
    if (rc_b != 0) return {false, "second iterate exited " + std::to_string(rc_b)};
    std::set<fs::path> files;
    for (const fs::path& root : {dir_a, dir_b}) {
      for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) files.insert(fs::relative(e.path(), root));
      }
    }
    int differing = 0;
    for (const auto& f : files) {
      differing += !fs::exists(dir_a / f) || !fs::exists(dir_b / f) ||
                   slurp(dir_a / f) != slurp(dir_b / f);
    }
    return {differing == 0 && !files.empty(),
            std::to_string(files.size()) + " files compared, " + std::to_string(differing) +
                " differ"};
  });

  timed(10, "ablation ordering", 0.0, [&]() -> Outcome {
    if (rc_a != 0) return {false, "iterate exited " + std::to_string(rc_a)};
    const int rc = run_cli(cli, "baseline-dpo " + conf + " --out \"" + dir_a.string() + "\"");
    if (rc != 0) return {false, "baseline-dpo exited " + std::to_string(rc)};
    const double base = read_json(dir_a / "baseline.json").at("eval").at("answer_acc");
    const double full = stage2_or_sft(report, cfg.iterations, "answer_acc");
    return {full >= base, "full " + fmt(full) + " vs response-only " + fmt(base)};
  });

  return unexpected == 0 ? 0 : 1;
}

/*
 * Copyright 2026 The semisup Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// semisup: command-line front end for the teacher/student pipeline.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI/CLI.hpp>
#include <nlohmann/json.hpp>

#include "semisup/semisup.hpp"

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
using namespace semisup;

/// Everything a subcommand writes, so a failed run can remove it again.
class Outputs {
 public:
  fs::path file(const fs::path& path) {
    files_.push_back(path);
    return path;
  }

  void dir(const fs::path& path) {
    if (fs::exists(path)) {
      if (!fs::is_directory(path)) throw ConfigError("--out " + path.string() + " is not a directory");
      return;
    }
    fs::create_directories(path);
    dirs_.push_back(path);
  }

  void rollback() noexcept {
    std::error_code ec;
    for (auto it = files_.rbegin(); it != files_.rend(); ++it) fs::remove(*it, ec);
    for (auto it = dirs_.rbegin(); it != dirs_.rend(); ++it) {
      if (fs::is_empty(*it, ec)) fs::remove(*it, ec);
    }
  }

 private:
  std::vector<fs::path> files_;
  std::vector<fs::path> dirs_;
};

void write_text(Outputs& outputs, const fs::path& path, const std::string& text) {
  std::ofstream out(outputs.file(path), std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

void write_json(Outputs& outputs, const fs::path& path, const ojson& j) {
  write_text(outputs, path, j.dump(2) + "\n");
}

void write_metrics(Outputs& outputs, const fs::path& path, const std::vector<EpochMetrics>& m) {
  std::string text;
  for (const auto& e : m) text += to_json(e).dump() + "\n";
  write_text(outputs, path, text);
}

void write_manifest_file(Outputs& outputs, const fs::path& path, const ConstructedDataset& data) {
  write_manifest(to_manifest(data), outputs.file(path));
}

std::size_t default_threads() {
  if (const char* env = std::getenv("SEMISUP_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("SEMISUP_THREADS=\"") + env + "\" is not a positive integer");
  }
  return 1;
}

json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": malformed JSON: " + e.what());
  }
}

/// One training section of a validated run config, or an empty section.
json config_section(const std::optional<fs::path>& config, const char* name) {
  if (!config) return json::object();
  const json raw = load_json(*config);
  run_config_from_json(raw, config->parent_path());
  return raw.contains(name) ? raw.at(name) : json::object();
}

struct TrainFlags {
  std::optional<std::uint64_t> batch_size, total_images, warmup_steps, num_reductions;
  std::optional<double> base_lr, peak_lr, reduction_factor, weight_decay;
  bool no_shuffle = false;

  void add(CLI::App* app) {
    app->add_option("--batch-size", batch_size, "Minibatch size");
    app->add_option("--images", total_images, "Training budget in images processed");
    app->add_option("--base-lr", base_lr, "Learning rate at step 0");
    app->add_option("--peak-lr", peak_lr, "Learning rate after warm-up");
    app->add_option("--warmup-steps", warmup_steps, "Warm-up length in steps");
    app->add_option("--num-reductions", num_reductions, "Number of equally spaced lr reductions");
    app->add_option("--reduction-factor", reduction_factor, "Factor applied at each reduction");
    app->add_option("--weight-decay", weight_decay, "L2 weight decay");
    app->add_flag("--no-shuffle", no_shuffle, "Keep dataset order instead of shuffling");
  }

  void apply(json& s) const {
    if (batch_size) s["batch_size"] = *batch_size;
    if (total_images) s["total_images"] = *total_images;
    if (base_lr) s["base_lr"] = *base_lr;
    if (peak_lr) s["peak_lr"] = *peak_lr;
    if (warmup_steps) s["warmup_steps"] = *warmup_steps;
    if (num_reductions) s["num_reductions"] = *num_reductions;
    if (reduction_factor) s["reduction_factor"] = *reduction_factor;
    if (weight_decay) s["weight_decay"] = *weight_decay;
    if (no_shuffle) s["shuffle"] = false;
  }
};

/// Flags shared by `run` and `study`; they override the config file.
struct RunFlags {
  fs::path config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads, k, p, dedup_r, rounds;
  std::optional<std::string> variant, mode, out;

  void add(CLI::App* app) {
    app->add_option("--config", config, "Run configuration (JSON)")->required();
    app->add_option("--seed", seed, "Pipeline seed");
    app->add_option("--threads", threads, "Scoring threads");
    app->add_option("--k", k, "Per-class shortlist size K");
    app->add_option("--p", p, "Classes kept per example P");
    app->add_option("--variant", variant, "balanced_ranked, unbalanced_ranked or balanced_with_tags");
    app->add_option("--dedup-r", dedup_r, "Remove this many pool near-duplicates of the test set");
    app->add_option("--rounds", rounds, "Self-training rounds");
    app->add_option("--mode", mode, "semi_supervised, self_training or semi_weakly");
    app->add_option("--out", out, "Output directory");
  }

  RunConfig load() const {
    json raw = load_json(config);
    if (!raw.is_object()) throw ConfigError(config.string() + ": expected a JSON object");
    if (seed) raw["seed"] = *seed;
    if (threads) raw["threads"] = *threads;
    else if (!raw.contains("threads")) raw["threads"] = default_threads();
    if (dedup_r) raw["dedup_r"] = *dedup_r;
    if (rounds) raw["rounds"] = *rounds;
    if (mode) raw["mode"] = *mode;
    if (k || p || variant) {
      json& s = raw["selection"];
      if (s.is_null()) s = json::object();
      if (k) s["k"] = *k;
      if (p) s["p"] = *p;
      if (variant) s["variant"] = *variant;
    }
    RunConfig rc = run_config_from_json(raw, config.parent_path());
    if (out) rc.out = fs::path(*out);
    if (!rc.out) throw ConfigError("no output directory: pass --out or set \"out\" in the config");
    return rc;
  }
};

struct TaskData {
  LabeledDataset labeled;
  UnlabeledPool pool;
  LabeledDataset test;
};

TaskData load_task(const RunConfig& rc, std::uint64_t seed_offset = 0) {
  if (rc.synthetic) {
    SyntheticTask task = *rc.synthetic;
    task.seed += seed_offset;
    auto data = generate_task(task);
    return {std::move(data.labeled), std::move(data.pool.pool), std::move(data.test)};
  }
  const auto& d = *rc.data;
  return {read_labeled(d.labeled, d.num_classes), read_pool(d.pool, d.num_classes),
          read_labeled(d.test, d.num_classes)};
}

// ---------------------------------------------------------------------------

struct GenOptions {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed, num_classes, dim, n_labeled, n_pool, n_test;
  std::optional<double> separation, tag_noise;
  fs::path out;
};

void cmd_gen(const GenOptions& o, Outputs& outputs) {
  json section = json::object();
  if (o.config) {
    const json raw = load_json(*o.config);
    if (raw.is_object() && raw.contains("synthetic")) {
      run_config_from_json(raw, o.config->parent_path());
      section = raw.at("synthetic");
    } else {
      section = raw;
    }
  }
  if (o.seed) section["seed"] = *o.seed;
  if (o.num_classes) section["num_classes"] = *o.num_classes;
  if (o.dim) section["dim"] = *o.dim;
  if (o.n_labeled) section["n_labeled"] = *o.n_labeled;
  if (o.n_pool) section["n_pool"] = *o.n_pool;
  if (o.n_test) section["n_test"] = *o.n_test;
  if (o.separation) section["separation"] = *o.separation;
  if (o.tag_noise) section["tag_noise"] = *o.tag_noise;
  const SyntheticTask task = synthetic_from_json(section, "synthetic");
  const auto data = generate_task(task);

  outputs.dir(o.out);
  write_features(data.labeled, outputs.file(o.out / "labeled.sslf"));
  write_features(data.pool.pool, outputs.file(o.out / "pool.sslf"));
  write_features(data.test, outputs.file(o.out / "test.sslf"));
  write_manifest(data.pool.oracle, outputs.file(o.out / "pool_oracle.jsonl"));
  write_json(outputs, o.out / "task.json", to_json(task));
  std::cout << ojson{{"labeled", data.labeled.size()},
                     {"pool", data.pool.pool.size()},
                     {"test", data.test.size()},
                     {"out", o.out.string()}}
                   .dump()
            << "\n";
}

struct TrainOptions {
  std::optional<fs::path> config, labeled, manifest, pool, init, metrics;
  std::size_t num_classes = 0;
  std::uint64_t seed = 0;
  fs::path out;
  TrainFlags flags;
};

void cmd_train(const TrainOptions& o, Outputs& outputs) {
  const bool student = o.manifest.has_value();
  if (student == o.labeled.has_value()) {
    throw ConfigError("train: pass either --labeled, or --manifest with --pool");
  }
  if (student && !o.pool) throw ConfigError("train: --manifest needs --pool");
  const char* name = student ? "student" : "teacher";
  json section = config_section(o.config, name);
  o.flags.apply(section);
  const TrainConfig cfg = train_config_from_json(section, ScheduleKind::kPretrain, name);

  const TrainResult result = [&] {
    if (student) {
      const auto pool = read_pool(*o.pool, o.num_classes);
      const auto data = from_manifest(read_manifest(*o.manifest));
      auto init = o.init ? read_model(*o.init)
                         : SoftmaxClassifier::initialized(o.num_classes, pool.dim(),
                                                          stage_seed(o.seed, Stage::kStudentInit));
      return train(std::move(init), data, pool,
                   with_seed(cfg, stage_seed(o.seed, Stage::kStudentTrain)));
    }
    const auto labeled = read_labeled(*o.labeled, o.num_classes);
    auto init = o.init ? read_model(*o.init)
                       : SoftmaxClassifier::initialized(o.num_classes, labeled.dim(),
                                                        stage_seed(o.seed, Stage::kTeacherInit));
    return train(std::move(init), labeled,
                 with_seed(cfg, stage_seed(o.seed, Stage::kTeacherTrain)));
  }();
  write_model(result.model, outputs.file(o.out));
  if (o.metrics) write_metrics(outputs, *o.metrics, result.metrics);
  std::cout << ojson{{"model", o.out.string()},
                     {"final_loss", result.metrics.empty() ? 0.0 : result.metrics.back().loss}}
                   .dump()
            << "\n";
}

struct ScoreOptions {
  fs::path model, pool, out;
  std::size_t k = 1000, p = 10, shard = 0, shards = 1;
  std::vector<std::size_t> budget;
  std::optional<std::size_t> threads;
};

void cmd_score(const ScoreOptions& o, Outputs& outputs) {
  if (o.shards == 0 || o.shard >= o.shards) throw ConfigError("score: need 0 <= --shard < --shards");
  const auto teacher = read_model(o.model);
  const std::size_t num_classes = teacher.num_classes();
  std::vector<std::size_t> caps = o.budget;
  if (caps.empty()) caps.assign(num_classes, o.k);
  if (caps.size() != num_classes) throw ConfigError("score: --budget length != num_classes");
  const auto pool = read_pool(o.pool, num_classes);
  const std::size_t m = pool.size();
  const std::size_t begin = o.shard * m / o.shards;
  const std::size_t end = (o.shard + 1) * m / o.shards;
  const auto shard = pool.slice(begin, end);
  const auto bank = score_pool(teacher, shard, caps, o.p, o.threads.value_or(default_threads()));
  write_ranked_lists(bank, outputs.file(o.out));
  std::cout << ojson{{"scored", shard.size()}, {"begin", begin}, {"end", end},
                     {"out", o.out.string()}}
                   .dump()
            << "\n";
}

struct SelectOptions {
  std::vector<fs::path> merge;
  std::string variant = "balanced_ranked";
  std::optional<fs::path> pool;
  std::size_t num_classes = 0, k = 1000;
  std::vector<std::size_t> budget;
  std::uint64_t seed = 0;
  fs::path out;
};

void cmd_select(const SelectOptions& o, Outputs& outputs) {
  const auto variant = parse_variant(o.variant);
  ConstructedDataset data;
  std::size_t num_classes = 0;
  if (variant == SelectionVariant::kBalancedWithTags) {
    if (!o.pool || o.num_classes == 0) {
      throw ConfigError("select: balanced_with_tags needs --pool and --num-classes");
    }
    if (!o.merge.empty()) throw ConfigError("select: balanced_with_tags takes no ranked lists");
    num_classes = o.num_classes;
    std::vector<std::size_t> counts = o.budget;
    if (counts.empty()) counts.assign(num_classes, o.k);
    if (counts.size() != num_classes) throw ConfigError("select: --budget length != num_classes");
    data = tag_select(read_pool(*o.pool, num_classes), counts,
                      stage_seed(o.seed, Stage::kTagSelect));
  } else {
    if (o.merge.empty()) throw ConfigError("select: pass ranked-list files with --merge");
    auto bank = read_ranked_lists(o.merge.front());
    for (std::size_t i = 1; i < o.merge.size(); ++i) bank.merge(read_ranked_lists(o.merge[i]));
    num_classes = bank.num_classes();
    data = construct_dataset(bank);
  }
  outputs.dir(o.out);
  write_manifest_file(outputs, o.out / "manifest.jsonl", data);
  ojson summary = selection_summary(data, num_classes);
  summary["variant"] = to_string(variant);
  write_json(outputs, o.out / "summary.json", summary);
  std::cout << summary.dump() << "\n";
}

struct FinetuneOptions {
  std::optional<fs::path> config, metrics;
  fs::path model, labeled, out;
  std::uint64_t seed = 0;
  TrainFlags flags;
};

void cmd_finetune(const FinetuneOptions& o, Outputs& outputs) {
  json section = config_section(o.config, "finetune");
  o.flags.apply(section);
  const TrainConfig cfg = train_config_from_json(section, ScheduleKind::kFinetune, "finetune");
  auto model = read_model(o.model);
  const auto labeled = read_labeled(o.labeled, model.num_classes());
  auto result = fine_tune(std::move(model), labeled,
                          with_seed(cfg, stage_seed(o.seed, Stage::kFinetune)));
  write_model(result.model, outputs.file(o.out));
  if (o.metrics) write_metrics(outputs, *o.metrics, result.metrics);
  std::cout << ojson{{"model", o.out.string()},
                     {"final_loss", result.metrics.empty() ? 0.0 : result.metrics.back().loss}}
                   .dump()
            << "\n";
}

struct EvalOptions {
  fs::path model, test;
  std::size_t k = 1;
  std::optional<fs::path> out;
};

void cmd_eval(const EvalOptions& o, Outputs& outputs) {
  const auto model = read_model(o.model);
  const auto test = read_labeled(o.test, model.num_classes());
  ojson j;
  j["accuracy"] = evaluate(model, test, o.k);
  j["k"] = o.k;
  j["examples"] = test.size();
  if (o.out) write_json(outputs, *o.out, j);
  std::cout << j.dump() << "\n";
}

struct DedupOptions {
  fs::path pool, eval, out;
  std::optional<fs::path> model;
  std::size_t num_classes = 0, r = 0;
  std::optional<std::size_t> threads;
};

void cmd_dedup(const DedupOptions& o, Outputs& outputs) {
  const auto pool = read_pool(o.pool, o.num_classes);
  const auto eval = read_labeled(o.eval, o.num_classes);
  const std::size_t threads = o.threads.value_or(default_threads());
  DedupResult result = [&] {
    if (!o.model) return dedup_pool(pool, eval, o.r, threads);
    const auto model = read_model(o.model.value());
    return dedup_pool(pool, logit_embeddings(model, pool), logit_embeddings(model, eval), o.r,
                      threads);
  }();
  std::vector<std::uint64_t> ids;
  for (const auto& id : result.report.removed_ids) ids.push_back(id.value);
  std::sort(ids.begin(), ids.end());

  outputs.dir(o.out);
  write_features(result.pool, outputs.file(o.out / "pool.sslf"));
  write_text(outputs, o.out / "removed_ids.json", ojson(ids).dump() + "\n");
  ojson report = to_json(result.report);
  report["ids_path"] = "removed_ids.json";
  write_json(outputs, o.out / "dedup_report.json", report);
  std::cout << report.dump() << "\n";
}

void cmd_run(const RunFlags& o, Outputs& outputs) {
  const RunConfig rc = o.load();
  const auto data = load_task(rc);
  const auto result = run_pipeline(data.labeled, data.pool, data.test, rc.pipeline);
  const fs::path out = *rc.out;
  outputs.dir(out);
  const auto& last = result.last();
  write_json(outputs, out / "report.json",
             pipeline_report(result, rc.pipeline, data.labeled.num_classes()));
  write_manifest_file(outputs, out / "manifest.jsonl", last.selected);
  write_model(result.baseline, outputs.file(out / "baseline.sslm"));
  write_model(last.teacher, outputs.file(out / "teacher.sslm"));
  write_model(last.pretrained, outputs.file(out / "student_pretrained.sslm"));
  write_model(last.finetuned, outputs.file(out / "student.sslm"));
  std::cout << ojson{{"supervised_baseline", result.baseline_accuracy},
                     {"teacher", result.rounds.front().teacher_accuracy},
                     {"student_pretrained", last.pretrained_accuracy},
                     {"student_finetuned", last.finetuned_accuracy},
                     {"out", out.string()}}
                   .dump()
            << "\n";
}

struct StudyOptions {
  RunFlags run;
  std::vector<std::size_t> k_values;
  std::vector<double> fractions;
  bool variants = false;
  std::size_t seeds = 1;
};

ojson sweep_json(const std::vector<SweepPoint>& points) {
  auto out = ojson::array();
  for (const auto& p : points) {
    out.push_back({{"fraction", p.fraction},
                   {"pool_size", p.pool_size},
                   {"k", p.k},
                   {"selected", p.selected},
                   {"baseline_accuracy", p.baseline_accuracy},
                   {"finetuned_accuracy", p.finetuned_accuracy}});
  }
  return out;
}

void cmd_study(const StudyOptions& o, Outputs& outputs) {
  if (o.k_values.empty() && o.fractions.empty() && !o.variants) {
    throw ConfigError("study: nothing to do; pass --k-values, --fractions and/or --variants");
  }
  if (o.seeds == 0) throw ConfigError("study: --seeds must be positive");
  const RunConfig rc = o.run.load();
  ojson k_rows = ojson::array(), pool_rows = ojson::array(), variant_rows = ojson::array();
  for (std::size_t i = 0; i < o.seeds; ++i) {
    PipelineConfig config = rc.pipeline;
    config.seed += i;
    const auto data = load_task(rc, i);
    if (!o.k_values.empty()) {
      k_rows.push_back({{"seed", config.seed},
                        {"points", sweep_json(run_k_sweep(data.labeled, data.pool, data.test,
                                                          config, o.k_values))}});
    }
    if (!o.fractions.empty()) {
      pool_rows.push_back(
          {{"seed", config.seed},
           {"points", sweep_json(run_pool_size_sweep(data.labeled, data.pool, data.test, config,
                                                     o.fractions))}});
    }
    if (o.variants) {
      const auto study = run_variant_study(data.labeled, data.pool, data.test, config);
      ojson row;
      row["seed"] = config.seed;
      row["baseline_accuracy"] = study.baseline_accuracy;
      auto outcomes = ojson::array();
      for (const auto& v : study.outcomes) {
        outcomes.push_back({{"variant", to_string(v.variant)},
                            {"budget", v.budget},
                            {"selected", v.selected},
                            {"per_class", v.per_class},
                            {"pretrained_accuracy", v.pretrained_accuracy},
                            {"finetuned_accuracy", v.finetuned_accuracy}});
      }
      row["outcomes"] = std::move(outcomes);
      variant_rows.push_back(std::move(row));
    }
  }
  ojson j;
  j["seeds"] = o.seeds;
  j["k_sweep"] = std::move(k_rows);
  j["pool_size_sweep"] = std::move(pool_rows);
  j["variants"] = std::move(variant_rows);
  j["config"] = to_json(rc.pipeline);
  outputs.dir(*rc.out);
  write_json(outputs, *rc.out / "study.json", j);
  std::cout << ojson{{"out", (*rc.out / "study.json").string()}}.dump() << "\n";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return 2;
    case ErrorKind::kData: return 3;
    case ErrorKind::kNumeric: return 4;
  }
  return 3;
}

int report_error(const char* kind, const std::string& message, int code) {
  std::cerr << ojson{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}}.dump()
            << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Teacher/student semi-supervised training at desk scale"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "semisup 1.0.0");

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic task (labeled, pool, test)");
  gen_cmd->add_option("--config", gen.config, "Run config or bare synthetic section");
  gen_cmd->add_option("--seed", gen.seed, "Data seed");
  gen_cmd->add_option("--num-classes", gen.num_classes, "Number of classes L");
  gen_cmd->add_option("--dim", gen.dim, "Feature dimension d");
  gen_cmd->add_option("--separation", gen.separation, "Distance of class means from the origin");
  gen_cmd->add_option("--tag-noise", gen.tag_noise, "Probability of a wrong pool tag");
  gen_cmd->add_option("--n-labeled", gen.n_labeled, "Labeled examples");
  gen_cmd->add_option("--n-pool", gen.n_pool, "Pool examples");
  gen_cmd->add_option("--n-test", gen.n_test, "Test examples");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model on D, or on D-hat from a manifest");
  train_cmd->add_option("--config", tr.config, "Run config supplying the teacher/student section");
  train_cmd->add_option("--labeled", tr.labeled, "Labeled feature file");
  train_cmd->add_option("--manifest", tr.manifest, "Selected-data manifest");
  train_cmd->add_option("--pool", tr.pool, "Pool feature file the manifest refers to");
  train_cmd->add_option("--num-classes", tr.num_classes, "Number of classes L")->required();
  train_cmd->add_option("--init", tr.init, "Start from this model instead of a fresh one");
  train_cmd->add_option("--seed", tr.seed, "Seed");
  train_cmd->add_option("--metrics", tr.metrics, "Write per-epoch metrics (JSON lines)");
  train_cmd->add_option("--out", tr.out, "Output model file")->required();
  tr.flags.add(train_cmd);

  ScoreOptions sc;
  auto* score_cmd = app.add_subcommand("score", "Score a pool shard into ranked lists");
  score_cmd->add_option("--model", sc.model, "Teacher model")->required();
  score_cmd->add_option("--pool", sc.pool, "Pool feature file")->required();
  score_cmd->add_option("--k", sc.k, "Per-class shortlist size K");
  score_cmd->add_option("--p", sc.p, "Classes kept per example P");
  score_cmd->add_option("--budget", sc.budget, "Per-class capacities (comma separated)")
      ->delimiter(',');
  score_cmd->add_option("--shard", sc.shard, "Shard index");
  score_cmd->add_option("--shards", sc.shards, "Number of shards");
  score_cmd->add_option("--threads", sc.threads, "Scoring threads");
  score_cmd->add_option("--out", sc.out, "Ranked-list file")->required();

  SelectOptions se;
  auto* select_cmd = app.add_subcommand("select", "Merge ranked lists into a manifest");
  select_cmd->add_option("--merge", se.merge, "Ranked-list files from `score`");
  select_cmd->add_option("--variant", se.variant, "balanced_ranked (default) or balanced_with_tags");
  select_cmd->add_option("--pool", se.pool, "Tagged pool (balanced_with_tags)");
  select_cmd->add_option("--num-classes", se.num_classes, "Number of classes (balanced_with_tags)");
  select_cmd->add_option("--k", se.k, "Examples per class (balanced_with_tags)");
  select_cmd->add_option("--budget", se.budget, "Per-class counts (balanced_with_tags)")
      ->delimiter(',');
  select_cmd->add_option("--seed", se.seed, "Seed (balanced_with_tags)");
  select_cmd->add_option("--out", se.out, "Output directory")->required();

  FinetuneOptions ft;
  auto* finetune_cmd = app.add_subcommand("finetune", "Fine-tune a model on D");
  finetune_cmd->add_option("--config", ft.config, "Run config supplying the finetune section");
  finetune_cmd->add_option("--model", ft.model, "Pre-trained model")->required();
  finetune_cmd->add_option("--labeled", ft.labeled, "Labeled feature file")->required();
  finetune_cmd->add_option("--seed", ft.seed, "Seed");
  finetune_cmd->add_option("--metrics", ft.metrics, "Write per-epoch metrics (JSON lines)");
  finetune_cmd->add_option("--out", ft.out, "Output model file")->required();
  ft.flags.add(finetune_cmd);

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "Top-k accuracy of a model on a labeled set");
  eval_cmd->add_option("--model", ev.model, "Model file")->required();
  eval_cmd->add_option("--test", ev.test, "Labeled feature file")->required();
  eval_cmd->add_option("--k", ev.k, "k of top-k");
  eval_cmd->add_option("--out", ev.out, "Also write the result to this JSON file");

  DedupOptions dd;
  auto* dedup_cmd = app.add_subcommand("dedup", "Remove pool near-duplicates of an eval set");
  dedup_cmd->add_option("--pool", dd.pool, "Pool feature file")->required();
  dedup_cmd->add_option("--eval", dd.eval, "Evaluation feature file (labeled)")->required();
  dedup_cmd->add_option("--num-classes", dd.num_classes, "Number of classes L")->required();
  dedup_cmd->add_option("--dedup-r", dd.r, "Number of pool examples to remove")->required();
  dedup_cmd->add_option("--model", dd.model, "Use this model's logits as embeddings");
  dedup_cmd->add_option("--threads", dd.threads, "Distance threads");
  dedup_cmd->add_option("--out", dd.out, "Output directory")->required();

  RunFlags rn;
  auto* run_cmd = app.add_subcommand("run", "Run the full teacher/student pipeline");
  rn.add(run_cmd);

  StudyOptions st;
  auto* study_cmd = app.add_subcommand("study", "Sweep K, pool size and selection variants");
  st.run.add(study_cmd);
  study_cmd->add_option("--k-values", st.k_values, "K values (comma separated)")->delimiter(',');
  study_cmd->add_option("--fractions", st.fractions, "Pool fractions in (0,1] (comma separated)")
      ->delimiter(',');
  study_cmd->add_flag("--variants", st.variants, "Compare the three selection variants");
  study_cmd->add_option("--seeds", st.seeds, "Number of consecutive seeds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report_error("config", e.what(), 2);
  }

  Outputs outputs;
  try {
    if (*gen_cmd) cmd_gen(gen, outputs);
    else if (*train_cmd) cmd_train(tr, outputs);
    else if (*score_cmd) cmd_score(sc, outputs);
    else if (*select_cmd) cmd_select(se, outputs);
    else if (*finetune_cmd) cmd_finetune(ft, outputs);
    else if (*eval_cmd) cmd_eval(ev, outputs);
    else if (*dedup_cmd) cmd_dedup(dd, outputs);
    else if (*run_cmd) cmd_run(rn, outputs);
    else if (*study_cmd) cmd_study(st, outputs);
    return 0;
  } catch (const Error& e) {
    outputs.rollback();
    return report_error(to_string(e.kind()), e.what(), exit_code(e.kind()));
  } catch (const std::exception& e) {
    outputs.rollback();
    return report_error("data", e.what(), 3);
  }
}

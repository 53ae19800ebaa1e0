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

#ifndef SEMISUP_CONFIG_HPP
#define SEMISUP_CONFIG_HPP

// JSON run configuration: parsing with unknown-key rejection, and the echo
// written back into reports.

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semisup/error.hpp"
#include "semisup/pipeline.hpp"
#include "semisup/syngen.hpp"

namespace semisup {

struct DataPaths {
  std::filesystem::path labeled;
  std::filesystem::path pool;
  std::filesystem::path test;
  std::size_t num_classes = 0;
};

struct RunConfig {
  PipelineConfig pipeline;
  std::optional<DataPaths> data;
  std::optional<SyntheticTask> synthetic;
  std::optional<std::filesystem::path> out;
};

namespace detail {

class JsonFields {
 public:
  JsonFields(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  void allow_only(std::initializer_list<const char*> keys) const {
    for (const auto& [key, _] : j_.items()) {
      bool known = false;
      for (const char* k : keys) known = known || key == k;
      if (!known) throw ConfigError(where_ + ": unknown key \"" + key + "\"");
    }
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const nlohmann::json& at(const char* key) const { return j_.at(key); }
  std::string path(const char* key) const { return where_ + "." + key; }

  std::uint64_t get_uint(const char* key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    const bool ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    if (!ok) throw ConfigError(path(key) + ": expected a non-negative integer");
    return v.get<std::uint64_t>();
  }
  std::uint64_t require_uint(const char* key) const {
    if (!has(key)) throw ConfigError(path(key) + ": missing");
    return get_uint(key, 0);
  }
  double get_double(const char* key, double fallback) const {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(path(key) + ": expected a number");
    return v.get<double>();
  }
  bool get_bool(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(path(key) + ": expected true or false");
    return v.get<bool>();
  }
  std::string get_string(const char* key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(path(key) + ": expected a string");
    return v.get<std::string>();
  }
  std::string require_string(const char* key) const {
    if (!has(key)) throw ConfigError(path(key) + ": missing");
    return get_string(key, "");
  }

 private:
  const nlohmann::json& j_;
  std::string where_;
};

inline PriorKind parse_prior(const std::string& name, const std::string& where) {
  if (name == "uniform") return PriorKind::kUniform;
  if (name == "zipf") return PriorKind::kZipf;
  throw ConfigError(where + ": unknown prior \"" + name + "\" (expected uniform or zipf)");
}

inline const char* prior_name(PriorKind p) { return p == PriorKind::kZipf ? "zipf" : "uniform"; }

}  // namespace detail

/// Training section. Learning-rate keys that are left out take the
/// linear-scaling defaults for the section's schedule kind.
inline TrainConfig train_config_from_json(const nlohmann::json& j, ScheduleKind kind,
                                          const std::string& where) {
  detail::JsonFields f(j, where);
  f.allow_only({"batch_size", "total_images", "base_lr", "peak_lr", "warmup_steps",
                "num_reductions", "reduction_factor", "weight_decay", "shuffle"});
  TrainConfig c;
  c.batch_size = f.get_uint("batch_size", 64);
  c.total_images = f.require_uint("total_images");
  if (c.batch_size == 0) throw ConfigError(f.path("batch_size") + ": must be positive");
  if (c.total_images == 0) throw ConfigError(f.path("total_images") + ": must be positive");
  const std::size_t steps = c.total_steps();
  c.schedule = kind == ScheduleKind::kPretrain ? LrSchedule::pretrain(c.batch_size, steps)
                                               : LrSchedule::finetune(c.batch_size, steps);
  c.schedule.peak_lr = f.get_double("peak_lr", c.schedule.peak_lr);
  c.schedule.base_lr = f.get_double("base_lr", kind == ScheduleKind::kFinetune
                                                   ? c.schedule.peak_lr
                                                   : c.schedule.base_lr);
  c.schedule.warmup_steps = f.get_uint("warmup_steps", c.schedule.warmup_steps);
  c.schedule.num_reductions = f.get_uint("num_reductions", c.schedule.num_reductions);
  c.schedule.reduction_factor = f.get_double("reduction_factor", c.schedule.reduction_factor);
  c.weight_decay = f.get_double("weight_decay", c.weight_decay);
  c.shuffle = f.get_bool("shuffle", c.shuffle);
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return c;
}

inline nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["batch_size"] = c.batch_size;
  j["total_images"] = c.total_images;
  j["base_lr"] = c.schedule.base_lr;
  j["peak_lr"] = c.schedule.peak_lr;
  j["warmup_steps"] = c.schedule.warmup_steps;
  j["num_reductions"] = c.schedule.num_reductions;
  j["reduction_factor"] = c.schedule.reduction_factor;
  j["weight_decay"] = c.weight_decay;
  j["shuffle"] = c.shuffle;
  return j;
}

inline SyntheticTask synthetic_from_json(const nlohmann::json& j, const std::string& where) {
  detail::JsonFields f(j, where);
  f.allow_only({"num_classes", "dim", "separation", "noise_sigma", "prior", "zipf_alpha",
                "tag_noise", "means_seed", "pool_prior", "pool_zipf_alpha", "num_distractors",
                "distractor_fraction", "n_labeled", "n_pool", "n_test", "seed"});
  SyntheticTask t;
  auto& m = t.mixture;
  m.num_classes = f.get_uint("num_classes", m.num_classes);
  m.dim = f.get_uint("dim", m.dim);
  m.separation = f.get_double("separation", m.separation);
  m.noise_sigma = f.get_double("noise_sigma", m.noise_sigma);
  m.prior = detail::parse_prior(f.get_string("prior", "uniform"), f.path("prior"));
  m.zipf_alpha = f.get_double("zipf_alpha", m.zipf_alpha);
  m.tag_noise = f.get_double("tag_noise", m.tag_noise);
  m.means_seed = f.get_uint("means_seed", m.means_seed);
  m.num_distractors = f.get_uint("num_distractors", m.num_distractors);
  m.distractor_fraction = f.get_double("distractor_fraction", m.distractor_fraction);
  if (f.has("pool_prior")) {
    t.pool_prior = detail::parse_prior(f.get_string("pool_prior", ""), f.path("pool_prior"));
  }
  if (f.has("pool_zipf_alpha")) t.pool_zipf_alpha = f.get_double("pool_zipf_alpha", 1.0);
  t.n_labeled = f.get_uint("n_labeled", t.n_labeled);
  t.n_pool = f.get_uint("n_pool", t.n_pool);
  t.n_test = f.get_uint("n_test", t.n_test);
  t.seed = f.get_uint("seed", t.seed);
  try {
    m.validate();
    t.pool_mixture().validate();
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return t;
}

inline nlohmann::ordered_json to_json(const SyntheticTask& t) {
  nlohmann::ordered_json j;
  const auto& m = t.mixture;
  j["num_classes"] = m.num_classes;
  j["dim"] = m.dim;
  j["separation"] = m.separation;
  j["noise_sigma"] = m.noise_sigma;
  j["prior"] = detail::prior_name(m.prior);
  j["zipf_alpha"] = m.zipf_alpha;
  j["tag_noise"] = m.tag_noise;
  j["means_seed"] = m.means_seed;
  j["pool_prior"] = detail::prior_name(t.pool_mixture().prior);
  j["pool_zipf_alpha"] = t.pool_mixture().zipf_alpha;
  j["num_distractors"] = m.num_distractors;
  j["distractor_fraction"] = m.distractor_fraction;
  j["n_labeled"] = t.n_labeled;
  j["n_pool"] = t.n_pool;
  j["n_test"] = t.n_test;
  j["seed"] = t.seed;
  return j;
}

/**
 * Parses a run configuration. Relative data paths are resolved against
 * `base_dir` and checked for existence here, before anything runs.
 */
inline RunConfig run_config_from_json(const nlohmann::json& j,
                                      const std::filesystem::path& base_dir = {}) {
  detail::JsonFields f(j, "config");
  f.allow_only({"mode", "seed", "rounds", "threads", "eval_k", "dedup_r", "teacher", "student",
                "finetune", "weak", "selection", "data", "synthetic", "out"});
  RunConfig rc;
  auto& p = rc.pipeline;
  p.mode = parse_mode(f.get_string("mode", "semi_supervised"));
  p.seed = f.get_uint("seed", 0);
  p.rounds = f.get_uint("rounds", 1);
  p.threads = f.get_uint("threads", 1);
  p.eval_k = f.get_uint("eval_k", 1);
  if (f.has("dedup_r")) p.dedup_r = f.get_uint("dedup_r", 0);

  for (const char* key : {"teacher", "student", "finetune"}) {
    if (!f.has(key)) throw ConfigError(std::string("config.") + key + ": missing");
  }
  p.teacher = train_config_from_json(f.at("teacher"), ScheduleKind::kPretrain, "config.teacher");
  p.student = train_config_from_json(f.at("student"), ScheduleKind::kPretrain, "config.student");
  p.finetune =
      train_config_from_json(f.at("finetune"), ScheduleKind::kFinetune, "config.finetune");
  p.weak = f.has("weak") ? train_config_from_json(f.at("weak"), ScheduleKind::kPretrain,
                                                  "config.weak")
                         : p.student;

  if (f.has("selection")) {
    detail::JsonFields s(f.at("selection"), "config.selection");
    s.allow_only({"k", "p", "variant", "per_class_budget", "weights"});
    p.selection.k = s.get_uint("k", p.selection.k);
    p.selection.p = s.get_uint("p", p.selection.p);
    p.selection.variant = parse_variant(s.get_string("variant", "balanced_ranked"));
    try {
      if (s.has("per_class_budget")) {
        p.selection.per_class_budget = s.at("per_class_budget").get<std::vector<std::size_t>>();
      }
      if (s.has("weights")) p.unbalanced_weights = s.at("weights").get<std::vector<double>>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config.selection: per_class_budget/weights must be numeric arrays");
    }
  }

  if (f.has("data") == f.has("synthetic")) {
    throw ConfigError("config: exactly one of \"data\" and \"synthetic\" is required");
  }
  if (f.has("data")) {
    detail::JsonFields d(f.at("data"), "config.data");
    d.allow_only({"labeled", "pool", "test", "num_classes"});
    DataPaths paths;
    auto resolve = [&](const char* key) {
      std::filesystem::path path = d.require_string(key);
      if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
      if (!std::filesystem::exists(path)) {
        throw ConfigError(d.path(key) + ": no such file " + path.string());
      }
      return path;
    };
    paths.labeled = resolve("labeled");
    paths.pool = resolve("pool");
    paths.test = resolve("test");
    paths.num_classes = d.require_uint("num_classes");
    if (paths.num_classes == 0) throw ConfigError("config.data.num_classes: must be positive");
    rc.data = paths;
  } else {
    rc.synthetic = synthetic_from_json(f.at("synthetic"), "config.synthetic");
  }
  if (f.has("out")) {
    std::filesystem::path out = f.get_string("out", "");
    if (out.is_relative() && !base_dir.empty()) out = base_dir / out;
    rc.out = out;
  }

  const std::size_t num_classes =
      rc.data ? rc.data->num_classes : rc.synthetic->mixture.num_classes;
  try {
    if (p.selection.variant != SelectionVariant::kUnbalancedRanked ||
        p.selection.per_class_budget) {
      p.selection.validate(num_classes);
    } else if (p.selection.p < 1 || p.selection.p > num_classes) {
      throw ConfigError("selection: P outside [1, num_classes]");
    }
    p.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return rc;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": malformed JSON: " + e.what());
  }
  return run_config_from_json(j, path.parent_path());
}

inline nlohmann::ordered_json to_json(const PipelineConfig& p) {
  nlohmann::ordered_json j;
  j["mode"] = to_string(p.mode);
  j["seed"] = p.seed;
  j["rounds"] = p.rounds;
  j["eval_k"] = p.eval_k;
  j["dedup_r"] = p.dedup_r ? nlohmann::ordered_json(*p.dedup_r) : nlohmann::ordered_json();
  j["teacher"] = to_json(p.teacher);
  j["student"] = to_json(p.student);
  j["finetune"] = to_json(p.finetune);
  if (p.mode == PipelineMode::kSemiWeakly) j["weak"] = to_json(p.weak);
  nlohmann::ordered_json s;
  s["k"] = p.selection.k;
  s["p"] = p.selection.p;
  s["variant"] = to_string(p.selection.variant);
  if (p.selection.per_class_budget) s["per_class_budget"] = *p.selection.per_class_budget;
  if (p.unbalanced_weights) s["weights"] = *p.unbalanced_weights;
  j["selection"] = std::move(s);
  return j;
}

inline nlohmann::ordered_json metrics_json(const std::vector<EpochMetrics>& metrics) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& m : metrics) out.push_back(to_json(m));
  return out;
}

/// Report of one pipeline run: per-stage accuracies, selection sizes and the
/// configuration echo.
inline nlohmann::ordered_json pipeline_report(const PipelineResult& r, const PipelineConfig& config,
                                              std::size_t num_classes) {
  nlohmann::ordered_json j;
  j["seed"] = config.seed;
  j["mode"] = to_string(config.mode);
  j["pool_size"] = r.pool_size;
  if (r.dedup) {
    j["dedup"] = to_json(*r.dedup);
  } else {
    j["dedup"] = nullptr;
  }
  const auto& last = r.last();
  nlohmann::ordered_json acc;
  acc["supervised_baseline"] = r.baseline_accuracy;
  acc["teacher"] = r.rounds.front().teacher_accuracy;
  acc["student_pretrained"] = last.pretrained_accuracy;
  acc["student_finetuned"] = last.finetuned_accuracy;
  j["accuracy"] = std::move(acc);
  j["eval_k"] = config.eval_k;
  auto rounds = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < r.rounds.size(); ++i) {
    const auto& rr = r.rounds[i];
    nlohmann::ordered_json o;
    o["round"] = i;
    o["teacher_accuracy"] = rr.teacher_accuracy;
    o["selection"] = selection_summary(rr.selected, num_classes);
    o["pretrained_accuracy"] = rr.pretrained_accuracy;
    o["finetuned_accuracy"] = rr.finetuned_accuracy;
    o["pretrain_metrics"] = metrics_json(rr.pretrain_metrics);
    o["finetune_metrics"] = metrics_json(rr.finetune_metrics);
    rounds.push_back(std::move(o));
  }
  j["rounds"] = std::move(rounds);
  j["baseline_metrics"] = metrics_json(r.baseline_metrics);
  j["config"] = to_json(config);
  return j;
}

}  // namespace semisup

#endif  // SEMISUP_CONFIG_HPP

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

#ifndef SEMISUP_PIPELINE_HPP
#define SEMISUP_PIPELINE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "semisup/classifier.hpp"
#include "semisup/dataset.hpp"
#include "semisup/dedup.hpp"
#include "semisup/error.hpp"
#include "semisup/rng.hpp"
#include "semisup/selector.hpp"
#include "semisup/trainer.hpp"

namespace semisup {

enum class PipelineMode { kSemiSupervised, kSelfTraining, kSemiWeakly };

inline const char* to_string(PipelineMode m) {
  switch (m) {
    case PipelineMode::kSemiSupervised:
      return "semi_supervised";
    case PipelineMode::kSelfTraining:
      return "self_training";
    case PipelineMode::kSemiWeakly:
      return "semi_weakly";
  }
  return "unknown";
}

inline PipelineMode parse_mode(const std::string& name) {
  if (name == "semi_supervised") return PipelineMode::kSemiSupervised;
  if (name == "self_training") return PipelineMode::kSelfTraining;
  if (name == "semi_weakly") return PipelineMode::kSemiWeakly;
  throw ConfigError("unknown pipeline mode \"" + name + "\"");
}

/// Raised when a stage cannot proceed, e.g. the selection came back empty.
class PipelineError : public DataError {
 public:
  PipelineError(std::string stage, const std::string& what)
      : DataError("pipeline stage " + stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct PipelineConfig {
  PipelineMode mode = PipelineMode::kSemiSupervised;
  /// Stage 1, and the supervised baseline.
  TrainConfig teacher;
  /// Stage 3, pre-training on the selected data.
  TrainConfig student;
  /// Stage 4, and the fine-tuning of a semi-weakly teacher.
  TrainConfig finetune;
  /// Teacher pre-training on pool tags (semi_weakly only).
  TrainConfig weak;
  SelectionConfig selection;
  /// Class weights for unbalanced_ranked when no explicit per-class budget is
  /// given. Defaults to the pool's tag counts.
  std::optional<std::vector<double>> unbalanced_weights;
  std::optional<std::size_t> dedup_r;
  std::size_t rounds = 1;
  std::size_t eval_k = 1;
  std::size_t threads = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (rounds == 0) throw ConfigError("pipeline: rounds must be positive");
    if (rounds > 1 && mode != PipelineMode::kSelfTraining) {
      throw ConfigError("pipeline: rounds > 1 requires self_training mode");
    }
    if (finetune.schedule.kind != ScheduleKind::kFinetune) {
      throw ConfigError("pipeline: finetune stage needs a finetune schedule");
    }
    if (eval_k == 0) throw ConfigError("pipeline: eval_k must be positive");
    teacher.validate();
    student.validate();
    finetune.validate();
    if (mode == PipelineMode::kSemiWeakly) weak.validate();
  }
};

/// Seeds the pipeline hands to each stage. Every stage derives its model
/// initialization and its shuffling stream from the pipeline seed.
enum class Stage : std::uint64_t {
  kTeacherInit = 1,
  kTeacherTrain,
  kWeakInit,
  kWeakTrain,
  kWeakFinetune,
  kStudentInit,
  kStudentTrain,
  kFinetune,
  kTagSelect,
};

inline std::uint64_t stage_seed(std::uint64_t seed, Stage stage, std::size_t round = 0) {
  return derive_seed(seed, (static_cast<std::uint64_t>(stage) << 16) + round);
}

inline TrainConfig with_seed(TrainConfig config, std::uint64_t seed) {
  config.seed = seed;
  return config;
}

/// Fraction of examples whose label is among the model's top-k classes.
inline double evaluate(const SoftmaxClassifier& model, const LabeledDataset& test, std::size_t k) {
  if (test.empty()) throw DataError("evaluate: empty test set");
  if (test.dim() != model.dim()) throw DataError("evaluate: test dim != model dim");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    for (const auto& cs : predict_topk(model, test.features(i), k)) {
      if (cs.label == test.label(i)) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(test.size());
}

/// Supervised baseline: the teacher config trained on D alone.
inline TrainResult train_supervised_baseline(const LabeledDataset& labeled,
                                             const PipelineConfig& config) {
  auto init = SoftmaxClassifier::initialized(labeled.num_classes(), labeled.dim(),
                                             stage_seed(config.seed, Stage::kTeacherInit));
  return train(std::move(init), labeled,
               with_seed(config.teacher, stage_seed(config.seed, Stage::kTeacherTrain)));
}

/// One (id, tag) pair per tag: the weak labels used to pre-train a semi-weakly
/// teacher.
inline ConstructedDataset tag_pseudo_labels(const UnlabeledPool& pool) {
  if (!pool.tagged()) throw DataError("semi_weakly: pool carries no tags");
  ConstructedDataset out;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    for (ClassIndex t : pool.tags(i)) out.add({pool.id(i), t, 1.0});
  }
  return out;
}

/// Capacities for the ranked variants, or counts for tag selection.
inline std::vector<std::size_t> selection_capacities(const SelectionConfig& selection,
                                                     const UnlabeledPool& pool,
                                                     const std::optional<std::vector<double>>& w) {
  const std::size_t num_classes = pool.num_classes();
  if (selection.variant != SelectionVariant::kUnbalancedRanked || selection.per_class_budget) {
    return selection.capacities(num_classes);
  }
  std::vector<double> weights;
  if (w) {
    weights = *w;
  } else {
    for (std::size_t c : tag_counts(pool)) weights.push_back(static_cast<double>(std::max<std::size_t>(c, 1)));
  }
  if (weights.size() != num_classes) throw ConfigError("unbalanced weights length != num_classes");
  return zipfian_allocate(weights, selection.k * num_classes);
}

/// Stage 2: score the pool with the teacher and build D-hat per the variant.
inline ConstructedDataset select_examples(const SoftmaxClassifier& teacher,
                                          const UnlabeledPool& pool, const PipelineConfig& config,
                                          std::size_t round = 0) {
  const auto caps = selection_capacities(config.selection, pool, config.unbalanced_weights);
  if (config.selection.variant == SelectionVariant::kBalancedWithTags) {
    return tag_select(pool, caps, stage_seed(config.seed, Stage::kTagSelect, round));
  }
  if (caps.size() != teacher.num_classes()) {
    throw ConfigError("selection: class count != teacher num_classes");
  }
  return construct_dataset(score_pool(teacher, pool, caps, config.selection.p, config.threads));
}

struct RoundResult {
  SoftmaxClassifier teacher;
  ConstructedDataset selected;
  SoftmaxClassifier pretrained;
  SoftmaxClassifier finetuned;
  double teacher_accuracy = 0.0;
  double pretrained_accuracy = 0.0;
  double finetuned_accuracy = 0.0;
  std::vector<EpochMetrics> pretrain_metrics;
  std::vector<EpochMetrics> finetune_metrics;
};

struct PipelineResult {
  SoftmaxClassifier baseline;
  double baseline_accuracy = 0.0;
  std::vector<EpochMetrics> baseline_metrics;
  std::optional<DedupReport> dedup;
  std::size_t pool_size = 0;
  std::vector<RoundResult> rounds;

  const RoundResult& last() const { return rounds.back(); }
};

/**
 * The four-stage procedure:
 *
 *  1. train a teacher on D (semi_weakly: pre-train on pool tags, fine-tune on D);
 *  2. score U with the teacher and build D-hat;
 *  3. train a fresh student on D-hat;
 *  4. fine-tune the student on D.
 *
 * In self_training mode with rounds > 1 the fine-tuned student becomes the
 * next round's teacher. Every model is evaluated on `test`.
 */
inline PipelineResult run_pipeline(const LabeledDataset& labeled, const UnlabeledPool& unlabeled,
                                   const LabeledDataset& test, const PipelineConfig& config) {
  config.validate();
  if (labeled.empty()) throw PipelineError("teacher", "labeled set is empty");
  if (unlabeled.dim() != labeled.dim() || test.dim() != labeled.dim()) {
    throw DataError("pipeline: labeled, pool and test dims differ");
  }
  if (unlabeled.num_classes() != labeled.num_classes() ||
      test.num_classes() != labeled.num_classes()) {
    throw DataError("pipeline: labeled, pool and test class counts differ");
  }
  const std::size_t num_classes = labeled.num_classes();
  const std::size_t dim = labeled.dim();

  PipelineResult result{SoftmaxClassifier(num_classes, dim), 0.0, {}, std::nullopt, 0, {}};

  std::optional<UnlabeledPool> deduped;
  if (config.dedup_r) {
    auto d = dedup_pool(unlabeled, test, *config.dedup_r, config.threads);
    result.dedup = std::move(d.report);
    deduped.emplace(std::move(d.pool));
  }
  const UnlabeledPool& pool = deduped ? *deduped : unlabeled;
  result.pool_size = pool.size();

  auto baseline = train_supervised_baseline(labeled, config);
  result.baseline = baseline.model;
  result.baseline_metrics = std::move(baseline.metrics);
  result.baseline_accuracy = evaluate(result.baseline, test, config.eval_k);

  SoftmaxClassifier teacher = result.baseline;
  if (config.mode == PipelineMode::kSemiWeakly) {
    const auto weak_labels = tag_pseudo_labels(pool);
    if (weak_labels.empty()) throw PipelineError("teacher", "pool has no tags to pre-train on");
    auto init = SoftmaxClassifier::initialized(num_classes, dim,
                                               stage_seed(config.seed, Stage::kWeakInit));
    auto weak = train(std::move(init), weak_labels, pool,
                      with_seed(config.weak, stage_seed(config.seed, Stage::kWeakTrain)));
    teacher = fine_tune(std::move(weak.model), labeled,
                        with_seed(config.finetune, stage_seed(config.seed, Stage::kWeakFinetune)))
                  .model;
  }

  for (std::size_t round = 0; round < config.rounds; ++round) {
    RoundResult r{teacher, {}, SoftmaxClassifier(num_classes, dim),
                  SoftmaxClassifier(num_classes, dim), 0.0, 0.0, 0.0, {}, {}};
    r.teacher_accuracy = evaluate(teacher, test, config.eval_k);
    r.selected = select_examples(teacher, pool, config, round);
    if (r.selected.empty()) {
      throw PipelineError("student", "selected dataset is empty (pool size " +
                                         std::to_string(pool.size()) + ")");
    }
    auto init = SoftmaxClassifier::initialized(num_classes, dim,
                                               stage_seed(config.seed, Stage::kStudentInit, round));
    auto pre = train(std::move(init), r.selected, pool,
                     with_seed(config.student, stage_seed(config.seed, Stage::kStudentTrain, round)));
    r.pretrained = pre.model;
    r.pretrain_metrics = std::move(pre.metrics);
    auto ft = fine_tune(std::move(pre.model), labeled,
                        with_seed(config.finetune, stage_seed(config.seed, Stage::kFinetune, round)));
    r.finetuned = std::move(ft.model);
    r.finetune_metrics = std::move(ft.metrics);
    r.pretrained_accuracy = evaluate(r.pretrained, test, config.eval_k);
    r.finetuned_accuracy = evaluate(r.finetuned, test, config.eval_k);
    teacher = r.finetuned;
    result.rounds.push_back(std::move(r));
  }
  return result;
}

struct VariantOutcome {
  SelectionVariant variant = SelectionVariant::kBalancedRanked;
  std::size_t budget = 0;
  std::size_t selected = 0;
  std::vector<std::size_t> per_class;
  double pretrained_accuracy = 0.0;
  double finetuned_accuracy = 0.0;
};

struct VariantStudy {
  double baseline_accuracy = 0.0;
  double teacher_accuracy = 0.0;
  std::vector<VariantOutcome> outcomes;
};

/**
 * Builds an equal-budget D-hat (L * K entries) with each selection variant
 * from one shared teacher, then pre-trains and fine-tunes a student per
 * variant. Shortfalls against the budget (classes with too few candidates)
 * show up as `selected < budget`.
 */
inline VariantStudy run_variant_study(const LabeledDataset& labeled, const UnlabeledPool& pool,
                                      const LabeledDataset& test, const PipelineConfig& base) {
  base.validate();
  if (!pool.tagged()) throw DataError("variant study: balanced_with_tags needs a tagged pool");
  const std::size_t num_classes = labeled.num_classes();
  const std::size_t dim = labeled.dim();
  VariantStudy study;
  const auto baseline = train_supervised_baseline(labeled, base).model;
  study.baseline_accuracy = evaluate(baseline, test, base.eval_k);
  study.teacher_accuracy = study.baseline_accuracy;
  for (auto variant : {SelectionVariant::kBalancedRanked, SelectionVariant::kUnbalancedRanked,
                       SelectionVariant::kBalancedWithTags}) {
    PipelineConfig config = base;
    config.selection.variant = variant;
    config.selection.per_class_budget.reset();
    VariantOutcome out;
    out.variant = variant;
    out.budget = config.selection.k * num_classes;
    const auto selected = select_examples(baseline, pool, config);
    out.selected = selected.size();
    out.per_class = selected.class_counts(num_classes);
    if (selected.empty()) throw PipelineError("student", "variant selected no examples");
    auto init = SoftmaxClassifier::initialized(num_classes, dim,
                                               stage_seed(config.seed, Stage::kStudentInit));
    auto pre = train(std::move(init), selected, pool,
                     with_seed(config.student, stage_seed(config.seed, Stage::kStudentTrain)));
    out.pretrained_accuracy = evaluate(pre.model, test, config.eval_k);
    auto ft = fine_tune(std::move(pre.model), labeled,
                        with_seed(config.finetune, stage_seed(config.seed, Stage::kFinetune)));
    out.finetuned_accuracy = evaluate(ft.model, test, config.eval_k);
    study.outcomes.push_back(std::move(out));
  }
  return study;
}

/// Seeded random subset of the pool holding round(fraction * size) examples,
/// kept in pool order.
inline UnlabeledPool subsample_pool(const UnlabeledPool& pool, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("subsample: fraction outside (0,1]");
  const auto keep = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pool.size())));
  std::vector<std::size_t> index(pool.size());
  for (std::size_t i = 0; i < index.size(); ++i) index[i] = i;
  Rng rng(derive_seed(seed, 0x737562));
  for (std::size_t i = 0; i < keep; ++i) {
    std::swap(index[i], index[i + static_cast<std::size_t>(rng.below(index.size() - i))]);
  }
  index.resize(keep);
  std::sort(index.begin(), index.end());
  std::unordered_set<ExampleId> dropped(pool.ids().begin(), pool.ids().end());
  for (std::size_t i : index) dropped.erase(pool.id(i));
  return pool.without(dropped);
}

struct SweepPoint {
  double fraction = 1.0;
  std::size_t pool_size = 0;
  std::size_t k = 0;
  std::size_t selected = 0;
  double baseline_accuracy = 0.0;
  double finetuned_accuracy = 0.0;
};

/// Accuracy as a function of K with everything else fixed.
inline std::vector<SweepPoint> run_k_sweep(const LabeledDataset& labeled, const UnlabeledPool& pool,
                                           const LabeledDataset& test, const PipelineConfig& base,
                                           std::span<const std::size_t> ks) {
  std::vector<SweepPoint> out;
  for (std::size_t k : ks) {
    PipelineConfig config = base;
    config.selection.k = k;
    const auto r = run_pipeline(labeled, pool, test, config);
    out.push_back({1.0, r.pool_size, k, r.last().selected.size(), r.baseline_accuracy,
                   r.last().finetuned_accuracy});
  }
  return out;
}

/// Accuracy as a function of |U|, scaling K with the pool fraction.
inline std::vector<SweepPoint> run_pool_size_sweep(const LabeledDataset& labeled,
                                                   const UnlabeledPool& pool,
                                                   const LabeledDataset& test,
                                                   const PipelineConfig& base,
                                                   std::span<const double> fractions) {
  std::vector<SweepPoint> out;
  for (double f : fractions) {
    PipelineConfig config = base;
    config.selection.k = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(base.selection.k) * f)));
    const auto sub = subsample_pool(pool, f, base.seed);
    const auto r = run_pipeline(labeled, sub, test, config);
    out.push_back({f, sub.size(), config.selection.k, r.last().selected.size(),
                   r.baseline_accuracy, r.last().finetuned_accuracy});
  }
  return out;
}

}  // namespace semisup

#endif  // SEMISUP_PIPELINE_HPP

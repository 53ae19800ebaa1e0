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

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "semisup/trainer.hpp"
#include "support/oracles.hpp"

namespace semisup {
namespace {

TrainConfig constant_lr(double lr, std::size_t batch, std::size_t images, double wd = 0.0) {
  TrainConfig c = TrainConfig::with_defaults(ScheduleKind::kPretrain, batch, images, 1);
  c.schedule.base_lr = lr;
  c.schedule.peak_lr = lr;
  c.weight_decay = wd;
  return c;
}

LabeledDataset separable_toy(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  LabeledDataset d(2, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const ClassIndex label = static_cast<ClassIndex>(i % 2);
    const float x0 = static_cast<float>((label == 0 ? 1.0 : -1.0) * (1.0 + rng.uniform()));
    const float x1 = static_cast<float>(2.0 * rng.uniform() - 1.0);
    const float x[] = {x0, x1};
    d.add(ExampleId{i}, x, label);
  }
  return d;
}

double train_accuracy(const SoftmaxClassifier& m, const LabeledDataset& d) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < d.size(); ++i) hits += predict_topk(m, d.features(i), 1)[0].label == d.label(i);
  return static_cast<double>(hits) / static_cast<double>(d.size());
}

TEST(LrSchedule, HandEnumeratedPoints) {
  LrSchedule s;
  s.base_lr = 0.05;
  s.peak_lr = 0.4;
  s.total_steps = 150;
  s.warmup_steps = 10;
  s.num_reductions = 13;
  s.reduction_factor = 0.5;
  s.validate();
  const std::size_t expected_points[] = {20, 30, 40, 50, 60, 70, 80, 90, 100, 110, 120, 130, 140};
  for (std::size_t i = 1; i <= 13; ++i) EXPECT_EQ(s.reduction_point(i), expected_points[i - 1]);
  EXPECT_EQ(lr_at(s, 0), 0.05);
  EXPECT_EQ(lr_at(s, 9), 0.4);
  EXPECT_EQ(lr_at(s, 10), 0.4);
  EXPECT_EQ(lr_at(s, 19), 0.4);
  EXPECT_EQ(lr_at(s, 25), 0.2);
  EXPECT_EQ(lr_at(s, 149), 0.4 / 8192.0);
  EXPECT_THROW(lr_at(s, 150), ConfigError);
}

TEST(LrSchedule, ZeroWarmupStartsAtPeak) {
  auto s = LrSchedule::finetune(256, 100);
  EXPECT_EQ(s.warmup_steps, 0u);
  EXPECT_EQ(lr_at(s, 0), s.peak_lr);
  EXPECT_DOUBLE_EQ(s.peak_lr, 0.00025);
}

TEST(LrSchedule, PretrainDefaultsEndAfterThirteenHalvings) {
  const auto s = LrSchedule::pretrain(1536, 20000);
  EXPECT_DOUBLE_EQ(s.peak_lr, 0.6);
  EXPECT_EQ(s.warmup_steps, 1000u);
  EXPECT_EQ(lr_at(s, 19999), s.peak_lr / 8192.0);
}

TEST(LrSchedule, MatchesOracleAndIsMonotoneAfterWarmup) {
  Rng rng(14);
  for (int trial = 0; trial < 200; ++trial) {
    LrSchedule s;
    s.total_steps = 2 + rng.below(400);
    s.warmup_steps = rng.below(s.total_steps);
    s.num_reductions = 1 + rng.below(15);
    s.reduction_factor = rng.bernoulli(0.5) ? 0.5 : 0.1;
    s.base_lr = rng.uniform();
    s.peak_lr = rng.uniform();
    for (std::size_t t = 0; t < s.total_steps; ++t) {
      const double ref = oracle::lr(s.base_lr, s.peak_lr, s.warmup_steps, s.total_steps,
                                    s.num_reductions, s.reduction_factor, t);
      ASSERT_NEAR(lr_at(s, t), ref, 1e-14 * std::max(1.0, ref));
      if (t > s.warmup_steps) {
        ASSERT_LE(lr_at(s, t), lr_at(s, t - 1));
      }
    }
  }
}

TEST(LrSchedule, RealizesEveryReductionWhenLongEnough) {
  auto s = LrSchedule::pretrain(256, 5000);
  std::set<double> values;
  for (std::size_t t = s.warmup_steps; t < s.total_steps; ++t) values.insert(lr_at(s, t));
  EXPECT_EQ(values.size(), s.num_reductions + 1);
}

TEST(LrSchedule, ValidationRejectsBadSchedules) {
  LrSchedule s;
  s.total_steps = 10;
  s.warmup_steps = 10;
  EXPECT_THROW(s.validate(), ConfigError);
  s.warmup_steps = 0;
  s.reduction_factor = 1.0;
  EXPECT_THROW(s.validate(), ConfigError);
  s.reduction_factor = 0.5;
  s.num_reductions = 0;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(TrainConfig, StepCountMustMatchSchedule) {
  auto c = TrainConfig::with_defaults(ScheduleKind::kPretrain, 32, 100, 0);
  EXPECT_EQ(c.total_steps(), 4u);
  c.validate();
  c.total_images = 200;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Train, ZeroLearningRateLeavesParametersUnchanged) {
  const auto d = separable_toy(20, 1);
  const auto init = SoftmaxClassifier::initialized(2, 2, 5);
  auto cfg = constant_lr(0.0, 20, 20, 1e-4);
  EXPECT_EQ(train(init, d, cfg).model, init);
}

TEST(Train, StationaryBatchLeavesParametersUnchanged) {
  LabeledDataset d(3, 2);
  const float x[] = {0.3f, -1.0f, 2.0f};
  d.add(ExampleId{0}, x, 0);
  d.add(ExampleId{1}, x, 1);
  const SoftmaxClassifier zero(2, 3);
  EXPECT_EQ(train(zero, d, constant_lr(0.5, 2, 10)).model, zero);
}

TEST(Train, OneStepMovesByMinusLrTimesGradient) {
  const auto d = separable_toy(16, 3);
  const auto init = SoftmaxClassifier::initialized(2, 2, 4);
  auto cfg = constant_lr(0.25, 16, 16);
  cfg.shuffle = false;
  const auto samples = samples_of(d);
  const auto g = loss_and_grad(init, samples);
  const auto trained = train(init, d, cfg).model;
  // With a single step every reduction point lands on step 0.
  const double lr = 0.25 * std::pow(0.5, 13);
  ASSERT_EQ(lr_at(cfg.schedule, 0), lr);
  for (std::size_t i = 0; i < g.grad.weights.size(); ++i) {
    EXPECT_EQ(trained.weights()[i], init.weights()[i] - lr * (g.grad.weights[i] + 0.0));
  }
  for (std::size_t i = 0; i < g.grad.bias.size(); ++i) {
    EXPECT_EQ(trained.bias()[i], init.bias()[i] - lr * (g.grad.bias[i] + 0.0));
  }
}

TEST(Train, WeightDecayAppliesToBiasToo) {
  SoftmaxClassifier m(2, 1);
  m.bias()[0] = 1.0;
  m.bias()[1] = 1.0;
  LabeledDataset d(1, 2);
  const float x[] = {0.0f};
  d.add(ExampleId{0}, x, 0);
  d.add(ExampleId{1}, x, 1);
  const auto cfg = constant_lr(0.1, 2, 2, 0.5);
  const auto out = train(m, d, cfg).model;
  EXPECT_DOUBLE_EQ(out.bias()[0], 1.0 - lr_at(cfg.schedule, 0) * 0.5);
}

TEST(Train, SeparableToyReachesFullTrainingAccuracy) {
  const auto d = separable_toy(200, 9);
  const auto cfg = TrainConfig::with_defaults(ScheduleKind::kPretrain, 32, 10000, 2);
  const auto r = train(SoftmaxClassifier::initialized(2, 2, 1), d, cfg);
  EXPECT_EQ(train_accuracy(r.model, d), 1.0);
}

TEST(Train, BitwiseDeterministic) {
  const auto d = separable_toy(100, 2);
  const auto cfg = constant_lr(0.1, 7, 1000, 1e-4);
  const auto init = SoftmaxClassifier::initialized(2, 2, 8);
  const auto a = train(init, d, cfg);
  const auto b = train(init, d, cfg);
  EXPECT_EQ(a.model, b.model);
  auto other = cfg;
  other.seed = 99;
  EXPECT_FALSE(train(init, d, other).model == a.model);
}

TEST(Train, BudgetIsCountedInImages) {
  const auto d = separable_toy(10, 2);
  const auto r = train(SoftmaxClassifier(2, 2), d, constant_lr(0.1, 4, 25));
  ASSERT_EQ(r.metrics.size(), 3u);
  EXPECT_EQ(r.metrics.back().images_seen, 25u);
  for (std::size_t i = 0; i < r.metrics.size(); ++i) EXPECT_EQ(r.metrics[i].epoch, i);
  const auto j = to_json(r.metrics.front());
  EXPECT_EQ(j.begin().key(), "epoch");
  EXPECT_TRUE(j.contains("loss") && j.contains("lr") && j.contains("images_seen"));
}

TEST(Train, ReplicatedIdsAreIndependentExamples) {
  UnlabeledPool pool(1, 2);
  const float x[] = {1.0f};
  pool.add(ExampleId{5}, x);
  ConstructedDataset data;
  data.add({ExampleId{5}, 0, 0.6});
  data.add({ExampleId{5}, 1, 0.4});
  const auto samples = samples_of(data, pool);
  ASSERT_EQ(samples.size(), 2u);
  EXPECT_EQ(samples[0].label, 0u);
  EXPECT_EQ(samples[1].label, 1u);
  ConstructedDataset missing;
  missing.add({ExampleId{6}, 0, 1.0});
  EXPECT_THROW(samples_of(missing, pool), DataError);
}

TEST(Train, Errors) {
  LabeledDataset empty(2, 2);
  EXPECT_THROW(train(SoftmaxClassifier(2, 2), empty, constant_lr(0.1, 2, 2)), DataError);
  const auto d = separable_toy(10, 1);
  EXPECT_THROW(train(SoftmaxClassifier(2, 3), d, constant_lr(0.1, 2, 2)), DataError);
  SoftmaxClassifier huge(2, 2);
  for (double& w : huge.weights()) w = 1e308;
  huge.weights()[0] = -1e308;
  EXPECT_THROW(train(huge, d, constant_lr(0.1, 10, 30)), NumericError);
}

TEST(FineTune, RequiresFinetuneScheduleAndZeroLrIsIdentity) {
  const auto d = separable_toy(40, 4);
  const auto init = SoftmaxClassifier::initialized(2, 2, 3);
  EXPECT_THROW(fine_tune(init, d, constant_lr(0.1, 8, 40)), ConfigError);
  auto cfg = TrainConfig::with_defaults(ScheduleKind::kFinetune, 8, 40, 0);
  cfg.schedule.base_lr = cfg.schedule.peak_lr = 0.0;
  EXPECT_EQ(fine_tune(init, d, cfg).model, init);
}

TEST(FineTune, FromScratchBehavesLikeTrain) {
  const auto d = separable_toy(200, 6);
  auto cfg = TrainConfig::with_defaults(ScheduleKind::kFinetune, 32, 10000, 2);
  cfg.schedule.base_lr = cfg.schedule.peak_lr = 0.05;
  const auto r = fine_tune(SoftmaxClassifier::initialized(2, 2, 1), d, cfg);
  EXPECT_EQ(train_accuracy(r.model, d), 1.0);
}

}  // namespace
}  // namespace semisup

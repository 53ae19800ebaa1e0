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

// Teacher/student walk-through on a small synthetic task, one stage at a time.

#include <cstdio>

#include "semisup/semisup.hpp"

using namespace semisup;

int main() {
  SyntheticTask task;
  task.mixture.num_classes = 5;
  task.mixture.dim = 16;
  task.mixture.separation = 2.5;
  task.n_labeled = 300;
  task.n_pool = 20000;
  task.n_test = 2000;
  task.seed = 1;
  const auto data = generate_task(task);
  const auto& pool = data.pool.pool;

  PipelineConfig config;
  config.seed = 1;
  config.teacher = TrainConfig::with_defaults(ScheduleKind::kPretrain, 32, 10000, 0);
  config.teacher.schedule.base_lr = config.teacher.schedule.peak_lr = 0.1;
  config.student = TrainConfig::with_defaults(ScheduleKind::kPretrain, 32, 40000, 0);
  config.student.schedule.base_lr = config.student.schedule.peak_lr = 0.1;
  config.finetune = TrainConfig::with_defaults(ScheduleKind::kFinetune, 32, 5000, 0);
  config.finetune.schedule.base_lr = config.finetune.schedule.peak_lr = 0.03;
  config.selection.k = 1000;
  config.selection.p = 2;
  config.validate();

  const auto teacher = train_supervised_baseline(data.labeled, config).model;
  std::printf("teacher           top-1 %.4f\n", evaluate(teacher, data.test, 1));

  const auto selected = select_examples(teacher, pool, config);
  std::printf("selected          %zu (id, label) pairs from a pool of %zu\n", selected.size(),
              pool.size());

  auto student = SoftmaxClassifier::initialized(
      pool.num_classes(), pool.dim(), stage_seed(config.seed, Stage::kStudentInit));
  student = train(std::move(student), selected, pool,
                  with_seed(config.student, stage_seed(config.seed, Stage::kStudentTrain)))
                .model;
  std::printf("student           top-1 %.4f\n", evaluate(student, data.test, 1));

  student = fine_tune(std::move(student), data.labeled,
                      with_seed(config.finetune, stage_seed(config.seed, Stage::kFinetune)))
                .model;
  std::printf("student, tuned    top-1 %.4f\n", evaluate(student, data.test, 1));
  return 0;
}

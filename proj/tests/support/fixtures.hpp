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

#pragma once

#include "semisup/semisup.hpp"

namespace semisup::testing {

inline TrainConfig flat(ScheduleKind kind, std::size_t batch, std::size_t images, double lr) {
  auto c = TrainConfig::with_defaults(kind, batch, images, 0);
  c.schedule.base_lr = lr;
  c.schedule.peak_lr = lr;
  return c;
}

/// A task small enough for unit tests to run whole pipelines.
inline SyntheticTask small_task(std::uint64_t seed, double tag_noise = 0.2) {
  SyntheticTask t;
  t.mixture.num_classes = 4;
  t.mixture.dim = 8;
  t.mixture.separation = 2.5;
  t.mixture.tag_noise = tag_noise;
  t.mixture.means_seed = seed;
  t.n_labeled = 200;
  t.n_pool = 3000;
  t.n_test = 1000;
  t.seed = seed;
  return t;
}

inline PipelineConfig small_config(std::uint64_t seed) {
  PipelineConfig c;
  c.seed = seed;
  c.teacher = flat(ScheduleKind::kPretrain, 32, 4000, 0.1);
  c.student = flat(ScheduleKind::kPretrain, 32, 8000, 0.1);
  c.weak = c.student;
  c.finetune = flat(ScheduleKind::kFinetune, 32, 2000, 0.03);
  c.selection.k = 200;
  c.selection.p = 2;
  return c;
}

}  // namespace semisup::testing

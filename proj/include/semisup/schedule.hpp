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

#ifndef SEMISUP_SCHEDULE_HPP
#define SEMISUP_SCHEDULE_HPP

#include <cmath>
#include <cstddef>
#include <string>

#include "semisup/error.hpp"

namespace semisup {

enum class ScheduleKind { kPretrain, kFinetune };

/**
 * Linear warm-up followed by step decay.
 *
 * For t < W the rate moves linearly from base_lr to peak_lr, reaching peak_lr
 * at t = W - 1. After warm-up the rate is peak_lr * factor^r, where r counts
 * the reduction points W + floor((T - W) * i / (R + 1)), i = 1..R, that are
 * <= t. The points are equally spaced strictly inside (W, T).
 */
struct LrSchedule {
  ScheduleKind kind = ScheduleKind::kPretrain;
  double base_lr = 0.1;
  double peak_lr = 0.1;
  std::size_t warmup_steps = 0;
  std::size_t total_steps = 1;
  std::size_t num_reductions = 13;
  double reduction_factor = 0.5;

  /// Pre-training defaults: warm-up from 0.1 to 0.1 * batch / 256 over 5% of
  /// the steps, then 13 halvings.
  static LrSchedule pretrain(std::size_t batch_size, std::size_t total_steps) {
    LrSchedule s;
    s.kind = ScheduleKind::kPretrain;
    s.base_lr = 0.1;
    s.peak_lr = 0.1 * static_cast<double>(batch_size) / 256.0;
    s.total_steps = total_steps;
    s.warmup_steps = default_warmup(total_steps);
    s.num_reductions = 13;
    s.reduction_factor = 0.5;
    return s;
  }

  /// Fine-tuning defaults: constant 0.00025 * batch / 256, three reductions by 0.1.
  static LrSchedule finetune(std::size_t batch_size, std::size_t total_steps) {
    LrSchedule s;
    s.kind = ScheduleKind::kFinetune;
    s.peak_lr = 0.00025 * static_cast<double>(batch_size) / 256.0;
    s.base_lr = s.peak_lr;
    s.total_steps = total_steps;
    s.warmup_steps = 0;
    s.num_reductions = 3;
    s.reduction_factor = 0.1;
    return s;
  }

  /// 5% of the steps, kept below total_steps.
  static std::size_t default_warmup(std::size_t total_steps) {
    const std::size_t w = total_steps / 20;
    return w < total_steps ? w : 0;
  }

  void validate() const {
    if (total_steps == 0) throw ConfigError("schedule: total_steps must be positive");
    if (warmup_steps >= total_steps) {
      throw ConfigError("schedule: warmup_steps (" + std::to_string(warmup_steps) +
                        ") must be < total_steps (" + std::to_string(total_steps) + ")");
    }
    if (num_reductions < 1) throw ConfigError("schedule: num_reductions must be >= 1");
    if (!(reduction_factor > 0.0 && reduction_factor < 1.0)) {
      throw ConfigError("schedule: reduction_factor must lie in (0,1)");
    }
    // Zero rates are allowed so that "train with no effective update" is expressible.
    if (!(peak_lr >= 0.0) || !std::isfinite(peak_lr)) {
      throw ConfigError("schedule: peak_lr must be a non-negative number");
    }
    if (!(base_lr >= 0.0) || !std::isfinite(base_lr)) {
      throw ConfigError("schedule: base_lr must be a non-negative number");
    }
  }

  /// Step of the i-th reduction, 1 <= i <= num_reductions.
  std::size_t reduction_point(std::size_t i) const {
    return warmup_steps + (total_steps - warmup_steps) * i / (num_reductions + 1);
  }

  std::size_t reductions_applied(std::size_t t) const {
    std::size_t r = 0;
    for (std::size_t i = 1; i <= num_reductions; ++i) {
      if (t >= reduction_point(i)) ++r;
    }
    return r;
  }

  double at(std::size_t t) const {
    if (t >= total_steps) {
      throw ConfigError("schedule: step " + std::to_string(t) + " outside [0, " +
                        std::to_string(total_steps) + ")");
    }
    if (t < warmup_steps) {
      const std::size_t span = warmup_steps > 1 ? warmup_steps - 1 : 1;
      return base_lr + (peak_lr - base_lr) * static_cast<double>(t) / static_cast<double>(span);
    }
    return peak_lr * std::pow(reduction_factor, static_cast<double>(reductions_applied(t)));
  }
};

inline double lr_at(const LrSchedule& schedule, std::size_t t) { return schedule.at(t); }

}  // namespace semisup

#endif  // SEMISUP_SCHEDULE_HPP

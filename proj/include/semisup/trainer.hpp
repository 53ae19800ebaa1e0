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

#ifndef SEMISUP_TRAINER_HPP
#define SEMISUP_TRAINER_HPP

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semisup/classifier.hpp"
#include "semisup/dataset.hpp"
#include "semisup/error.hpp"
#include "semisup/rng.hpp"
#include "semisup/schedule.hpp"

namespace semisup {

/// SGD settings. The budget is counted in images processed, not epochs.
struct TrainConfig {
  LrSchedule schedule;
  double weight_decay = 0.0001;
  std::size_t batch_size = 64;
  std::size_t total_images = 64;
  std::uint64_t seed = 0;
  bool shuffle = true;

  std::size_t total_steps() const {
    return batch_size == 0 ? 0 : (total_images + batch_size - 1) / batch_size;
  }

  void validate() const {
    if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
    if (total_images == 0) throw ConfigError("train: total_images must be positive");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
      throw ConfigError("train: weight_decay must be >= 0");
    }
    schedule.validate();
    if (schedule.total_steps != total_steps()) {
      throw ConfigError("train: schedule.total_steps (" + std::to_string(schedule.total_steps) +
                        ") != ceil(total_images / batch_size) (" +
                        std::to_string(total_steps()) + ")");
    }
  }

  /// Budget and batch with the default schedule of the given kind.
  static TrainConfig with_defaults(ScheduleKind kind, std::size_t batch_size,
                                   std::size_t total_images, std::uint64_t seed) {
    TrainConfig c;
    c.batch_size = batch_size;
    c.total_images = total_images;
    c.seed = seed;
    const std::size_t steps = c.total_steps();
    c.schedule = kind == ScheduleKind::kPretrain ? LrSchedule::pretrain(batch_size, steps)
                                                 : LrSchedule::finetune(batch_size, steps);
    return c;
  }
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
  std::size_t images_seen = 0;
};

inline nlohmann::ordered_json to_json(const EpochMetrics& m) {
  nlohmann::ordered_json j;
  j["epoch"] = m.epoch;
  j["loss"] = m.loss;
  j["lr"] = m.lr;
  j["images_seen"] = m.images_seen;
  return j;
}

struct TrainResult {
  SoftmaxClassifier model;
  std::vector<EpochMetrics> metrics;
};

inline std::vector<Sample> samples_of(const LabeledDataset& data) {
  std::vector<Sample> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out.push_back({data.features(i), data.label(i)});
  return out;
}

/// Resolves each (id, label) entry against the pool. Replicated ids become
/// independent samples.
inline std::vector<Sample> samples_of(const ConstructedDataset& data, const UnlabeledPool& pool) {
  std::vector<Sample> out;
  out.reserve(data.size());
  for (const auto& e : data.entries()) {
    const auto index = pool.index_of(e.id);
    if (!index) {
      throw DataError("constructed entry refers to id " + std::to_string(e.id.value) +
                      " which is not in the pool");
    }
    if (e.label >= pool.num_classes()) {
      throw DataError("constructed entry label " + std::to_string(e.label) + " >= num_classes");
    }
    out.push_back({pool.features(*index), e.label});
  }
  return out;
}

/// One SGD step: param <- param - lr * (grad + weight_decay * param), applied
/// to weights and bias alike. Returns the batch loss.
inline double sgd_step(SoftmaxClassifier& model, std::span<const Sample> batch, double lr,
                       double weight_decay) {
  const auto lg = loss_and_grad(model, batch);
  auto apply = [&](std::span<double> params, const std::vector<double>& grad) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      params[i] -= lr * (grad[i] + weight_decay * params[i]);
    }
  };
  apply(model.weights(), lg.grad.weights);
  apply(model.bias(), lg.grad.bias);
  return lg.loss;
}

/**
 * Minibatch SGD over `samples` for ceil(total_images / batch_size) steps.
 *
 * Samples are visited in passes; each pass is a fresh seeded permutation when
 * `shuffle` is set. A minibatch may straddle two passes. The final step takes
 * only the images left in the budget. One metrics record is emitted per
 * completed pass, plus one for a trailing partial pass.
 */
inline TrainResult train(SoftmaxClassifier model, std::span<const Sample> samples,
                         const TrainConfig& config) {
  config.validate();
  if (samples.empty()) throw DataError("train: empty dataset");
  for (const Sample& s : samples) {
    if (s.x.size() != model.dim()) {
      throw DataError("train: sample dim " + std::to_string(s.x.size()) + " != model dim " +
                      std::to_string(model.dim()));
    }
    if (s.label >= model.num_classes()) {
      throw DataError("train: label " + std::to_string(s.label) + " >= num_classes " +
                      std::to_string(model.num_classes()));
    }
  }

  Rng rng(derive_seed(config.seed, 0x73686666));
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (config.shuffle) rng.shuffle(std::span<std::size_t>(order));

  TrainResult result{std::move(model), {}};
  std::vector<Sample> batch;
  batch.reserve(config.batch_size);
  std::size_t cursor = 0;
  std::size_t images_seen = 0;
  double epoch_loss = 0.0;
  std::size_t epoch_images = 0;
  const std::size_t steps = config.total_steps();

  for (std::size_t step = 0; step < steps; ++step) {
    const std::size_t take = std::min(config.batch_size, config.total_images - images_seen);
    bool pass_done = false;
    batch.clear();
    for (std::size_t b = 0; b < take; ++b) {
      batch.push_back(samples[order[cursor]]);
      if (++cursor == order.size()) {
        cursor = 0;
        pass_done = true;
        if (config.shuffle) rng.shuffle(std::span<std::size_t>(order));
      }
    }
    const double lr = config.schedule.at(step);
    const double loss = sgd_step(result.model, batch, lr, config.weight_decay);
    if (!std::isfinite(loss) || !result.model.all_finite()) {
      throw NumericError("train: non-finite loss or parameters at step " + std::to_string(step) +
                         " (lr=" + std::to_string(lr) + ", images_seen=" +
                         std::to_string(images_seen) + ")");
    }
    images_seen += take;
    epoch_loss += loss * static_cast<double>(take);
    epoch_images += take;
    if (pass_done || step + 1 == steps) {
      result.metrics.push_back({result.metrics.size(), epoch_loss / static_cast<double>(epoch_images),
                                lr, images_seen});
      epoch_loss = 0.0;
      epoch_images = 0;
    }
  }
  return result;
}

inline TrainResult train(SoftmaxClassifier model, const LabeledDataset& data,
                         const TrainConfig& config) {
  if (data.dim() != model.dim()) throw DataError("train: dataset dim != model dim");
  const auto samples = samples_of(data);
  return train(std::move(model), samples, config);
}

inline TrainResult train(SoftmaxClassifier model, const ConstructedDataset& data,
                         const UnlabeledPool& pool, const TrainConfig& config) {
  if (pool.dim() != model.dim()) throw DataError("train: pool dim != model dim");
  const auto samples = samples_of(data, pool);
  return train(std::move(model), samples, config);
}

/// Continues training a pre-trained model on clean labeled data only. All
/// parameters stay trainable.
inline TrainResult fine_tune(SoftmaxClassifier model, const LabeledDataset& labeled,
                             const TrainConfig& config) {
  if (config.schedule.kind != ScheduleKind::kFinetune) {
    throw ConfigError("fine_tune: config must carry a finetune schedule");
  }
  return train(std::move(model), labeled, config);
}

}  // namespace semisup

#endif  // SEMISUP_TRAINER_HPP

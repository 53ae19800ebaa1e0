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

#ifndef SEMISUP_DATASET_HPP
#define SEMISUP_DATASET_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "semisup/error.hpp"

namespace semisup {

/// Stable example identifier, assigned by whoever creates the example and
/// never derived from storage position.
struct ExampleId {
  std::uint64_t value = 0;

  friend constexpr auto operator<=>(ExampleId, ExampleId) = default;
};

using ClassIndex = std::uint32_t;

}  // namespace semisup

template <>
struct std::hash<semisup::ExampleId> {
  std::size_t operator()(semisup::ExampleId id) const noexcept {
    return std::hash<std::uint64_t>{}(id.value);
  }
};

namespace semisup {

namespace detail {

inline void check_finite(std::span<const float> features, std::size_t dim, ExampleId id) {
  if (features.size() != dim) {
    throw DataError("example " + std::to_string(id.value) + ": feature length " +
                    std::to_string(features.size()) + " != dim " + std::to_string(dim));
  }
  for (std::size_t j = 0; j < features.size(); ++j) {
    if (!std::isfinite(features[j])) {
      throw DataError("example " + std::to_string(id.value) + ": non-finite feature at index " +
                      std::to_string(j));
    }
  }
}

}  // namespace detail

/// Labeled examples: dense float32 features with one ground-truth class each.
class LabeledDataset {
 public:
  LabeledDataset(std::size_t dim, std::size_t num_classes) : dim_(dim), num_classes_(num_classes) {
    if (dim == 0) throw ConfigError("LabeledDataset: dim must be positive");
    if (num_classes == 0) throw ConfigError("LabeledDataset: num_classes must be positive");
  }

  void add(ExampleId id, std::span<const float> features, ClassIndex label) {
    detail::check_finite(features, dim_, id);
    if (label >= num_classes_) {
      throw DataError("example " + std::to_string(id.value) + ": label " + std::to_string(label) +
                      " >= num_classes " + std::to_string(num_classes_));
    }
    if (!index_.emplace(id, ids_.size()).second) {
      throw DataError("duplicate example id " + std::to_string(id.value));
    }
    ids_.push_back(id);
    features_.insert(features_.end(), features.begin(), features.end());
    labels_.push_back(label);
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }

  ExampleId id(std::size_t i) const { return ids_[i]; }
  ClassIndex label(std::size_t i) const { return labels_[i]; }
  std::span<const float> features(std::size_t i) const {
    return std::span<const float>(features_).subspan(i * dim_, dim_);
  }

  std::span<const ExampleId> ids() const noexcept { return ids_; }
  std::span<const ClassIndex> labels() const noexcept { return labels_; }
  std::span<const float> raw_features() const noexcept { return features_; }

  std::optional<std::size_t> index_of(ExampleId id) const {
    if (auto it = index_.find(id); it != index_.end()) return it->second;
    return std::nullopt;
  }

  friend bool operator==(const LabeledDataset& a, const LabeledDataset& b) {
    return a.dim_ == b.dim_ && a.num_classes_ == b.num_classes_ && a.ids_ == b.ids_ &&
           a.labels_ == b.labels_ && bitwise_equal(a.features_, b.features_);
  }

 private:
  static bool bitwise_equal(const std::vector<float>& a, const std::vector<float>& b) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(),
                      [](float x, float y) { return std::bit_cast<std::uint32_t>(x) ==
                                                    std::bit_cast<std::uint32_t>(y); });
  }

  std::size_t dim_;
  std::size_t num_classes_;
  std::vector<ExampleId> ids_;
  std::vector<float> features_;
  std::vector<ClassIndex> labels_;
  std::unordered_map<ExampleId, std::size_t> index_;
};

/// Unlabeled examples, optionally annotated with weak tags (class indices).
///
/// `num_classes` bounds the tag indices. A pool built with `tagged = false`
/// rejects non-empty tag sets.
class UnlabeledPool {
 public:
  UnlabeledPool(std::size_t dim, std::size_t num_classes, bool tagged = false)
      : dim_(dim), num_classes_(num_classes), tagged_(tagged) {
    if (dim == 0) throw ConfigError("UnlabeledPool: dim must be positive");
    if (num_classes == 0) throw ConfigError("UnlabeledPool: num_classes must be positive");
  }

  void add(ExampleId id, std::span<const float> features, std::span<const ClassIndex> tags = {}) {
    detail::check_finite(features, dim_, id);
    if (!tags.empty() && !tagged_) {
      throw DataError("example " + std::to_string(id.value) + ": tags given for an untagged pool");
    }
    std::vector<ClassIndex> sorted(tags.begin(), tags.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    if (!sorted.empty() && sorted.back() >= num_classes_) {
      throw DataError("example " + std::to_string(id.value) + ": tag " +
                      std::to_string(sorted.back()) + " >= num_classes " +
                      std::to_string(num_classes_));
    }
    if (!index_.emplace(id, ids_.size()).second) {
      throw DataError("duplicate example id " + std::to_string(id.value));
    }
    ids_.push_back(id);
    features_.insert(features_.end(), features.begin(), features.end());
    tags_.insert(tags_.end(), sorted.begin(), sorted.end());
    tag_offsets_.push_back(tags_.size());
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  bool tagged() const noexcept { return tagged_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }

  ExampleId id(std::size_t i) const { return ids_[i]; }
  std::span<const float> features(std::size_t i) const {
    return std::span<const float>(features_).subspan(i * dim_, dim_);
  }
  /// Sorted, duplicate-free tag set of example i.
  std::span<const ClassIndex> tags(std::size_t i) const {
    return std::span<const ClassIndex>(tags_).subspan(tag_offsets_[i],
                                                       tag_offsets_[i + 1] - tag_offsets_[i]);
  }
  std::span<const ExampleId> ids() const noexcept { return ids_; }

  std::optional<std::size_t> index_of(ExampleId id) const {
    if (auto it = index_.find(id); it != index_.end()) return it->second;
    return std::nullopt;
  }

  /// Examples [begin, end) as a new pool, e.g. one shard of a larger pool.
  UnlabeledPool slice(std::size_t begin, std::size_t end) const {
    UnlabeledPool out(dim_, num_classes_, tagged_);
    end = std::min(end, size());
    for (std::size_t i = begin; i < end; ++i) out.add(ids_[i], features(i), tags(i));
    return out;
  }

  /// Copy without the examples whose ids are in `removed`. Order is kept.
  UnlabeledPool without(const std::unordered_set<ExampleId>& removed) const {
    UnlabeledPool out(dim_, num_classes_, tagged_);
    for (std::size_t i = 0; i < size(); ++i) {
      if (!removed.contains(ids_[i])) out.add(ids_[i], features(i), tags(i));
    }
    return out;
  }

  friend bool operator==(const UnlabeledPool& a, const UnlabeledPool& b) {
    if (a.dim_ != b.dim_ || a.num_classes_ != b.num_classes_ || a.tagged_ != b.tagged_ ||
        a.ids_ != b.ids_ || a.tags_ != b.tags_ || a.tag_offsets_ != b.tag_offsets_ ||
        a.features_.size() != b.features_.size()) {
      return false;
    }
    for (std::size_t i = 0; i < a.features_.size(); ++i) {
      if (std::bit_cast<std::uint32_t>(a.features_[i]) !=
          std::bit_cast<std::uint32_t>(b.features_[i])) {
        return false;
      }
    }
    return true;
  }

 private:
  std::size_t dim_;
  std::size_t num_classes_;
  bool tagged_;
  std::vector<ExampleId> ids_;
  std::vector<float> features_;
  std::vector<ClassIndex> tags_;
  std::vector<std::size_t> tag_offsets_{0};
  std::unordered_map<ExampleId, std::size_t> index_;
};

struct ConstructedEntry {
  ExampleId id;
  ClassIndex label = 0;
  double score = 0.0;

  friend bool operator==(const ConstructedEntry&, const ConstructedEntry&) = default;
};

/// Pseudo-labeled selection drawn from a pool. An id may appear under several
/// labels (replication), but each (id, label) pair at most once.
class ConstructedDataset {
 public:
  ConstructedDataset() = default;

  explicit ConstructedDataset(std::vector<ConstructedEntry> entries) {
    for (const auto& e : entries) add(e);
  }

  void add(const ConstructedEntry& entry) {
    if (!(entry.score >= 0.0 && entry.score <= 1.0)) {
      throw DataError("constructed entry " + std::to_string(entry.id.value) + ": score " +
                      std::to_string(entry.score) + " outside [0,1]");
    }
    if (!pairs_.insert(pair_key(entry.id, entry.label)).second) {
      throw DataError("duplicate (id, label) pair (" + std::to_string(entry.id.value) + ", " +
                      std::to_string(entry.label) + ")");
    }
    entries_.push_back(entry);
  }

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::span<const ConstructedEntry> entries() const noexcept { return entries_; }
  const ConstructedEntry& operator[](std::size_t i) const { return entries_[i]; }

  /// Entry count per label, length num_classes.
  std::vector<std::size_t> class_counts(std::size_t num_classes) const {
    std::vector<std::size_t> counts(num_classes, 0);
    for (const auto& e : entries_) {
      if (e.label < num_classes) ++counts[e.label];
    }
    return counts;
  }

  friend bool operator==(const ConstructedDataset& a, const ConstructedDataset& b) {
    return a.entries_ == b.entries_;
  }

 private:
  struct PairHash {
    std::size_t operator()(const std::pair<std::uint64_t, ClassIndex>& p) const noexcept {
      return std::hash<std::uint64_t>{}(p.first * 0x9E3779B97F4A7C15ULL ^ p.second);
    }
  };
  static std::pair<std::uint64_t, ClassIndex> pair_key(ExampleId id, ClassIndex label) {
    return {id.value, label};
  }

  std::vector<ConstructedEntry> entries_;
  std::unordered_set<std::pair<std::uint64_t, ClassIndex>, PairHash> pairs_;
};

}  // namespace semisup

#endif  // SEMISUP_DATASET_HPP

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

#ifndef SEMISUP_SELECTOR_HPP
#define SEMISUP_SELECTOR_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "semisup/classifier.hpp"
#include "semisup/dataset.hpp"
#include "semisup/error.hpp"
#include "semisup/rng.hpp"

namespace semisup {

enum class SelectionVariant { kBalancedRanked, kUnbalancedRanked, kBalancedWithTags };

inline const char* to_string(SelectionVariant v) {
  switch (v) {
    case SelectionVariant::kBalancedRanked:
      return "balanced_ranked";
    case SelectionVariant::kUnbalancedRanked:
      return "unbalanced_ranked";
    case SelectionVariant::kBalancedWithTags:
      return "balanced_with_tags";
  }
  return "unknown";
}

inline SelectionVariant parse_variant(const std::string& name) {
  if (name == "balanced_ranked") return SelectionVariant::kBalancedRanked;
  if (name == "unbalanced_ranked") return SelectionVariant::kUnbalancedRanked;
  if (name == "balanced_with_tags") return SelectionVariant::kBalancedWithTags;
  throw ConfigError("unknown selection variant \"" + name + "\"");
}

struct SelectionConfig {
  std::size_t k = 1000;
  std::size_t p = 10;
  SelectionVariant variant = SelectionVariant::kBalancedRanked;
  /// Per-class list capacities; required for unbalanced_ranked.
  std::optional<std::vector<std::size_t>> per_class_budget;

  void validate(std::size_t num_classes) const {
    if (k == 0) throw ConfigError("selection: K must be positive");
    if (p < 1 || p > num_classes) {
      throw ConfigError("selection: P=" + std::to_string(p) + " outside [1, " +
                        std::to_string(num_classes) + "]");
    }
    if (variant == SelectionVariant::kUnbalancedRanked) {
      if (!per_class_budget) throw ConfigError("selection: unbalanced_ranked needs per_class_budget");
      if (per_class_budget->size() != num_classes) {
        throw ConfigError("selection: per_class_budget length != num_classes");
      }
      for (std::size_t b : *per_class_budget) {
        if (b == 0) throw ConfigError("selection: per_class_budget entries must be positive");
      }
      const std::size_t sum =
          std::accumulate(per_class_budget->begin(), per_class_budget->end(), std::size_t{0});
      if (sum != k * num_classes) {
        throw ConfigError("selection: per_class_budget sums to " + std::to_string(sum) +
                          ", expected the total budget K*L = " + std::to_string(k * num_classes));
      }
    }
  }

  /// List capacity per class.
  std::vector<std::size_t> capacities(std::size_t num_classes) const {
    validate(num_classes);
    if (variant == SelectionVariant::kUnbalancedRanked) return *per_class_budget;
    return std::vector<std::size_t>(num_classes, k);
  }

  std::size_t total_budget(std::size_t num_classes) const {
    const auto caps = capacities(num_classes);
    return std::accumulate(caps.begin(), caps.end(), std::size_t{0});
  }
};

/// Keeps the P largest entries of a softmax vector, descending, ties by lower
/// class index.
inline std::vector<ClassScore> top_p_truncate(std::span<const double> probs, std::size_t p) {
  if (probs.empty()) throw DataError("top_p_truncate: empty score vector");
  if (p < 1 || p > probs.size()) {
    throw ConfigError("top_p_truncate: P=" + std::to_string(p) + " outside [1, " +
                      std::to_string(probs.size()) + "]");
  }
  double total = 0.0;
  for (double v : probs) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw DataError("top_p_truncate: score outside [0,1]");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw DataError("top_p_truncate: scores sum to " + std::to_string(total) + ", expected 1");
  }
  return top_k_scores(probs, p);
}

struct RankedEntry {
  ExampleId id;
  double score = 0.0;

  friend bool operator==(const RankedEntry& a, const RankedEntry& b) {
    return a.id == b.id &&
           std::bit_cast<std::uint64_t>(a.score) == std::bit_cast<std::uint64_t>(b.score);
  }
};

/// Ranking order: higher score first, equal scores by ascending id.
inline bool ranks_before(const RankedEntry& a, const RankedEntry& b) noexcept {
  return a.score > b.score || (a.score == b.score && a.id < b.id);
}

/**
 * Bounded shortlist for one class.
 *
 * Internally a binary heap whose front is the lowest-ranked retained entry, so
 * each offer costs O(log capacity) and memory never exceeds `capacity`.
 */
class RankedList {
 public:
  RankedList(ClassIndex label, std::size_t capacity) : label_(label), capacity_(capacity) {
    heap_.reserve(std::min<std::size_t>(capacity, 1 << 16));
  }

  /// Builds a list from entries in any order; keeps the best `capacity`.
  static RankedList from_entries(ClassIndex label, std::size_t capacity,
                                 std::span<const RankedEntry> entries) {
    RankedList list(label, capacity);
    std::unordered_set<ExampleId> ids;
    for (const auto& e : entries) {
      if (!ids.insert(e.id).second) {
        throw DataError("ranked list " + std::to_string(label) + ": duplicate id " +
                        std::to_string(e.id.value));
      }
      list.offer(e);
    }
    return list;
  }

  /// Returns true when the retained size grew.
  bool offer(const RankedEntry& entry) {
    if (!(entry.score >= 0.0 && entry.score <= 1.0)) {
      throw DataError("ranked list " + std::to_string(label_) + ": score outside [0,1]");
    }
    if (capacity_ == 0) return false;
    if (heap_.size() < capacity_) {
      heap_.push_back(entry);
      std::push_heap(heap_.begin(), heap_.end(), ranks_before);
      return true;
    }
    if (ranks_before(entry, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), ranks_before);
      heap_.back() = entry;
      std::push_heap(heap_.begin(), heap_.end(), ranks_before);
    }
    return false;
  }

  ClassIndex label() const noexcept { return label_; }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return heap_.size(); }
  bool empty() const noexcept { return heap_.empty(); }

  /// Retained entries in ranking order.
  std::vector<RankedEntry> sorted() const {
    std::vector<RankedEntry> out(heap_);
    std::sort(out.begin(), out.end(), ranks_before);
    return out;
  }

  friend bool operator==(const RankedList& a, const RankedList& b) {
    return a.label_ == b.label_ && a.capacity_ == b.capacity_ && a.sorted() == b.sorted();
  }

 private:
  ClassIndex label_;
  std::size_t capacity_;
  std::vector<RankedEntry> heap_;
};

/// Merge of two shortlists built from disjoint parts of a stream. Equals the
/// list built from the concatenated stream.
inline RankedList merge_ranked_lists(const RankedList& a, const RankedList& b) {
  if (a.label() != b.label()) throw DataError("merge: class mismatch");
  if (a.capacity() != b.capacity()) throw DataError("merge: capacity mismatch");
  auto entries = a.sorted();
  const auto rhs = b.sorted();
  std::unordered_set<ExampleId> ids;
  for (const auto& e : entries) ids.insert(e.id);
  for (const auto& e : rhs) {
    if (ids.contains(e.id)) {
      throw DataError("merge: id " + std::to_string(e.id.value) + " present in both lists");
    }
  }
  entries.insert(entries.end(), rhs.begin(), rhs.end());
  return RankedList::from_entries(a.label(), a.capacity(), entries);
}

/// Per-class shortlists for one scoring shard.
class RankedListBank {
 public:
  RankedListBank(std::span<const std::size_t> capacities, std::size_t p,
                 bool check_unique_ids = true)
      : p_(p), check_unique_ids_(check_unique_ids) {
    if (capacities.empty()) throw ConfigError("ranked lists: need at least one class");
    if (p < 1 || p > capacities.size()) {
      throw ConfigError("ranked lists: P=" + std::to_string(p) + " outside [1, " +
                        std::to_string(capacities.size()) + "]");
    }
    lists_.reserve(capacities.size());
    for (std::size_t l = 0; l < capacities.size(); ++l) {
      lists_.emplace_back(static_cast<ClassIndex>(l), capacities[l]);
    }
  }

  RankedListBank(std::size_t num_classes, std::size_t k, std::size_t p)
      : RankedListBank(std::vector<std::size_t>(num_classes, k), p) {}

  /// Feeds one scored example: its softmax vector is P-truncated and each
  /// surviving class offers the example to that class's list.
  void offer(ExampleId id, std::span<const double> probs) {
    if (probs.size() != lists_.size()) {
      throw DataError("ranked lists: score vector length " + std::to_string(probs.size()) +
                      " != num_classes " + std::to_string(lists_.size()));
    }
    if (check_unique_ids_ && !seen_.insert(id).second) {
      throw DataError("ranked lists: duplicate id " + std::to_string(id.value) + " in stream");
    }
    for (const auto& cs : top_p_truncate(probs, p_)) {
      if (lists_[cs.label].offer({id, cs.score})) ++retained_;
    }
    peak_retained_ = std::max(peak_retained_, retained_);
    ++offered_;
  }

  std::size_t num_classes() const noexcept { return lists_.size(); }
  std::size_t p() const noexcept { return p_; }
  std::size_t offered() const noexcept { return offered_; }
  /// Largest number of entries held across all lists at any point.
  std::size_t peak_retained() const noexcept { return peak_retained_; }

  std::size_t total_capacity() const {
    std::size_t total = 0;
    for (const auto& l : lists_) total += l.capacity();
    return total;
  }

  const RankedList& list(std::size_t label) const { return lists_.at(label); }
  std::span<const RankedList> lists() const noexcept { return lists_; }

  std::vector<std::size_t> capacities() const {
    std::vector<std::size_t> out;
    for (const auto& l : lists_) out.push_back(l.capacity());
    return out;
  }

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> out;
    for (const auto& l : lists_) out.push_back(l.size());
    return out;
  }

  /// Folds another shard's bank into this one.
  void merge(const RankedListBank& other) {
    if (other.p_ != p_) throw DataError("merge: P mismatch");
    if (other.lists_.size() != lists_.size()) throw DataError("merge: class count mismatch");
    for (std::size_t l = 0; l < lists_.size(); ++l) {
      lists_[l] = merge_ranked_lists(lists_[l], other.lists_[l]);
    }
    offered_ += other.offered_;
    retained_ = 0;
    for (const auto& l : lists_) retained_ += l.size();
    peak_retained_ = std::max(peak_retained_, retained_);
  }

  friend bool operator==(const RankedListBank& a, const RankedListBank& b) {
    return a.p_ == b.p_ && a.lists_ == b.lists_;
  }

  /// Rebuilds a bank from stored lists (see ranked_lists_from_json).
  static RankedListBank from_lists(std::size_t p, std::vector<RankedList> lists,
                                   std::size_t offered = 0) {
    std::vector<std::size_t> caps;
    for (const auto& l : lists) caps.push_back(l.capacity());
    RankedListBank bank(caps, p, /*check_unique_ids=*/false);
    for (std::size_t l = 0; l < lists.size(); ++l) {
      if (lists[l].label() != l) throw DataError("ranked lists: labels out of order");
    }
    bank.lists_ = std::move(lists);
    bank.offered_ = offered;
    for (const auto& l : bank.lists_) bank.retained_ += l.size();
    bank.peak_retained_ = bank.retained_;
    return bank;
  }

 private:
  std::size_t p_;
  bool check_unique_ids_;
  std::vector<RankedList> lists_;
  std::unordered_set<ExampleId> seen_;
  std::size_t retained_ = 0;
  std::size_t peak_retained_ = 0;
  std::size_t offered_ = 0;
};

/// A stream element: example id and its softmax score vector.
struct ScoredExample {
  ExampleId id;
  std::span<const double> probs;
};

inline RankedListBank build_ranked_lists(std::span<const ScoredExample> stream,
                                         std::span<const std::size_t> capacities, std::size_t p) {
  RankedListBank bank(capacities, p);
  for (const auto& s : stream) bank.offer(s.id, s.probs);
  return bank;
}

inline RankedListBank build_ranked_lists(std::span<const ScoredExample> stream,
                                         std::size_t num_classes, std::size_t k, std::size_t p) {
  const std::vector<std::size_t> caps(num_classes, k);
  return build_ranked_lists(stream, caps, p);
}

/// Scores pool examples [begin, end) with the teacher into a fresh bank.
inline RankedListBank score_range(const SoftmaxClassifier& teacher, const UnlabeledPool& pool,
                                  std::size_t begin, std::size_t end,
                                  std::span<const std::size_t> capacities, std::size_t p) {
  if (pool.dim() != teacher.dim()) throw DataError("score: pool dim != model dim");
  if (capacities.size() != teacher.num_classes()) {
    throw ConfigError("score: capacities length != model num_classes");
  }
  RankedListBank bank(capacities, p);
  std::vector<double> probs(teacher.num_classes());
  for (std::size_t i = begin; i < end; ++i) {
    teacher.logits_into(pool.features(i), probs);
    softmax_inplace(probs);
    bank.offer(pool.id(i), probs);
  }
  return bank;
}

/// Scores the whole pool, split into `threads` contiguous shards whose banks
/// are merged. The result does not depend on the thread count.
inline RankedListBank score_pool(const SoftmaxClassifier& teacher, const UnlabeledPool& pool,
                                 std::span<const std::size_t> capacities, std::size_t p,
                                 std::size_t threads = 1) {
  threads = std::max<std::size_t>(1, std::min(threads, std::max<std::size_t>(1, pool.size())));
  if (threads == 1) return score_range(teacher, pool, 0, pool.size(), capacities, p);
  std::vector<std::optional<RankedListBank>> banks(threads);
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> workers;
  const std::size_t chunk = (pool.size() + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    workers.emplace_back([&, t] {
      try {
        const std::size_t begin = std::min(pool.size(), t * chunk);
        const std::size_t end = std::min(pool.size(), begin + chunk);
        banks[t].emplace(score_range(teacher, pool, begin, end, capacities, p));
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  RankedListBank merged = std::move(*banks[0]);
  for (std::size_t t = 1; t < threads; ++t) merged.merge(*banks[t]);
  return merged;
}

/// Union of the shortlists, one entry per (list, element), ordered by
/// (class asc, score desc, id asc).
inline ConstructedDataset construct_dataset(std::span<const RankedList> lists) {
  ConstructedDataset out;
  for (const auto& list : lists) {
    for (const auto& e : list.sorted()) out.add({e.id, list.label(), e.score});
  }
  return out;
}

inline ConstructedDataset construct_dataset(const RankedListBank& bank) {
  return construct_dataset(bank.lists());
}

/// Weights 1/(l+1)^alpha for l = 0..num_classes-1.
inline std::vector<double> zipf_weights(std::size_t num_classes, double alpha) {
  std::vector<double> w(num_classes);
  for (std::size_t l = 0; l < num_classes; ++l) {
    w[l] = 1.0 / std::pow(static_cast<double>(l + 1), alpha);
  }
  return w;
}

/**
 * Splits `total` into counts proportional to `weights` by largest remainder:
 * floors first, then the leftover units go to the largest fractional parts
 * (ties to the lower class). The counts always sum to `total`.
 *
 * Unless `allow_zero`, total must be >= the class count and any class that
 * rounds to zero takes a unit from the current largest count.
 */
inline std::vector<std::size_t> zipfian_allocate(std::span<const double> weights,
                                                 std::size_t total, bool allow_zero = false) {
  if (weights.empty()) throw ConfigError("allocate: no classes");
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("allocate: weights must be positive");
  }
  if (!allow_zero && total < weights.size()) {
    throw ConfigError("allocate: budget " + std::to_string(total) + " < class count " +
                      std::to_string(weights.size()));
  }
  const double weight_sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  const std::size_t n = weights.size();
  std::vector<std::size_t> counts(n);
  std::vector<double> remainder(n);
  std::size_t assigned = 0;
  for (std::size_t l = 0; l < n; ++l) {
    double quota = static_cast<double>(total) * weights[l] / weight_sum;
    const double nearest = std::round(quota);
    if (std::abs(quota - nearest) < 1e-9) quota = nearest;
    const double floor_q = std::floor(quota);
    counts[l] = static_cast<std::size_t>(floor_q);
    // Quantized so that remainders equal up to rounding noise tie exactly.
    remainder[l] = std::round((quota - floor_q) * 1e9) / 1e9;
    assigned += counts[l];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < total; i = (i + 1) % n) {
    ++counts[order[i]];
    ++assigned;
  }
  if (!allow_zero) {
    for (std::size_t l = 0; l < n; ++l) {
      while (counts[l] == 0) {
        const auto donor = static_cast<std::size_t>(
            std::max_element(counts.begin(), counts.end()) - counts.begin());
        --counts[donor];
        ++counts[l];
      }
    }
  }
  return counts;
}

/// Number of pool examples carrying each tag.
inline std::vector<std::size_t> tag_counts(const UnlabeledPool& pool) {
  std::vector<std::size_t> counts(pool.num_classes(), 0);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    for (ClassIndex t : pool.tags(i)) ++counts[t];
  }
  return counts;
}

/// For every class, a seeded uniform sample of min(count, available) tagged
/// examples, without replacement and without using any scores. Entries carry
/// score 1.0 and are ordered by (class asc, id asc).
inline ConstructedDataset tag_select(const UnlabeledPool& pool,
                                     std::span<const std::size_t> per_class_count,
                                     std::uint64_t seed) {
  if (!pool.tagged()) throw DataError("tag_select: pool carries no tags");
  if (per_class_count.size() != pool.num_classes()) {
    throw ConfigError("tag_select: per-class counts length != num_classes");
  }
  std::vector<std::vector<std::size_t>> candidates(pool.num_classes());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    for (ClassIndex t : pool.tags(i)) candidates[t].push_back(i);
  }
  ConstructedDataset out;
  for (std::size_t l = 0; l < candidates.size(); ++l) {
    auto& cand = candidates[l];
    const std::size_t take = std::min(per_class_count[l], cand.size());
    Rng rng(derive_seed(seed, 0x746167000000ULL + l));
    for (std::size_t i = 0; i < take; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(cand.size() - i));
      std::swap(cand[i], cand[j]);
    }
    std::vector<ExampleId> chosen;
    for (std::size_t i = 0; i < take; ++i) chosen.push_back(pool.id(cand[i]));
    std::sort(chosen.begin(), chosen.end());
    for (ExampleId id : chosen) out.add({id, static_cast<ClassIndex>(l), 1.0});
  }
  return out;
}

inline ConstructedDataset tag_select(const UnlabeledPool& pool, std::size_t per_class_count,
                                     std::uint64_t seed) {
  const std::vector<std::size_t> counts(pool.num_classes(), per_class_count);
  return tag_select(pool, counts, seed);
}

// Ranked-list shard files (JSON):
// {"format":"semisup-ranked-lists","version":1,"num_classes":L,"p":P,"offered":N,
//  "lists":[{"label":l,"capacity":K,"entries":[[id,score],...]},...]}

inline nlohmann::ordered_json ranked_lists_to_json(const RankedListBank& bank) {
  nlohmann::ordered_json j;
  j["format"] = "semisup-ranked-lists";
  j["version"] = 1;
  j["num_classes"] = bank.num_classes();
  j["p"] = bank.p();
  j["offered"] = bank.offered();
  auto lists = nlohmann::ordered_json::array();
  for (const auto& list : bank.lists()) {
    nlohmann::ordered_json lj;
    lj["label"] = list.label();
    lj["capacity"] = list.capacity();
    auto entries = nlohmann::ordered_json::array();
    for (const auto& e : list.sorted()) entries.push_back({e.id.value, e.score});
    lj["entries"] = std::move(entries);
    lists.push_back(std::move(lj));
  }
  j["lists"] = std::move(lists);
  return j;
}

inline RankedListBank ranked_lists_from_json(const nlohmann::json& j,
                                             const std::string& source = "<json>") {
  auto fail = [&](const std::string& msg) { throw DataError(source + ": " + msg); };
  try {
    if (j.at("format") != "semisup-ranked-lists") fail("not a ranked-list file");
    if (j.at("version") != 1) fail("unsupported ranked-list version");
    const auto num_classes = j.at("num_classes").get<std::size_t>();
    const auto p = j.at("p").get<std::size_t>();
    const auto& lists_json = j.at("lists");
    if (lists_json.size() != num_classes) fail("list count != num_classes");
    std::vector<RankedList> lists;
    for (std::size_t l = 0; l < num_classes; ++l) {
      const auto& lj = lists_json[l];
      if (lj.at("label").get<std::size_t>() != l) fail("lists out of class order");
      std::vector<RankedEntry> entries;
      for (const auto& ej : lj.at("entries")) {
        entries.push_back({ExampleId{ej.at(0).get<std::uint64_t>()}, ej.at(1).get<double>()});
      }
      const auto capacity = lj.at("capacity").get<std::size_t>();
      if (entries.size() > capacity) fail("list " + std::to_string(l) + " exceeds its capacity");
      lists.push_back(RankedList::from_entries(static_cast<ClassIndex>(l), capacity, entries));
    }
    return RankedListBank::from_lists(p, std::move(lists), j.value("offered", std::size_t{0}));
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("malformed ranked-list file: ") + e.what());
  }
  throw DataError(source + ": unreachable");
}

inline void write_ranked_lists(const RankedListBank& bank, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << ranked_lists_to_json(bank).dump() << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

inline RankedListBank read_ranked_lists(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string() + " for reading");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": malformed JSON: " + e.what());
  }
  return ranked_lists_from_json(j, path.string());
}

/// Selection summary: per-class list sizes and the total |D-hat|.
inline nlohmann::ordered_json selection_summary(const ConstructedDataset& data,
                                                std::size_t num_classes) {
  nlohmann::ordered_json j;
  const auto counts = data.class_counts(num_classes);
  std::unordered_set<ExampleId> distinct;
  for (const auto& e : data.entries()) distinct.insert(e.id);
  j["num_classes"] = num_classes;
  j["total"] = data.size();
  j["distinct_ids"] = distinct.size();
  j["per_class"] = counts;
  return j;
}

}  // namespace semisup

#endif  // SEMISUP_SELECTOR_HPP

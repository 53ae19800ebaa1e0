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

#ifndef SEMISUP_DEDUP_HPP
#define SEMISUP_DEDUP_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "semisup/classifier.hpp"
#include "semisup/dataset.hpp"
#include "semisup/error.hpp"

namespace semisup {

template <typename T>
std::vector<double> l2_normalize(std::span<const T> v) {
  double norm2 = 0.0;
  for (T x : v) norm2 += static_cast<double>(x) * static_cast<double>(x);
  if (!(norm2 > 0.0) || !std::isfinite(norm2)) {
    throw DataError("l2_normalize: zero or non-finite vector");
  }
  const double norm = std::sqrt(norm2);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<double>(v[i]) / norm;
  return out;
}

inline std::vector<double> l2_normalize(std::span<const double> v) { return l2_normalize<double>(v); }
inline std::vector<double> l2_normalize(std::span<const float> v) { return l2_normalize<float>(v); }

/// Row-major L2-normalized embeddings with their example ids.
struct Embeddings {
  std::size_t dim = 0;
  std::vector<ExampleId> ids;
  std::vector<double> values;

  std::size_t size() const noexcept { return ids.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values).subspan(i * dim, dim);
  }

  void add(ExampleId id, std::span<const double> raw) {
    if (dim == 0) dim = raw.size();
    if (raw.size() != dim) throw DataError("embeddings: dimension mismatch");
    const auto unit = l2_normalize(raw);
    ids.push_back(id);
    values.insert(values.end(), unit.begin(), unit.end());
  }
};

template <typename Container>
Embeddings feature_embeddings(const Container& data) {
  Embeddings out;
  out.dim = data.dim();
  std::vector<double> row(data.dim());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto f = data.features(i);
    std::copy(f.begin(), f.end(), row.begin());
    out.add(data.id(i), row);
  }
  return out;
}

/// Uses a trained model's logits as the embedding space.
template <typename Container>
Embeddings logit_embeddings(const SoftmaxClassifier& model, const Container& data) {
  Embeddings out;
  out.dim = model.num_classes();
  for (std::size_t i = 0; i < data.size(); ++i) out.add(data.id(i), model.logits(data.features(i)));
  return out;
}

inline double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    acc += d * d;
  }
  return std::sqrt(acc);
}

struct DedupReport {
  /// Removed pool ids in the order they were collected.
  std::vector<ExampleId> removed_ids;
  /// Length of the globally sorted pair-list prefix that was walked.
  std::uint64_t pairs_examined = 0;
  double distance_of_last_removed = 0.0;
};

struct DedupResult {
  UnlabeledPool pool;
  DedupReport report;
};

namespace detail {

// A (distance, eval id, pool id) key; the global pair order is lexicographic.
struct PairKey {
  double distance = 0.0;
  ExampleId eval_id;
  ExampleId pool_id;

  friend bool operator<(const PairKey& a, const PairKey& b) {
    return std::tie(a.distance, a.eval_id, a.pool_id) < std::tie(b.distance, b.eval_id, b.pool_id);
  }
  friend bool operator<=(const PairKey& a, const PairKey& b) { return !(b < a); }
};

template <typename Fn>
void parallel_blocks(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    fn(std::size_t{0}, n, std::size_t{0});
    return;
  }
  const std::size_t chunk = (n + threads - 1) / threads;
  std::vector<std::thread> workers;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t begin = std::min(n, t * chunk);
    const std::size_t end = std::min(n, begin + chunk);
    workers.emplace_back([&fn, begin, end, t] { fn(begin, end, t); });
  }
  for (auto& w : workers) w.join();
}

}  // namespace detail

/**
 * Removes the pool examples closest to the evaluation set.
 *
 * Conceptually all (eval, pool) pairs are sorted by distance between
 * L2-normalized embeddings (ties by eval id, then pool id) and the list is
 * walked from the front, collecting distinct pool ids until `max_removed` are
 * found. A pool id first appears in that list at its own nearest pair, so the
 * walk is done by ranking pool ids on their nearest-pair key, which needs
 * O(pool) memory instead of O(pool x eval).
 */
inline DedupResult dedup_pool(const UnlabeledPool& pool, const Embeddings& pool_embeddings,
                              const Embeddings& eval_embeddings, std::size_t max_removed,
                              std::size_t threads = 1) {
  if (pool_embeddings.size() != pool.size()) {
    throw DataError("dedup: pool embeddings count != pool size");
  }
  if (max_removed == 0 || pool.empty() || eval_embeddings.size() == 0) {
    return {pool, {}};
  }
  if (pool_embeddings.dim != eval_embeddings.dim) {
    throw DataError("dedup: embedding dim mismatch (" + std::to_string(pool_embeddings.dim) +
                    " vs " + std::to_string(eval_embeddings.dim) + ")");
  }

  std::vector<detail::PairKey> nearest(pool.size());
  detail::parallel_blocks(pool.size(), threads, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t p = begin; p < end; ++p) {
      detail::PairKey best{INFINITY, ExampleId{UINT64_MAX}, pool_embeddings.ids[p]};
      const auto prow = pool_embeddings.row(p);
      for (std::size_t q = 0; q < eval_embeddings.size(); ++q) {
        const detail::PairKey key{euclidean_distance(eval_embeddings.row(q), prow),
                                  eval_embeddings.ids[q], pool_embeddings.ids[p]};
        if (key < best) best = key;
      }
      nearest[p] = best;
    }
  });

  const std::size_t take = std::min(max_removed, pool.size());
  std::partial_sort(nearest.begin(), nearest.begin() + static_cast<std::ptrdiff_t>(take),
                    nearest.end());
  DedupReport report;
  for (std::size_t i = 0; i < take; ++i) report.removed_ids.push_back(nearest[i].pool_id);
  const detail::PairKey last = nearest[take - 1];
  report.distance_of_last_removed = last.distance;

  // Count the pairs at or before the last removed one in the global order.
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, pool.size()));
  std::vector<std::uint64_t> partial(workers, 0);
  detail::parallel_blocks(pool.size(), workers, [&](std::size_t begin, std::size_t end,
                                                    std::size_t t) {
    std::uint64_t count = 0;
    for (std::size_t p = begin; p < end; ++p) {
      const auto prow = pool_embeddings.row(p);
      for (std::size_t q = 0; q < eval_embeddings.size(); ++q) {
        const detail::PairKey key{euclidean_distance(eval_embeddings.row(q), prow),
                                  eval_embeddings.ids[q], pool_embeddings.ids[p]};
        if (key <= last) ++count;
      }
    }
    partial[t] = count;
  });
  for (auto c : partial) report.pairs_examined += c;

  const std::unordered_set<ExampleId> removed(report.removed_ids.begin(), report.removed_ids.end());
  return {pool.without(removed), std::move(report)};
}

/// Deduplicates on raw features.
inline DedupResult dedup_pool(const UnlabeledPool& pool, const LabeledDataset& eval,
                              std::size_t max_removed, std::size_t threads = 1) {
  if (pool.dim() != eval.dim()) throw DataError("dedup: pool dim != eval dim");
  return dedup_pool(pool, feature_embeddings(pool), feature_embeddings(eval), max_removed, threads);
}

inline nlohmann::ordered_json to_json(const DedupReport& r) {
  nlohmann::ordered_json j;
  j["removed"] = r.removed_ids.size();
  j["pairs_examined"] = r.pairs_examined;
  j["last_distance"] = r.distance_of_last_removed;
  return j;
}

}  // namespace semisup

#endif  // SEMISUP_DEDUP_HPP

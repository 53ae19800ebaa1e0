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

#ifndef SEMISUP_SYNGEN_HPP
#define SEMISUP_SYNGEN_HPP

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "semisup/dataset.hpp"
#include "semisup/error.hpp"
#include "semisup/manifest.hpp"
#include "semisup/rng.hpp"

namespace semisup {

enum class PriorKind { kUniform, kZipf };

/// Gaussian mixture with one isotropic component per class, plus a tag
/// corruption rate for pools.
struct MixtureSpec {
  std::size_t num_classes = 10;
  std::size_t dim = 32;
  double separation = 3.0;
  double noise_sigma = 1.0;
  PriorKind prior = PriorKind::kUniform;
  double zipf_alpha = 1.0;
  double tag_noise = 0.0;
  std::uint64_t means_seed = 0;
  /// Pools only: extra mixture components that belong to none of the target
  /// classes, and the fraction of pool examples drawn from them. Component j
  /// always carries tag j mod num_classes, like an ambiguous tag that also
  /// covers unrelated content.
  std::size_t num_distractors = 0;
  double distractor_fraction = 0.0;

  void validate() const {
    if (num_classes == 0) throw ConfigError("mixture: num_classes must be positive");
    if (dim == 0) throw ConfigError("mixture: dim must be positive");
    if (!(separation > 0.0) || !std::isfinite(separation)) {
      throw ConfigError("mixture: separation must be positive");
    }
    if (!(noise_sigma > 0.0) || !std::isfinite(noise_sigma)) {
      throw ConfigError("mixture: noise_sigma must be positive");
    }
    if (!(tag_noise >= 0.0 && tag_noise <= 1.0)) {
      throw ConfigError("mixture: tag_noise must lie in [0,1]");
    }
    if (prior == PriorKind::kZipf && !(zipf_alpha >= 0.0 && std::isfinite(zipf_alpha))) {
      throw ConfigError("mixture: zipf_alpha must be a non-negative number");
    }
    if (!(distractor_fraction >= 0.0 && distractor_fraction < 1.0)) {
      throw ConfigError("mixture: distractor_fraction must lie in [0,1)");
    }
    if (distractor_fraction > 0.0 && num_distractors == 0) {
      throw ConfigError("mixture: distractor_fraction > 0 needs num_distractors > 0");
    }
  }

  /// Normalized class prior. Zipf weights are 1/(l+1)^alpha.
  std::vector<double> prior_weights() const {
    std::vector<double> w(num_classes, 1.0);
    if (prior == PriorKind::kZipf) {
      for (std::size_t l = 0; l < num_classes; ++l) {
        w[l] = 1.0 / std::pow(static_cast<double>(l + 1), zipf_alpha);
      }
    }
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& x : w) x /= total;
    return w;
  }

  /// Class means: Gaussian directions projected on the unit sphere, scaled by
  /// `separation`. Row-major, num_classes x dim.
  std::vector<double> class_means() const {
    return sphere_points(num_classes, derive_seed(means_seed, 0x6D65616E));
  }

  /// Means of the distractor components, drawn like the class means from an
  /// independent stream so the class means do not depend on them.
  std::vector<double> distractor_means() const {
    return sphere_points(num_distractors, derive_seed(means_seed, 0x64697374));
  }

 private:
  std::vector<double> sphere_points(std::size_t count, std::uint64_t seed) const {
    validate();
    Rng rng(seed);
    std::vector<double> means(count * dim);
    for (std::size_t l = 0; l < count; ++l) {
      double norm2 = 0.0;
      do {
        norm2 = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
          const double v = rng.normal();
          means[l * dim + j] = v;
          norm2 += v * v;
        }
      } while (norm2 == 0.0);
      const double scale = separation / std::sqrt(norm2);
      for (std::size_t j = 0; j < dim; ++j) means[l * dim + j] *= scale;
    }
    return means;
  }
};

/// Pool plus the generating class of every pool example. The oracle labels are
/// for evaluation harnesses only and never enter the pool itself.
struct GeneratedPool {
  UnlabeledPool pool;
  std::vector<ManifestEntry> oracle;
};

namespace detail {

class MixtureSampler {
 public:
  MixtureSampler(const MixtureSpec& spec, std::uint64_t seed)
      : spec_(spec), means_(spec.class_means()), distractor_means_(spec.distractor_means()),
        rng_(seed) {
    const auto w = spec.prior_weights();
    cdf_.resize(w.size());
    std::partial_sum(w.begin(), w.end(), cdf_.begin());
    cdf_.back() = 1.0;
  }

  ClassIndex draw_class() {
    const double u = rng_.uniform();
    for (std::size_t l = 0; l < cdf_.size(); ++l) {
      if (u < cdf_[l]) return static_cast<ClassIndex>(l);
    }
    return static_cast<ClassIndex>(cdf_.size() - 1);
  }

  void draw_features(ClassIndex label, std::vector<float>& out) {
    out.resize(spec_.dim);
    for (std::size_t j = 0; j < spec_.dim; ++j) {
      out[j] = static_cast<float>(means_[label * spec_.dim + j] + spec_.noise_sigma * rng_.normal());
    }
  }

  /// Index of the distractor component to draw from, if any.
  std::optional<std::size_t> draw_distractor() {
    if (spec_.distractor_fraction <= 0.0 || !rng_.bernoulli(spec_.distractor_fraction)) {
      return std::nullopt;
    }
    return static_cast<std::size_t>(rng_.below(spec_.num_distractors));
  }

  void draw_distractor_features(std::size_t component, std::vector<float>& out) {
    out.resize(spec_.dim);
    for (std::size_t j = 0; j < spec_.dim; ++j) {
      out[j] = static_cast<float>(distractor_means_[component * spec_.dim + j] +
                                  spec_.noise_sigma * rng_.normal());
    }
  }

  ClassIndex draw_tag(ClassIndex label) {
    const std::size_t num_classes = spec_.num_classes;
    if (num_classes == 1 || !rng_.bernoulli(spec_.tag_noise)) return label;
    // Uniform over the other L-1 classes.
    auto wrong = static_cast<ClassIndex>(rng_.below(num_classes - 1));
    return wrong >= label ? wrong + 1 : wrong;
  }

 private:
  const MixtureSpec& spec_;
  std::vector<double> means_;
  std::vector<double> distractor_means_;
  Rng rng_;
  std::vector<double> cdf_;
};

}  // namespace detail

/// Draws n labeled examples with ids first_id, first_id + 1, ...
inline LabeledDataset generate_labeled(const MixtureSpec& spec, std::size_t n, std::uint64_t seed,
                                       std::uint64_t first_id = 0) {
  spec.validate();
  LabeledDataset out(spec.dim, spec.num_classes);
  detail::MixtureSampler sampler(spec, seed);
  std::vector<float> x;
  for (std::size_t i = 0; i < n; ++i) {
    const ClassIndex label = sampler.draw_class();
    sampler.draw_features(label, x);
    out.add(ExampleId{first_id + i}, x, label);
  }
  return out;
}

/// Draws m pool examples, each tagged with one (possibly corrupted) class.
/// Distractor examples (if configured) get oracle label num_classes + component.
inline GeneratedPool generate_pool(const MixtureSpec& spec, std::size_t m, std::uint64_t seed,
                                   std::uint64_t first_id = 0) {
  spec.validate();
  GeneratedPool out{UnlabeledPool(spec.dim, spec.num_classes, /*tagged=*/true), {}};
  out.oracle.reserve(m);
  detail::MixtureSampler sampler(spec, seed);
  std::vector<float> x;
  for (std::size_t i = 0; i < m; ++i) {
    const ExampleId id{first_id + i};
    if (const auto component = sampler.draw_distractor()) {
      sampler.draw_distractor_features(*component, x);
      const auto tag = static_cast<ClassIndex>(*component % spec.num_classes);
      out.pool.add(id, x, std::span<const ClassIndex>(&tag, 1));
      out.oracle.push_back(
          {id, static_cast<ClassIndex>(spec.num_classes + *component), std::nullopt});
      continue;
    }
    const ClassIndex label = sampler.draw_class();
    sampler.draw_features(label, x);
    const ClassIndex tag = sampler.draw_tag(label);
    out.pool.add(id, x, std::span<const ClassIndex>(&tag, 1));
    out.oracle.push_back({id, label, std::nullopt});
  }
  return out;
}


/// A complete desk-scale task: labeled set, tagged pool and test set drawn from
/// one mixture. The pool may follow its own class prior.
struct SyntheticTask {
  MixtureSpec mixture;
  std::optional<PriorKind> pool_prior;
  std::optional<double> pool_zipf_alpha;
  std::size_t n_labeled = 500;
  std::size_t n_pool = 50000;
  std::size_t n_test = 5000;
  std::uint64_t seed = 0;

  static constexpr std::uint64_t kLabeledFirstId = 0;
  static constexpr std::uint64_t kTestFirstId = std::uint64_t{1} << 40;
  static constexpr std::uint64_t kPoolFirstId = std::uint64_t{1} << 41;

  MixtureSpec pool_mixture() const {
    MixtureSpec s = mixture;
    if (pool_prior) s.prior = *pool_prior;
    if (pool_zipf_alpha) s.zipf_alpha = *pool_zipf_alpha;
    return s;
  }
};

struct SyntheticData {
  LabeledDataset labeled;
  GeneratedPool pool;
  LabeledDataset test;
};

/// Labeled and test sets are never tagged and always use the base prior.
inline SyntheticData generate_task(const SyntheticTask& task) {
  MixtureSpec base = task.mixture;
  base.tag_noise = 0.0;
  base.distractor_fraction = 0.0;
  return {generate_labeled(base, task.n_labeled, derive_seed(task.seed, 1),
                           SyntheticTask::kLabeledFirstId),
          generate_pool(task.pool_mixture(), task.n_pool, derive_seed(task.seed, 3),
                        SyntheticTask::kPoolFirstId),
          generate_labeled(base, task.n_test, derive_seed(task.seed, 2),
                           SyntheticTask::kTestFirstId)};
}

}  // namespace semisup

#endif  // SEMISUP_SYNGEN_HPP

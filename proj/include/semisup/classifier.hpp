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

#ifndef SEMISUP_CLASSIFIER_HPP
#define SEMISUP_CLASSIFIER_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semisup/dataset.hpp"
#include "semisup/error.hpp"
#include "semisup/feature_file.hpp"
#include "semisup/rng.hpp"

namespace semisup {

/// One training example as seen by the loss: a feature view and a class.
struct Sample {
  std::span<const float> x;
  ClassIndex label = 0;
};

struct ClassScore {
  ClassIndex label = 0;
  double score = 0.0;

  friend bool operator==(const ClassScore&, const ClassScore&) = default;
};

/// Linear softmax classifier: logits = W x + b, W is num_classes x dim.
class SoftmaxClassifier {
 public:
  SoftmaxClassifier(std::size_t num_classes, std::size_t dim)
      : num_classes_(num_classes), dim_(dim), weights_(num_classes * dim, 0.0),
        bias_(num_classes, 0.0) {
    if (num_classes == 0 || dim == 0) {
      throw ConfigError("SoftmaxClassifier: num_classes and dim must be positive");
    }
  }

  /// Weights ~ U(-1/sqrt(d), 1/sqrt(d)), bias zero.
  static SoftmaxClassifier initialized(std::size_t num_classes, std::size_t dim,
                                       std::uint64_t seed) {
    SoftmaxClassifier model(num_classes, dim);
    Rng rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    for (double& w : model.weights_) w = (2.0 * rng.uniform() - 1.0) * bound;
    return model;
  }

  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t dim() const noexcept { return dim_; }

  std::span<const double> weights() const noexcept { return weights_; }
  std::span<const double> bias() const noexcept { return bias_; }
  std::span<double> weights() noexcept { return weights_; }
  std::span<double> bias() noexcept { return bias_; }

  double weight(std::size_t label, std::size_t j) const { return weights_[label * dim_ + j]; }

  /// Writes W x + b into `out` (length num_classes).
  void logits_into(std::span<const float> x, std::span<double> out) const {
    if (x.size() != dim_) {
      throw DataError("logits: input length " + std::to_string(x.size()) + " != model dim " +
                      std::to_string(dim_));
    }
    for (std::size_t l = 0; l < num_classes_; ++l) {
      const double* row = weights_.data() + l * dim_;
      double acc = bias_[l];
      for (std::size_t j = 0; j < dim_; ++j) acc += row[j] * static_cast<double>(x[j]);
      out[l] = acc;
    }
  }

  std::vector<double> logits(std::span<const float> x) const {
    std::vector<double> out(num_classes_);
    logits_into(x, out);
    return out;
  }

  bool all_finite() const {
    auto finite = [](double v) { return std::isfinite(v); };
    return std::all_of(weights_.begin(), weights_.end(), finite) &&
           std::all_of(bias_.begin(), bias_.end(), finite);
  }

  friend bool operator==(const SoftmaxClassifier& a, const SoftmaxClassifier& b) {
    auto same = [](std::span<const double> x, std::span<const double> y) {
      return std::equal(x.begin(), x.end(), y.begin(), y.end(), [](double p, double q) {
        return std::bit_cast<std::uint64_t>(p) == std::bit_cast<std::uint64_t>(q);
      });
    };
    return a.num_classes_ == b.num_classes_ && a.dim_ == b.dim_ && same(a.weights_, b.weights_) &&
           same(a.bias_, b.bias_);
  }

 private:
  std::size_t num_classes_;
  std::size_t dim_;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

/// In-place max-shifted softmax.
inline void softmax_inplace(std::span<double> z) {
  if (z.empty()) throw ConfigError("softmax: empty input");
  for (double v : z) {
    if (!std::isfinite(v)) throw NumericError("softmax: non-finite logit");
  }
  const double shift = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double& v : z) {
    v = std::exp(v - shift);
    total += v;
  }
  for (double& v : z) v /= total;
}

inline std::vector<double> softmax(std::span<const double> z) {
  std::vector<double> out(z.begin(), z.end());
  softmax_inplace(out);
  return out;
}

inline std::vector<double> predict_proba(const SoftmaxClassifier& model, std::span<const float> x) {
  auto z = model.logits(x);
  softmax_inplace(z);
  return z;
}

/// The k highest scores, descending; equal scores ordered by lower class.
inline std::vector<ClassScore> top_k_scores(std::span<const double> scores, std::size_t k) {
  if (k < 1 || k > scores.size()) {
    throw ConfigError("top-k: k=" + std::to_string(k) + " outside [1, " +
                      std::to_string(scores.size()) + "]");
  }
  std::vector<ClassScore> all(scores.size());
  for (std::size_t l = 0; l < scores.size(); ++l) all[l] = {static_cast<ClassIndex>(l), scores[l]};
  auto before = [](const ClassScore& a, const ClassScore& b) {
    return a.score > b.score || (a.score == b.score && a.label < b.label);
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), before);
  all.resize(k);
  return all;
}

inline std::vector<ClassScore> predict_topk(const SoftmaxClassifier& model,
                                            std::span<const float> x, std::size_t k) {
  if (k < 1 || k > model.num_classes()) {
    throw ConfigError("predict_topk: k=" + std::to_string(k) + " outside [1, " +
                      std::to_string(model.num_classes()) + "]");
  }
  return top_k_scores(predict_proba(model, x), k);
}

struct Gradient {
  std::vector<double> weights;
  std::vector<double> bias;
};

struct LossAndGradient {
  double loss = 0.0;
  Gradient grad;
};

/// Mean cross-entropy over the batch and its exact gradient. The gradient of
/// the per-example loss w.r.t. the logits is p - onehot(label).
inline LossAndGradient loss_and_grad(const SoftmaxClassifier& model, std::span<const Sample> batch) {
  if (batch.empty()) throw DataError("loss_and_grad: empty batch");
  const std::size_t num_classes = model.num_classes();
  const std::size_t dim = model.dim();
  LossAndGradient out;
  out.grad.weights.assign(num_classes * dim, 0.0);
  out.grad.bias.assign(num_classes, 0.0);
  std::vector<double> z(num_classes);
  double total = 0.0;
  for (const Sample& s : batch) {
    if (s.label >= num_classes) {
      throw DataError("loss_and_grad: label " + std::to_string(s.label) + " >= num_classes " +
                      std::to_string(num_classes));
    }
    model.logits_into(s.x, z);
    const double shift = *std::max_element(z.begin(), z.end());
    double sum_exp = 0.0;
    for (double v : z) sum_exp += std::exp(v - shift);
    total += shift + std::log(sum_exp) - z[s.label];
    for (std::size_t l = 0; l < num_classes; ++l) {
      double delta = std::exp(z[l] - shift) / sum_exp;
      if (l == s.label) delta -= 1.0;
      out.grad.bias[l] += delta;
      double* row = out.grad.weights.data() + l * dim;
      for (std::size_t j = 0; j < dim; ++j) row[j] += delta * static_cast<double>(s.x[j]);
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.loss = total * inv;
  for (double& g : out.grad.weights) g *= inv;
  for (double& g : out.grad.bias) g *= inv;
  return out;
}

// Model file: "SSLM" | u8 version | u32 L | u32 d | L*d f64 weights | L f64 bias.

inline constexpr std::string_view kModelMagic = "SSLM";
inline constexpr std::uint8_t kModelVersion = 0x01;

inline std::string encode_model(const SoftmaxClassifier& model) {
  detail::ByteWriter w;
  w.put_bytes(kModelMagic);
  w.put(kModelVersion);
  w.put(static_cast<std::uint32_t>(model.num_classes()));
  w.put(static_cast<std::uint32_t>(model.dim()));
  for (double v : model.weights()) w.put_f64(v);
  for (double v : model.bias()) w.put_f64(v);
  return w.take();
}

inline SoftmaxClassifier decode_model(std::string_view bytes,
                                      const std::string& source = "<memory>") {
  detail::ByteReader r(bytes, source);
  if (r.get_bytes(4, "magic") != kModelMagic) r.fail("bad magic (expected \"SSLM\")");
  const auto version = r.get<std::uint8_t>("version");
  if (version != kModelVersion) r.fail("unsupported version " + std::to_string(version));
  const auto num_classes = r.get<std::uint32_t>("num_classes");
  const auto dim = r.get<std::uint32_t>("dim");
  if (num_classes == 0 || dim == 0) r.fail("num_classes and dim must be positive");
  SoftmaxClassifier model(num_classes, dim);
  for (double& v : model.weights()) v = r.get_f64("weights");
  for (double& v : model.bias()) v = r.get_f64("bias");
  if (!model.all_finite()) r.fail("non-finite parameter");
  if (r.remaining() != 0) r.fail("trailing bytes after model");
  return model;
}

inline void write_model(const SoftmaxClassifier& model, const std::filesystem::path& path) {
  detail::write_file_bytes(path, encode_model(model));
}

inline SoftmaxClassifier read_model(const std::filesystem::path& path) {
  return decode_model(detail::read_file_bytes(path), path.string());
}

}  // namespace semisup

#endif  // SEMISUP_CLASSIFIER_HPP

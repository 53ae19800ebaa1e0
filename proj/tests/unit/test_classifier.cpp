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
#include <numbers>
#include <vector>

#include "semisup/classifier.hpp"
#include "support/oracles.hpp"

namespace semisup {
namespace {

SoftmaxClassifier random_model(std::size_t num_classes, std::size_t dim, Rng& rng) {
  SoftmaxClassifier m(num_classes, dim);
  for (double& w : m.weights()) w = rng.normal();
  for (double& b : m.bias()) b = rng.normal();
  return m;
}

std::vector<float> random_x(std::size_t dim, Rng& rng) {
  std::vector<float> x(dim);
  for (auto& v : x) v = static_cast<float>(rng.normal());
  return x;
}

TEST(Logits, ZeroModelGivesZeros) {
  SoftmaxClassifier m(4, 3);
  const std::vector<float> x = {1.0f, -2.0f, 3.5f};
  for (double z : m.logits(x)) EXPECT_EQ(z, 0.0);
}

TEST(Logits, IdentityWeightsPickTheCoordinate) {
  SoftmaxClassifier m(3, 3);
  for (std::size_t i = 0; i < 3; ++i) m.weights()[i * 3 + i] = 1.0;
  const std::vector<float> e2 = {0.0f, 0.0f, 1.0f};
  EXPECT_EQ(m.logits(e2), (std::vector<double>{0.0, 0.0, 1.0}));
}

TEST(Logits, MatchesNaiveSummation) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_model(5, 7, rng);
    const auto x = random_x(7, rng);
    const auto z = m.logits(x);
    const auto ref = oracle::logits(m, x);
    for (std::size_t l = 0; l < 5; ++l) EXPECT_NEAR(z[l], static_cast<double>(ref[l]), 1e-12);
  }
}

TEST(Logits, DimensionMismatchThrows) {
  SoftmaxClassifier m(2, 3);
  const std::vector<float> x = {1.0f};
  EXPECT_THROW(m.logits(x), DataError);
}

TEST(Softmax, UniformAndAnalyticCases) {
  for (double p : softmax(std::vector<double>{0, 0, 0, 0})) EXPECT_DOUBLE_EQ(p, 0.25);
  const auto p = softmax(std::vector<double>{0.0, std::log(2.0), std::log(3.0), std::log(4.0)});
  const double expected[] = {0.1, 0.2, 0.3, 0.4};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(p[i], expected[i], 1e-15);
}

TEST(Softmax, LargeLogitsDoNotOverflow) {
  const auto p = softmax(std::vector<double>{1000.0, 0.0});
  const auto q = softmax(std::vector<double>{0.0, -1000.0});
  EXPECT_EQ(p, q);
  EXPECT_NEAR(p[0], 1.0, 1e-300);
  EXPECT_GE(p[1], 0.0);
}

TEST(Softmax, RejectsNonFinite) {
  EXPECT_THROW(softmax(std::vector<double>{0.0, NAN}), NumericError);
  EXPECT_THROW(softmax(std::vector<double>{INFINITY, 0.0}), NumericError);
}

TEST(Softmax, AlwaysNormalized) {
  Rng rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> z(1 + rng.below(20));
    for (double& v : z) v = 50.0 * rng.normal();
    double total = 0.0;
    for (double p : softmax(z)) {
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 1.0);
      total += p;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(LossAndGrad, ZeroModelLossIsLogL) {
  SoftmaxClassifier m(7, 3);
  const std::vector<float> x = {1.0f, 2.0f, 3.0f};
  const std::vector<Sample> batch = {{x, 2}, {x, 5}};
  EXPECT_DOUBLE_EQ(loss_and_grad(m, batch).loss, std::log(7.0));
}

TEST(LossAndGrad, SingleExampleBiasGradientIsPMinusOneHot) {
  Rng rng(4);
  const auto m = random_model(4, 3, rng);
  const auto x = random_x(3, rng);
  const std::vector<Sample> batch = {{x, 1}};
  const auto g = loss_and_grad(m, batch);
  const auto p = predict_proba(m, x);
  for (std::size_t l = 0; l < 4; ++l) {
    const double expected = p[l] - (l == 1 ? 1.0 : 0.0);
    EXPECT_NEAR(g.grad.bias[l], expected, 1e-15);
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_NEAR(g.grad.weights[l * 3 + j], expected * x[j], 1e-15);
    }
  }
}

TEST(LossAndGrad, MatchesFiniteDifferences) {
  Rng rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t num_classes = 2 + rng.below(4);
    const std::size_t dim = 1 + rng.below(8);
    const auto m = random_model(num_classes, dim, rng);
    std::vector<std::vector<float>> xs;
    std::vector<Sample> batch;
    const std::size_t n = 1 + rng.below(6);
    for (std::size_t i = 0; i < n; ++i) xs.push_back(random_x(dim, rng));
    for (std::size_t i = 0; i < n; ++i) {
      batch.push_back({xs[i], static_cast<ClassIndex>(rng.below(num_classes))});
    }
    const auto g = loss_and_grad(m, batch);
    EXPECT_NEAR(g.loss, static_cast<double>(oracle::mean_loss(m, batch)), 1e-12);
    const auto fd = oracle::fd_gradient(m, batch, 1e-5);
    std::vector<double> analytic = g.grad.weights;
    analytic.insert(analytic.end(), g.grad.bias.begin(), g.grad.bias.end());
    ASSERT_EQ(analytic.size(), fd.size());
    for (std::size_t i = 0; i < fd.size(); ++i) {
      const double scale = std::max({std::abs(fd[i]), std::abs(analytic[i]), 1e-6});
      EXPECT_LE(std::abs(fd[i] - analytic[i]) / scale, 1e-4) << "param " << i;
    }
  }
}

TEST(LossAndGrad, RejectsBadBatches) {
  SoftmaxClassifier m(3, 2);
  EXPECT_THROW(loss_and_grad(m, {}), DataError);
  const std::vector<float> x = {1.0f, 2.0f};
  const std::vector<float> wrong = {1.0f};
  EXPECT_THROW(loss_and_grad(m, std::vector<Sample>{{wrong, 0}}), DataError);
  EXPECT_THROW(loss_and_grad(m, std::vector<Sample>{{x, 3}}), DataError);
}

TEST(PredictTopK, TieRuleAndOrdering) {
  SoftmaxClassifier m(3, 1);
  const std::vector<float> x = {1.0f};
  const auto top = predict_topk(m, x, 1);
  ASSERT_EQ(top.size(), 1u);
  EXPECT_EQ(top[0].label, 0u);

  const std::vector<double> probs = {0.1, 0.7, 0.2};
  const auto two = top_k_scores(probs, 2);
  EXPECT_EQ(two, (std::vector<ClassScore>{{1, 0.7}, {2, 0.2}}));
  EXPECT_THROW(top_k_scores(probs, 0), ConfigError);
  EXPECT_THROW(top_k_scores(probs, 4), ConfigError);
}

TEST(PredictTopK, FullKIsADescendingPermutation) {
  Rng rng(6);
  const auto m = random_model(6, 4, rng);
  const auto x = random_x(4, rng);
  const auto all = predict_topk(m, x, 6);
  std::vector<bool> seen(6, false);
  for (std::size_t i = 0; i < all.size(); ++i) {
    seen[all[i].label] = true;
    if (i > 0) {
      EXPECT_GE(all[i - 1].score, all[i].score);
    }
  }
  for (bool s : seen) EXPECT_TRUE(s);
}

TEST(PredictTopK, InvariantToLogitShift) {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    auto m = random_model(5, 3, rng);
    const auto x = random_x(3, rng);
    const auto before = predict_topk(m, x, 5);
    for (double& b : m.bias()) b += 17.25;
    const auto after = predict_topk(m, x, 5);
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_EQ(before[i].label, after[i].label);
      EXPECT_NEAR(before[i].score, after[i].score, 1e-12);
    }
  }
}

TEST(ModelFile, RoundTripAndLayout) {
  Rng rng(1);
  const auto m = random_model(3, 4, rng);
  const auto bytes = encode_model(m);
  EXPECT_EQ(bytes.size(), 4u + 1 + 4 + 4 + 8 * (12 + 3));
  EXPECT_EQ(bytes.substr(0, 4), "SSLM");
  EXPECT_EQ(decode_model(bytes), m);
  EXPECT_THROW(decode_model(bytes.substr(0, bytes.size() - 3)), DataError);
  auto bad = bytes;
  bad[0] = 'Q';
  EXPECT_THROW(decode_model(bad), DataError);
}

TEST(Initialization, UniformWithinBoundAndZeroBias) {
  const auto m = SoftmaxClassifier::initialized(10, 25, 3);
  for (double w : m.weights()) EXPECT_LE(std::abs(w), 1.0 / 5.0);
  for (double b : m.bias()) EXPECT_EQ(b, 0.0);
  EXPECT_EQ(m, SoftmaxClassifier::initialized(10, 25, 3));
}

}  // namespace
}  // namespace semisup

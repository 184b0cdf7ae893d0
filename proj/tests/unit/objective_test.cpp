// Copyright 2026 The weldad Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "weldad/objective.hpp"

using namespace weldad;
using weldad::testing::Bench;
using weldad::testing::random_tensor;

namespace {

TensorD with_diffs(const TensorD& base, std::initializer_list<double> diffs) {
  TensorD out = base;
  std::size_t i = 0;
  for (double d : diffs) out[i++] += d;
  return out;
}

LossConfig config(std::size_t k, double eta = 0.5) {
  LossConfig c;
  c.k = k;
  c.eta = eta;
  return c;
}

}  // namespace

TEST(ReconLoss, PerfectReconstructionIsZero) {
  Rng rng(1);
  const TensorD z = random_tensor({512}, rng);
  Bench bench;
  auto loss = recon_loss(bench.input("a", z), bench.input("b", z), LossConfig{});
  EXPECT_NEAR(bench.run()[loss].item(), 0.0, 1e-15);
}

TEST(ReconLoss, OrthogonalUnitVectors) {
  TensorD a({512}, 0.0), b({512}, 0.0);
  a[0] = 1.0;
  b[1] = 1.0;
  Bench bench;
  auto cos_term = cosine_distance(bench.input("a", a), bench.input("b", b));
  EXPECT_EQ(bench.run()[cos_term].item(), 1.0);
}

TEST(ReconLoss, TopKSmoothL1HandExample) {
  Rng rng(2);
  const TensorD pred = random_tensor({512}, rng);
  const TensorD obs = with_diffs(pred, {3.0, 1.0, 2.0});
  LossConfig only_topk = config(2);
  only_topk.cosine_weight = 0.0;
  Bench bench;
  auto a = bench.input("obs", obs), b = bench.input("pred", pred);
  auto topk = recon_loss(a, b, only_topk);
  auto full = recon_loss(a, b, config(2));
  auto cos_term = cosine_distance(a, b);
  const auto ev = bench.run();
  EXPECT_NEAR(ev[topk].item(), 2.0, 1e-12);
  EXPECT_NEAR(ev[full].item(), ev[cos_term].item() + 2.0, 1e-12);
}

TEST(ReconLoss, RejectsZeroVector) {
  Bench bench;
  auto loss = recon_loss(bench.input("a", TensorD({8}, 0.0)), bench.input("b", TensorD({8}, 1.0)),
                         config(2));
  (void)loss;
  EXPECT_THROW(bench.run(), Error);
}

TEST(TextLoss, AlignedAntiparallelOrthogonal) {
  const TensorD anchor({3}, {0.0, 0.6, 0.8});
  const TensorD eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Bench bench;
  auto head = TextHead::declare(bench.scope().sub("text"), 3, 3);
  auto e = bench.input("anchor", anchor);
  auto aligned = text_loss(bench.input("p1", TensorD({3}, {0.0, 1.5, 2.0})), e, head);
  auto opposite = text_loss(bench.input("p2", TensorD({3}, {0.0, -0.3, -0.4})), e, head);
  auto orthogonal = text_loss(bench.input("p3", TensorD({3}, {2.0, 0.0, 0.0})), e, head);
  bench.bindings["text.proj.w"] = eye;
  const auto ev = bench.run();
  EXPECT_NEAR(ev[aligned].item(), 0.0, 1e-15);
  EXPECT_NEAR(ev[opposite].item(), 2.0, 1e-15);
  EXPECT_NEAR(ev[orthogonal].item(), 1.0, 1e-15);
}

TEST(TotalLoss, Composition) {
  // cos(obs, pred) = 0.7 and cos(pred, anchor) = 0.8 with an identity head.
  const double s = std::sqrt(0.51);
  const TensorD obs({2}, {1.0, 0.0});
  const TensorD pred({2}, {0.7, s});
  const TensorD anchor({2}, {0.8 * 0.7 - 0.6 * s, 0.8 * s + 0.6 * 0.7});
  LossConfig cfg = config(1);
  cfg.topk_weight = 0.0;
  cfg.lambda = 0.5;
  Bench bench;
  auto head = TextHead::declare(bench.scope().sub("text"), 2, 2);
  auto o = bench.input("obs", obs), p = bench.input("pred", pred), a = bench.input("anchor", anchor);
  auto total = total_loss(o, p, a, head, cfg);
  LossConfig no_text = cfg;
  no_text.lambda = 0.0;
  auto recon_only = total_loss(o, p, a, head, no_text);
  LossConfig unit = cfg;
  unit.lambda = 1.0;
  auto text_only = total_loss(o, o, a, head, unit);
  auto text_of_obs = text_loss(o, a, head);
  bench.bindings["text.proj.w"] = TensorD({2, 2}, {1, 0, 0, 1});
  const auto ev = bench.run();
  EXPECT_NEAR(ev[total].item(), 0.4, 1e-12);
  EXPECT_NEAR(ev[recon_only].item(), 0.3, 1e-12);
  EXPECT_NEAR(ev[text_only].item(), ev[text_of_obs].item(), 1e-15);
}

TEST(AnomalyScore, ZeroAtEquality) {
  Rng rng(3);
  const TensorD z = random_tensor({512}, rng);
  Bench bench;
  auto s = anomaly_score(bench.input("a", z), bench.input("b", z), LossConfig{});
  EXPECT_EQ(bench.run()[s].item(), 0.0);
}

TEST(AnomalyScore, HandExample) {
  Rng rng(4);
  const TensorD pred = random_tensor({512}, rng);
  const TensorD obs = with_diffs(pred, {3.0, 1.0, 2.0});
  Bench bench;
  auto a = bench.input("obs", obs), b = bench.input("pred", pred);
  auto s = anomaly_score(a, b, config(2, 1.0));
  auto c = cosine_distance(a, b);
  const auto ev = bench.run();
  EXPECT_NEAR(ev[s].item(), ev[c].item() + 2.5, 1e-12);
}

TEST(AnomalyScore, ScaleDecomposition) {
  Rng rng(5);
  const TensorD obs = random_tensor({512}, rng), pred = random_tensor({512}, rng);
  TensorD obs2 = obs, pred2 = pred;
  for (auto& v : obs2.data()) v *= 2.0;
  for (auto& v : pred2.data()) v *= 2.0;
  Bench bench;
  auto a = bench.input("a", obs), b = bench.input("b", pred);
  auto a2 = bench.input("a2", obs2), b2 = bench.input("b2", pred2);
  const LossConfig cfg = config(32);
  auto c1 = cosine_distance(a, b), c2 = cosine_distance(a2, b2);
  auto t1 = ad::topk_mean(ad::abs(a - b), cfg.k), t2 = ad::topk_mean(ad::abs(a2 - b2), cfg.k);
  auto s1 = anomaly_score(a, b, cfg), s2 = anomaly_score(a2, b2, cfg);
  const auto ev = bench.run();
  EXPECT_NEAR(ev[c1].item(), ev[c2].item(), 1e-14);
  EXPECT_EQ(ev[t2].item(), 2.0 * ev[t1].item());
  EXPECT_NEAR(ev[s1].item(), ev[c1].item() + cfg.eta * ev[t1].item(), 1e-14);
  EXPECT_NEAR(ev[s2].item(), ev[c1].item() + 2.0 * cfg.eta * ev[t1].item(), 1e-13);
}

TEST(AnomalyScore, NonNegativeOnRandomPairs) {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    Bench bench;
    auto s = anomaly_score(bench.input("a", random_tensor({64}, rng, -5.0, 5.0)),
                           bench.input("b", random_tensor({64}, rng, -5.0, 5.0)), config(8));
    EXPECT_GE(bench.run()[s].item(), 0.0);
  }
}

TEST(AnomalyScore, TopKTermMonotoneInSelectedDiffs) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const TensorD pred = random_tensor({64}, rng);
    TensorD obs = random_tensor({64}, rng);
    Bench bench;
    auto before = ad::topk_mean(ad::abs(bench.input("o", obs) - bench.input("p", pred)), 8);
    const auto ev = bench.run();
    // Widen the largest gap; the Top-K mean must not drop.
    std::size_t worst = 0;
    for (std::size_t i = 1; i < 64; ++i) {
      if (std::abs(obs[i] - pred[i]) > std::abs(obs[worst] - pred[worst])) worst = i;
    }
    obs[worst] += obs[worst] > pred[worst] ? 0.5 : -0.5;
    bench.bindings["o"] = obs;
    EXPECT_GE(bench.run()[before].item(), ev[before].item());
  }
}

TEST(AnomalyScore, ExhaustiveTopKIsFullMean) {
  Rng rng(8);
  const TensorD a = random_tensor({512}, rng), b = random_tensor({512}, rng);
  Bench bench;
  auto x = bench.input("a", a), y = bench.input("b", b);
  auto topk = ad::topk_mean(ad::abs(x - y), 512);
  auto mean = ad::mean(ad::abs(x - y));
  auto smooth_topk = ad::topk_mean(ad::smooth_l1(x - y, 1.0), 512);
  auto smooth_mean = ad::mean(ad::smooth_l1(x - y, 1.0));
  const auto ev = bench.run();
  EXPECT_NEAR(ev[topk].item(), ev[mean].item(), 1e-15);
  EXPECT_NEAR(ev[smooth_topk].item(), ev[smooth_mean].item(), 1e-15);
}

TEST(TotalLoss, TextProjectionGradient) {
  Rng rng(9);
  Bench bench;
  auto head = TextHead::declare(bench.scope().sub("text"), 32, 8);
  auto loss = total_loss(bench.input("obs", random_tensor({32}, rng)),
                         bench.input("pred", random_tensor({32}, rng)),
                         bench.input("anchor", random_tensor({8}, rng)), head, config(4));
  bench.init(3);
  EXPECT_LT(ad::grad_check(bench.graph, bench.bindings, loss, "text.proj.w", 1e-5).max_rel_error,
            1e-4);
}

TEST(LossConfig, ValidationAndKvRoundTrip) {
  EXPECT_THROW(config(0).validate(512), Error);
  EXPECT_THROW(config(513).validate(512), Error);
  LossConfig neg;
  neg.lambda = -0.1;
  EXPECT_THROW(neg.validate(512), Error);
  EXPECT_NO_THROW(LossConfig{}.validate(512));

  LossConfig c = config(17, 0.25);
  c.lambda = 0.3;
  c.heatmap_sigma = 2.5;
  KvDocument doc;
  c.to_kv(doc);
  const LossConfig back = LossConfig::from_kv(KvDocument::parse(doc.serialize()));
  EXPECT_EQ(back.k, 17u);
  EXPECT_EQ(back.eta, 0.25);
  EXPECT_EQ(back.lambda, 0.3);
  EXPECT_EQ(back.heatmap_sigma, 2.5);
}

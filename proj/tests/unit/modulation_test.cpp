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

#include "oracles.hpp"
#include "test_util.hpp"
#include "weldad/modulation.hpp"

using namespace weldad;
using namespace weldad::testing;
using weldad::testing::Bench;
using weldad::testing::matmul_ref;
using weldad::testing::max_abs_diff;
using weldad::testing::random_tensor;

TEST(SelectiveScan, MatchesNaiveRecurrence) {
  Rng rng(7);
  for (std::size_t steps : {1u, 2u, 8u, 17u, 33u, 64u}) {
    const std::size_t dm = 3, n = 4;
    Bench bench;
    const TensorD x = random_tensor({steps, dm}, rng);
    const TensorD delta = random_tensor({steps, dm}, rng, 0.01, 1.0);
    const TensorD a = random_tensor({dm, n}, rng, -3.0, -0.1);
    const TensorD b = random_tensor({steps, n}, rng);
    const TensorD c = random_tensor({steps, n}, rng);
    auto y = ad::selective_scan(bench.input("x", x), bench.input("delta", delta),
                                bench.input("a", a), bench.input("b", b), bench.input("c", c));
    EXPECT_LT(max_abs_diff(bench.run()[y], naive_scan(x, delta, a, b, c)), 1e-9) << steps;
  }
}

TEST(SsmEncode, MatchesProjectedRecurrence) {
  Rng rng(11);
  Bench bench;
  const TensorD series = random_tensor({8, 3}, rng, -2.0, 2.0);
  auto p = SsmParams::declare(bench.scope().sub("ssm"), 3, 5, 4);
  auto h = ssm_encode(bench.input("series", series), p);
  bench.init(3);
  const auto& bd = bench.bindings;
  const TensorD x = matmul_ref(series, bd.at("ssm.w_in"));
  TensorD delta = matmul_ref(x, bd.at("ssm.w_delta"));
  for (std::size_t t = 0; t < 8; ++t) {
    for (std::size_t d = 0; d < 5; ++d) {
      const double z = delta(t, d) + bd.at("ssm.b_delta")[d];
      delta(t, d) = std::log1p(std::exp(z));
    }
  }
  TensorD a = bd.at("ssm.a_log");
  for (double& v : a.data()) v = -std::exp(v);
  const TensorD y = naive_scan(x, delta, a, matmul_ref(x, bd.at("ssm.w_b")), matmul_ref(x, bd.at("ssm.w_c")));
  TensorD last({1, 5});
  for (std::size_t d = 0; d < 5; ++d) last[d] = y(7, d);
  const TensorD expected = matmul_ref(last, bd.at("ssm.w_out"));
  EXPECT_LT(max_abs_diff(bench.run()[h], expected.reshaped({5})), 1e-10);
}

TEST(SsmEncode, ZeroSeriesGivesZeroState) {
  Bench bench;
  auto p = SsmParams::declare(bench.scope(), 6, 8, 4);
  auto h = ssm_encode(bench.input("series", TensorD({32, 6}, 0.0)), p);
  bench.init(5);
  EXPECT_EQ(bench.run()[h], TensorD({8}, 0.0));
}

TEST(SelectiveScan, SingleStepIsInputTerm) {
  Rng rng(13);
  Bench bench;
  const TensorD x = random_tensor({1, 3}, rng), delta = random_tensor({1, 3}, rng, 0.1, 1.0);
  const TensorD a = random_tensor({3, 2}, rng, -2.0, -0.5);
  const TensorD b = random_tensor({1, 2}, rng), c = random_tensor({1, 2}, rng);
  auto y = ad::selective_scan(bench.input("x", x), bench.input("delta", delta),
                              bench.input("a", a), bench.input("b", b), bench.input("c", c));
  const auto ev = bench.run();
  for (std::size_t d = 0; d < 3; ++d) {
    double expected = 0.0;
    for (std::size_t s = 0; s < 2; ++s) expected += delta[d] * b[s] * x[d] * c[s];
    EXPECT_NEAR(ev[y][d], expected, 1e-15);
  }
}

TEST(SelectiveScan, StaysBoundedForBoundedInputs) {
  Rng rng(17);
  ad::Graph g;
  auto y = ad::selective_scan(g.input("x", {64, 2}), g.input("delta", {64, 2}),
                              g.input("a", {2, 3}), g.input("b", {64, 3}), g.input("c", {64, 3}));
  double worst = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    ad::Bindings<double> b{{"x", random_tensor({64, 2}, rng, -10.0, 10.0)},
                           {"delta", random_tensor({64, 2}, rng, 1e-3, 5.0)},
                           {"a", random_tensor({2, 3}, rng, -5.0, -1e-3)},
                           {"b", random_tensor({64, 3}, rng, -1.0, 1.0)},
                           {"c", random_tensor({64, 3}, rng, -1.0, 1.0)}};
    const auto ev = ad::forward<double>(g, b);
    for (double v : ev[y].data()) worst = std::max(worst, std::abs(v));
  }
  EXPECT_LT(worst, 1e6);
}

TEST(SsmParams, DecayIsInUnitInterval) {
  Bench bench;
  SsmParams::declare(bench.scope(), 6, 64, 16);
  bench.init(42);
  const TensorD& a_log = bench.bindings.at("a_log");
  EXPECT_EQ(a_log(3, 0), 0.0);
  EXPECT_NEAR(a_log(3, 15), std::log(16.0), 1e-15);
  for (double delta : {1e-3, 0.1, 1.0, 10.0}) {
    for (double v : a_log.data()) {
      const double decay = std::exp(-delta * std::exp(v));
      EXPECT_GT(decay, 0.0);
      EXPECT_LT(decay, 1.0);
    }
  }
  for (double v : bench.bindings.at("b_delta").data()) {
    const double step = std::log1p(std::exp(v));
    EXPECT_GE(step, 1e-3 * (1 - 1e-12));
    EXPECT_LE(step, 1e-1 * (1 + 1e-12));
  }
}

TEST(ProjectAffine, MatchesMatVec) {
  Rng rng(19);
  Bench bench;
  const TensorD h = random_tensor({4}, rng);
  auto head = ModulationHead::declare(bench.scope(), 4, 6);
  auto [gamma, beta] = project_affine(bench.input("h", h), head);
  bench.init(1);
  const auto ev = bench.run();
  for (std::size_t j = 0; j < 6; ++j) {
    double g = 0.0, b = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      g += h[i] * bench.bindings.at("w_gamma")(i, j);
      b += h[i] * bench.bindings.at("w_beta")(i, j);
    }
    EXPECT_NEAR(ev[gamma][j], g, 1e-12);
    EXPECT_NEAR(ev[beta][j], b, 1e-12);
  }
}

TEST(ProjectAffine, ZeroStateAndZeroWeights) {
  Rng rng(23);
  Bench bench;
  auto head = ModulationHead::declare(bench.scope(), 4, 6);
  auto [g0, b0] = project_affine(bench.input("zero", TensorD({4}, 0.0)), head);
  auto [g1, b1] = project_affine(bench.input("h", random_tensor({4}, rng)), head);
  bench.init(2);
  bench.bindings["w_gamma"] = TensorD({4, 6}, 0.0);
  const auto ev = bench.run();
  EXPECT_EQ(ev[g0], TensorD({6}, 0.0));
  EXPECT_EQ(ev[b0], TensorD({6}, 0.0));
  EXPECT_EQ(ev[g1], TensorD({6}, 0.0));
}

TEST(FilmModulate, Examples) {
  Rng rng(29);
  Bench bench;
  const TensorD f = random_tensor({5, 3}, rng);
  auto id = film_modulate(bench.input("f", f), bench.input("g0", TensorD({3}, 0.0)),
                          bench.input("b0", TensorD({3}, 0.0)));
  auto hand = film_modulate(bench.input("f1", TensorD({1, 1}, {2.0})),
                            bench.input("g1", TensorD({1}, {0.5})),
                            bench.input("b1", TensorD({1}, {1.0})));
  const TensorD beta = random_tensor({3}, rng);
  auto annihilate = film_modulate(bench.graph.leaf("f"), bench.input("gm", TensorD({3}, -1.0)),
                                  bench.input("beta", beta));
  const auto ev = bench.run();
  EXPECT_EQ(ev[id], f);
  EXPECT_EQ(ev[hand], TensorD({1, 1}, {4.0}));
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(ev[annihilate](i, j), beta[j]);
  }
}

TEST(FilmModulate, RejectsWidthMismatch) {
  ad::Graph g;
  EXPECT_THROW(film_modulate(g.input("f", {4, 3}), g.input("g", {2}), g.input("b", {3})),
               ShapeError);
}

TEST(FilmModulate, IsAffineInFeatures) {
  Rng rng(31);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = u(rng), b = u(rng);
    Bench bench;
    const TensorD f1 = random_tensor({4, 3}, rng), f2 = random_tensor({4, 3}, rng);
    auto gamma = bench.input("gamma", random_tensor({3}, rng));
    auto beta = bench.input("beta", random_tensor({3}, rng));
    auto x1 = bench.input("f1", f1), x2 = bench.input("f2", f2);
    auto lhs = film_modulate(a * x1 + b * x2, gamma, beta);
    auto rhs = a * film_modulate(x1, gamma, beta) + b * film_modulate(x2, gamma, beta) -
               (a + b - 1.0) * beta;
    const auto ev = bench.run();
    EXPECT_LT(max_abs_diff(ev[lhs], ev[rhs]), 1e-12);
  }
}

TEST(PhmPath, GradientMatchesFiniteDifferences) {
  Rng rng(37);
  Bench bench;
  auto series = bench.graph.param("series", {10, 3});
  bench.bindings["series"] = random_tensor({10, 3}, rng, -2.0, 2.0);
  auto h = ssm_encode(series, SsmParams::declare(bench.scope().sub("ssm"), 3, 4, 3));
  auto [gamma, beta] = project_affine(h, ModulationHead::declare(bench.scope().sub("film"), 4, 5));
  auto out = film_modulate(bench.input("tokens", random_tensor({6, 5}, rng)), gamma, beta);
  auto loss = ad::sum(out * bench.input("w", random_tensor({6, 5}, rng)));
  bench.init(9);
  for (const auto& name : bench.graph.param_names()) {
    EXPECT_LT(ad::grad_check(bench.graph, bench.bindings, loss, name, 1e-5).max_rel_error, 1e-4)
        << name;
  }
}

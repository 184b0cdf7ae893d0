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
#include <random>

#include <gtest/gtest.h>

#include "weldad/autodiff.hpp"
#include "weldad/rng.hpp"

using namespace weldad;

namespace {

TensorD random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  TensorD t(std::move(shape));
  for (auto& v : t.data()) v = u(rng);
  return t;
}

}  // namespace

TEST(Forward, ScalarMultiply) {
  ad::Graph g;
  auto x = g.input("x", {2});
  auto y = x * 2.0;
  auto ev = ad::forward<double>(g, {{"x", TensorD({2}, {1, 2})}});
  EXPECT_EQ(ev[y], TensorD({2}, {2, 4}));
}

TEST(Forward, MatMulHandProduct) {
  ad::Graph g;
  auto a = g.input("A", {1, 2});
  auto b = g.input("B", {2, 1});
  auto c = ad::matmul(a, b);
  auto ev = ad::forward<double>(g, {{"A", TensorD({1, 2}, {1, 2})}, {"B", TensorD({2, 1}, {3, 4})}});
  EXPECT_EQ(ev[c], TensorD({1, 1}, {11}));
}

TEST(Forward, MissingBindingIsReported) {
  ad::Graph g;
  auto x = g.input("x", {2});
  (void)ad::sum(x);
  try {
    ad::forward<double>(g, {});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("missing binding"), std::string::npos);
  }
}

TEST(Forward, BindingShapeMismatch) {
  ad::Graph g;
  g.input("x", {2});
  EXPECT_THROW(ad::forward<double>(g, {{"x", TensorD({3})}}), ShapeError);
}

TEST(Forward, BuildTimeShapeMismatch) {
  ad::Graph g;
  auto a = g.input("a", {2, 3});
  auto b = g.input("b", {2, 3});
  EXPECT_THROW(ad::matmul(a, b), ShapeError);
  EXPECT_THROW(a + g.input("c", {4}), ShapeError);
}

TEST(Forward, NonFiniteNamesTheNode) {
  ad::Graph g;
  auto x = g.input("x", {1});
  (void)ad::log(x);
  try {
    ad::forward<double>(g, {{"x", TensorD({1}, {-1.0})}});
    FAIL() << "expected NonFiniteError";
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("log"), std::string::npos);
  }
}

TEST(Forward, IsPure) {
  ad::Graph g;
  auto x = g.input("x", {4, 3});
  auto y = ad::noisy_bottleneck(ad::softplus(x), 0.3, 0.2);
  (void)y;
  Rng rng(7);
  ad::Bindings<double> b{{"x", random_tensor({4, 3}, rng)}};
  ad::ForwardOptions opt{true, 123};
  auto e1 = ad::forward<double>(g, b, opt);
  auto e2 = ad::forward<double>(g, b, opt);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(e1.values[i], e2.values[i]);
}

TEST(Backward, SumOfSquares) {
  ad::Graph g;
  auto x = g.param("x", {2});
  auto loss = ad::sum(x * x);
  auto ev = ad::forward<double>(g, {{"x", TensorD({2}, {1, 2})}});
  auto grads = ad::backward(g, ev, loss);
  EXPECT_EQ(grads.at("x"), TensorD({2}, {2, 4}));
}

TEST(Backward, CosineGradientOrthogonalAtEquality) {
  ad::Graph g;
  auto a = g.param("a", {5});
  auto b = g.input("b", {5});
  auto loss = 1.0 - ad::cosine_similarity(a, b);
  TensorD v({5}, {0.3, -1.2, 2.0, 0.5, 0.1});
  auto ev = ad::forward<double>(g, {{"a", v}, {"b", v}});
  EXPECT_NEAR(ev[loss].item(), 0.0, 1e-15);
  auto grad = ad::backward(g, ev, loss).at("a");
  double norm = 0, dot = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    norm += v[i] * v[i];
    dot += grad[i] * v[i];
  }
  EXPECT_NEAR(dot / std::sqrt(norm), 0.0, 1e-12);
}

TEST(Backward, EluPlusOneMean) {
  ad::Graph g;
  auto x = g.param("x", {4});
  auto loss = ad::mean(ad::elu(x) + 1.0);
  auto ev = ad::forward<double>(g, {{"x", TensorD({4}, -0.5)}});
  auto grad = ad::backward(g, ev, loss).at("x");
  for (double v : grad.data()) EXPECT_NEAR(v, std::exp(-0.5) / 4.0, 1e-15);
}

TEST(Backward, LossMustBeScalar) {
  ad::Graph g;
  auto x = g.param("x", {2});
  auto y = x * 3.0;
  auto ev = ad::forward<double>(g, {{"x", TensorD({2}, 1.0)}});
  EXPECT_THROW(ad::backward(g, ev, y), Error);
}

TEST(Backward, GradientForRequestedInput) {
  ad::Graph g;
  auto w = g.param("w", {3});
  auto x = g.input("x", {3});
  auto loss = ad::sum(w * x);
  auto ev = ad::forward<double>(g, {{"w", TensorD({3}, {1, 2, 3})}, {"x", TensorD({3}, 5.0)}});
  auto grads = ad::backward(g, ev, loss, {"x"});
  EXPECT_EQ(grads.at("x"), TensorD({3}, {1, 2, 3}));
  EXPECT_EQ(grads.at("w"), TensorD({3}, 5.0));
  auto only_params = ad::backward(g, ev, loss);
  EXPECT_EQ(only_params.count("x"), 0u);
}

TEST(Backward, MaxRoutesToFirstMaximum) {
  ad::Graph g;
  auto x = g.param("x", {3, 2});
  auto loss = ad::sum(ad::max(x, 0));
  auto ev = ad::forward<double>(g, {{"x", TensorD({3, 2}, {1, 5, 4, 5, 4, 0})}});
  auto grad = ad::backward(g, ev, loss).at("x");
  EXPECT_EQ(grad, TensorD({3, 2}, {0, 1, 1, 0, 0, 0}));
}

TEST(Backward, TopKTiesShareSlots) {
  ad::Graph g;
  auto x = g.param("x", {4});
  auto loss = ad::topk_mean(x, 2);
  auto ev = ad::forward<double>(g, {{"x", TensorD({4}, {3, 1, 1, 1})}});
  EXPECT_DOUBLE_EQ(ev[loss].item(), 2.0);
  auto grad = ad::backward(g, ev, loss).at("x");
  EXPECT_DOUBLE_EQ(grad[0], 0.5);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_DOUBLE_EQ(grad[i], 0.5 / 3.0);
}

TEST(Backward, LinearityOverRandomGraphs) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    ad::Graph g;
    auto x = g.param("x", {3, 4});
    auto w = g.input("w", {4, 2});
    auto h = ad::matmul(ad::sigmoid(x), w);
    auto l1 = ad::sum(h * h);
    auto l2 = ad::mean(ad::softplus(h - 0.5) * 3.0);
    auto l12 = l1 + l2;
    ad::Bindings<double> b{{"x", random_tensor({3, 4}, rng)}, {"w", random_tensor({4, 2}, rng)}};
    auto ev = ad::forward<double>(g, b);
    auto g1 = ad::backward(g, ev, l1).at("x");
    auto g2 = ad::backward(g, ev, l2).at("x");
    auto g12 = ad::backward(g, ev, l12).at("x");
    for (std::size_t i = 0; i < g12.size(); ++i) EXPECT_NEAR(g12[i], g1[i] + g2[i], 1e-12);
  }
}

TEST(Backward, BroadcastReduction) {
  ad::Graph g;
  auto x = g.param("x", {3, 4});
  auto bias = g.param("b", {4});
  auto loss = ad::sum((x + bias) * (x + bias));
  Rng rng(3);
  ad::Bindings<double> b{{"x", random_tensor({3, 4}, rng)}, {"b", random_tensor({4}, rng)}};
  EXPECT_LT(ad::grad_check(g, b, loss, "b", 1e-6).max_rel_error, 1e-7);
  EXPECT_LT(ad::grad_check(g, b, loss, "x", 1e-6).max_rel_error, 1e-7);
}

TEST(GradCheck, SumOfSquares) {
  ad::Graph g;
  auto x = g.param("x", {5});
  auto loss = ad::sum(x * x);
  Rng rng(1);
  ad::Bindings<double> b{{"x", random_tensor({5}, rng)}};
  EXPECT_LT(ad::grad_check(g, b, loss, "x", 1e-5).max_rel_error, 1e-7);
}

TEST(GradCheck, ConstantGraphIsZero) {
  ad::Graph g;
  auto x = g.param("x", {3});
  auto loss = ad::sum(g.constant(TensorD({3}, 2.0))) + ad::sum(x) * 0.0;
  ad::Bindings<double> b{{"x", TensorD({3}, 1.0)}};
  auto r = ad::grad_check(g, b, loss, "x", 1e-5);
  EXPECT_EQ(r.max_rel_error, 0.0);
}

TEST(GradCheck, RejectsEpsOutsideRange) {
  ad::Graph g;
  auto x = g.param("x", {1});
  auto loss = ad::sum(x);
  ad::Bindings<double> b{{"x", TensorD({1}, 1.0)}};
  EXPECT_THROW(ad::grad_check(g, b, loss, "x", 1e-3), Error);
}

TEST(GradCheck, FrozenBottleneckNoise) {
  ad::Graph g;
  auto x = g.param("x", {6, 3});
  auto loss = ad::sum(ad::pow(ad::noisy_bottleneck(x, 0.25, 0.1) + 2.0, 2.0));
  Rng rng(11);
  ad::Bindings<double> b{{"x", random_tensor({6, 3}, rng)}};
  auto r = ad::grad_check(g, b, loss, "x", 1e-6, {true, 99});
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(Bottleneck, EvalIsBitIdentical) {
  ad::Graph g;
  auto x = g.input("x", {4, 4});
  auto y = ad::noisy_bottleneck(x, 0.5, 1.0);
  Rng rng(5);
  auto t = random_tensor({4, 4}, rng);
  auto ev = ad::forward<double>(g, {{"x", t}}, {false, 1});
  EXPECT_EQ(ev[y], t);
}

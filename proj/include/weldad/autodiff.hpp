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

// Static computation graphs with reverse-mode differentiation.
//
// A Graph is built once from symbolic Var handles; shapes are inferred and
// checked at build time. Evaluation is a separate step that binds named
// inputs and parameters to concrete tensors of either float or double, so
// the same graph serves 32-bit training and 64-bit gradient checks.
//
//   ad::Graph g;
//   auto x = g.input("x", {2});
//   auto loss = ad::sum(x * x);
//   auto ev = ad::forward<double>(g, {{"x", TensorD({2}, {1, 2})}});
//   auto grads = ad::backward(g, ev, loss, {"x"});  // grads["x"] == [2, 4]

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "weldad/tensor.hpp"

namespace weldad::ad {

enum class Op : std::uint8_t {
  kInput,
  kParam,
  kConstant,
  kMatMul,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kScale,
  kAddScalar,
  kExp,
  kLog,
  kAbs,
  kSoftplus,
  kElu,
  kSigmoid,
  kPowScalar,
  kSmoothL1,
  kClampMin,
  kSum,
  kMean,
  kSumAxis,
  kMeanAxis,
  kMaxAxis,
  kBroadcast,
  kReshape,
  kConcat,
  kSlice,
  kTranspose,
  kSoftmax,
  kCosineSim,
  kTopKMean,
  kSelectiveScan,
  kNoisyBottleneck,
  kStopGradient,
};

const char* op_name(Op op);

using NodeId = std::uint32_t;

struct Node {
  Op op = Op::kInput;
  std::vector<NodeId> inputs;
  Shape shape;
  std::string name;
  double scalar = 0.0;
  double scalar2 = 0.0;
  std::size_t axis = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::shared_ptr<const TensorD> constant;
};

class Graph;

/// Handle to a node in a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, NodeId id) : graph_(graph), id_(id) {}

  Graph& graph() const { return *graph_; }
  NodeId id() const { return id_; }
  const Shape& shape() const;
  bool valid() const { return graph_ != nullptr; }

 private:
  Graph* graph_ = nullptr;
  NodeId id_ = 0;
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Non-trainable leaf that must be bound at evaluation time.
  Var input(const std::string& name, Shape shape);
  /// Trainable leaf; bound like an input, gradients are reported for it.
  Var param(const std::string& name, Shape shape);
  Var constant(TensorD value);
  Var constant_scalar(double v) { return constant(TensorD::scalar(v)); }

  Var add_node(Node node);

  const Node& node(NodeId id) const { return nodes_.at(id); }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }

  bool has_leaf(const std::string& name) const { return leaves_.count(name) != 0; }
  Var leaf(const std::string& name);
  /// Names of trainable leaves in creation order.
  std::vector<std::string> param_names() const;
  std::vector<std::string> input_names() const;

 private:
  Var add_leaf(Op op, const std::string& name, Shape shape);

  std::vector<Node> nodes_;
  std::map<std::string, NodeId> leaves_;
};

// Elementwise binary ops broadcast with numpy alignment rules.
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator*(Var a, double s);
Var operator*(double s, Var a);
Var operator+(Var a, double s);
Var operator+(double s, Var a);
Var operator-(Var a, double s);
Var operator-(double s, Var a);
Var operator-(Var a);

Var matmul(Var a, Var b);
Var exp(Var a);
Var log(Var a);
Var abs(Var a);
Var softplus(Var a);
Var elu(Var a);
Var sigmoid(Var a);
Var pow(Var a, double exponent);
Var smooth_l1(Var a, double delta);
/// max(a, floor); gradient passes only where a > floor.
Var clamp_min(Var a, double floor);
Var sum(Var a);
Var mean(Var a);
Var sum(Var a, std::size_t axis);
Var mean(Var a, std::size_t axis);
/// Max over one axis. The adjoint goes to the first maximal element.
Var max(Var a, std::size_t axis);
Var broadcast_to(Var a, Shape shape);
Var reshape(Var a, Shape shape);
Var concat(std::span<const Var> parts, std::size_t axis);
Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end);
Var transpose(Var a);
/// Softmax along the last axis of a rank-2 tensor.
Var softmax_rows(Var a);
/// Cosine similarity of two equally shaped tensors, viewed as flat vectors.
Var cosine_similarity(Var a, Var b);
/// Mean of the k largest entries. Entries tied at the k-th value share the
/// remaining slots equally in the adjoint.
Var topk_mean(Var a, std::size_t k);
/// Diagonal selective scan.
///   h_t = exp(delta_t * A) . h_{t-1} + (delta_t * x_t) (x) B_t,  y_t = h_t C_t
/// x, delta: T x Dm; A: Dm x N (negative); B, C: T x N. Returns y: T x Dm.
Var selective_scan(Var x, Var delta, Var a, Var b, Var c);
/// Training: (mask . x) / (1 - rho) + sigma * eps with a per-evaluation seeded
/// draw. Evaluation mode: identity.
Var noisy_bottleneck(Var x, double rho, double sigma);

/// Identity in the forward pass; blocks the adjoint.
Var stop_gradient(Var a);

struct ForwardOptions {
  bool training = false;
  std::uint64_t seed = 0;
};

template <typename T>
using Bindings = std::map<std::string, Tensor<T>>;

template <typename T>
using Gradients = std::map<std::string, Tensor<T>>;

/// Node values of one forward pass. `aux` holds per-node scratch kept for the
/// adjoint (scan states, bottleneck masks).
template <typename T>
struct Evaluation {
  std::vector<Tensor<T>> values;
  std::vector<Tensor<T>> aux;
  ForwardOptions options;

  const Tensor<T>& operator[](Var v) const { return values.at(v.id()); }
};

/// Evaluates every node. Throws if a leaf is unbound, a binding has the wrong
/// shape, or any node produces a non-finite value.
template <typename T>
Evaluation<T> forward(const Graph& graph, const Bindings<T>& bindings,
                      ForwardOptions options = {});

/// Gradient of a scalar node with respect to every trainable leaf, plus the
/// named non-trainable inputs in `wrt_inputs`.
template <typename T>
Gradients<T> backward(const Graph& graph, const Evaluation<T>& eval, Var loss,
                      std::span<const std::string> wrt_inputs = {});

template <typename T>
Gradients<T> backward(const Graph& graph, const Evaluation<T>& eval, Var loss,
                      std::initializer_list<std::string> wrt_inputs) {
  std::vector<std::string> names(wrt_inputs);
  return backward(graph, eval, loss, std::span<const std::string>(names));
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Central-difference check of d(loss)/d(leaf) for every element of one
/// leaf. Relative error uses max(|analytic|, |numeric|, 1e-8) as the
/// denominator. Stochastic nodes are frozen by reusing `options.seed`.
GradCheckResult grad_check(const Graph& graph, const Bindings<double>& bindings,
                           Var loss, const std::string& leaf, double eps,
                           ForwardOptions options = {});

}  // namespace weldad::ad

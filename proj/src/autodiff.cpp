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

#include "weldad/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "weldad/rng.hpp"

namespace weldad {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

}  // namespace weldad

namespace weldad::ad {

const char* op_name(Op op) {
  switch (op) {
    case Op::kInput: return "input";
    case Op::kParam: return "param";
    case Op::kConstant: return "constant";
    case Op::kMatMul: return "matmul";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kScale: return "scale";
    case Op::kAddScalar: return "add_scalar";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kAbs: return "abs";
    case Op::kSoftplus: return "softplus";
    case Op::kElu: return "elu";
    case Op::kSigmoid: return "sigmoid";
    case Op::kPowScalar: return "pow";
    case Op::kSmoothL1: return "smooth_l1";
    case Op::kClampMin: return "clamp_min";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kSumAxis: return "sum_axis";
    case Op::kMeanAxis: return "mean_axis";
    case Op::kMaxAxis: return "max_axis";
    case Op::kBroadcast: return "broadcast";
    case Op::kReshape: return "reshape";
    case Op::kConcat: return "concat";
    case Op::kSlice: return "slice";
    case Op::kTranspose: return "transpose";
    case Op::kSoftmax: return "softmax";
    case Op::kCosineSim: return "cosine_similarity";
    case Op::kTopKMean: return "topk_mean";
    case Op::kSelectiveScan: return "selective_scan";
    case Op::kNoisyBottleneck: return "noisy_bottleneck";
    case Op::kStopGradient: return "stop_gradient";
  }
  return "unknown";
}

namespace {

Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError("cannot broadcast " + shape_to_string(a) + " with " +
                       shape_to_string(b));
    }
    out[i] = std::max(da, db);
  }
  return out;
}

bool broadcastable_to(const Shape& from, const Shape& to) {
  if (from.size() > to.size()) return false;
  const std::size_t off = to.size() - from.size();
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (from[i] != 1 && from[i] != to[off + i]) return false;
  }
  return true;
}

// For every flat index of `out`, the flat index of the broadcast source.
std::vector<std::size_t> broadcast_map(const Shape& in, const Shape& out) {
  const std::size_t n = shape_size(out);
  std::vector<std::size_t> map(n);
  const std::size_t in_n = shape_size(in);
  if (in == out) {
    std::iota(map.begin(), map.end(), std::size_t{0});
    return map;
  }
  if (in_n == 1) return map;
  const std::size_t rank = out.size();
  const std::size_t off = rank - in.size();
  std::vector<std::size_t> in_stride(rank, 0);
  std::size_t s = 1;
  for (std::size_t i = in.size(); i-- > 0;) {
    in_stride[off + i] = in[i] == 1 ? 0 : s;
    s *= in[i];
  }
  std::vector<std::size_t> idx(rank, 0);
  std::size_t src = 0;
  for (std::size_t flat = 0; flat < n; ++flat) {
    map[flat] = src;
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      src += in_stride[d];
      if (idx[d] < out[d]) break;
      src -= in_stride[d] * idx[d];
      idx[d] = 0;
    }
  }
  return map;
}

Shape drop_axis(const Shape& s, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i != axis) out.push_back(s[i]);
  }
  return out;
}

// outer x axis x inner decomposition around `axis`.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

Var unary(Var a, Op op, double scalar = 0.0) {
  Node n;
  n.op = op;
  n.inputs = {a.id()};
  n.shape = a.shape();
  n.scalar = scalar;
  return a.graph().add_node(std::move(n));
}

Var binary(Var a, Var b, Op op) {
  if (&a.graph() != &b.graph()) throw Error("operands belong to different graphs");
  Node n;
  n.op = op;
  n.inputs = {a.id(), b.id()};
  n.shape = broadcast_shapes(a.shape(), b.shape());
  return a.graph().add_node(std::move(n));
}

Var reduce_axis(Var a, std::size_t axis, Op op) {
  if (axis >= a.shape().size()) throw ShapeError("reduction axis out of range");
  Node n;
  n.op = op;
  n.inputs = {a.id()};
  n.shape = drop_axis(a.shape(), axis);
  n.axis = axis;
  return a.graph().add_node(std::move(n));
}

}  // namespace

// ---------------------------------------------------------------------------
// Graph construction

const Shape& Var::shape() const { return graph_->node(id_).shape; }

Var Graph::add_leaf(Op op, const std::string& name, Shape shape) {
  if (leaves_.count(name)) throw Error("duplicate leaf name '" + name + "'");
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("leaf '" + name + "' has a zero extent");
  }
  Node n;
  n.op = op;
  n.name = name;
  n.shape = std::move(shape);
  Var v = add_node(std::move(n));
  leaves_[name] = v.id();
  return v;
}

Var Graph::input(const std::string& name, Shape shape) {
  return add_leaf(Op::kInput, name, std::move(shape));
}

Var Graph::param(const std::string& name, Shape shape) {
  return add_leaf(Op::kParam, name, std::move(shape));
}

Var Graph::constant(TensorD value) {
  Node n;
  n.op = Op::kConstant;
  n.shape = value.shape();
  n.constant = std::make_shared<const TensorD>(std::move(value));
  return add_node(std::move(n));
}

Var Graph::add_node(Node node) {
  for (NodeId in : node.inputs) {
    if (in >= nodes_.size()) throw Error("node input refers to a later node");
  }
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<NodeId>(nodes_.size() - 1));
}

Var Graph::leaf(const std::string& name) {
  auto it = leaves_.find(name);
  if (it == leaves_.end()) throw Error("no leaf named '" + name + "'");
  return Var(this, it->second);
}

std::vector<std::string> Graph::param_names() const {
  std::vector<std::string> names;
  for (const Node& n : nodes_) {
    if (n.op == Op::kParam) names.push_back(n.name);
  }
  return names;
}

std::vector<std::string> Graph::input_names() const {
  std::vector<std::string> names;
  for (const Node& n : nodes_) {
    if (n.op == Op::kInput) names.push_back(n.name);
  }
  return names;
}

Var operator+(Var a, Var b) { return binary(a, b, Op::kAdd); }
Var operator-(Var a, Var b) { return binary(a, b, Op::kSub); }
Var operator*(Var a, Var b) { return binary(a, b, Op::kMul); }
Var operator/(Var a, Var b) { return binary(a, b, Op::kDiv); }
Var operator*(Var a, double s) { return unary(a, Op::kScale, s); }
Var operator*(double s, Var a) { return unary(a, Op::kScale, s); }
Var operator+(Var a, double s) { return unary(a, Op::kAddScalar, s); }
Var operator+(double s, Var a) { return unary(a, Op::kAddScalar, s); }
Var operator-(Var a, double s) { return unary(a, Op::kAddScalar, -s); }
Var operator-(double s, Var a) { return unary(unary(a, Op::kScale, -1.0), Op::kAddScalar, s); }
Var operator-(Var a) { return unary(a, Op::kScale, -1.0); }

Var matmul(Var a, Var b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.empty() || sb.empty() || sa.size() > 2 || sb.size() > 2) {
    throw ShapeError("matmul expects rank-1 or rank-2 operands");
  }
  const std::size_t k_a = sa.back();
  const std::size_t k_b = sb.size() == 2 ? sb[0] : sb[0];
  if (k_a != k_b) {
    throw ShapeError("matmul inner dimensions differ: " + shape_to_string(sa) +
                     " x " + shape_to_string(sb));
  }
  Node n;
  n.op = Op::kMatMul;
  n.inputs = {a.id(), b.id()};
  if (sa.size() == 2) n.shape.push_back(sa[0]);
  if (sb.size() == 2) n.shape.push_back(sb[1]);
  return a.graph().add_node(std::move(n));
}

Var exp(Var a) { return unary(a, Op::kExp); }
Var log(Var a) { return unary(a, Op::kLog); }
Var abs(Var a) { return unary(a, Op::kAbs); }
Var softplus(Var a) { return unary(a, Op::kSoftplus); }
Var elu(Var a) { return unary(a, Op::kElu); }
Var sigmoid(Var a) { return unary(a, Op::kSigmoid); }
Var pow(Var a, double exponent) { return unary(a, Op::kPowScalar, exponent); }
Var smooth_l1(Var a, double delta) {
  if (!(delta > 0)) throw Error("smooth_l1 transition must be positive");
  return unary(a, Op::kSmoothL1, delta);
}
Var clamp_min(Var a, double floor) { return unary(a, Op::kClampMin, floor); }
Var stop_gradient(Var a) { return unary(a, Op::kStopGradient); }

Var sum(Var a) {
  Node n;
  n.op = Op::kSum;
  n.inputs = {a.id()};
  return a.graph().add_node(std::move(n));
}

Var mean(Var a) {
  Node n;
  n.op = Op::kMean;
  n.inputs = {a.id()};
  return a.graph().add_node(std::move(n));
}

Var sum(Var a, std::size_t axis) { return reduce_axis(a, axis, Op::kSumAxis); }
Var mean(Var a, std::size_t axis) { return reduce_axis(a, axis, Op::kMeanAxis); }
Var max(Var a, std::size_t axis) { return reduce_axis(a, axis, Op::kMaxAxis); }

Var broadcast_to(Var a, Shape shape) {
  if (!broadcastable_to(a.shape(), shape)) {
    throw ShapeError("cannot broadcast " + shape_to_string(a.shape()) + " to " +
                     shape_to_string(shape));
  }
  Node n;
  n.op = Op::kBroadcast;
  n.inputs = {a.id()};
  n.shape = std::move(shape);
  return a.graph().add_node(std::move(n));
}

Var reshape(Var a, Shape shape) {
  if (shape_size(shape) != shape_size(a.shape())) {
    throw ShapeError("reshape " + shape_to_string(a.shape()) + " -> " +
                     shape_to_string(shape) + " changes element count");
  }
  Node n;
  n.op = Op::kReshape;
  n.inputs = {a.id()};
  n.shape = std::move(shape);
  return a.graph().add_node(std::move(n));
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  Shape shape = parts[0].shape();
  if (axis >= shape.size()) throw ShapeError("concat axis out of range");
  Node n;
  n.op = Op::kConcat;
  n.axis = axis;
  shape[axis] = 0;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != shape.size()) throw ShapeError("concat rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != shape[i]) {
        throw ShapeError("concat extent mismatch on axis " + std::to_string(i));
      }
    }
    shape[axis] += s[axis];
    n.inputs.push_back(p.id());
  }
  n.shape = std::move(shape);
  return parts[0].graph().add_node(std::move(n));
}

Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& s = a.shape();
  if (axis >= s.size() || begin >= end || end > s[axis]) {
    throw ShapeError("slice [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of range for " + shape_to_string(s));
  }
  Node n;
  n.op = Op::kSlice;
  n.inputs = {a.id()};
  n.axis = axis;
  n.begin = begin;
  n.end = end;
  n.shape = s;
  n.shape[axis] = end - begin;
  return a.graph().add_node(std::move(n));
}

Var transpose(Var a) {
  if (a.shape().size() != 2) throw ShapeError("transpose expects rank 2");
  Node n;
  n.op = Op::kTranspose;
  n.inputs = {a.id()};
  n.shape = {a.shape()[1], a.shape()[0]};
  return a.graph().add_node(std::move(n));
}

Var softmax_rows(Var a) {
  if (a.shape().size() != 2) throw ShapeError("softmax_rows expects rank 2");
  return unary(a, Op::kSoftmax);
}

Var cosine_similarity(Var a, Var b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("cosine_similarity shape mismatch " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
  }
  Node n;
  n.op = Op::kCosineSim;
  n.inputs = {a.id(), b.id()};
  return a.graph().add_node(std::move(n));
}

Var topk_mean(Var a, std::size_t k) {
  if (k == 0 || k > shape_size(a.shape())) {
    throw ShapeError("topk_mean k=" + std::to_string(k) + " out of range for " +
                     shape_to_string(a.shape()));
  }
  Node n;
  n.op = Op::kTopKMean;
  n.inputs = {a.id()};
  n.begin = k;
  return a.graph().add_node(std::move(n));
}

Var selective_scan(Var x, Var delta, Var a, Var b, Var c) {
  const Shape& sx = x.shape();
  if (sx.size() != 2 || delta.shape() != sx) {
    throw ShapeError("selective_scan: x and delta must be equal T x Dm");
  }
  const std::size_t t = sx[0], dm = sx[1];
  if (a.shape().size() != 2 || a.shape()[0] != dm) {
    throw ShapeError("selective_scan: A must be Dm x N");
  }
  const std::size_t n_state = a.shape()[1];
  const Shape bc{t, n_state};
  if (b.shape() != bc || c.shape() != bc) {
    throw ShapeError("selective_scan: B and C must be T x N");
  }
  Node n;
  n.op = Op::kSelectiveScan;
  n.inputs = {x.id(), delta.id(), a.id(), b.id(), c.id()};
  n.shape = sx;
  return x.graph().add_node(std::move(n));
}

Var noisy_bottleneck(Var x, double rho, double sigma) {
  if (!(rho >= 0.0) || rho >= 1.0) throw Error("bottleneck mask probability must lie in [0,1)");
  if (!(sigma >= 0.0)) throw Error("bottleneck noise scale must be non-negative");
  Node n;
  n.op = Op::kNoisyBottleneck;
  n.inputs = {x.id()};
  n.shape = x.shape();
  n.scalar = rho;
  n.scalar2 = sigma;
  return x.graph().add_node(std::move(n));
}

// ---------------------------------------------------------------------------
// Kernels

namespace {

template <typename T>
T softplus_value(T x) {
  if (x > T(20)) return x;
  return std::log1p(std::exp(x));
}

template <typename T>
T sigmoid_value(T x) {
  if (x >= 0) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

// Row-major GEMM helpers on raw spans; a is n x k, b is k x m.
template <typename T>
void gemm(std::span<const T> a, std::span<const T> b, std::span<T> out, std::size_t n,
          std::size_t k, std::size_t m) {
  std::fill(out.begin(), out.end(), T(0));
  for (std::size_t i = 0; i < n; ++i) {
    T* row = out.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      if (av == T(0)) continue;
      const T* brow = b.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) row[j] += av * brow[j];
    }
  }
}

// out (n x m) += g (n x m) * b^T where b is k x m; result n x k.
template <typename T>
void gemm_bt(std::span<const T> g, std::span<const T> b, std::span<T> out, std::size_t n,
             std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      T acc = 0;
      const T* grow = g.data() + i * m;
      const T* brow = b.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
      out[i * k + p] += acc;
    }
  }
}

// out (k x m) += a^T (k x n) * g (n x m) where a is n x k.
template <typename T>
void gemm_at(std::span<const T> a, std::span<const T> g, std::span<T> out, std::size_t n,
             std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const T* grow = g.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      if (av == T(0)) continue;
      T* orow = out.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * grow[j];
    }
  }
}

struct MatDims {
  std::size_t n, k, m;
};

MatDims mat_dims(const Shape& sa, const Shape& sb) {
  MatDims d;
  d.n = sa.size() == 2 ? sa[0] : 1;
  d.k = sa.back();
  d.m = sb.size() == 2 ? sb[1] : 1;
  return d;
}

template <typename T>
Tensor<T> reduce_to(const Tensor<T>& g, const Shape& target) {
  if (g.shape() == target) return g;
  Tensor<T> r(target, T(0));
  const auto map = broadcast_map(target, g.shape());
  for (std::size_t i = 0; i < g.size(); ++i) r[map[i]] += g[i];
  return r;
}

std::vector<std::size_t> topk_order(std::span<const double> keys) {
  std::vector<std::size_t> order(keys.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return keys[i] > keys[j]; });
  return order;
}

template <typename T>
Tensor<T> topk_weights(const Tensor<T>& x, std::size_t k) {
  std::vector<double> keys(x.data().begin(), x.data().end());
  const auto order = topk_order(keys);
  const double kth = keys[order[k - 1]];
  std::size_t above = 0, tied = 0;
  for (double v : keys) {
    if (v > kth) ++above;
    else if (v == kth) ++tied;
  }
  Tensor<T> w(x.shape(), T(0));
  const double share = static_cast<double>(k - above) / static_cast<double>(tied);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (keys[i] > kth) w[i] = T(1.0 / static_cast<double>(k));
    else if (keys[i] == kth) w[i] = T(share / static_cast<double>(k));
  }
  return w;
}

template <typename T>
void check_finite(const Tensor<T>& t, const Graph& graph, NodeId id, const char* phase) {
  if (t.all_finite()) return;
  const Node& n = graph.node(id);
  std::string msg = std::string("non-finite value in ") + phase + " at node " +
                    std::to_string(id) + " (" + op_name(n.op);
  if (!n.name.empty()) msg += " '" + n.name + "'";
  msg += ")";
  throw NonFiniteError(msg);
}

template <typename T>
void eval_node(const Graph& graph, NodeId id, const Bindings<T>& bindings,
               Evaluation<T>& ev) {
  const Node& node = graph.node(id);
  auto in = [&](std::size_t i) -> const Tensor<T>& { return ev.values[node.inputs[i]]; };
  Tensor<T>& out = ev.values[id];

  switch (node.op) {
    case Op::kInput:
    case Op::kParam: {
      auto it = bindings.find(node.name);
      if (it == bindings.end()) throw Error("missing binding for '" + node.name + "'");
      if (it->second.shape() != node.shape) {
        throw ShapeError("binding '" + node.name + "' has shape " +
                         shape_to_string(it->second.shape()) + ", expected " +
                         shape_to_string(node.shape));
      }
      out = it->second;
      return;
    }
    case Op::kConstant:
      out = node.constant->template cast<T>();
      return;
    case Op::kMatMul: {
      const auto d = mat_dims(in(0).shape(), in(1).shape());
      out = Tensor<T>(node.shape);
      gemm<T>(in(0).data(), in(1).data(), out.data(), d.n, d.k, d.m);
      return;
    }
    case Op::kAdd:
    case Op::kSub:
    case Op::kMul:
    case Op::kDiv: {
      out = Tensor<T>(node.shape);
      const auto& a = in(0);
      const auto& b = in(1);
      const bool fast = a.shape() == node.shape && b.shape() == node.shape;
      std::vector<std::size_t> ma, mb;
      if (!fast) {
        ma = broadcast_map(a.shape(), node.shape);
        mb = broadcast_map(b.shape(), node.shape);
      }
      for (std::size_t i = 0; i < out.size(); ++i) {
        const T x = fast ? a[i] : a[ma[i]];
        const T y = fast ? b[i] : b[mb[i]];
        switch (node.op) {
          case Op::kAdd: out[i] = x + y; break;
          case Op::kSub: out[i] = x - y; break;
          case Op::kMul: out[i] = x * y; break;
          default: out[i] = x / y; break;
        }
      }
      return;
    }
    default:
      break;
  }

  // Unary elementwise ops.
  auto map_unary = [&](auto fn) {
    const auto& a = in(0);
    out = Tensor<T>(node.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fn(a[i]);
  };
  const T s = static_cast<T>(node.scalar);

  switch (node.op) {
    case Op::kScale: map_unary([&](T x) { return x * s; }); return;
    case Op::kAddScalar: map_unary([&](T x) { return x + s; }); return;
    case Op::kExp: map_unary([](T x) { return std::exp(x); }); return;
    case Op::kLog: map_unary([](T x) { return std::log(x); }); return;
    case Op::kAbs: map_unary([](T x) { return std::abs(x); }); return;
    case Op::kSoftplus: map_unary([](T x) { return softplus_value(x); }); return;
    case Op::kElu: map_unary([](T x) { return x > 0 ? x : std::expm1(x); }); return;
    case Op::kSigmoid: map_unary([](T x) { return sigmoid_value(x); }); return;
    case Op::kPowScalar: map_unary([&](T x) { return std::pow(x, s); }); return;
    case Op::kSmoothL1:
      map_unary([&](T x) {
        const T ax = std::abs(x);
        return ax < s ? T(0.5) * x * x / s : ax - T(0.5) * s;
      });
      return;
    case Op::kClampMin: map_unary([&](T x) { return x > s ? x : s; }); return;
    case Op::kStopGradient: out = in(0); return;
    case Op::kSum:
    case Op::kMean: {
      const auto& a = in(0);
      T acc = 0;
      for (T v : a.data()) acc += v;
      if (node.op == Op::kMean) acc /= static_cast<T>(a.size());
      out = Tensor<T>::scalar(acc);
      return;
    }
    case Op::kSumAxis:
    case Op::kMeanAxis:
    case Op::kMaxAxis: {
      const auto& a = in(0);
      const auto sp = split_axis(a.shape(), node.axis);
      out = Tensor<T>(node.shape);
      Tensor<T> arg;
      if (node.op == Op::kMaxAxis) arg = Tensor<T>(node.shape);
      for (std::size_t o = 0; o < sp.outer; ++o) {
        for (std::size_t i = 0; i < sp.inner; ++i) {
          const std::size_t base = o * sp.extent * sp.inner + i;
          T acc = node.op == Op::kMaxAxis ? a[base] : T(0);
          std::size_t best = 0;
          for (std::size_t e = 0; e < sp.extent; ++e) {
            const T v = a[base + e * sp.inner];
            if (node.op == Op::kMaxAxis) {
              if (v > acc) {
                acc = v;
                best = e;
              }
            } else {
              acc += v;
            }
          }
          if (node.op == Op::kMeanAxis) acc /= static_cast<T>(sp.extent);
          out[o * sp.inner + i] = acc;
          if (node.op == Op::kMaxAxis) arg[o * sp.inner + i] = static_cast<T>(best);
        }
      }
      if (node.op == Op::kMaxAxis) ev.aux[id] = std::move(arg);
      return;
    }
    case Op::kBroadcast: {
      const auto& a = in(0);
      const auto map = broadcast_map(a.shape(), node.shape);
      out = Tensor<T>(node.shape);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[map[i]];
      return;
    }
    case Op::kReshape:
      out = in(0).reshaped(node.shape);
      return;
    case Op::kConcat: {
      out = Tensor<T>(node.shape);
      const auto sp = split_axis(node.shape, node.axis);
      std::size_t offset = 0;
      for (std::size_t p = 0; p < node.inputs.size(); ++p) {
        const auto& part = in(p);
        const std::size_t ext = part.shape()[node.axis];
        for (std::size_t o = 0; o < sp.outer; ++o) {
          std::copy_n(part.data().begin() + o * ext * sp.inner, ext * sp.inner,
                      out.data().begin() + (o * sp.extent + offset) * sp.inner);
        }
        offset += ext;
      }
      return;
    }
    case Op::kSlice: {
      const auto& a = in(0);
      const auto sp = split_axis(a.shape(), node.axis);
      const std::size_t ext = node.end - node.begin;
      out = Tensor<T>(node.shape);
      for (std::size_t o = 0; o < sp.outer; ++o) {
        std::copy_n(a.data().begin() + (o * sp.extent + node.begin) * sp.inner, ext * sp.inner,
                    out.data().begin() + o * ext * sp.inner);
      }
      return;
    }
    case Op::kTranspose: {
      const auto& a = in(0);
      const std::size_t r = a.shape()[0], c = a.shape()[1];
      out = Tensor<T>(node.shape);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a[i * c + j];
      }
      return;
    }
    case Op::kSoftmax: {
      const auto& a = in(0);
      const std::size_t r = a.shape()[0], c = a.shape()[1];
      out = Tensor<T>(node.shape);
      for (std::size_t i = 0; i < r; ++i) {
        T mx = a[i * c];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, a[i * c + j]);
        T z = 0;
        for (std::size_t j = 0; j < c; ++j) {
          out[i * c + j] = std::exp(a[i * c + j] - mx);
          z += out[i * c + j];
        }
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= z;
      }
      return;
    }
    case Op::kCosineSim: {
      const auto& a = in(0);
      const auto& b = in(1);
      T dot = 0, na = 0, nb = 0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
      }
      if (na == T(0) || nb == T(0)) throw Error("zero-norm vector in cosine similarity");
      out = Tensor<T>::scalar(dot / (std::sqrt(na) * std::sqrt(nb)));
      return;
    }
    case Op::kTopKMean: {
      const auto& a = in(0);
      const auto w = topk_weights(a, node.begin);
      T acc = 0;
      for (std::size_t i = 0; i < a.size(); ++i) acc += w[i] * a[i];
      out = Tensor<T>::scalar(acc);
      ev.aux[id] = w;
      return;
    }
    case Op::kSelectiveScan: {
      const auto& x = in(0);
      const auto& dl = in(1);
      const auto& a = in(2);
      const auto& b = in(3);
      const auto& c = in(4);
      const std::size_t steps = x.shape()[0], dm = x.shape()[1], ns = a.shape()[1];
      out = Tensor<T>(node.shape);
      Tensor<T> states({steps, dm, ns});
      std::vector<T> h(dm * ns, T(0));
      for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t d = 0; d < dm; ++d) {
          const T delta = dl(t, d);
          const T drive = delta * x(t, d);
          T y = 0;
          for (std::size_t n = 0; n < ns; ++n) {
            T& hv = h[d * ns + n];
            hv = std::exp(delta * a(d, n)) * hv + drive * b(t, n);
            y += c(t, n) * hv;
          }
          out(t, d) = y;
        }
        std::copy(h.begin(), h.end(), states.data().begin() + t * dm * ns);
      }
      ev.aux[id] = std::move(states);
      return;
    }
    case Op::kNoisyBottleneck: {
      const auto& a = in(0);
      if (!ev.options.training) {
        out = a;
        return;
      }
      const double rho = node.scalar, sigma = node.scalar2;
      Rng rng(derive_seed(ev.options.seed, id));
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      std::normal_distribution<double> gauss(0.0, 1.0);
      Tensor<T> keep(a.shape());
      out = Tensor<T>(a.shape());
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double u = unif(rng);
        const double eps = gauss(rng);
        keep[i] = u >= rho ? static_cast<T>(1.0 / (1.0 - rho)) : T(0);
        out[i] = keep[i] * a[i] + static_cast<T>(sigma * eps);
      }
      ev.aux[id] = std::move(keep);
      return;
    }
    default:
      throw Error(std::string("no forward rule for op ") + op_name(node.op));
  }
}

template <typename T>
void accumulate(std::vector<Tensor<T>>& adj, std::vector<char>& has, NodeId id,
                Tensor<T>&& g) {
  if (!has[id]) {
    adj[id] = std::move(g);
    has[id] = 1;
    return;
  }
  auto& dst = adj[id];
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

}  // namespace

template <typename T>
Evaluation<T> forward(const Graph& graph, const Bindings<T>& bindings,
                      ForwardOptions options) {
  Evaluation<T> ev;
  ev.options = options;
  ev.values.resize(graph.size());
  ev.aux.resize(graph.size());
  for (NodeId id = 0; id < graph.size(); ++id) {
    eval_node(graph, id, bindings, ev);
    check_finite(ev.values[id], graph, id, "forward");
  }
  return ev;
}

template <typename T>
Gradients<T> backward(const Graph& graph, const Evaluation<T>& ev, Var loss,
                      std::span<const std::string> wrt_inputs) {
  if (ev.values.size() != graph.size()) throw Error("evaluation does not match graph");
  const NodeId root = loss.id();
  if (ev.values[root].size() != 1) {
    throw Error("loss node is not scalar: shape " + shape_to_string(ev.values[root].shape()));
  }
  const std::size_t count = graph.size();
  std::vector<char> needs(count, 0);
  for (const std::string& name : wrt_inputs) {
    if (!graph.has_leaf(name)) throw Error("no input named '" + name + "'");
  }
  for (NodeId id = 0; id < count; ++id) {
    const Node& n = graph.node(id);
    if (n.op == Op::kParam) {
      needs[id] = 1;
    } else if (n.op == Op::kInput) {
      needs[id] = std::find(wrt_inputs.begin(), wrt_inputs.end(), n.name) != wrt_inputs.end();
    } else {
      for (NodeId in : n.inputs) needs[id] |= needs[in];
    }
  }

  std::vector<Tensor<T>> adj(count);
  std::vector<char> has(count, 0);
  adj[root] = Tensor<T>(ev.values[root].shape(), T(1));
  has[root] = 1;

  for (NodeId id = root + 1; id-- > 0;) {
    if (!has[id] || !needs[id]) continue;
    const Node& node = graph.node(id);
    if (node.op == Op::kInput || node.op == Op::kParam || node.op == Op::kConstant) continue;
    check_finite(adj[id], graph, id, "backward");
    const Tensor<T>& g = adj[id];
    const Tensor<T>& y = ev.values[id];
    auto in = [&](std::size_t i) -> const Tensor<T>& { return ev.values[node.inputs[i]]; };
    auto want = [&](std::size_t i) { return needs[node.inputs[i]] != 0; };
    auto push = [&](std::size_t i, Tensor<T>&& t) {
      accumulate(adj, has, node.inputs[i], std::move(t));
    };
    auto unary_grad = [&](auto dfn) {
      if (!want(0)) return;
      const auto& a = in(0);
      Tensor<T> r(a.shape());
      for (std::size_t i = 0; i < r.size(); ++i) r[i] = g[i] * dfn(a[i], y[i]);
      push(0, std::move(r));
    };
    const T s = static_cast<T>(node.scalar);

    switch (node.op) {
      case Op::kMatMul: {
        const auto d = mat_dims(in(0).shape(), in(1).shape());
        if (want(0)) {
          Tensor<T> r(in(0).shape(), T(0));
          gemm_bt<T>(g.data(), in(1).data(), r.data(), d.n, d.k, d.m);
          push(0, std::move(r));
        }
        if (want(1)) {
          Tensor<T> r(in(1).shape(), T(0));
          gemm_at<T>(in(0).data(), g.data(), r.data(), d.n, d.k, d.m);
          push(1, std::move(r));
        }
        break;
      }
      case Op::kAdd:
      case Op::kSub:
      case Op::kMul:
      case Op::kDiv: {
        const auto& a = in(0);
        const auto& b = in(1);
        const bool fast = a.shape() == node.shape && b.shape() == node.shape;
        std::vector<std::size_t> ma, mb;
        if (!fast) {
          ma = broadcast_map(a.shape(), node.shape);
          mb = broadcast_map(b.shape(), node.shape);
        }
        Tensor<T> ga(node.shape), gb(node.shape);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const T x = fast ? a[i] : a[ma[i]];
          const T w = fast ? b[i] : b[mb[i]];
          switch (node.op) {
            case Op::kAdd: ga[i] = g[i]; gb[i] = g[i]; break;
            case Op::kSub: ga[i] = g[i]; gb[i] = -g[i]; break;
            case Op::kMul: ga[i] = g[i] * w; gb[i] = g[i] * x; break;
            default: ga[i] = g[i] / w; gb[i] = -g[i] * x / (w * w); break;
          }
        }
        if (want(0)) push(0, reduce_to(ga, a.shape()));
        if (want(1)) push(1, reduce_to(gb, b.shape()));
        break;
      }
      case Op::kScale: unary_grad([&](T, T) { return s; }); break;
      case Op::kAddScalar: unary_grad([](T, T) { return T(1); }); break;
      case Op::kExp: unary_grad([](T, T out) { return out; }); break;
      case Op::kLog: unary_grad([](T x, T) { return T(1) / x; }); break;
      case Op::kAbs:
        unary_grad([](T x, T) { return x > 0 ? T(1) : (x < 0 ? T(-1) : T(0)); });
        break;
      case Op::kSoftplus: unary_grad([](T x, T) { return sigmoid_value(x); }); break;
      case Op::kElu: unary_grad([](T x, T) { return x > 0 ? T(1) : std::exp(x); }); break;
      case Op::kSigmoid: unary_grad([](T, T out) { return out * (T(1) - out); }); break;
      case Op::kPowScalar:
        unary_grad([&](T x, T) { return s * std::pow(x, s - T(1)); });
        break;
      case Op::kSmoothL1:
        unary_grad([&](T x, T) {
          if (std::abs(x) < s) return x / s;
          return x > 0 ? T(1) : T(-1);
        });
        break;
      case Op::kClampMin: unary_grad([&](T x, T) { return x > s ? T(1) : T(0); }); break;
      case Op::kStopGradient: break;
      case Op::kSum:
      case Op::kMean: {
        if (!want(0)) break;
        T v = g[0];
        if (node.op == Op::kMean) v /= static_cast<T>(in(0).size());
        push(0, Tensor<T>(in(0).shape(), v));
        break;
      }
      case Op::kSumAxis:
      case Op::kMeanAxis:
      case Op::kMaxAxis: {
        if (!want(0)) break;
        const auto& a = in(0);
        const auto sp = split_axis(a.shape(), node.axis);
        Tensor<T> r(a.shape(), T(0));
        const T scale = node.op == Op::kMeanAxis ? T(1) / static_cast<T>(sp.extent) : T(1);
        for (std::size_t o = 0; o < sp.outer; ++o) {
          for (std::size_t i = 0; i < sp.inner; ++i) {
            const std::size_t oi = o * sp.inner + i;
            const std::size_t base = o * sp.extent * sp.inner + i;
            if (node.op == Op::kMaxAxis) {
              const auto best = static_cast<std::size_t>(ev.aux[id][oi]);
              r[base + best * sp.inner] = g[oi];
            } else {
              for (std::size_t e = 0; e < sp.extent; ++e) r[base + e * sp.inner] = g[oi] * scale;
            }
          }
        }
        push(0, std::move(r));
        break;
      }
      case Op::kBroadcast:
        if (want(0)) push(0, reduce_to(g, in(0).shape()));
        break;
      case Op::kReshape:
        if (want(0)) push(0, g.reshaped(in(0).shape()));
        break;
      case Op::kConcat: {
        const auto sp = split_axis(node.shape, node.axis);
        std::size_t offset = 0;
        for (std::size_t p = 0; p < node.inputs.size(); ++p) {
          const auto& part = in(p);
          const std::size_t ext = part.shape()[node.axis];
          if (want(p)) {
            Tensor<T> r(part.shape());
            for (std::size_t o = 0; o < sp.outer; ++o) {
              std::copy_n(g.data().begin() + (o * sp.extent + offset) * sp.inner, ext * sp.inner,
                          r.data().begin() + o * ext * sp.inner);
            }
            push(p, std::move(r));
          }
          offset += ext;
        }
        break;
      }
      case Op::kSlice: {
        if (!want(0)) break;
        const auto& a = in(0);
        const auto sp = split_axis(a.shape(), node.axis);
        const std::size_t ext = node.end - node.begin;
        Tensor<T> r(a.shape(), T(0));
        for (std::size_t o = 0; o < sp.outer; ++o) {
          std::copy_n(g.data().begin() + o * ext * sp.inner, ext * sp.inner,
                      r.data().begin() + (o * sp.extent + node.begin) * sp.inner);
        }
        push(0, std::move(r));
        break;
      }
      case Op::kTranspose: {
        if (!want(0)) break;
        const std::size_t r0 = in(0).shape()[0], c0 = in(0).shape()[1];
        Tensor<T> r(in(0).shape());
        for (std::size_t i = 0; i < r0; ++i) {
          for (std::size_t j = 0; j < c0; ++j) r[i * c0 + j] = g[j * r0 + i];
        }
        push(0, std::move(r));
        break;
      }
      case Op::kSoftmax: {
        if (!want(0)) break;
        const std::size_t r0 = y.shape()[0], c0 = y.shape()[1];
        Tensor<T> r(y.shape());
        for (std::size_t i = 0; i < r0; ++i) {
          T dot = 0;
          for (std::size_t j = 0; j < c0; ++j) dot += g[i * c0 + j] * y[i * c0 + j];
          for (std::size_t j = 0; j < c0; ++j) r[i * c0 + j] = y[i * c0 + j] * (g[i * c0 + j] - dot);
        }
        push(0, std::move(r));
        break;
      }
      case Op::kCosineSim: {
        const auto& a = in(0);
        const auto& b = in(1);
        T na = 0, nb = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
          na += a[i] * a[i];
          nb += b[i] * b[i];
        }
        const T la = std::sqrt(na), lb = std::sqrt(nb), cs = y[0];
        if (want(0)) {
          Tensor<T> r(a.shape());
          for (std::size_t i = 0; i < r.size(); ++i) {
            r[i] = g[0] * (b[i] / (la * lb) - cs * a[i] / na);
          }
          push(0, std::move(r));
        }
        if (want(1)) {
          Tensor<T> r(b.shape());
          for (std::size_t i = 0; i < r.size(); ++i) {
            r[i] = g[0] * (a[i] / (la * lb) - cs * b[i] / nb);
          }
          push(1, std::move(r));
        }
        break;
      }
      case Op::kTopKMean: {
        if (!want(0)) break;
        Tensor<T> r = ev.aux[id];
        for (auto& v : r.data()) v *= g[0];
        push(0, std::move(r));
        break;
      }
      case Op::kSelectiveScan: {
        const auto& x = in(0);
        const auto& dl = in(1);
        const auto& a = in(2);
        const auto& b = in(3);
        const auto& c = in(4);
        const auto& states = ev.aux[id];
        const std::size_t steps = x.shape()[0], dm = x.shape()[1], ns = a.shape()[1];
        Tensor<T> gx(x.shape(), T(0)), gdl(dl.shape(), T(0)), ga(a.shape(), T(0)),
            gb(b.shape(), T(0)), gc(c.shape(), T(0));
        // Adjoint of h_t carried backwards in time.
        std::vector<T> gh(dm * ns, T(0));
        for (std::size_t t = steps; t-- > 0;) {
          const T* h = states.data().data() + t * dm * ns;
          const T* h_prev = t > 0 ? states.data().data() + (t - 1) * dm * ns : nullptr;
          for (std::size_t d = 0; d < dm; ++d) {
            const T gy = g(t, d);
            const T delta = dl(t, d);
            const T xv = x(t, d);
            T g_delta = 0, g_x = 0;
            for (std::size_t n = 0; n < ns; ++n) {
              const std::size_t k = d * ns + n;
              gc(t, n) += gy * h[k];
              T& ghk = gh[k];
              ghk += gy * c(t, n);
              const T decay = std::exp(delta * a(d, n));
              const T hp = h_prev ? h_prev[k] : T(0);
              const T g_decay = ghk * hp;
              g_delta += g_decay * decay * a(d, n) + ghk * b(t, n) * xv;
              ga(d, n) += g_decay * decay * delta;
              gb(t, n) += ghk * delta * xv;
              g_x += ghk * delta * b(t, n);
              ghk *= decay;
            }
            gdl(t, d) += g_delta;
            gx(t, d) += g_x;
          }
        }
        if (want(0)) push(0, std::move(gx));
        if (want(1)) push(1, std::move(gdl));
        if (want(2)) push(2, std::move(ga));
        if (want(3)) push(3, std::move(gb));
        if (want(4)) push(4, std::move(gc));
        break;
      }
      case Op::kNoisyBottleneck: {
        if (!want(0)) break;
        if (!ev.options.training) {
          push(0, Tensor<T>(g));
          break;
        }
        Tensor<T> r(g.shape());
        const auto& keep = ev.aux[id];
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = g[i] * keep[i];
        push(0, std::move(r));
        break;
      }
      default:
        throw Error(std::string("no adjoint rule registered for op ") + op_name(node.op));
    }
  }

  Gradients<T> grads;
  for (NodeId id = 0; id < count; ++id) {
    const Node& n = graph.node(id);
    const bool is_wrt = n.op == Op::kInput && needs[id];
    if (n.op != Op::kParam && !is_wrt) continue;
    grads[n.name] = has[id] ? adj[id] : Tensor<T>(n.shape, T(0));
  }
  return grads;
}

template Evaluation<float> forward<float>(const Graph&, const Bindings<float>&, ForwardOptions);
template Evaluation<double> forward<double>(const Graph&, const Bindings<double>&,
                                            ForwardOptions);
template Gradients<float> backward<float>(const Graph&, const Evaluation<float>&, Var,
                                          std::span<const std::string>);
template Gradients<double> backward<double>(const Graph&, const Evaluation<double>&, Var,
                                            std::span<const std::string>);

GradCheckResult grad_check(const Graph& graph, const Bindings<double>& bindings, Var loss,
                           const std::string& leaf, double eps, ForwardOptions options) {
  if (!(eps >= 1e-6 && eps <= 1e-4)) throw Error("grad_check eps must lie in [1e-6, 1e-4]");
  const auto base = forward<double>(graph, bindings, options);
  const NodeId leaf_id = const_cast<Graph&>(graph).leaf(leaf).id();
  std::vector<std::string> wrt;
  if (graph.node(leaf_id).op == Op::kInput) wrt.push_back(leaf);
  const auto grads = backward<double>(graph, base, loss, wrt);
  const TensorD& analytic = grads.at(leaf);

  Bindings<double> probe = bindings;
  TensorD& theta = probe.at(leaf);
  GradCheckResult result;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double orig = theta[i];
    theta[i] = orig + eps;
    const double f_plus = forward<double>(graph, probe, options)[loss].item();
    theta[i] = orig - eps;
    const double f_minus = forward<double>(graph, probe, options)[loss].item();
    theta[i] = orig;
    const double numeric = (f_plus - f_minus) / (2.0 * eps);
    if (!std::isfinite(numeric)) throw NonFiniteError("non-finite finite-difference result");
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    const double rel = std::abs(a - numeric) / denom;
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_index = i;
      result.analytic = a;
      result.numeric = numeric;
    }
  }
  return result;
}

}  // namespace weldad::ad

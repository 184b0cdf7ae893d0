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

#pragma once

#include <random>
#include <string>
#include <vector>

#include "weldad/autodiff.hpp"
#include "weldad/layers.hpp"
#include "weldad/rng.hpp"

namespace weldad::testing {

inline TensorD random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  TensorD t(std::move(shape));
  for (auto& v : t.data()) v = u(rng);
  return t;
}

inline double max_abs_diff(const TensorD& a, const TensorD& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Plain triple-loop product of two matrices.
inline TensorD matmul_ref(const TensorD& a, const TensorD& b) {
  TensorD out({a.dim(0), b.dim(1)});
  for (std::size_t i = 0; i < a.dim(0); ++i) {
    for (std::size_t j = 0; j < b.dim(1); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.dim(1); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  }
  return out;
}

// A graph plus parameter recipes, evaluated in float64.
struct Bench {
  ad::Graph graph;
  std::vector<ParamSpec> specs;
  ad::Bindings<double> bindings;

  ParamScope scope() { return ParamScope(graph, specs); }
  ad::Var input(const std::string& name, TensorD value) {
    ad::Var v = graph.input(name, value.shape());
    bindings[name] = std::move(value);
    return v;
  }
  void init(std::uint64_t seed) {
    for (auto& [name, value] : init_params<double>(specs, seed)) {
      if (!bindings.count(name)) bindings[name] = value;
    }
  }
  ad::Evaluation<double> run(ad::ForwardOptions options = {}) {
    return ad::forward<double>(graph, bindings, options);
  }
};

}  // namespace weldad::testing

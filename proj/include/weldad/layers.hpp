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

// Parameter declaration with initialization recipes, and dense layers.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "weldad/autodiff.hpp"
#include "weldad/optim.hpp"

namespace weldad {

enum class Init : std::uint8_t {
  kNormal,     // N(0, scale^2)
  kConstant,   // every element equals scale
  kLogRange,   // row i of a Dm x N matrix holds log(1..N); diagonal S4D-real decay
  kDeltaBias,  // softplus^{-1} of a log-uniform step in [1e-3, 1e-1]
};

struct ParamSpec {
  std::string name;
  Shape shape;
  Init init = Init::kNormal;
  double scale = 0.0;
};

/// Declares parameters on a graph under a dotted name prefix and records how
/// each one is initialized.
class ParamScope {
 public:
  ParamScope(ad::Graph& graph, std::vector<ParamSpec>& specs, std::string prefix = "")
      : graph_(&graph), specs_(&specs), prefix_(std::move(prefix)) {}

  ParamScope sub(const std::string& name) const;
  /// Returns the existing leaf when the name was already declared, so several
  /// samples in one batch graph share parameters.
  ad::Var declare(const std::string& name, Shape shape, Init init, double scale) const;
  ad::Graph& graph() const { return *graph_; }

 private:
  ad::Graph* graph_;
  std::vector<ParamSpec>* specs_;
  std::string prefix_;
};

/// Seeded initial values for every declared parameter; each parameter draws
/// from its own stream so adding a parameter leaves the others unchanged.
template <typename T>
ParamMap<T> init_params(const std::vector<ParamSpec>& specs, std::uint64_t seed);

/// y = x W + b with W stored in x out. Accepts a vector or a row batch.
struct Linear {
  ad::Var w;
  ad::Var b;  // invalid when the layer has no bias

  static Linear declare(const ParamScope& scope, const std::string& name, std::size_t in,
                        std::size_t out, bool bias = true, double gain = 1.0);
  ad::Var operator()(ad::Var x) const;
};

/// linear -> elu -> linear.
struct Mlp {
  Linear first;
  Linear second;

  static Mlp declare(const ParamScope& scope, const std::string& name, std::size_t in,
                     std::size_t hidden, std::size_t out);
  ad::Var operator()(ad::Var x) const;
};

}  // namespace weldad

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

#include "weldad/layers.hpp"

#include <cmath>
#include <random>

#include "weldad/rng.hpp"

namespace weldad {

ParamScope ParamScope::sub(const std::string& name) const {
  return ParamScope(*graph_, *specs_, prefix_.empty() ? name : prefix_ + "." + name);
}

ad::Var ParamScope::declare(const std::string& name, Shape shape, Init init,
                            double scale) const {
  const std::string full = prefix_.empty() ? name : prefix_ + "." + name;
  if (graph_->has_leaf(full)) {
    ad::Var v = graph_->leaf(full);
    if (v.shape() != shape) throw ShapeError("parameter '" + full + "' redeclared with another shape");
    return v;
  }
  for (const auto& s : *specs_) {
    if (s.name == full && s.shape != shape) {
      throw ShapeError("parameter '" + full + "' redeclared with another shape");
    }
  }
  bool known = false;
  for (const auto& s : *specs_) known |= s.name == full;
  if (!known) specs_->push_back({full, shape, init, scale});
  return graph_->param(full, std::move(shape));
}

template <typename T>
ParamMap<T> init_params(const std::vector<ParamSpec>& specs, std::uint64_t seed) {
  ParamMap<T> out;
  for (const auto& spec : specs) {
    Rng rng(derive_seed(seed, hash_name(spec.name)));
    Tensor<T> t(spec.shape);
    switch (spec.init) {
      case Init::kNormal: {
        std::normal_distribution<double> n(0.0, 1.0);
        for (auto& v : t.data()) v = static_cast<T>(spec.scale * n(rng));
        break;
      }
      case Init::kConstant:
        for (auto& v : t.data()) v = static_cast<T>(spec.scale);
        break;
      case Init::kLogRange: {
        if (spec.shape.size() != 2) throw ShapeError("log-range init needs a matrix");
        for (std::size_t i = 0; i < spec.shape[0]; ++i) {
          for (std::size_t j = 0; j < spec.shape[1]; ++j) {
            t(i, j) = static_cast<T>(std::log(static_cast<double>(j + 1)));
          }
        }
        break;
      }
      case Init::kDeltaBias: {
        std::uniform_real_distribution<double> u(std::log(1e-3), std::log(1e-1));
        for (auto& v : t.data()) {
          const double step = std::exp(u(rng));
          v = static_cast<T>(step + std::log(-std::expm1(-step)));
        }
        break;
      }
    }
    out.emplace(spec.name, std::move(t));
  }
  return out;
}

template ParamMap<float> init_params<float>(const std::vector<ParamSpec>&, std::uint64_t);
template ParamMap<double> init_params<double>(const std::vector<ParamSpec>&, std::uint64_t);

Linear Linear::declare(const ParamScope& scope, const std::string& name, std::size_t in,
                       std::size_t out, bool bias, double gain) {
  ParamScope s = scope.sub(name);
  Linear l;
  l.w = s.declare("w", {in, out}, Init::kNormal, gain / std::sqrt(static_cast<double>(in)));
  if (bias) l.b = s.declare("b", {out}, Init::kConstant, 0.0);
  return l;
}

ad::Var Linear::operator()(ad::Var x) const {
  ad::Var y = ad::matmul(x, w);
  return b.valid() ? y + b : y;
}

Mlp Mlp::declare(const ParamScope& scope, const std::string& name, std::size_t in,
                 std::size_t hidden, std::size_t out) {
  ParamScope s = scope.sub(name);
  return {Linear::declare(s, "fc1", in, hidden), Linear::declare(s, "fc2", hidden, out)};
}

ad::Var Mlp::operator()(ad::Var x) const { return second(ad::elu(first(x))); }

}  // namespace weldad

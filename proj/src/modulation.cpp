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

#include "weldad/modulation.hpp"

#include <cmath>

namespace weldad {

SsmParams SsmParams::declare(const ParamScope& scope, std::size_t channels, std::size_t d_model,
                             std::size_t d_state) {
  const double dm = static_cast<double>(d_model);
  SsmParams p;
  p.w_in = scope.declare("w_in", {channels, d_model}, Init::kNormal,
                         1.0 / std::sqrt(static_cast<double>(channels)));
  p.a_log = scope.declare("a_log", {d_model, d_state}, Init::kLogRange, 0.0);
  p.w_delta = scope.declare("w_delta", {d_model, d_model}, Init::kNormal, 0.1 / std::sqrt(dm));
  p.b_delta = scope.declare("b_delta", {d_model}, Init::kDeltaBias, 0.0);
  p.w_b = scope.declare("w_b", {d_model, d_state}, Init::kNormal, 1.0 / std::sqrt(dm));
  p.w_c = scope.declare("w_c", {d_model, d_state}, Init::kNormal, 1.0 / std::sqrt(dm));
  p.w_out = scope.declare("w_out", {d_model, d_model}, Init::kNormal, 1.0 / std::sqrt(dm));
  return p;
}

ModulationHead ModulationHead::declare(const ParamScope& scope, std::size_t d_model,
                                       std::size_t width) {
  const double s = 0.1 / std::sqrt(static_cast<double>(d_model));
  return {scope.declare("w_gamma", {d_model, width}, Init::kNormal, s),
          scope.declare("w_beta", {d_model, width}, Init::kNormal, s)};
}

ad::Var ssm_scan(ad::Var series, const SsmParams& p) {
  if (series.shape().size() != 2) throw ShapeError("ssm_encode expects a T x C series");
  ad::Var x = ad::matmul(series, p.w_in);
  ad::Var delta = ad::softplus(ad::matmul(x, p.w_delta) + p.b_delta);
  ad::Var a = -ad::exp(p.a_log);
  return ad::selective_scan(x, delta, a, ad::matmul(x, p.w_b), ad::matmul(x, p.w_c));
}

ad::Var ssm_encode(ad::Var series, const SsmParams& p) {
  ad::Var y = ssm_scan(series, p);
  const std::size_t steps = y.shape()[0], dm = y.shape()[1];
  ad::Var last = ad::reshape(ad::slice(y, 0, steps - 1, steps), {dm});
  return ad::matmul(last, p.w_out);
}

std::pair<ad::Var, ad::Var> project_affine(ad::Var h, const ModulationHead& head) {
  return {ad::matmul(h, head.w_gamma), ad::matmul(h, head.w_beta)};
}

ad::Var film_modulate(ad::Var features, ad::Var gamma, ad::Var beta) {
  const Shape& f = features.shape();
  if (f.empty() || gamma.shape() != Shape{f.back()} || beta.shape() != Shape{f.back()}) {
    throw ShapeError("film_modulate: feature width " + shape_to_string(f) +
                     " does not match gamma " + shape_to_string(gamma.shape()) + " / beta " +
                     shape_to_string(beta.shape()));
  }
  return features * (1.0 + gamma) + beta;
}

}  // namespace weldad

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

// Sensor-governed modulation: a selective state-space encoder turns the
// sensor series into a hidden state, two linear heads turn that state into a
// per-feature scale and shift, and the shift/scale is applied to feature
// tokens as F * (1 + gamma) + beta.

#pragma once

#include <utility>

#include "weldad/layers.hpp"

namespace weldad {

struct SsmParams {
  ad::Var w_in;     // C x Dm
  ad::Var a_log;    // Dm x N, A = -exp(a_log)
  ad::Var w_delta;  // Dm x Dm
  ad::Var b_delta;  // Dm
  ad::Var w_b;      // Dm x N
  ad::Var w_c;      // Dm x N
  ad::Var w_out;    // Dm x Dm

  static SsmParams declare(const ParamScope& scope, std::size_t channels, std::size_t d_model,
                           std::size_t d_state);
};

struct ModulationHead {
  ad::Var w_gamma;  // Dm x D
  ad::Var w_beta;   // Dm x D

  static ModulationHead declare(const ParamScope& scope, std::size_t d_model, std::size_t width);
};

/// Encodes a T x C series to the final-step readout h_s (Dm).
ad::Var ssm_encode(ad::Var series, const SsmParams& p);

/// Full T x Dm scan output, before the final-step readout.
ad::Var ssm_scan(ad::Var series, const SsmParams& p);

std::pair<ad::Var, ad::Var> project_affine(ad::Var h, const ModulationHead& head);

ad::Var film_modulate(ad::Var features, ad::Var gamma, ad::Var beta);

}  // namespace weldad

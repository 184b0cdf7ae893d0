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

// Process encoder (video queries attend to audio keys/values behind a gated
// residual) and result encoder (GeM pooling per angle, gated GeM/max fusion
// across angles, MLP to the shared latent width).

#pragma once

#include <utility>

#include "weldad/layers.hpp"

namespace weldad {

inline constexpr double kGemFloor = 1e-6;

struct ProcessEncoderParams {
  Linear q, k, v, o;
  ad::Var gate;  // D, residual gate logits
  std::size_t heads = 4;

  static ProcessEncoderParams declare(const ParamScope& scope, std::size_t width,
                                      std::size_t heads);
};

struct ResultEncoderParams {
  ad::Var p_raw;  // scalar; GeM exponent p = 1 + softplus(p_raw)
  ad::Var gate;   // D, angle fusion gate logits
  Mlp mlp;        // D -> hidden -> latent

  static ResultEncoderParams declare(const ParamScope& scope, std::size_t width,
                                     std::size_t hidden, std::size_t latent);
  ad::Var exponent() const;
};

/// Multi-head scaled dot-product attention, queries from `queries`, keys and
/// values from `context`, with out = queries + sigmoid(gate) * Attn W_O.
ad::Var cross_attention(ad::Var queries, ad::Var context, const ProcessEncoderParams& p);

/// Attention weights of one head (N_q x N_k); exposed for inspection.
ad::Var attention_weights(ad::Var queries, ad::Var context, const ProcessEncoderParams& p,
                          std::size_t head);

/// (MLP(mean over tokens), tokens).
std::pair<ad::Var, ad::Var> pool_process(ad::Var tokens, const Mlp& mlp);

/// (mean over tokens of max(x, floor)^p)^(1/p), per feature. Axis 0 is pooled.
ad::Var gem_pool(ad::Var tokens, double p);
/// Same with a graph-valued exponent (scalar node, >= 1).
ad::Var gem_pool(ad::Var tokens, ad::Var p);

/// Per-angle GeM vectors, M x D.
ad::Var angle_vectors(ad::Var image, ad::Var p);

/// sigmoid(gate) * GeM_m(v_m) + (1 - sigmoid(gate)) * max_m(v_m).
ad::Var fuse_angles(ad::Var angle_vecs, ad::Var p, ad::Var gate);

ad::Var gated_angle_aggregate(ad::Var image, const ResultEncoderParams& p);

ad::Var result_encode(ad::Var image, const ResultEncoderParams& p);

}  // namespace weldad

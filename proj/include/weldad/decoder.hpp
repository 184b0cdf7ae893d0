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

// Anti-generalization decoder: a noisy bottleneck on the process tokens,
// kernelized linear self-attention blocks with phi(x) = elu(x) + 1, GeM
// pooling and a linear head to the shared latent width.

#pragma once

#include <vector>

#include "weldad/encoders.hpp"
#include "weldad/layers.hpp"

namespace weldad {

struct BottleneckConfig {
  double mask_prob = 0.2;
  double noise_std = 0.1;

  void validate() const;
};

enum class AttentionKind : std::uint8_t { kLinear, kSoftmax };

struct DecoderBlock {
  Linear q, k, v, o;
  Linear ff1, ff2;
};

struct DecoderParams {
  std::vector<DecoderBlock> blocks;
  ad::Var p_raw;  // scalar; GeM exponent p = 1 + softplus(p_raw)
  Linear head;    // D -> latent
  AttentionKind attention = AttentionKind::kLinear;

  static DecoderParams declare(const ParamScope& scope, std::size_t width, std::size_t ff_hidden,
                               std::size_t latent, std::size_t blocks,
                               AttentionKind attention = AttentionKind::kLinear);
  ad::Var exponent() const;
};

/// Training-mode masking and noise; the identity when the graph is evaluated
/// in eval mode or when both knobs are zero.
ad::Var noisy_bottleneck(ad::Var tokens, const BottleneckConfig& cfg);

/// Kernel feature map elu(x) + 1, evaluated as max(x, 0) + exp(min(x, 0)) so
/// that it stays strictly positive where exp(x) - 1 + 1 would round to zero.
ad::Var kernel_feature(ad::Var x);

/// Reordered kernel attention, linear in the number of keys:
///   out_i = phi(Q_i) (sum_j phi(K_j)^T V_j) / (phi(Q_i) . sum_j phi(K_j)).
ad::Var linear_attention(ad::Var q, ad::Var k, ad::Var v);

/// Single-head softmax attention, used by the plain-decoder ablation.
ad::Var softmax_attention(ad::Var q, ad::Var k, ad::Var v);

/// Residual attention blocks, GeM pooling over tokens, linear head.
ad::Var decode(ad::Var tokens, const DecoderParams& p);

}  // namespace weldad

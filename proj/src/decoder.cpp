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

#include "weldad/decoder.hpp"

#include <cmath>
#include <string>

namespace weldad {

void BottleneckConfig::validate() const {
  if (!(mask_prob >= 0.0 && mask_prob < 1.0)) throw Error("bottleneck mask probability must lie in [0, 1)");
  if (!(noise_std >= 0.0)) throw Error("bottleneck noise std must be non-negative");
}

DecoderParams DecoderParams::declare(const ParamScope& scope, std::size_t width,
                                     std::size_t ff_hidden, std::size_t latent,
                                     std::size_t blocks, AttentionKind attention) {
  DecoderParams p;
  p.attention = attention;
  for (std::size_t i = 0; i < blocks; ++i) {
    const ParamScope s = scope.sub("block" + std::to_string(i));
    DecoderBlock b;
    b.q = Linear::declare(s, "q", width, width, false);
    b.k = Linear::declare(s, "k", width, width, false);
    b.v = Linear::declare(s, "v", width, width, false);
    b.o = Linear::declare(s, "o", width, width, false, 0.5);
    b.ff1 = Linear::declare(s, "ff1", width, ff_hidden);
    b.ff2 = Linear::declare(s, "ff2", ff_hidden, width, true, 0.5);
    p.blocks.push_back(b);
  }
  p.p_raw = scope.declare("p_raw", {}, Init::kConstant, std::log(std::exp(2.0) - 1.0));
  p.head = Linear::declare(scope, "head", width, latent);
  return p;
}

ad::Var DecoderParams::exponent() const { return 1.0 + ad::softplus(p_raw); }

ad::Var noisy_bottleneck(ad::Var tokens, const BottleneckConfig& cfg) {
  cfg.validate();
  if (cfg.mask_prob == 0.0 && cfg.noise_std == 0.0) return tokens;
  return ad::noisy_bottleneck(tokens, cfg.mask_prob, cfg.noise_std);
}

ad::Var kernel_feature(ad::Var x) {
  ad::Var positive = ad::clamp_min(x, 0.0);
  return positive + ad::exp(x - positive);
}

ad::Var linear_attention(ad::Var q, ad::Var k, ad::Var v) {
  if (q.shape().size() != 2 || k.shape().size() != 2 || v.shape().size() != 2 ||
      q.shape()[1] != k.shape()[1] || k.shape()[0] != v.shape()[0]) {
    throw ShapeError("linear_attention: incompatible Q " + shape_to_string(q.shape()) + ", K " +
                     shape_to_string(k.shape()) + ", V " + shape_to_string(v.shape()));
  }
  ad::Var phi_q = kernel_feature(q);
  ad::Var phi_k = kernel_feature(k);
  ad::Var kv = ad::matmul(ad::transpose(phi_k), v);    // d x d_v
  ad::Var z = ad::sum(phi_k, 0);                        // d
  ad::Var num = ad::matmul(phi_q, kv);                  // n x d_v
  ad::Var den = ad::reshape(ad::matmul(phi_q, z), {q.shape()[0], 1});
  return num / ad::clamp_min(den, 1e-12);
}

ad::Var softmax_attention(ad::Var q, ad::Var k, ad::Var v) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.shape()[1]));
  return ad::matmul(ad::softmax_rows(ad::matmul(q, ad::transpose(k)) * scale), v);
}

ad::Var decode(ad::Var tokens, const DecoderParams& p) {
  if (tokens.shape().size() != 2 || tokens.shape()[0] == 0) {
    throw ShapeError("decode expects a non-empty N x D token sequence");
  }
  ad::Var x = tokens;
  for (const auto& b : p.blocks) {
    ad::Var a = p.attention == AttentionKind::kLinear ? linear_attention(b.q(x), b.k(x), b.v(x))
                                                      : softmax_attention(b.q(x), b.k(x), b.v(x));
    x = x + b.o(a);
    x = x + b.ff2(ad::elu(b.ff1(x)));
  }
  return p.head(gem_pool(x, p.exponent()));
}

}  // namespace weldad

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

#include "weldad/encoders.hpp"

#include <cmath>
#include <vector>

namespace weldad {

ProcessEncoderParams ProcessEncoderParams::declare(const ParamScope& scope, std::size_t width,
                                                   std::size_t heads) {
  if (heads == 0 || width % heads != 0) throw ShapeError("head count must divide the width");
  ProcessEncoderParams p;
  p.q = Linear::declare(scope, "q", width, width, false);
  p.k = Linear::declare(scope, "k", width, width, false);
  p.v = Linear::declare(scope, "v", width, width, false);
  p.o = Linear::declare(scope, "o", width, width, false);
  p.gate = scope.declare("gate", {width}, Init::kConstant, 0.0);
  p.heads = heads;
  return p;
}

ResultEncoderParams ResultEncoderParams::declare(const ParamScope& scope, std::size_t width,
                                                 std::size_t hidden, std::size_t latent) {
  ResultEncoderParams p;
  // p = 1 + softplus(log(e^2 - 1)) = 3 at initialization.
  p.p_raw = scope.declare("p_raw", {}, Init::kConstant, std::log(std::exp(2.0) - 1.0));
  p.gate = scope.declare("gate", {width}, Init::kConstant, 0.0);
  p.mlp = Mlp::declare(scope, "mlp", width, hidden, latent);
  return p;
}

ad::Var ResultEncoderParams::exponent() const { return 1.0 + ad::softplus(p_raw); }

namespace {

ad::Var head_slice(ad::Var x, std::size_t head, std::size_t heads) {
  const std::size_t dh = x.shape()[1] / heads;
  return ad::slice(x, 1, head * dh, (head + 1) * dh);
}

void check_tokens(ad::Var x, const char* what) {
  if (x.shape().size() != 2) throw ShapeError(std::string(what) + " must be N x D tokens");
}

}  // namespace

ad::Var attention_weights(ad::Var queries, ad::Var context, const ProcessEncoderParams& p,
                          std::size_t head) {
  check_tokens(queries, "attention queries");
  check_tokens(context, "attention context");
  if (queries.shape()[1] != context.shape()[1]) throw ShapeError("attention widths differ");
  const std::size_t dh = queries.shape()[1] / p.heads;
  ad::Var qh = head_slice(p.q(queries), head, p.heads);
  ad::Var kh = head_slice(p.k(context), head, p.heads);
  return ad::softmax_rows(ad::matmul(qh, ad::transpose(kh)) *
                          (1.0 / std::sqrt(static_cast<double>(dh))));
}

ad::Var cross_attention(ad::Var queries, ad::Var context, const ProcessEncoderParams& p) {
  ad::Var v = p.v(context);
  std::vector<ad::Var> heads;
  for (std::size_t h = 0; h < p.heads; ++h) {
    heads.push_back(ad::matmul(attention_weights(queries, context, p, h),
                               head_slice(v, h, p.heads)));
  }
  ad::Var attn = p.heads == 1 ? heads[0] : ad::concat(heads, 1);
  return queries + ad::sigmoid(p.gate) * p.o(attn);
}

std::pair<ad::Var, ad::Var> pool_process(ad::Var tokens, const Mlp& mlp) {
  check_tokens(tokens, "process tokens");
  return {mlp(ad::mean(tokens, 0)), tokens};
}

ad::Var gem_pool(ad::Var tokens, double p) {
  if (!(p >= 1.0)) throw Error("GeM exponent must be at least 1");
  ad::Var x = ad::clamp_min(tokens, kGemFloor);
  return ad::pow(ad::mean(ad::pow(x, p), 0), 1.0 / p);
}

ad::Var gem_pool(ad::Var tokens, ad::Var p) {
  if (!p.shape().empty()) throw ShapeError("GeM exponent must be a scalar");
  ad::Var x = ad::clamp_min(tokens, kGemFloor);
  ad::Var m = ad::mean(ad::exp(p * ad::log(x)), 0);
  return ad::exp(ad::log(m) / p);
}

ad::Var angle_vectors(ad::Var image, ad::Var p) {
  if (image.shape().size() != 3) throw ShapeError("image features must be M x N x D");
  const std::size_t angles = image.shape()[0], n = image.shape()[1], d = image.shape()[2];
  std::vector<ad::Var> rows;
  for (std::size_t m = 0; m < angles; ++m) {
    ad::Var tokens = ad::reshape(ad::slice(image, 0, m, m + 1), {n, d});
    rows.push_back(ad::reshape(gem_pool(tokens, p), {1, d}));
  }
  return angles == 1 ? rows[0] : ad::concat(rows, 0);
}

ad::Var fuse_angles(ad::Var angle_vecs, ad::Var p, ad::Var gate) {
  ad::Var g = ad::sigmoid(gate);
  return g * gem_pool(angle_vecs, p) + (1.0 - g) * ad::max(angle_vecs, 0);
}

ad::Var gated_angle_aggregate(ad::Var image, const ResultEncoderParams& p) {
  ad::Var exponent = p.exponent();
  return fuse_angles(angle_vectors(image, exponent), exponent, p.gate);
}

ad::Var result_encode(ad::Var image, const ResultEncoderParams& p) {
  return p.mlp(gated_angle_aggregate(image, p));
}

}  // namespace weldad

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

// Training objective and consistency score between an observed result latent
// and the one predicted from the process.

#pragma once

#include "weldad/autodiff.hpp"
#include "weldad/kv.hpp"
#include "weldad/layers.hpp"

namespace weldad {

struct LossConfig {
  double lambda = 0.1;       // text-anchor weight
  double eta = 0.5;          // top-k weight in the score
  std::size_t k = 32;        // top-k count
  double delta = 1.0;        // smooth-L1 transition
  double cosine_weight = 1.0;
  double topk_weight = 1.0;
  double heatmap_sigma = 4.0;  // Gaussian blur width in output pixels
  std::size_t heatmap_res = 64;

  void validate(std::size_t latent) const;
  static LossConfig from_kv(const KvDocument& doc);
  void to_kv(KvDocument& doc) const;
};

struct TextHead {
  Linear proj;  // latent -> d_text, no bias

  static TextHead declare(const ParamScope& scope, std::size_t latent, std::size_t text_dim);
};

/// 1 - cos(a, b).
ad::Var cosine_distance(ad::Var a, ad::Var b);

/// cosine_weight (1 - cos) + topk_weight * mean of the k largest smooth-L1
/// terms of (observed - predicted).
ad::Var recon_loss(ad::Var observed, ad::Var predicted, const LossConfig& cfg);

/// 1 - cos(W_text predicted, anchor).
ad::Var text_loss(ad::Var predicted, ad::Var anchor, const TextHead& head);

ad::Var total_loss(ad::Var observed, ad::Var predicted, ad::Var anchor, const TextHead& head,
                   const LossConfig& cfg);

/// (1 - cos) + eta * mean of the k largest |observed - predicted|.
ad::Var anomaly_score(ad::Var observed, ad::Var predicted, const LossConfig& cfg);

}  // namespace weldad

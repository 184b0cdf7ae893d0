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

#include "weldad/objective.hpp"

namespace weldad {

void LossConfig::validate(std::size_t latent) const {
  if (k < 1 || k > latent) throw Error("top-k count must lie in [1, latent width]");
  if (lambda < 0 || eta < 0 || cosine_weight < 0 || topk_weight < 0) {
    throw Error("loss weights must be non-negative");
  }
  if (!(delta > 0)) throw Error("smooth-L1 transition must be positive");
  if (heatmap_res < 2 || heatmap_sigma < 0) throw Error("invalid heatmap settings");
}

LossConfig LossConfig::from_kv(const KvDocument& doc) {
  LossConfig c;
  c.lambda = doc.get_double("lambda", c.lambda);
  c.eta = doc.get_double("eta", c.eta);
  c.k = static_cast<std::size_t>(doc.get_u64("topk", c.k));
  c.delta = doc.get_double("smooth_l1_delta", c.delta);
  c.cosine_weight = doc.get_double("cosine_weight", c.cosine_weight);
  c.topk_weight = doc.get_double("topk_weight", c.topk_weight);
  c.heatmap_sigma = doc.get_double("heatmap_sigma", c.heatmap_sigma);
  c.heatmap_res = static_cast<std::size_t>(doc.get_u64("heatmap_res", c.heatmap_res));
  return c;
}

void LossConfig::to_kv(KvDocument& doc) const {
  doc.set("lambda", lambda);
  doc.set("eta", eta);
  doc.set("topk", static_cast<std::uint64_t>(k));
  doc.set("smooth_l1_delta", delta);
  doc.set("cosine_weight", cosine_weight);
  doc.set("topk_weight", topk_weight);
  doc.set("heatmap_sigma", heatmap_sigma);
  doc.set("heatmap_res", static_cast<std::uint64_t>(heatmap_res));
}

TextHead TextHead::declare(const ParamScope& scope, std::size_t latent, std::size_t text_dim) {
  return {Linear::declare(scope, "proj", latent, text_dim, false)};
}

ad::Var cosine_distance(ad::Var a, ad::Var b) { return 1.0 - ad::cosine_similarity(a, b); }

ad::Var recon_loss(ad::Var observed, ad::Var predicted, const LossConfig& cfg) {
  ad::Var topk = ad::topk_mean(ad::smooth_l1(observed - predicted, cfg.delta), cfg.k);
  return cfg.cosine_weight * cosine_distance(observed, predicted) + cfg.topk_weight * topk;
}

ad::Var text_loss(ad::Var predicted, ad::Var anchor, const TextHead& head) {
  return cosine_distance(head.proj(predicted), anchor);
}

ad::Var total_loss(ad::Var observed, ad::Var predicted, ad::Var anchor, const TextHead& head,
                   const LossConfig& cfg) {
  ad::Var recon = recon_loss(observed, predicted, cfg);
  if (cfg.lambda == 0.0) return recon;
  return recon + cfg.lambda * text_loss(predicted, anchor, head);
}

ad::Var anomaly_score(ad::Var observed, ad::Var predicted, const LossConfig& cfg) {
  return cosine_distance(observed, predicted) +
         cfg.eta * ad::topk_mean(ad::abs(observed - predicted), cfg.k);
}

}  // namespace weldad

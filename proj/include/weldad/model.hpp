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

// Assembles the full process -> result consistency model, and its ablation
// variants, as one batch graph whose samples share every parameter.

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "weldad/dataset.hpp"
#include "weldad/decoder.hpp"
#include "weldad/encoders.hpp"
#include "weldad/kv.hpp"
#include "weldad/objective.hpp"
#include "weldad/modulation.hpp"

namespace weldad {

enum class Variant : std::uint8_t {
  kFull,
  kReverseMapping,
  kPlainDecoder,
  kNoTextLoss,
  kBidirectional,
  kSymmetricFusion,
  kImageOnly,
  kImageVideo,
  kImageVideoAudio,
};

inline constexpr Variant kAllVariants[] = {
    Variant::kFull,           Variant::kReverseMapping,  Variant::kPlainDecoder,
    Variant::kNoTextLoss,     Variant::kBidirectional,   Variant::kSymmetricFusion,
    Variant::kImageOnly,      Variant::kImageVideo,      Variant::kImageVideoAudio};

const char* to_string(Variant v);
Variant parse_variant(const std::string& tag);

struct ModelConfig {
  // Input shapes.
  std::size_t steps = 256;
  std::size_t channels = 6;
  std::size_t n_video = 16;
  std::size_t n_audio = 16;
  std::size_t angles = 5;
  std::size_t n_image = 16;
  std::size_t width = 64;
  // Model sizes.
  std::size_t d_model = 64;
  std::size_t d_state = 16;
  std::size_t heads = 4;
  std::size_t decoder_blocks = 2;
  std::size_t latent = 512;
  std::size_t mlp_hidden = 128;
  std::size_t text_dim = 64;

  BottleneckConfig bottleneck;
  LossConfig loss;
  Variant variant = Variant::kFull;
  // Treat the observed latent as a fixed regression target in the loss.
  bool detach_target = true;

  void validate() const;
  /// Adopts the modality shapes of a dataset.
  void set_shapes(const ModalityShapes& shapes);
  ModalityShapes shapes() const;
  static ModelConfig from_kv(const KvDocument& doc);
  void to_kv(KvDocument& doc) const;

  bool uses_sensor() const;
  bool uses_video() const;
  bool uses_audio() const;
  bool forward_direction() const;  // process -> result
  bool reverse_direction() const;  // result -> process
};

/// Name of the graph input holding modality `modality` of batch slot `slot`.
std::string input_name(std::size_t slot, const std::string& modality);
inline constexpr const char* kAnchorInput = "text_anchor";

struct SampleNodes {
  ad::Var loss;         // total objective of this sample
  ad::Var score;        // consistency score (summed over directions)
  ad::Var cosine_term;  // cosine part of the forward-direction score
  ad::Var observed;     // forward: Z_r; reverse-only: Z_p
  ad::Var predicted;
};

struct ModelGraph {
  std::unique_ptr<ad::Graph> graph;
  std::vector<SampleNodes> samples;
  ad::Var loss;  // mean over the batch
  std::vector<ParamSpec> specs;
};

ModelGraph build_model_graph(const ModelConfig& cfg, std::size_t batch);

/// Parameter recipes of a configuration, in declaration order.
std::vector<ParamSpec> model_param_specs(const ModelConfig& cfg);

}  // namespace weldad

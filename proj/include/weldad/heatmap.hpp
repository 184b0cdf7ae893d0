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

// Gradient saliency over the post-weld image tokens.

#pragma once

#include <cstddef>

#include "weldad/harness.hpp"

namespace weldad {

struct Heatmap {
  TensorD token_norms;  // M x side x side, gradient L2 norm per token
  TensorD maps;         // M x res x res, upsampled, blurred, scaled to [0, 1]
};

/// Side length of the square token grid; throws ShapeError when `tokens` is
/// not a perfect square.
std::size_t token_grid_side(std::size_t tokens);

/// Backpropagates the cosine part of the consistency score to the image
/// tokens of one sample. Resolution and blur width come from the loss config.
Heatmap compute_heatmap(const ModelState& state, const SampleRecord& sample);

/// Token cell (row-major index) holding the maximum of one angle's map.
std::size_t heatmap_peak_token(const Heatmap& heatmap, std::size_t angle);

}  // namespace weldad

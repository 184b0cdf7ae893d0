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

#include "weldad/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "weldad/raster.hpp"

namespace weldad {

std::size_t token_grid_side(std::size_t tokens) {
  auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(tokens))));
  if (tokens == 0 || side * side != tokens) {
    throw ShapeError("heatmap needs a square token grid, but the image has " +
                     std::to_string(tokens) + " tokens per angle");
  }
  return side;
}

Heatmap compute_heatmap(const ModelState& state, const SampleRecord& sample) {
  const Shape& shape = state.config.shapes().image;
  if (sample.feat_image.shape() != shape) {
    throw ShapeError("sample image shape does not match the model configuration");
  }
  const std::size_t angles = shape[0], tokens = shape[1], width = shape[2];
  const std::size_t side = token_grid_side(tokens);
  const LossConfig& lc = state.config.loss;

  Dataset one;
  one.shapes = state.config.shapes();
  one.samples.push_back(sample);
  const ModelGraph mg = build_model_graph(state.config, 1);
  const auto ev = ad::forward<float>(*mg.graph, bind_batch(state, one, {0}));
  const std::string image = input_name(0, "image");
  const auto grads = ad::backward<float>(*mg.graph, ev, mg.samples[0].cosine_term, {image});
  const TensorF& g = grads.at(image);

  Heatmap out{TensorD({angles, side, side}), TensorD({angles, lc.heatmap_res, lc.heatmap_res})};
  for (std::size_t m = 0; m < angles; ++m) {
    TensorD grid({side, side});
    for (std::size_t t = 0; t < tokens; ++t) {
      double sq = 0.0;
      for (std::size_t d = 0; d < width; ++d) {
        const double v = g[(m * tokens + t) * width + d];
        sq += v * v;
      }
      grid[t] = std::sqrt(sq);
      out.token_norms[m * tokens + t] = grid[t];
    }
    const TensorD map = minmax_normalize(
        gaussian_blur(bilinear_resize(grid, lc.heatmap_res, lc.heatmap_res), lc.heatmap_sigma));
    std::copy(map.data().begin(), map.data().end(),
              out.maps.data().begin() + static_cast<std::ptrdiff_t>(m * map.size()));
  }
  return out;
}

std::size_t heatmap_peak_token(const Heatmap& heatmap, std::size_t angle) {
  const std::size_t res = heatmap.maps.dim(1);
  const std::size_t side = heatmap.token_norms.dim(1);
  const auto first = heatmap.maps.data().begin() + static_cast<std::ptrdiff_t>(angle * res * res);
  const auto peak = static_cast<std::size_t>(
      std::max_element(first, first + static_cast<std::ptrdiff_t>(res * res)) - first);
  auto cell = [&](std::size_t px) {
    if (res == 1) return std::size_t{0};
    const double pos = static_cast<double>(px) * static_cast<double>(side - 1) /
                       static_cast<double>(res - 1);
    return std::min(static_cast<std::size_t>(std::llround(pos)), side - 1);
  };
  return cell(peak / res) * side + cell(peak % res);
}

}  // namespace weldad

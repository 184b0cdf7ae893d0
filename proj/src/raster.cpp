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

#include "weldad/raster.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace weldad {

namespace {

// Source coordinate and blend weight for aligned-corner sampling.
void source_coord(std::size_t i, std::size_t out, std::size_t in, std::size_t& lo,
                  std::size_t& hi, double& frac) {
  if (out == 1 || in == 1) {
    lo = hi = 0;
    frac = 0.0;
    return;
  }
  const double pos = static_cast<double>(i) * static_cast<double>(in - 1) /
                     static_cast<double>(out - 1);
  lo = std::min(static_cast<std::size_t>(std::floor(pos)), in - 1);
  hi = std::min(lo + 1, in - 1);
  frac = pos - static_cast<double>(lo);
}

}  // namespace

TensorD bilinear_resize(const TensorD& grid, std::size_t out_h, std::size_t out_w) {
  if (grid.rank() != 2) throw ShapeError("bilinear_resize expects a rank-2 grid");
  if (out_h == 0 || out_w == 0) throw ShapeError("bilinear_resize output must be non-empty");
  const std::size_t h = grid.dim(0), w = grid.dim(1);
  TensorD out({out_h, out_w});
  for (std::size_t i = 0; i < out_h; ++i) {
    std::size_t y0, y1;
    double fy;
    source_coord(i, out_h, h, y0, y1, fy);
    for (std::size_t j = 0; j < out_w; ++j) {
      std::size_t x0, x1;
      double fx;
      source_coord(j, out_w, w, x0, x1, fx);
      const double top = grid(y0, x0) * (1.0 - fx) + grid(y0, x1) * fx;
      const double bottom = grid(y1, x0) * (1.0 - fx) + grid(y1, x1) * fx;
      out(i, j) = fy == 0.0 ? top : top * (1.0 - fy) + bottom * fy;
    }
  }
  return out;
}

TensorD gaussian_blur(const TensorD& grid, double sigma) {
  if (grid.rank() != 2) throw ShapeError("gaussian_blur expects a rank-2 grid");
  if (sigma <= 0.0) return grid;
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
    const double v = std::exp(-0.5 * static_cast<double>(k * k) / (sigma * sigma));
    kernel[static_cast<std::size_t>(k + radius)] = v;
    total += v;
  }
  for (double& v : kernel) v /= total;

  const auto h = static_cast<std::ptrdiff_t>(grid.dim(0));
  const auto w = static_cast<std::ptrdiff_t>(grid.dim(1));
  TensorD tmp(grid.shape()), out(grid.shape());
  for (std::ptrdiff_t i = 0; i < h; ++i) {
    for (std::ptrdiff_t j = 0; j < w; ++j) {
      double acc = 0.0;
      for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        const auto jj = std::clamp<std::ptrdiff_t>(j + k, 0, w - 1);
        acc += kernel[static_cast<std::size_t>(k + radius)] *
               grid(static_cast<std::size_t>(i), static_cast<std::size_t>(jj));
      }
      tmp(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = acc;
    }
  }
  for (std::ptrdiff_t i = 0; i < h; ++i) {
    for (std::ptrdiff_t j = 0; j < w; ++j) {
      double acc = 0.0;
      for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        const auto ii = std::clamp<std::ptrdiff_t>(i + k, 0, h - 1);
        acc += kernel[static_cast<std::size_t>(k + radius)] *
               tmp(static_cast<std::size_t>(ii), static_cast<std::size_t>(j));
      }
      out(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = acc;
    }
  }
  return out;
}

TensorD minmax_normalize(const TensorD& grid) {
  const auto [lo, hi] = std::minmax_element(grid.data().begin(), grid.data().end());
  const double mn = *lo, mx = *hi;
  TensorD out(grid.shape(), 0.0);
  if (mx == mn) return out;
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = (grid[i] - mn) / (mx - mn);
  return out;
}

}  // namespace weldad

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

#pragma once

#include <cstddef>

#include "weldad/tensor.hpp"

namespace weldad {

/// Bilinear resampling of an H x W grid with aligned corners, so that an
/// output of the native size reproduces the input exactly.
TensorD bilinear_resize(const TensorD& grid, std::size_t out_h, std::size_t out_w);

/// Separable Gaussian blur with clamped borders; radius ceil(3 sigma).
/// sigma <= 0 returns the input.
TensorD gaussian_blur(const TensorD& grid, double sigma);

/// Rescales to [0, 1]; a constant map becomes all zeros.
TensorD minmax_normalize(const TensorD& grid);

}  // namespace weldad

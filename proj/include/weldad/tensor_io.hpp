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

// Binary tensor files.
//
//   offset  size      field
//   0       4         magic "PHMT"
//   4       4         version, u32 little-endian (= 1)
//   8       1         dtype code (0 = f32, 1 = f64)
//   9       4         ndim, u32
//   13      4*ndim    dims, u32 each
//   ...     n*size    payload, little-endian, row-major
//
// ndim = 0 encodes a scalar with a one-element payload.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "weldad/tensor.hpp"

namespace weldad {

class FormatError : public Error {
 public:
  using Error::Error;
};

enum class DType : std::uint8_t { kF32 = 0, kF64 = 1 };

using AnyTensor = std::variant<TensorF, TensorD>;

inline constexpr std::uint32_t kTensorFileVersion = 1;

std::vector<std::uint8_t> encode_tensor(const TensorF& t);
std::vector<std::uint8_t> encode_tensor(const TensorD& t);
AnyTensor decode_tensor(std::span<const std::uint8_t> bytes);

void write_tensor(const std::filesystem::path& path, const TensorF& t);
void write_tensor(const std::filesystem::path& path, const TensorD& t);
AnyTensor read_tensor(const std::filesystem::path& path);

/// Reads a tensor file and converts it to the requested element type.
template <typename T>
Tensor<T> read_tensor_as(const std::filesystem::path& path) {
  return std::visit([](const auto& t) { return t.template cast<T>(); }, read_tensor(path));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Writes an H x W map with values in [0, 1] as a binary 8-bit PGM (P5).
void write_pgm(const std::filesystem::path& path, const TensorD& map);

}  // namespace weldad

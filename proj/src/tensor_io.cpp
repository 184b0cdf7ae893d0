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

#include "weldad/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace weldad {

namespace {

constexpr char kMagic[4] = {'P', 'H', 'M', 'T'};

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U value) {
  using Bits = std::conditional_t<sizeof(U) == 8, std::uint64_t,
                                  std::conditional_t<sizeof(U) == 4, std::uint32_t, std::uint8_t>>;
  Bits bits;
  std::memcpy(&bits, &value, sizeof(U));
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
}

template <typename U>
U get_le(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  using Bits = std::conditional_t<sizeof(U) == 8, std::uint64_t,
                                  std::conditional_t<sizeof(U) == 4, std::uint32_t, std::uint8_t>>;
  if (pos + sizeof(U) > bytes.size()) throw FormatError("truncated tensor file");
  Bits bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bits |= static_cast<Bits>(bytes[pos + i]) << (8 * i);
  }
  pos += sizeof(U);
  U value;
  std::memcpy(&value, &bits, sizeof(U));
  return value;
}

template <typename T>
std::vector<std::uint8_t> encode(const Tensor<T>& t, DType code) {
  if (!t.all_finite()) throw FormatError("refusing to write a tensor with NaN or Inf values");
  std::vector<std::uint8_t> out;
  out.reserve(13 + 4 * t.rank() + sizeof(T) * t.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, kTensorFileVersion);
  out.push_back(static_cast<std::uint8_t>(code));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) {
    if (d > std::numeric_limits<std::uint32_t>::max()) throw FormatError("extent exceeds u32");
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  }
  for (T v : t.data()) put_le<T>(out, v);
  return out;
}

template <typename T>
Tensor<T> decode_payload(std::span<const std::uint8_t> bytes, std::size_t pos, Shape shape) {
  const std::size_t n = shape_size(shape);
  if (bytes.size() - pos != n * sizeof(T)) {
    throw FormatError(bytes.size() - pos < n * sizeof(T) ? "truncated tensor payload"
                                                         : "trailing bytes after tensor payload");
  }
  std::vector<T> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = get_le<T>(bytes, pos);
  return Tensor<T>(std::move(shape), std::move(data));
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const TensorF& t) { return encode(t, DType::kF32); }
std::vector<std::uint8_t> encode_tensor(const TensorD& t) { return encode(t, DType::kF64); }

AnyTensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw FormatError("truncated tensor file");
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw FormatError("bad magic");
  }
  std::size_t pos = 4;
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kTensorFileVersion) {
    throw FormatError("unsupported tensor file version " + std::to_string(version));
  }
  const auto code = get_le<std::uint8_t>(bytes, pos);
  const auto ndim = get_le<std::uint32_t>(bytes, pos);
  Shape shape;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    const auto d = get_le<std::uint32_t>(bytes, pos);
    if (d == 0) throw FormatError("zero extent in tensor file");
    shape.push_back(d);
  }
  switch (code) {
    case static_cast<std::uint8_t>(DType::kF32):
      return decode_payload<float>(bytes, pos, std::move(shape));
    case static_cast<std::uint8_t>(DType::kF64):
      return decode_payload<double>(bytes, pos, std::move(shape));
    default:
      throw FormatError("unknown dtype code " + std::to_string(code));
  }
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

void write_tensor(const std::filesystem::path& path, const TensorF& t) {
  write_file_bytes(path, encode_tensor(t));
}

void write_tensor(const std::filesystem::path& path, const TensorD& t) {
  write_file_bytes(path, encode_tensor(t));
}

AnyTensor read_tensor(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_tensor(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_pgm(const std::filesystem::path& path, const TensorD& map) {
  if (map.rank() != 2) throw ShapeError("PGM export needs a rank-2 map");
  const std::size_t h = map.dim(0), w = map.dim(1);
  const std::string header = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  for (double v : map.data()) {
    const double c = std::clamp(v, 0.0, 1.0);
    bytes.push_back(static_cast<std::uint8_t>(std::lround(c * 255.0)));
  }
  write_file_bytes(path, bytes);
}

}  // namespace weldad

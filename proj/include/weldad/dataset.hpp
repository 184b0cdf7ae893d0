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

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "weldad/tensor.hpp"

namespace weldad {

enum class Label : std::uint8_t { kNormal = 0, kAnomalous = 1 };

enum class DefectKind : std::uint8_t { kNone = 0, kSurface = 1, kProcessHidden = 2, kBoth = 3 };

inline constexpr std::array<DefectKind, 4> kAllDefectKinds = {
    DefectKind::kNone, DefectKind::kSurface, DefectKind::kProcessHidden, DefectKind::kBoth};

const char* to_string(Label label);
const char* to_string(DefectKind kind);
Label parse_label(const std::string& s);
DefectKind parse_defect_kind(const std::string& s);

/// Physical units of the six process channels, in channel order.
inline constexpr std::array<const char*, 6> kSensorUnits = {"A", "V", "m/min", "bar", "L/min", "mm"};

/// One synchronized multimodal sample at feature level.
struct SampleRecord {
  std::uint64_t id = 0;
  TensorF sensor_raw;  // T_s x C_s
  TensorF feat_video;  // N_v x D
  TensorF feat_audio;  // N_a x D
  TensorF feat_image;  // M x N_i x D
  Label label = Label::kNormal;
  DefectKind defect_kind = DefectKind::kNone;
  // Generator provenance. Absent for ingested feature files.
  std::optional<TensorD> theta;  // latent process trajectory, T_s x d_theta
  std::uint64_t process_seed = 0;  // sensor, video and audio noise
  std::uint64_t noise_seed = 0;    // image noise
};

struct ModalityShapes {
  Shape sensor;  // {T_s, C_s}
  Shape video;   // {N_v, D}
  Shape audio;   // {N_a, D}
  Shape image;   // {M, N_i, D}

  friend bool operator==(const ModalityShapes&, const ModalityShapes&) = default;
};

struct Dataset {
  std::string split;
  std::uint64_t seed = 0;
  ModalityShapes shapes;
  std::vector<SampleRecord> samples;

  std::map<DefectKind, std::size_t> defect_histogram() const;
  /// Throws if any sample deviates from `shapes`.
  void validate() const;
};

ModalityShapes shapes_of(const SampleRecord& s);

/// Writes sample tensors under `dir/<split>/` and the manifest to
/// `dir/<split>.manifest`. Returns the manifest path.
std::filesystem::path write_dataset(const Dataset& data, const std::filesystem::path& dir);

/// Loads a manifest and every tensor it references. Paths inside the manifest
/// are relative to the manifest's directory.
Dataset load_dataset(const std::filesystem::path& manifest);

}  // namespace weldad

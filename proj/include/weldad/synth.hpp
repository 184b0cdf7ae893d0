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

// Synthetic causal weld-process generator.
//
// Every sample starts from a latent process trajectory theta(t) in R^d that
// wanders around a nominal setpoint of all ones. The process modalities are
// read off theta directly:
//   sensors  linear per-channel readout plus channel noise,
//   video    embedding of per-window means and spreads,
//   audio    embedding of per-window heat input and roughness.
// The result modality (post-weld images, M angles) depends on the process
// only through the time-averaged energy E = mean_t g(theta(t)), rendered by a
// fixed per-token embedding plus angle-specific noise. Process -> result is a
// function; the reverse is not, because E forgets the temporal detail.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "weldad/dataset.hpp"
#include "weldad/kv.hpp"
#include "weldad/tensor.hpp"

namespace weldad {

struct SynthConfig {
  std::size_t n_train = 128;
  std::size_t n_val = 64;
  std::size_t n_test = 192;
  std::uint64_t seed = 42;

  std::size_t steps = 256;  // T_s
  std::size_t channels = 6;  // C_s
  std::size_t angles = 5;   // M
  std::size_t n_video = 16;
  std::size_t n_audio = 16;
  std::size_t n_image = 16;
  std::size_t width = 64;  // D
  std::size_t theta_dim = 4;

  // Nominal process variability.
  double offset_std = 0.03;
  double walk_std = 0.01;
  double walk_phi = 0.95;

  // Noise floors, relative to each modality's natural scale.
  double sensor_noise = 0.02;
  double video_noise = 0.05;
  double audio_noise = 0.05;
  double image_noise = 0.05;

  double severity_min = 0.4;
  double severity_max = 0.8;
  std::size_t dip_min = 8;
  std::size_t dip_max = 32;
  // Surface defects shift the normalized energy by surface_shift * severity
  // along a random direction and add a blemish of blemish_scale * severity
  // to one token of one angle.
  double surface_shift = 5.0;
  double blemish_scale = 2.0;

  // Test split composition; the remainder after normals is split evenly
  // between surface, process_hidden and both.
  double test_normal_fraction = 0.34;

  void validate() const;
  static SynthConfig from_kv(const KvDocument& doc);
  void to_kv(KvDocument& doc) const;
};

/// Fixed random embeddings shared by every sample of one dataset.
class SynthWorld {
 public:
  explicit SynthWorld(SynthConfig config);

  const SynthConfig& config() const { return cfg_; }

  /// Smooth random walk around the nominal setpoint.
  TensorD draw_theta(std::uint64_t theta_seed) const;

  TensorF render_sensors(const TensorD& theta, std::uint64_t noise_seed) const;
  TensorF render_video(const TensorD& theta, std::uint64_t noise_seed) const;
  TensorF render_audio(const TensorD& theta, std::uint64_t noise_seed) const;
  /// Normalized integrated process energy, one entry per latent dimension.
  std::vector<double> energy(const TensorD& theta) const;
  TensorF render_image(const std::vector<double>& energy, std::uint64_t noise_seed) const;

  /// Normal sample whose every modality follows from `theta`. Process
  /// modalities draw noise from `process_seed`, images from `image_seed`.
  SampleRecord make_normal(std::uint64_t id, const TensorD& theta, std::uint64_t process_seed,
                           std::uint64_t image_seed) const;

  /// Per-channel scale in physical units, used to express noise levels.
  const std::vector<double>& channel_scale() const { return channel_scale_; }

 private:
  SynthConfig cfg_;
  std::vector<double> channel_scale_;
  std::vector<std::size_t> channel_source_;
  TensorD sensor_mix_;   // C x d, small cross-talk on top of the primary source
  TensorD video_w_;      // D x 2d
  TensorD video_pos_;    // N_v x D
  TensorD audio_w_;      // D x (d + 1)
  TensorD audio_pos_;    // N_a x D
  TensorD image_w_;      // N_i x D x d
  TensorD image_b_;      // N_i x D
  TensorD angle_b_;      // M x D
};

/// Applies a defect to a normal generated sample.
///   surface         the image shows a different result (shifted energy plus a
///                   local blemish on one angle); process modalities untouched.
///   process_hidden  a multiplicative dip of one latent component over a window
///                   of [dip_min, dip_max] bins reaches sensors, video and audio,
///                   while the image keeps showing the undisturbed result.
///   both            both effects.
/// Severity zero returns the sample unchanged.
SampleRecord inject_defect(const SynthWorld& world, const SampleRecord& sample, DefectKind kind,
                           double severity, std::uint64_t seed);

/// X + sigma * scale_c * eps with standard normal eps. `channel_scale` defaults
/// to one, i.e. the input is already on a channel-normalized scale.
TensorF add_sensor_noise(const TensorF& x, double sigma, std::uint64_t seed,
                         const std::vector<double>& channel_scale = {});

/// Maps a T x C sensor series to a 3 x R x R pseudo point cloud: X is the
/// normalized time index, Y the normalized channel index, Z the per-channel
/// min-max normalized magnitude (0.5 for a constant channel). The T x C grid
/// is bilinearly resampled to R x R with aligned corners.
TensorD sensors_to_pseudo_pointcloud(const TensorF& x, std::size_t out_res);

struct SynthDatasets {
  Dataset train;
  Dataset val;
  Dataset test;
  TensorF text_anchor;  // unit vector, d_text
};

/// Generates train (normal only), val (normal only) and test splits.
SynthDatasets generate_datasets(const SynthConfig& cfg, std::size_t text_dim = 64);

/// Generates and writes `<dir>/{train,val,test}.manifest` plus
/// `<dir>/text_anchor.phmt`. Returns the manifest paths in split order.
std::vector<std::filesystem::path> generate_dataset(const SynthConfig& cfg,
                                                    const std::filesystem::path& dir,
                                                    std::size_t text_dim = 64);

/// Seeded random unit vector.
TensorF random_unit_vector(std::size_t dim, std::uint64_t seed);

}  // namespace weldad

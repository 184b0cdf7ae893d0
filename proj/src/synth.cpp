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

#include "weldad/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "weldad/raster.hpp"
#include "weldad/rng.hpp"
#include "weldad/tensor_io.hpp"

namespace weldad {

namespace {

// Noise stream ids within one sample's noise seed.
constexpr std::uint64_t kSensorStream = 1;
constexpr std::uint64_t kVideoStream = 2;
constexpr std::uint64_t kAudioStream = 3;
constexpr std::uint64_t kImageStream = 4;

// Split stream ids within the dataset seed.
constexpr std::uint64_t kTrainSplit = 1;
constexpr std::uint64_t kValSplit = 2;
constexpr std::uint64_t kTestSplit = 3;

// Reference spreads used to put window statistics on an O(1) scale.
constexpr double kMeanScale = 0.05;
constexpr double kSpreadScale = 0.02;
constexpr double kRoughScale = 0.01;
constexpr double kEnergyScale = 0.05;

TensorD gaussian_tensor(Shape shape, Rng& rng, double stddev) {
  std::normal_distribution<double> n(0.0, stddev);
  TensorD t(std::move(shape));
  for (auto& v : t.data()) v = n(rng);
  return t;
}

double softplus(double x) { return x > 20.0 ? x : std::log1p(std::exp(x)); }

std::pair<std::size_t, std::size_t> window(std::size_t j, std::size_t n, std::size_t steps) {
  return {j * steps / n, (j + 1) * steps / n};
}

}  // namespace

void SynthConfig::validate() const {
  if (n_train == 0 || n_val == 0 || n_test == 0) throw Error("split counts must be positive");
  if (steps < 2 || channels < 2) throw Error("sensor series needs at least 2 steps and 2 channels");
  if (theta_dim < 2) throw Error("theta_dim must be at least 2");
  if (angles == 0 || n_video == 0 || n_audio == 0 || n_image == 0 || width == 0) {
    throw Error("token counts and width must be positive");
  }
  if (n_video > steps || n_audio > steps) throw Error("more tokens than sensor steps");
  if (!(severity_min > 0.0) || severity_max < severity_min) {
    throw Error("severity range must be positive and ordered");
  }
  if (surface_shift < 0 || blemish_scale < 0) throw Error("surface defect scales must be non-negative");
  if (dip_min == 0 || dip_max < dip_min || dip_max > steps) throw Error("invalid dip window range");
  if (!(test_normal_fraction > 0.0 && test_normal_fraction < 1.0)) {
    throw Error("test_normal_fraction must lie in (0, 1)");
  }
  if (offset_std < 0 || walk_std < 0 || sensor_noise < 0 || video_noise < 0 || audio_noise < 0 ||
      image_noise < 0) {
    throw Error("noise levels must be non-negative");
  }
}

SynthConfig SynthConfig::from_kv(const KvDocument& doc) {
  SynthConfig c;
  auto sz = [&](const char* key, std::size_t& field) {
    field = static_cast<std::size_t>(doc.get_u64(key, field));
  };
  auto dbl = [&](const char* key, double& field) { field = doc.get_double(key, field); };
  sz("n_train", c.n_train);
  sz("n_val", c.n_val);
  sz("n_test", c.n_test);
  c.seed = doc.get_u64("seed", c.seed);
  sz("steps", c.steps);
  sz("channels", c.channels);
  sz("angles", c.angles);
  sz("n_video", c.n_video);
  sz("n_audio", c.n_audio);
  sz("n_image", c.n_image);
  sz("width", c.width);
  sz("theta_dim", c.theta_dim);
  dbl("offset_std", c.offset_std);
  dbl("walk_std", c.walk_std);
  dbl("walk_phi", c.walk_phi);
  dbl("sensor_noise", c.sensor_noise);
  dbl("video_noise", c.video_noise);
  dbl("audio_noise", c.audio_noise);
  dbl("image_noise", c.image_noise);
  dbl("severity_min", c.severity_min);
  dbl("severity_max", c.severity_max);
  sz("dip_min", c.dip_min);
  sz("dip_max", c.dip_max);
  dbl("surface_shift", c.surface_shift);
  dbl("blemish_scale", c.blemish_scale);
  dbl("test_normal_fraction", c.test_normal_fraction);
  c.validate();
  return c;
}

void SynthConfig::to_kv(KvDocument& doc) const {
  auto sz = [&](const char* key, std::size_t v) { doc.set(key, static_cast<std::uint64_t>(v)); };
  sz("n_train", n_train);
  sz("n_val", n_val);
  sz("n_test", n_test);
  doc.set("seed", seed);
  sz("steps", steps);
  sz("channels", channels);
  sz("angles", angles);
  sz("n_video", n_video);
  sz("n_audio", n_audio);
  sz("n_image", n_image);
  sz("width", width);
  sz("theta_dim", theta_dim);
  doc.set("offset_std", offset_std);
  doc.set("walk_std", walk_std);
  doc.set("walk_phi", walk_phi);
  doc.set("sensor_noise", sensor_noise);
  doc.set("video_noise", video_noise);
  doc.set("audio_noise", audio_noise);
  doc.set("image_noise", image_noise);
  doc.set("severity_min", severity_min);
  doc.set("severity_max", severity_max);
  sz("dip_min", dip_min);
  sz("dip_max", dip_max);
  doc.set("surface_shift", surface_shift);
  doc.set("blemish_scale", blemish_scale);
  doc.set("test_normal_fraction", test_normal_fraction);
}

SynthWorld::SynthWorld(SynthConfig config) : cfg_(std::move(config)) {
  cfg_.validate();
  const std::size_t d = cfg_.theta_dim, dw = cfg_.width;
  // current, voltage, wire feed, gas pressure, gas flow, wire consumption per bin
  static constexpr double kScale[6] = {200.0, 24.0, 8.0, 1.5, 15.0, 2.2};
  static constexpr std::size_t kSource[6] = {0, 1, 2, 3, 3, 2};
  for (std::size_t c = 0; c < cfg_.channels; ++c) {
    channel_scale_.push_back(c < 6 ? kScale[c] : 1.0);
    channel_source_.push_back((c < 6 ? kSource[c] : c) % d);
  }
  Rng rng(derive_seed(cfg_.seed, 0xE3B));
  sensor_mix_ = gaussian_tensor({cfg_.channels, d}, rng, 0.05);
  video_w_ = gaussian_tensor({dw, 2 * d}, rng, 1.0 / std::sqrt(2.0 * static_cast<double>(d)));
  video_pos_ = gaussian_tensor({cfg_.n_video, dw}, rng, 0.3);
  audio_w_ = gaussian_tensor({dw, d + 1}, rng, 1.0 / std::sqrt(static_cast<double>(d + 1)));
  audio_pos_ = gaussian_tensor({cfg_.n_audio, dw}, rng, 0.3);
  image_w_ = gaussian_tensor({cfg_.n_image, dw, d}, rng, 0.5 / std::sqrt(static_cast<double>(d)));
  image_b_ = gaussian_tensor({cfg_.n_image, dw}, rng, 0.5);
  angle_b_ = gaussian_tensor({cfg_.angles, dw}, rng, 0.1);
}

TensorD SynthWorld::draw_theta(std::uint64_t theta_seed) const {
  const std::size_t d = cfg_.theta_dim, steps = cfg_.steps;
  Rng rng(theta_seed);
  std::normal_distribution<double> n(0.0, 1.0);
  TensorD theta({steps, d});
  const double stationary = cfg_.walk_std / std::sqrt(std::max(1e-12, 1.0 - cfg_.walk_phi * cfg_.walk_phi));
  for (std::size_t k = 0; k < d; ++k) {
    const double offset = cfg_.offset_std * n(rng);
    double walk = stationary * n(rng);
    for (std::size_t t = 0; t < steps; ++t) {
      if (t > 0) walk = cfg_.walk_phi * walk + cfg_.walk_std * n(rng);
      theta(t, k) = 1.0 + offset + walk;
    }
  }
  return theta;
}

TensorF SynthWorld::render_sensors(const TensorD& theta, std::uint64_t noise_seed) const {
  const std::size_t d = cfg_.theta_dim, steps = cfg_.steps, ch = cfg_.channels;
  Rng rng(derive_seed(noise_seed, kSensorStream));
  std::normal_distribution<double> n(0.0, 1.0);
  TensorF out({steps, ch});
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t c = 0; c < ch; ++c) {
      double v = theta(t, channel_source_[c]);
      for (std::size_t k = 0; k < d; ++k) v += sensor_mix_(c, k) * (theta(t, k) - 1.0);
      v += cfg_.sensor_noise * n(rng);
      out(t, c) = static_cast<float>(channel_scale_[c] * v);
    }
  }
  return out;
}

TensorF SynthWorld::render_video(const TensorD& theta, std::uint64_t noise_seed) const {
  const std::size_t d = cfg_.theta_dim, dw = cfg_.width;
  Rng rng(derive_seed(noise_seed, kVideoStream));
  std::normal_distribution<double> n(0.0, 1.0);
  TensorF out({cfg_.n_video, dw});
  std::vector<double> stats(2 * d);
  for (std::size_t j = 0; j < cfg_.n_video; ++j) {
    const auto [lo, hi] = window(j, cfg_.n_video, cfg_.steps);
    const double len = static_cast<double>(hi - lo);
    for (std::size_t k = 0; k < d; ++k) {
      double mean = 0.0;
      for (std::size_t t = lo; t < hi; ++t) mean += theta(t, k);
      mean /= len;
      double var = 0.0;
      for (std::size_t t = lo; t < hi; ++t) var += (theta(t, k) - mean) * (theta(t, k) - mean);
      stats[k] = (mean - 1.0) / kMeanScale;
      stats[d + k] = std::sqrt(var / len) / kSpreadScale;
    }
    for (std::size_t f = 0; f < dw; ++f) {
      double pre = video_pos_(j, f);
      for (std::size_t s = 0; s < 2 * d; ++s) pre += video_w_(f, s) * stats[s];
      out(j, f) = static_cast<float>(std::tanh(pre) + cfg_.video_noise * n(rng));
    }
  }
  return out;
}

TensorF SynthWorld::render_audio(const TensorD& theta, std::uint64_t noise_seed) const {
  const std::size_t d = cfg_.theta_dim, dw = cfg_.width;
  Rng rng(derive_seed(noise_seed, kAudioStream));
  std::normal_distribution<double> n(0.0, 1.0);
  TensorF out({cfg_.n_audio, dw});
  std::vector<double> stats(d + 1);
  const double typical_rough = cfg_.walk_std * std::sqrt(2.0 / 3.141592653589793) / kRoughScale;
  for (std::size_t j = 0; j < cfg_.n_audio; ++j) {
    const auto [lo, hi] = window(j, cfg_.n_audio, cfg_.steps);
    const double len = static_cast<double>(hi - lo);
    double heat = 0.0;
    for (std::size_t t = lo; t < hi; ++t) heat += theta(t, 0) * theta(t, 1);
    stats[0] = (heat / len - 1.0) / kMeanScale;
    for (std::size_t k = 0; k < d; ++k) {
      double rough = 0.0;
      for (std::size_t t = std::max<std::size_t>(lo, 1); t < hi; ++t) {
        rough += std::abs(theta(t, k) - theta(t - 1, k));
      }
      stats[1 + k] = rough / len / kRoughScale - typical_rough;
    }
    for (std::size_t f = 0; f < dw; ++f) {
      double pre = audio_pos_(j, f);
      for (std::size_t s = 0; s <= d; ++s) pre += audio_w_(f, s) * stats[s];
      out(j, f) = static_cast<float>(std::tanh(pre) + cfg_.audio_noise * n(rng));
    }
  }
  return out;
}

std::vector<double> SynthWorld::energy(const TensorD& theta) const {
  const std::size_t d = cfg_.theta_dim, steps = cfg_.steps;
  std::vector<double> e(d, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t k = 0; k < d; ++k) e[k] += theta(t, k) * theta(t, (k + 1) % d);
  }
  for (double& v : e) v = (v / static_cast<double>(steps) - 1.0) / kEnergyScale;
  return e;
}

TensorF SynthWorld::render_image(const std::vector<double>& energy, std::uint64_t noise_seed) const {
  const std::size_t d = cfg_.theta_dim, dw = cfg_.width;
  if (energy.size() != d) throw ShapeError("energy vector has the wrong length");
  Rng rng(derive_seed(noise_seed, kImageStream));
  std::normal_distribution<double> n(0.0, 1.0);
  TensorF out({cfg_.angles, cfg_.n_image, dw});
  for (std::size_t m = 0; m < cfg_.angles; ++m) {
    for (std::size_t j = 0; j < cfg_.n_image; ++j) {
      for (std::size_t f = 0; f < dw; ++f) {
        double pre = image_b_(j, f) + angle_b_(m, f);
        for (std::size_t k = 0; k < d; ++k) pre += image_w_(j, f, k) * energy[k];
        out(m, j, f) = static_cast<float>(softplus(pre) + cfg_.image_noise * n(rng));
      }
    }
  }
  return out;
}

SampleRecord SynthWorld::make_normal(std::uint64_t id, const TensorD& theta,
                                     std::uint64_t process_seed, std::uint64_t image_seed) const {
  SampleRecord s;
  s.id = id;
  s.sensor_raw = render_sensors(theta, process_seed);
  s.feat_video = render_video(theta, process_seed);
  s.feat_audio = render_audio(theta, process_seed);
  s.feat_image = render_image(energy(theta), image_seed);
  s.label = Label::kNormal;
  s.defect_kind = DefectKind::kNone;
  s.theta = theta;
  s.process_seed = process_seed;
  s.noise_seed = image_seed;
  return s;
}

SampleRecord inject_defect(const SynthWorld& world, const SampleRecord& sample, DefectKind kind,
                           double severity, std::uint64_t seed) {
  if (kind != DefectKind::kSurface && kind != DefectKind::kProcessHidden &&
      kind != DefectKind::kBoth) {
    throw Error("inject_defect: unknown or non-defect kind");
  }
  if (!(severity >= 0.0)) throw Error("inject_defect: severity must be positive");
  if (sample.label != Label::kNormal) throw Error("inject_defect: sample is not normal");
  if (!sample.theta) throw Error("inject_defect: sample carries no latent trajectory");
  const SynthConfig& cfg = world.config();
  const TensorD& theta = *sample.theta;

  SampleRecord out = sample;
  out.label = Label::kAnomalous;
  out.defect_kind = kind;
  if (severity == 0.0) return out;

  Rng rng(seed);
  const bool process = kind == DefectKind::kProcessHidden || kind == DefectKind::kBoth;
  const bool surface = kind == DefectKind::kSurface || kind == DefectKind::kBoth;

  if (process) {
    std::uniform_int_distribution<std::size_t> pick_comp(0, cfg.theta_dim - 1);
    std::uniform_int_distribution<std::size_t> pick_len(cfg.dip_min, cfg.dip_max);
    const std::size_t comp = pick_comp(rng);
    const std::size_t len = pick_len(rng);
    std::uniform_int_distribution<std::size_t> pick_start(0, cfg.steps - len);
    const std::size_t start = pick_start(rng);
    const double factor = std::max(0.0, 1.0 - severity);
    TensorD dipped = theta;
    for (std::size_t t = start; t < start + len; ++t) dipped(t, comp) *= factor;
    out.sensor_raw = world.render_sensors(dipped, sample.process_seed);
    out.feat_video = world.render_video(dipped, sample.process_seed);
    out.feat_audio = world.render_audio(dipped, sample.process_seed);
    out.theta = std::move(dipped);
  }

  if (surface) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> e = world.energy(theta);
    std::vector<double> dir(e.size());
    double norm = 0.0;
    for (double& v : dir) {
      v = n(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (std::size_t k = 0; k < e.size(); ++k) e[k] += cfg.surface_shift * severity * dir[k] / norm;
    TensorF image = world.render_image(e, sample.noise_seed);
    std::uniform_int_distribution<std::size_t> pick_angle(0, cfg.angles - 1);
    std::uniform_int_distribution<std::size_t> pick_token(0, cfg.n_image - 1);
    const std::size_t angle = pick_angle(rng);
    const std::size_t token = pick_token(rng);
    for (std::size_t f = 0; f < cfg.width; ++f) {
      image(angle, token, f) +=
          static_cast<float>(cfg.blemish_scale * severity * (0.5 + std::abs(n(rng))));
    }
    out.feat_image = std::move(image);
  }
  return out;
}

TensorF add_sensor_noise(const TensorF& x, double sigma, std::uint64_t seed,
                         const std::vector<double>& channel_scale) {
  if (!(sigma >= 0.0)) throw Error("sensor noise sigma must be non-negative");
  if (x.rank() != 2) throw ShapeError("sensor series must be T x C");
  const std::size_t steps = x.dim(0), ch = x.dim(1);
  if (!channel_scale.empty() && channel_scale.size() != ch) {
    throw ShapeError("channel scale length does not match channel count");
  }
  if (sigma == 0.0) return x;
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  TensorF out = x;
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t c = 0; c < ch; ++c) {
      const double scale = channel_scale.empty() ? 1.0 : channel_scale[c];
      out(t, c) = static_cast<float>(static_cast<double>(x(t, c)) + sigma * scale * n(rng));
    }
  }
  return out;
}

TensorD sensors_to_pseudo_pointcloud(const TensorF& x, std::size_t out_res) {
  if (x.rank() != 2 || x.dim(0) < 2 || x.dim(1) < 2) {
    throw ShapeError("pseudo point cloud needs a T x C series with T, C >= 2");
  }
  if (out_res < 2) throw ShapeError("pseudo point cloud resolution must be at least 2");
  const std::size_t steps = x.dim(0), ch = x.dim(1);
  TensorD gx({steps, ch}), gy({steps, ch}), gz({steps, ch});
  for (std::size_t c = 0; c < ch; ++c) {
    float lo = x(0, c), hi = x(0, c);
    for (std::size_t t = 1; t < steps; ++t) {
      lo = std::min(lo, x(t, c));
      hi = std::max(hi, x(t, c));
    }
    for (std::size_t t = 0; t < steps; ++t) {
      gx(t, c) = static_cast<double>(t) / static_cast<double>(steps - 1);
      gy(t, c) = static_cast<double>(c) / static_cast<double>(ch - 1);
      gz(t, c) = hi == lo ? 0.5
                          : (static_cast<double>(x(t, c)) - lo) / (static_cast<double>(hi) - lo);
    }
  }
  TensorD out({3, out_res, out_res});
  std::size_t plane = 0;
  for (const TensorD* g : {&gx, &gy, &gz}) {
    const TensorD up = bilinear_resize(*g, out_res, out_res);
    std::copy(up.data().begin(), up.data().end(), out.data().begin() + plane * out_res * out_res);
    ++plane;
  }
  return out;
}

TensorF random_unit_vector(std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw ShapeError("unit vector needs a positive dimension");
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(dim);
  double norm = 0.0;
  for (double& x : v) {
    x = n(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  TensorF out({dim});
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(v[i] / norm);
  return out;
}

namespace {

Dataset make_split(const SynthWorld& world, const std::string& name, std::uint64_t split_id,
                   std::size_t count, bool with_defects) {
  const SynthConfig& cfg = world.config();
  Dataset data;
  data.split = name;
  data.seed = cfg.seed;
  data.shapes = {{cfg.steps, cfg.channels},
                 {cfg.n_video, cfg.width},
                 {cfg.n_audio, cfg.width},
                 {cfg.angles, cfg.n_image, cfg.width}};

  std::vector<DefectKind> kinds(count, DefectKind::kNone);
  if (with_defects) {
    const auto normals = static_cast<std::size_t>(
        std::lround(cfg.test_normal_fraction * static_cast<double>(count)));
    const std::size_t rest = count - std::min(normals, count);
    const std::size_t third = rest / 3;
    std::size_t i = std::min(normals, count);
    for (std::size_t j = 0; j < third; ++j) kinds[i++] = DefectKind::kSurface;
    for (std::size_t j = 0; j < third; ++j) kinds[i++] = DefectKind::kProcessHidden;
    while (i < count) kinds[i++] = DefectKind::kBoth;
    Rng shuffle_rng(derive_seed(cfg.seed, split_id, 0xD1CE));
    std::shuffle(kinds.begin(), kinds.end(), shuffle_rng);
  }

  data.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t base = 5 * i;
    SampleRecord s = world.make_normal(i, world.draw_theta(derive_seed(cfg.seed, split_id, base)),
                                       derive_seed(cfg.seed, split_id, base + 1),
                                       derive_seed(cfg.seed, split_id, base + 2));
    if (kinds[i] != DefectKind::kNone) {
      Rng sev_rng(derive_seed(cfg.seed, split_id, base + 3));
      std::uniform_real_distribution<double> sev(cfg.severity_min, cfg.severity_max);
      const double severity = sev(sev_rng);
      s = inject_defect(world, s, kinds[i], severity, derive_seed(cfg.seed, split_id, base + 4));
    }
    data.samples.push_back(std::move(s));
  }
  return data;
}

}  // namespace

SynthDatasets generate_datasets(const SynthConfig& cfg, std::size_t text_dim) {
  const SynthWorld world(cfg);
  SynthDatasets out;
  out.train = make_split(world, "train", kTrainSplit, cfg.n_train, false);
  out.val = make_split(world, "val", kValSplit, cfg.n_val, false);
  out.test = make_split(world, "test", kTestSplit, cfg.n_test, true);
  out.text_anchor = random_unit_vector(text_dim, derive_seed(cfg.seed, 0x7E47));
  return out;
}

std::vector<std::filesystem::path> generate_dataset(const SynthConfig& cfg,
                                                    const std::filesystem::path& dir,
                                                    std::size_t text_dim) {
  const SynthDatasets sets = generate_datasets(cfg, text_dim);
  std::vector<std::filesystem::path> manifests;
  manifests.push_back(write_dataset(sets.train, dir));
  manifests.push_back(write_dataset(sets.val, dir));
  manifests.push_back(write_dataset(sets.test, dir));
  write_tensor(dir / "text_anchor.phmt", sets.text_anchor);
  KvDocument doc;
  cfg.to_kv(doc);
  doc.save(dir / "synth.config");
  return manifests;
}

}  // namespace weldad

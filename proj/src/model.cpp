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

#include "weldad/model.hpp"

#include <cmath>

namespace weldad {

const char* to_string(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kReverseMapping: return "reverse_mapping";
    case Variant::kPlainDecoder: return "plain_decoder";
    case Variant::kNoTextLoss: return "no_text_loss";
    case Variant::kBidirectional: return "bidirectional";
    case Variant::kSymmetricFusion: return "symmetric_fusion";
    case Variant::kImageOnly: return "modality_subset(image)";
    case Variant::kImageVideo: return "modality_subset(image+video)";
    case Variant::kImageVideoAudio: return "modality_subset(image+video+audio)";
  }
  return "full";
}

Variant parse_variant(const std::string& tag) {
  for (Variant v : kAllVariants) {
    if (tag == to_string(v)) return v;
  }
  throw Error("unknown ablation variant '" + tag + "'");
}

void ModelConfig::validate() const {
  if (steps == 0 || channels == 0 || n_video == 0 || n_audio == 0 || angles == 0 ||
      n_image == 0 || width == 0) {
    throw ShapeError("model input shapes must be positive");
  }
  if (d_model == 0 || d_state == 0 || latent == 0 || mlp_hidden == 0 || text_dim == 0) {
    throw ShapeError("model sizes must be positive");
  }
  if (heads == 0 || width % heads != 0) throw ShapeError("head count must divide the width");
  bottleneck.validate();
  loss.validate(latent);
}

void ModelConfig::set_shapes(const ModalityShapes& s) {
  if (s.sensor.size() != 2 || s.video.size() != 2 || s.audio.size() != 2 || s.image.size() != 3) {
    throw ShapeError("modality shapes have the wrong rank");
  }
  steps = s.sensor[0];
  channels = s.sensor[1];
  n_video = s.video[0];
  n_audio = s.audio[0];
  angles = s.image[0];
  n_image = s.image[1];
  width = s.image[2];
  if (s.video[1] != width || s.audio[1] != width) {
    throw ShapeError("video, audio and image widths must agree");
  }
}

ModalityShapes ModelConfig::shapes() const {
  return {{steps, channels}, {n_video, width}, {n_audio, width}, {angles, n_image, width}};
}

ModelConfig ModelConfig::from_kv(const KvDocument& doc) {
  ModelConfig c;
  auto sz = [&](const char* key, std::size_t& field) {
    field = static_cast<std::size_t>(doc.get_u64(key, field));
  };
  sz("steps", c.steps);
  sz("channels", c.channels);
  sz("n_video", c.n_video);
  sz("n_audio", c.n_audio);
  sz("angles", c.angles);
  sz("n_image", c.n_image);
  sz("width", c.width);
  sz("d_model", c.d_model);
  sz("d_state", c.d_state);
  sz("heads", c.heads);
  sz("decoder_blocks", c.decoder_blocks);
  sz("latent", c.latent);
  sz("mlp_hidden", c.mlp_hidden);
  sz("text_dim", c.text_dim);
  c.bottleneck.mask_prob = doc.get_double("mask_prob", c.bottleneck.mask_prob);
  c.bottleneck.noise_std = doc.get_double("noise_std", c.bottleneck.noise_std);
  c.loss = LossConfig::from_kv(doc);
  c.variant = parse_variant(doc.get_string("variant", to_string(c.variant)));
  c.detach_target = doc.get_bool("detach_target", c.detach_target);
  c.validate();
  return c;
}

void ModelConfig::to_kv(KvDocument& doc) const {
  auto sz = [&](const char* key, std::size_t v) { doc.set(key, static_cast<std::uint64_t>(v)); };
  sz("steps", steps);
  sz("channels", channels);
  sz("n_video", n_video);
  sz("n_audio", n_audio);
  sz("angles", angles);
  sz("n_image", n_image);
  sz("width", width);
  sz("d_model", d_model);
  sz("d_state", d_state);
  sz("heads", heads);
  sz("decoder_blocks", decoder_blocks);
  sz("latent", latent);
  sz("mlp_hidden", mlp_hidden);
  sz("text_dim", text_dim);
  doc.set("mask_prob", bottleneck.mask_prob);
  doc.set("noise_std", bottleneck.noise_std);
  loss.to_kv(doc);
  doc.set("variant", std::string(to_string(variant)));
  doc.set("detach_target", detach_target);
}

bool ModelConfig::uses_sensor() const {
  return variant != Variant::kImageOnly && variant != Variant::kImageVideo &&
         variant != Variant::kImageVideoAudio;
}
bool ModelConfig::uses_video() const { return variant != Variant::kImageOnly; }
bool ModelConfig::uses_audio() const {
  return variant != Variant::kImageOnly && variant != Variant::kImageVideo;
}
bool ModelConfig::forward_direction() const { return variant != Variant::kReverseMapping; }
bool ModelConfig::reverse_direction() const {
  return variant == Variant::kReverseMapping || variant == Variant::kBidirectional;
}

std::string input_name(std::size_t slot, const std::string& modality) {
  return "s" + std::to_string(slot) + "." + modality;
}

namespace {

struct Parts {
  SsmParams ssm;
  ModulationHead film;
  ProcessEncoderParams process;
  Linear sensor_token;   // symmetric fusion
  ad::Var const_tokens;  // image-only subset
  Mlp process_pool;      // reverse direction target
  ResultEncoderParams result;
  DecoderParams decoder;
  DecoderParams reverse_decoder;
  TextHead text;
  TextHead reverse_text;
};

Parts declare_parts(const ModelConfig& cfg, const ParamScope& root) {
  Parts p;
  const Variant v = cfg.variant;
  const bool modulated = cfg.uses_sensor() && v != Variant::kSymmetricFusion;
  if (cfg.uses_sensor()) {
    p.ssm = SsmParams::declare(root.sub("ssm"), cfg.channels, cfg.d_model, cfg.d_state);
  }
  if (modulated) p.film = ModulationHead::declare(root.sub("film"), cfg.d_model, cfg.width);
  if (v == Variant::kSymmetricFusion) {
    p.sensor_token = Linear::declare(root, "sensor_token", cfg.d_model, cfg.width);
  }
  if (cfg.uses_audio()) {
    p.process = ProcessEncoderParams::declare(root.sub("process"), cfg.width, cfg.heads);
  }
  if (v == Variant::kImageOnly) {
    p.const_tokens = root.declare("const_tokens", {cfg.n_video, cfg.width}, Init::kNormal, 1.0);
  }
  const AttentionKind attn =
      v == Variant::kPlainDecoder ? AttentionKind::kSoftmax : AttentionKind::kLinear;
  if (cfg.reverse_direction()) {
    p.process_pool = Mlp::declare(root, "process_pool", cfg.width, cfg.mlp_hidden, cfg.latent);
  }
  const ParamScope result = root.sub("result");
  if (cfg.forward_direction()) {
    p.result = ResultEncoderParams::declare(result, cfg.width, cfg.mlp_hidden, cfg.latent);
    p.decoder = DecoderParams::declare(root.sub("decoder"), cfg.width, cfg.mlp_hidden, cfg.latent,
                                       cfg.decoder_blocks, attn);
  } else {
    p.result.p_raw = result.declare("p_raw", {}, Init::kConstant, std::log(std::exp(2.0) - 1.0));
  }
  if (cfg.reverse_direction()) {
    p.reverse_decoder = DecoderParams::declare(root.sub("reverse_decoder"), cfg.width,
                                               cfg.mlp_hidden, cfg.latent, cfg.decoder_blocks,
                                               attn);
  }
  const bool text = cfg.loss.lambda > 0.0 && v != Variant::kNoTextLoss;
  if (text && cfg.forward_direction()) {
    p.text = TextHead::declare(root.sub("text"), cfg.latent, cfg.text_dim);
  }
  if (text && cfg.reverse_direction()) {
    p.reverse_text = TextHead::declare(root.sub("reverse_text"), cfg.latent, cfg.text_dim);
  }
  return p;
}

BottleneckConfig effective_bottleneck(const ModelConfig& cfg) {
  if (cfg.variant == Variant::kPlainDecoder) return {0.0, 0.0};
  return cfg.bottleneck;
}

LossConfig effective_loss(const ModelConfig& cfg) {
  LossConfig l = cfg.loss;
  if (cfg.variant == Variant::kNoTextLoss) l.lambda = 0.0;
  return l;
}

ad::Var process_tokens(ad::Graph& g, const ModelConfig& cfg, const Parts& p, std::size_t slot) {
  const Variant v = cfg.variant;
  if (v == Variant::kImageOnly) return p.const_tokens;
  ad::Var video = g.input(input_name(slot, "video"), {cfg.n_video, cfg.width});
  if (v == Variant::kImageVideo) return video;
  ad::Var audio = g.input(input_name(slot, "audio"), {cfg.n_audio, cfg.width});
  if (v == Variant::kImageVideoAudio) return cross_attention(video, audio, p.process);
  ad::Var sensor = g.input(input_name(slot, "sensor"), {cfg.steps, cfg.channels});
  ad::Var h = ssm_encode(sensor, p.ssm);
  if (v == Variant::kSymmetricFusion) {
    ad::Var tokens = cross_attention(video, audio, p.process);
    ad::Var sensor_tok = ad::reshape(p.sensor_token(h), {1, cfg.width});
    const ad::Var parts[] = {tokens, sensor_tok};
    return ad::concat(parts, 0);
  }
  auto [gamma, beta] = project_affine(h, p.film);
  return cross_attention(film_modulate(video, gamma, beta), film_modulate(audio, gamma, beta),
                         p.process);
}

}  // namespace

ModelGraph build_model_graph(const ModelConfig& cfg, std::size_t batch) {
  cfg.validate();
  if (batch == 0) throw Error("batch must hold at least one sample");
  ModelGraph mg;
  mg.graph = std::make_unique<ad::Graph>();
  ad::Graph& g = *mg.graph;
  const ParamScope root(g, mg.specs);
  const Parts p = declare_parts(cfg, root);
  const BottleneckConfig bn = effective_bottleneck(cfg);
  const LossConfig loss_cfg = effective_loss(cfg);
  ad::Var anchor = g.input(kAnchorInput, {cfg.text_dim});

  std::vector<ad::Var> losses;
  for (std::size_t slot = 0; slot < batch; ++slot) {
    ad::Var tokens = process_tokens(g, cfg, p, slot);
    ad::Var image = g.input(input_name(slot, "image"), {cfg.angles, cfg.n_image, cfg.width});
    SampleNodes s;
    ad::Var loss, score;
    if (cfg.forward_direction()) {
      ad::Var observed = result_encode(image, p.result);
      ad::Var predicted = decode(noisy_bottleneck(tokens, bn), p.decoder);
      ad::Var target = cfg.detach_target ? ad::stop_gradient(observed) : observed;
      loss = p.text.proj.w.valid() ? total_loss(target, predicted, anchor, p.text, loss_cfg)
                                   : recon_loss(target, predicted, loss_cfg);
      s.cosine_term = cosine_distance(observed, predicted);
      score = anomaly_score(observed, predicted, loss_cfg);
      s.observed = observed;
      s.predicted = predicted;
    }
    if (cfg.reverse_direction()) {
      ad::Var observed = pool_process(tokens, p.process_pool).first;
      ad::Var source = angle_vectors(image, p.result.exponent());
      ad::Var predicted = decode(noisy_bottleneck(source, bn), p.reverse_decoder);
      ad::Var target = cfg.detach_target ? ad::stop_gradient(observed) : observed;
      ad::Var l = p.reverse_text.proj.w.valid()
                      ? total_loss(target, predicted, anchor, p.reverse_text, loss_cfg)
                      : recon_loss(target, predicted, loss_cfg);
      ad::Var sc = anomaly_score(observed, predicted, loss_cfg);
      loss = loss.valid() ? loss + l : l;
      score = score.valid() ? score + sc : sc;
      if (!s.observed.valid()) {
        s.observed = observed;
        s.predicted = predicted;
      }
    }
    s.loss = loss;
    s.score = score;
    losses.push_back(ad::reshape(loss, {1}));
    mg.samples.push_back(s);
  }
  mg.loss = batch == 1 ? mg.samples[0].loss : ad::mean(ad::concat(losses, 0));
  return mg;
}

std::vector<ParamSpec> model_param_specs(const ModelConfig& cfg) {
  return build_model_graph(cfg, 1).specs;
}

}  // namespace weldad

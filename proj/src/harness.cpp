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

#include "weldad/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "weldad/metrics.hpp"
#include "weldad/rng.hpp"
#include "weldad/tensor_io.hpp"

namespace weldad {

void TrainConfig::validate() const {
  if (batch < 1) throw Error("batch must be at least 1");
  if (epochs < 2) throw Error("epochs must be at least 2");
  if (!(lr > 0) || lr_min < 0 || lr_min > lr) throw Error("invalid learning-rate range");
  model.validate();
}

TrainConfig TrainConfig::from_kv(const KvDocument& doc) {
  TrainConfig c;
  c.lr = doc.get_double("lr", c.lr);
  c.lr_min = doc.get_double("lr_min", c.lr_min);
  c.batch = static_cast<std::size_t>(doc.get_u64("batch", c.batch));
  c.epochs = static_cast<std::size_t>(doc.get_u64("epochs", c.epochs));
  c.seed = doc.get_u64("seed", c.seed);
  c.adamw.beta1 = doc.get_double("beta1", c.adamw.beta1);
  c.adamw.beta2 = doc.get_double("beta2", c.adamw.beta2);
  c.adamw.eps = doc.get_double("adam_eps", c.adamw.eps);
  c.adamw.weight_decay = doc.get_double("weight_decay", c.adamw.weight_decay);
  c.model = ModelConfig::from_kv(doc);
  c.adamw.lr = c.lr;
  c.validate();
  return c;
}

void TrainConfig::to_kv(KvDocument& doc) const {
  doc.set("lr", lr);
  doc.set("lr_min", lr_min);
  doc.set("batch", static_cast<std::uint64_t>(batch));
  doc.set("epochs", static_cast<std::uint64_t>(epochs));
  doc.set("seed", seed);
  doc.set("beta1", adamw.beta1);
  doc.set("beta2", adamw.beta2);
  doc.set("adam_eps", adamw.eps);
  doc.set("weight_decay", adamw.weight_decay);
  model.to_kv(doc);
}

SensorNorm SensorNorm::fit(const Dataset& train) {
  if (train.samples.empty()) throw Error("cannot fit sensor statistics on an empty split");
  const std::size_t ch = train.shapes.sensor.at(1);
  SensorNorm n;
  n.mean.assign(ch, 0.0);
  n.stddev.assign(ch, 0.0);
  double count = 0.0;
  for (const auto& s : train.samples) {
    for (std::size_t t = 0; t < s.sensor_raw.dim(0); ++t) {
      for (std::size_t c = 0; c < ch; ++c) n.mean[c] += s.sensor_raw(t, c);
    }
    count += static_cast<double>(s.sensor_raw.dim(0));
  }
  for (double& m : n.mean) m /= count;
  for (const auto& s : train.samples) {
    for (std::size_t t = 0; t < s.sensor_raw.dim(0); ++t) {
      for (std::size_t c = 0; c < ch; ++c) {
        const double d = s.sensor_raw(t, c) - n.mean[c];
        n.stddev[c] += d * d;
      }
    }
  }
  for (double& v : n.stddev) v = std::max(std::sqrt(v / count), 1e-8);
  return n;
}

TensorF SensorNorm::apply(const TensorF& raw) const {
  if (raw.rank() != 2 || raw.dim(1) != mean.size()) {
    throw ShapeError("sensor series does not match the normalization statistics");
  }
  TensorF out(raw.shape());
  for (std::size_t t = 0; t < raw.dim(0); ++t) {
    for (std::size_t c = 0; c < raw.dim(1); ++c) {
      out(t, c) = static_cast<float>((raw(t, c) - mean[c]) / stddev[c]);
    }
  }
  return out;
}

ad::Bindings<float> bind_batch(const ModelState& state, const Dataset& data,
                               const std::vector<std::size_t>& indices) {
  ad::Bindings<float> b = state.params;
  b[kAnchorInput] = state.text_anchor;
  const ModelConfig& cfg = state.config;
  for (std::size_t slot = 0; slot < indices.size(); ++slot) {
    const SampleRecord& s = data.samples.at(indices[slot]);
    if (cfg.uses_sensor()) b[input_name(slot, "sensor")] = state.norm.apply(s.sensor_raw);
    if (cfg.uses_video()) b[input_name(slot, "video")] = s.feat_video;
    if (cfg.uses_audio()) b[input_name(slot, "audio")] = s.feat_audio;
    b[input_name(slot, "image")] = s.feat_image;
  }
  return b;
}

namespace {

class GraphCache {
 public:
  explicit GraphCache(const ModelConfig& cfg) : cfg_(cfg) {}
  const ModelGraph& get(std::size_t batch) {
    auto it = graphs_.find(batch);
    if (it == graphs_.end()) it = graphs_.emplace(batch, build_model_graph(cfg_, batch)).first;
    return it->second;
  }

 private:
  ModelConfig cfg_;
  std::map<std::size_t, ModelGraph> graphs_;
};

constexpr std::size_t kEvalBatch = 16;

template <typename Fn>
void for_each_chunk(std::size_t n, std::size_t chunk, Fn fn) {
  for (std::size_t start = 0; start < n; start += chunk) {
    std::vector<std::size_t> idx(std::min(chunk, n - start));
    std::iota(idx.begin(), idx.end(), start);
    fn(idx);
  }
}

void check_state(const ModelState& state, const Dataset& data) {
  if (!(state.config.shapes() == data.shapes)) {
    throw ShapeError("dataset shapes do not match the model configuration");
  }
}

}  // namespace

double validation_loss(const ModelState& state, const Dataset& data) {
  check_state(state, data);
  if (data.samples.empty()) throw Error("validation split is empty");
  GraphCache cache(state.config);
  double total = 0.0;
  for_each_chunk(data.samples.size(), kEvalBatch, [&](const std::vector<std::size_t>& idx) {
    const ModelGraph& mg = cache.get(idx.size());
    const auto ev = ad::forward<float>(*mg.graph, bind_batch(state, data, idx));
    for (const auto& s : mg.samples) total += ev[s.loss].item();
  });
  return total / static_cast<double>(data.samples.size());
}

std::vector<double> score_samples(const ModelState& state, const Dataset& data) {
  check_state(state, data);
  GraphCache cache(state.config);
  std::vector<double> scores;
  scores.reserve(data.samples.size());
  for_each_chunk(data.samples.size(), kEvalBatch, [&](const std::vector<std::size_t>& idx) {
    const ModelGraph& mg = cache.get(idx.size());
    const auto ev = ad::forward<float>(*mg.graph, bind_batch(state, data, idx));
    for (const auto& s : mg.samples) scores.push_back(ev[s.score].item());
  });
  return scores;
}

TrainResult train(const TrainConfig& cfg, const Dataset& train_set, const Dataset& val_set,
                  const TensorF& text_anchor, const ProgressFn& progress) {
  cfg.validate();
  if (train_set.samples.empty()) throw Error("training split is empty");
  for (const auto& s : train_set.samples) {
    if (s.label != Label::kNormal) throw Error("training split must contain only normal samples");
  }
  if (text_anchor.shape() != Shape{cfg.model.text_dim}) {
    throw ShapeError("text anchor width does not match the model configuration");
  }
  ModelState state;
  state.config = cfg.model;
  check_state(state, train_set);
  state.norm = SensorNorm::fit(train_set);
  state.text_anchor = text_anchor;
  state.params = init_params<float>(model_param_specs(cfg.model), cfg.seed);

  AdamWConfig opt_cfg = cfg.adamw;
  opt_cfg.lr = cfg.lr;
  AdamW<float> opt(opt_cfg);
  GraphCache cache(cfg.model);

  TrainResult result;
  result.final.train = cfg;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(train_set.samples.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cosine_lr(epoch, cfg.epochs, cfg.lr, cfg.lr_min);
    opt.set_lr(lr);
    Rng shuffle_rng(derive_seed(cfg.seed, 0x5EED, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch, ++batch_no) {
      const std::vector<std::size_t> idx(
          order.begin() + static_cast<std::ptrdiff_t>(start),
          order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + cfg.batch)));
      const ModelGraph& mg = cache.get(idx.size());
      try {
        const auto ev = ad::forward<float>(
            *mg.graph, bind_batch(state, train_set, idx),
            {true, derive_seed(cfg.seed, 0xB07, epoch * 1000003 + batch_no)});
        const double loss = ev[mg.loss].item();
        if (!std::isfinite(loss)) throw NonFiniteError("loss is not finite");
        const auto grads = ad::backward<float>(*mg.graph, ev, mg.loss);
        opt.step(state.params, grads);
        epoch_loss += loss * static_cast<double>(idx.size());
      } catch (const NonFiniteError& e) {
        throw NonFiniteError("training diverged at epoch " + std::to_string(epoch + 1) +
                             ", batch " + std::to_string(batch_no + 1) + ": " + e.what());
      }
    }
    epoch_loss /= static_cast<double>(order.size());
    const double val = val_set.samples.empty() ? epoch_loss : validation_loss(state, val_set);
    result.final.train_loss.push_back(epoch_loss);
    result.final.val_loss.push_back(val);
    if (val < best_val) {
      best_val = val;
      result.best.state = state;
      result.best.best_epoch = epoch;
    }
    if (progress) progress(epoch, epoch_loss, val, lr);
  }
  result.final.state = std::move(state);
  result.final.best_epoch = result.best.best_epoch;
  result.best.train = cfg;
  result.best.train_loss = result.final.train_loss;
  result.best.val_loss = result.final.val_loss;
  return result;
}

EvalReport report_from_scores(const Dataset& test, const std::vector<double>& scores) {
  if (scores.size() != test.samples.size()) throw Error("score count does not match the dataset");
  EvalReport r;
  std::vector<int> labels;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& s = test.samples[i];
    r.samples.push_back({s.id, scores[i], s.label, s.defect_kind});
    labels.push_back(s.label == Label::kAnomalous ? 1 : 0);
  }
  r.auroc = auroc(scores, labels);
  r.ap = average_precision(scores, labels);
  r.f1_max = weldad::f1_max(scores, labels);
  for (DefectKind kind : kAllDefectKinds) {
    if (kind == DefectKind::kNone) continue;
    std::vector<double> sub;
    std::vector<int> sub_labels;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const DefectKind k = test.samples[i].defect_kind;
      if (k == DefectKind::kNone || k == kind) {
        sub.push_back(scores[i]);
        sub_labels.push_back(k == kind ? 1 : 0);
      }
    }
    const bool has_pos = std::count(sub_labels.begin(), sub_labels.end(), 1) > 0;
    const bool has_neg = std::count(sub_labels.begin(), sub_labels.end(), 0) > 0;
    if (has_pos && has_neg) r.kind_auroc[kind] = auroc(sub, sub_labels);
  }
  return r;
}

EvalReport evaluate(const ModelState& state, const Dataset& test) {
  EvalReport r = report_from_scores(test, score_samples(state, test));
  r.variant = to_string(state.config.variant);
  return r;
}

std::string EvalReport::to_text() const {
  KvDocument doc;
  doc.set("format", std::string("weldad-report-1"));
  doc.set("variant", variant);
  doc.set("sample_count", static_cast<std::uint64_t>(samples.size()));
  auto& m = doc.section("metrics");
  m.push_back("auroc = " + format_double(auroc));
  m.push_back("ap = " + format_double(ap));
  m.push_back("f1_max = " + format_double(f1_max));
  for (const auto& [kind, value] : kind_auroc) {
    m.push_back(std::string("auroc_") + to_string(kind) + " = " + format_double(value));
  }
  if (latency_ms > 0) {
    m.push_back("latency_ms = " + format_double(latency_ms));
    m.push_back("fps = " + format_double(fps));
  }
  auto& lines = doc.section("samples");
  for (const auto& s : samples) {
    lines.push_back("id=" + std::to_string(s.id) + " label=" + to_string(s.label) +
                    " defect=" + to_string(s.kind) + " score=" + format_double(s.score));
  }
  return doc.serialize();
}

EvalReport EvalReport::from_text(const std::string& text) {
  const KvDocument doc = KvDocument::parse(text);
  if (doc.get_string("format", "") != "weldad-report-1") throw Error("not a weldad report");
  EvalReport r;
  r.variant = doc.get_string("variant", "");
  std::string metrics;
  for (const auto& line : doc.section("metrics")) metrics += line + "\n";
  const KvDocument m = KvDocument::parse(metrics);
  r.auroc = m.get_double("auroc");
  r.ap = m.get_double("ap");
  r.f1_max = m.get_double("f1_max");
  for (DefectKind kind : kAllDefectKinds) {
    const std::string key = std::string("auroc_") + to_string(kind);
    if (m.has(key)) r.kind_auroc[kind] = m.get_double(key);
  }
  r.latency_ms = m.get_double("latency_ms", 0.0);
  r.fps = m.get_double("fps", 0.0);
  for (const auto& line : doc.section("samples")) {
    std::istringstream is(line);
    std::string tok;
    SampleResult s;
    while (is >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) throw Error("malformed report line: " + line);
      const std::string key = tok.substr(0, eq), value = tok.substr(eq + 1);
      if (key == "id") s.id = std::stoull(value);
      if (key == "label") s.label = parse_label(value);
      if (key == "defect") s.kind = parse_defect_kind(value);
      if (key == "score") s.score = std::stod(value);
    }
    r.samples.push_back(s);
  }
  if (doc.get_u64("sample_count") != r.samples.size()) throw Error("report sample count mismatch");
  return r;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "params");
  KvDocument doc;
  doc.set("format", std::string("weldad-checkpoint-1"));
  ckpt.train.to_kv(doc);
  ckpt.state.config.to_kv(doc);
  doc.set("best_epoch", static_cast<std::uint64_t>(ckpt.best_epoch));
  auto& trace = doc.section("trace");
  for (std::size_t e = 0; e < ckpt.train_loss.size(); ++e) {
    trace.push_back("epoch=" + std::to_string(e + 1) + " train=" +
                    format_double(ckpt.train_loss[e]) + " val=" + format_double(ckpt.val_loss[e]));
  }
  auto& names = doc.section("params");
  for (const auto& [name, t] : ckpt.state.params) {
    write_tensor(dir / "params" / (name + ".phmt"), t);
    names.push_back(name);
  }
  const std::size_t ch = ckpt.state.norm.mean.size();
  write_tensor(dir / "sensor_mean.phmt", TensorD({ch}, ckpt.state.norm.mean));
  write_tensor(dir / "sensor_std.phmt", TensorD({ch}, ckpt.state.norm.stddev));
  write_tensor(dir / "text_anchor.phmt", ckpt.state.text_anchor);
  doc.save(dir / "checkpoint.kv");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const KvDocument doc = KvDocument::load(dir / "checkpoint.kv");
  if (doc.get_string("format", "") != "weldad-checkpoint-1") {
    throw Error(dir.string() + ": not a weldad checkpoint");
  }
  Checkpoint c;
  c.train = TrainConfig::from_kv(doc);
  c.state.config = c.train.model;
  c.best_epoch = static_cast<std::size_t>(doc.get_u64("best_epoch", 0));
  for (const auto& line : doc.section("trace")) {
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) {
      if (tok.rfind("train=", 0) == 0) c.train_loss.push_back(std::stod(tok.substr(6)));
      if (tok.rfind("val=", 0) == 0) c.val_loss.push_back(std::stod(tok.substr(4)));
    }
  }
  for (const auto& name : doc.section("params")) {
    c.state.params[name] = read_tensor_as<float>(dir / "params" / (name + ".phmt"));
  }
  for (const auto& spec : model_param_specs(c.state.config)) {
    auto it = c.state.params.find(spec.name);
    if (it == c.state.params.end()) throw Error("checkpoint lacks parameter '" + spec.name + "'");
    if (it->second.shape() != spec.shape) {
      throw ShapeError("checkpoint parameter '" + spec.name + "' has the wrong shape");
    }
  }
  const TensorD mean = read_tensor_as<double>(dir / "sensor_mean.phmt");
  const TensorD sd = read_tensor_as<double>(dir / "sensor_std.phmt");
  c.state.norm.mean.assign(mean.data().begin(), mean.data().end());
  c.state.norm.stddev.assign(sd.data().begin(), sd.data().end());
  c.state.text_anchor = read_tensor_as<float>(dir / "text_anchor.phmt");
  return c;
}

}  // namespace weldad

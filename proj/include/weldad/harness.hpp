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

// Training, evaluation, checkpoints and the experiment runners built on them.

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "weldad/dataset.hpp"
#include "weldad/kv.hpp"
#include "weldad/model.hpp"
#include "weldad/optim.hpp"

namespace weldad {

struct TrainConfig {
  double lr = 1e-4;
  double lr_min = 0.0;
  std::size_t batch = 16;
  std::size_t epochs = 60;
  std::uint64_t seed = 42;
  AdamWConfig adamw;
  ModelConfig model;

  void validate() const;
  static TrainConfig from_kv(const KvDocument& doc);
  void to_kv(KvDocument& doc) const;
};

/// Per-channel z-scoring with training-split statistics.
struct SensorNorm {
  std::vector<double> mean;
  std::vector<double> stddev;

  static SensorNorm fit(const Dataset& train);
  TensorF apply(const TensorF& raw) const;
};

struct ModelState {
  ModelConfig config;
  ParamMap<float> params;
  SensorNorm norm;
  TensorF text_anchor;
};

struct Checkpoint {
  ModelState state;
  TrainConfig train;
  std::vector<double> train_loss;  // per epoch
  std::vector<double> val_loss;    // per epoch
  std::size_t best_epoch = 0;
};

struct TrainResult {
  Checkpoint best;   // lowest validation loss
  Checkpoint final;  // after the last epoch
};

using ProgressFn = std::function<void(std::size_t epoch, double train_loss, double val_loss,
                                      double lr)>;

/// Trains on normal samples only. Throws NonFiniteError naming the epoch and
/// batch when the loss stops being finite.
TrainResult train(const TrainConfig& cfg, const Dataset& train_set, const Dataset& val_set,
                  const TensorF& text_anchor, const ProgressFn& progress = {});

/// Mean eval-mode total loss (bottleneck off).
double validation_loss(const ModelState& state, const Dataset& data);

/// Eval-mode consistency score per sample, in dataset order.
std::vector<double> score_samples(const ModelState& state, const Dataset& data);

struct SampleResult {
  std::uint64_t id = 0;
  double score = 0.0;
  Label label = Label::kNormal;
  DefectKind kind = DefectKind::kNone;
};

struct EvalReport {
  std::string variant;
  std::vector<SampleResult> samples;
  double auroc = 0.0;
  double ap = 0.0;
  double f1_max = 0.0;
  std::map<DefectKind, double> kind_auroc;  // normals vs one defect kind
  double latency_ms = 0.0;                  // 0 when not measured
  double fps = 0.0;

  std::string to_text() const;
  static EvalReport from_text(const std::string& text);
};

EvalReport evaluate(const ModelState& state, const Dataset& test);
EvalReport report_from_scores(const Dataset& test, const std::vector<double>& scores);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// Batch inputs bound for one graph evaluation.
ad::Bindings<float> bind_batch(const ModelState& state, const Dataset& data,
                               const std::vector<std::size_t>& indices);

}  // namespace weldad

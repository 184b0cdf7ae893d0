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

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "weldad/diagnostics.hpp"
#include "weldad/experiments.hpp"
#include "weldad/heatmap.hpp"
#include "weldad/synth.hpp"

using namespace weldad;

namespace {

SynthConfig tiny_synth() {
  SynthConfig c;
  c.n_train = 16;
  c.n_val = 8;
  c.n_test = 24;
  c.steps = 32;
  c.angles = 3;
  c.n_video = 4;
  c.n_audio = 4;
  c.n_image = 4;
  c.width = 16;
  c.dip_min = 4;
  c.dip_max = 8;
  return c;
}

TrainConfig tiny_train(const SynthDatasets& data) {
  TrainConfig t;
  t.epochs = 3;
  t.batch = 4;
  t.lr = 1e-3;
  t.model.set_shapes(data.train.shapes);
  t.model.d_model = 8;
  t.model.d_state = 4;
  t.model.heads = 2;
  t.model.latent = 32;
  t.model.mlp_hidden = 16;
  t.model.text_dim = 8;
  t.model.loss.k = 8;
  t.model.loss.heatmap_res = 16;
  t.model.loss.heatmap_sigma = 1.0;
  return t;
}

const SynthDatasets& tiny_data() {
  static const SynthDatasets data = generate_datasets(tiny_synth(), 8);
  return data;
}

bool same_params(const ParamMap<float>& a, const ParamMap<float>& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [name, value] : a) {
    if (!b.count(name) || !(b.at(name) == value)) return false;
  }
  return true;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("weldad_harness_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Train, SeededRunsAreBitIdentical) {
  const auto& data = tiny_data();
  const TrainConfig cfg = tiny_train(data);
  const TrainResult a = train(cfg, data.train, data.val, data.text_anchor);
  const TrainResult b = train(cfg, data.train, data.val, data.text_anchor);
  EXPECT_TRUE(same_params(a.final.state.params, b.final.state.params));
  EXPECT_TRUE(same_params(a.best.state.params, b.best.state.params));
  EXPECT_EQ(a.final.train_loss, b.final.train_loss);
  EXPECT_EQ(evaluate(a.best.state, data.test).to_text(), evaluate(b.best.state, data.test).to_text());
}

TEST(Train, LearningRateDecaysAndLossIsTracked) {
  const auto& data = tiny_data();
  TrainConfig cfg = tiny_train(data);
  cfg.epochs = 2;
  std::vector<double> lrs;
  const TrainResult r = train(cfg, data.train, data.val, data.text_anchor,
                              [&](std::size_t, double, double, double lr) { lrs.push_back(lr); });
  ASSERT_EQ(lrs.size(), 2u);
  EXPECT_EQ(lrs.front(), cfg.lr);
  EXPECT_LT(lrs.back(), lrs.front());
  EXPECT_EQ(r.final.train_loss.size(), 2u);
  EXPECT_EQ(r.final.val_loss.size(), 2u);
  EXPECT_LT(r.best.best_epoch, 2u);
}

TEST(Train, RejectsInvalidInputs) {
  const auto& data = tiny_data();
  TrainConfig cfg = tiny_train(data);
  cfg.epochs = 1;
  EXPECT_THROW(train(cfg, data.train, data.val, data.text_anchor), Error);
  cfg = tiny_train(data);
  cfg.batch = 0;
  EXPECT_THROW(train(cfg, data.train, data.val, data.text_anchor), Error);
  cfg = tiny_train(data);
  EXPECT_THROW(train(cfg, data.test, data.val, data.text_anchor), Error);
  cfg.model.width = 32;
  EXPECT_THROW(train(cfg, data.train, data.val, data.text_anchor), ShapeError);
}

TEST(Evaluate, ReportsAndRoundTrips) {
  const auto& data = tiny_data();
  const TrainResult r = train(tiny_train(data), data.train, data.val, data.text_anchor);
  const EvalReport a = evaluate(r.best.state, data.test);
  const EvalReport b = evaluate(r.best.state, data.test);
  EXPECT_EQ(a.to_text(), b.to_text());
  EXPECT_EQ(a.samples.size(), data.test.samples.size());
  EXPECT_EQ(a.variant, "full");
  for (double m : {a.auroc, a.ap, a.f1_max}) {
    EXPECT_GE(m, 0.0);
    EXPECT_LE(m, 1.0);
  }
  EXPECT_EQ(a.kind_auroc.size(), 3u);
  const EvalReport back = EvalReport::from_text(a.to_text());
  EXPECT_EQ(back.to_text(), a.to_text());
  EXPECT_EQ(back.auroc, a.auroc);
  EXPECT_EQ(back.samples.back().score, a.samples.back().score);
}

TEST(Evaluate, PerfectSeparationAndSingleClass) {
  const auto& data = tiny_data();
  std::vector<double> scores;
  for (const auto& s : data.test.samples) scores.push_back(s.label == Label::kAnomalous ? 2.0 : 1.0);
  const EvalReport r = report_from_scores(data.test, scores);
  EXPECT_EQ(r.auroc, 1.0);
  EXPECT_EQ(r.ap, 1.0);
  EXPECT_EQ(r.f1_max, 1.0);
  Dataset normals = data.val;
  EXPECT_THROW(report_from_scores(normals, std::vector<double>(normals.samples.size(), 1.0)), Error);
}

TEST(Checkpoint, RoundTripPreservesEvaluation) {
  const auto& data = tiny_data();
  const TrainResult r = train(tiny_train(data), data.train, data.val, data.text_anchor);
  const auto dir = temp_dir("ckpt");
  save_checkpoint(r.best, dir);
  const Checkpoint back = load_checkpoint(dir);
  EXPECT_TRUE(same_params(back.state.params, r.best.state.params));
  EXPECT_EQ(back.train_loss, r.best.train_loss);
  EXPECT_EQ(back.best_epoch, r.best.best_epoch);
  EXPECT_EQ(evaluate(back.state, data.test).to_text(), evaluate(r.best.state, data.test).to_text());
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, MissingDirectoryIsReported) {
  EXPECT_THROW(load_checkpoint(temp_dir("absent")), Error);
}

TEST(Ablation, EveryVariantTrainsAndScores) {
  const auto& data = tiny_data();
  TrainConfig cfg = tiny_train(data);
  cfg.epochs = 2;
  for (Variant v : kAllVariants) {
    const EvalReport r = run_ablation(v, cfg, data);
    EXPECT_EQ(r.variant, to_string(v));
    EXPECT_EQ(r.samples.size(), data.test.samples.size());
    for (const auto& s : r.samples) EXPECT_TRUE(std::isfinite(s.score)) << to_string(v);
  }
  EXPECT_THROW(parse_variant("sideways"), Error);
}

TEST(Ablation, FullVariantMatchesPipeline) {
  const auto& data = tiny_data();
  const TrainConfig cfg = tiny_train(data);
  const TrainResult r = train(cfg, data.train, data.val, data.text_anchor);
  EXPECT_EQ(run_ablation(Variant::kFull, cfg, data).to_text(),
            evaluate(r.best.state, data.test).to_text());
}

TEST(Robustness, ZeroSigmaMatchesBaseline) {
  const auto& data = tiny_data();
  const TrainResult r = train(tiny_train(data), data.train, data.val, data.text_anchor);
  const auto rows = robustness_sweep(r.best.state, data.test, {0.0, 0.3});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].report.to_text(), evaluate(r.best.state, data.test).to_text());
  EXPECT_NE(rows[1].report.samples[0].score, rows[0].report.samples[0].score);
  EXPECT_THROW(robustness_sweep(r.best.state, data.test, {-0.1}), Error);
}

TEST(Latency, ThroughputIsReciprocal) {
  const auto& data = tiny_data();
  const TrainResult r = train(tiny_train(data), data.train, data.val, data.text_anchor);
  const LatencyStats s = latency_bench(r.best.state, data.test, 2, 10);
  EXPECT_GT(s.ms_per_sample, 0.0);
  EXPECT_DOUBLE_EQ(s.fps, 1000.0 / s.ms_per_sample);
  EXPECT_THROW(latency_bench(r.best.state, data.test, 0, 9), Error);
}

TEST(Replicates, SeedsAndMean) {
  const auto& data = tiny_data();
  TrainConfig cfg = tiny_train(data);
  cfg.epochs = 2;
  const ReplicateSummary s = run_replicates(cfg, data, 2);
  ASSERT_EQ(s.seeds, (std::vector<std::uint64_t>{42, 43}));
  EXPECT_DOUBLE_EQ(s.mean.auroc, 0.5 * (s.reports[0].auroc + s.reports[1].auroc));
  EXPECT_THROW(run_replicates(cfg, data, 0), Error);
}

TEST(Heatmap, MapsAreNormalizedAndShaped) {
  const auto& data = tiny_data();
  const TrainResult r = train(tiny_train(data), data.train, data.val, data.text_anchor);
  const Heatmap h = compute_heatmap(r.best.state, data.test.samples[0]);
  EXPECT_EQ(h.token_norms.shape(), (Shape{3, 2, 2}));
  EXPECT_EQ(h.maps.shape(), (Shape{3, 16, 16}));
  for (double v : h.maps.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_LT(heatmap_peak_token(h, 0), 4u);
}

TEST(Heatmap, SilentAngleHasZeroGradient) {
  const auto& data = tiny_data();
  const TrainResult r = train(tiny_train(data), data.train, data.val, data.text_anchor);
  SampleRecord s = data.test.samples[0];
  // Every token of angle 1 sits below the pooling floor, so the score does
  // not depend on it locally.
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t d = 0; d < 16; ++d) s.feat_image(1, t, d) = -1.0f;
  }
  const Heatmap h = compute_heatmap(r.best.state, s);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(h.token_norms[4 + i], 0.0);
  for (std::size_t i = 0; i < 16 * 16; ++i) EXPECT_EQ(h.maps[16 * 16 + i], 0.0);
}

TEST(Heatmap, RejectsNonSquareGrid) {
  EXPECT_EQ(token_grid_side(16), 4u);
  EXPECT_THROW(token_grid_side(15), ShapeError);
  EXPECT_THROW(token_grid_side(0), ShapeError);
}

TEST(GradCheckSuite, EveryCaseBelowTolerance) {
  for (const auto& e : run_gradchecks("", 10)) {
    EXPECT_LT(e.max_rel_error, 1e-4) << e.module << "/" << e.name << " at " << e.worst_leaf;
  }
  EXPECT_THROW(run_gradchecks("nonsense"), Error);
}

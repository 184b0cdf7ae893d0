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

#include "weldad/experiments.hpp"

#include <algorithm>
#include <chrono>

#include "weldad/rng.hpp"

namespace weldad {

EvalReport run_ablation(Variant variant, const TrainConfig& base, const SynthDatasets& data) {
  TrainConfig cfg = base;
  cfg.model.variant = variant;
  const TrainResult r = train(cfg, data.train, data.val, data.text_anchor);
  return evaluate(r.best.state, data.test);
}

std::vector<RobustnessRow> robustness_sweep(const ModelState& state, const Dataset& test,
                                            const std::vector<double>& sigmas,
                                            std::uint64_t seed) {
  std::vector<RobustnessRow> rows;
  for (double sigma : sigmas) {
    if (!(sigma >= 0.0)) throw Error("noise sigma must be non-negative");
    Dataset noisy = test;
    for (std::size_t i = 0; i < noisy.samples.size(); ++i) {
      SampleRecord& s = noisy.samples[i];
      s.sensor_raw = add_sensor_noise(s.sensor_raw, sigma, derive_seed(seed, 0x0153, i),
                                      state.norm.stddev);
    }
    rows.push_back({sigma, evaluate(state, noisy)});
  }
  return rows;
}

LatencyStats latency_bench(const ModelState& state, const Dataset& data, std::size_t warmup,
                           std::size_t iters) {
  if (iters < 10) throw Error("latency_bench needs at least 10 timed iterations");
  if (data.samples.empty()) throw Error("latency_bench needs at least one sample");
  Dataset one;
  one.shapes = data.shapes;
  one.samples.resize(1);
  std::vector<double> ms;
  ms.reserve(iters);
  for (std::size_t i = 0; i < warmup + iters; ++i) {
    one.samples[0] = data.samples[i % data.samples.size()];
    const auto t0 = std::chrono::steady_clock::now();
    score_samples(state, one);
    const auto t1 = std::chrono::steady_clock::now();
    if (i >= warmup) ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  const auto mid = ms.begin() + static_cast<std::ptrdiff_t>(ms.size() / 2);
  std::nth_element(ms.begin(), mid, ms.end());
  double median = *mid;
  if (ms.size() % 2 == 0) median = 0.5 * (median + *std::max_element(ms.begin(), mid));
  return {median, 1000.0 / median};
}

ReplicateSummary run_replicates(const TrainConfig& base, const SynthDatasets& data,
                                std::size_t n) {
  if (n == 0) throw Error("replicate count must be at least 1");
  ReplicateSummary out;
  for (std::size_t i = 0; i < n; ++i) {
    TrainConfig cfg = base;
    cfg.seed = base.seed + i;
    const TrainResult r = train(cfg, data.train, data.val, data.text_anchor);
    out.seeds.push_back(cfg.seed);
    out.reports.push_back(evaluate(r.best.state, data.test));
  }
  out.mean = out.reports.front();
  const double scale = 1.0 / static_cast<double>(n);
  out.mean.auroc = out.mean.ap = out.mean.f1_max = 0.0;
  for (auto& [kind, v] : out.mean.kind_auroc) v = 0.0;
  for (const EvalReport& r : out.reports) {
    out.mean.auroc += scale * r.auroc;
    out.mean.ap += scale * r.ap;
    out.mean.f1_max += scale * r.f1_max;
    for (const auto& [kind, v] : r.kind_auroc) out.mean.kind_auroc[kind] += scale * v;
  }
  return out;
}

void check_config_keys(const KvDocument& doc) {
  KvDocument known;
  SynthConfig{}.to_kv(known);
  TrainConfig{}.to_kv(known);
  for (const auto& [key, value] : doc.entries()) {
    if (!known.has(key)) throw Error("unknown configuration key '" + key + "'");
  }
}

}  // namespace weldad

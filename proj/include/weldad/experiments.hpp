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

// Experiment runners: ablations, sensor-noise robustness, latency, replicates.

#pragma once

#include <cstdint>
#include <vector>

#include "weldad/harness.hpp"
#include "weldad/synth.hpp"

namespace weldad {

/// Trains `variant` on the given splits with everything else taken from
/// `base`, then evaluates the best-by-validation checkpoint.
EvalReport run_ablation(Variant variant, const TrainConfig& base, const SynthDatasets& data);

struct RobustnessRow {
  double sigma = 0.0;
  EvalReport report;
};

/// Re-evaluates `test` with sensor noise of each sigma, expressed in units of
/// the per-channel training standard deviation. One noise draw per sample is
/// shared across sigmas.
std::vector<RobustnessRow> robustness_sweep(const ModelState& state, const Dataset& test,
                                            const std::vector<double>& sigmas,
                                            std::uint64_t seed = 42);

struct LatencyStats {
  double ms_per_sample = 0.0;  // median
  double fps = 0.0;            // 1000 / ms_per_sample
};

/// Median wall time of single-sample eval-mode scoring, cycling through
/// `data`. Requires iters >= 10.
LatencyStats latency_bench(const ModelState& state, const Dataset& data, std::size_t warmup,
                           std::size_t iters);

struct ReplicateSummary {
  std::vector<std::uint64_t> seeds;
  std::vector<EvalReport> reports;
  EvalReport mean;  // metrics averaged; samples of the first replicate
};

/// Trains and evaluates with training seeds base.seed .. base.seed + n - 1 on
/// the same data.
ReplicateSummary run_replicates(const TrainConfig& base, const SynthDatasets& data,
                                std::size_t n);

/// Throws if `doc` has a key that neither the generator nor the training
/// configuration reads. One file may hold both sets of keys.
void check_config_keys(const KvDocument& doc);

}  // namespace weldad

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

// Finite-difference gradient checks of the primitives, the model blocks and
// the assembled training graph.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace weldad {

struct GradCheckEntry {
  std::string module;
  std::string name;
  double max_rel_error = 0.0;
  std::string worst_leaf;
  double analytic = 0.0;  // at the worst element
  double numeric = 0.0;
  std::size_t cases = 0;
};

/// Module names accepted by run_gradchecks, in run order.
std::vector<std::string> gradcheck_modules();

/// Checks every case of `module` (all modules when empty) over `seeds`
/// random draws each. Throws on an unknown module name.
std::vector<GradCheckEntry> run_gradchecks(const std::string& module = "",
                                           std::size_t seeds = 10);

/// Whole training graph on a reduced configuration: every trainable
/// parameter, float64, a 4-sample batch, training-mode bottleneck with frozen
/// noise and the target left attached.
GradCheckEntry full_pipeline_gradcheck(std::uint64_t seed = 42);

}  // namespace weldad

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

#include <span>

namespace weldad {

/// Probability that a random positive outscores a random negative; ties
/// count one half. Labels are 1 for anomalous, 0 for normal.
double auroc(std::span<const double> scores, std::span<const int> labels);

/// Mean over positives of precision at the rank of that positive, ranking by
/// descending score; equal scores keep their input order.
double average_precision(std::span<const double> scores, std::span<const int> labels);

/// Best F1 over all thresholds "score >= t", t ranging over every distinct
/// score plus one threshold above the maximum.
double f1_max(std::span<const double> scores, std::span<const int> labels);

}  // namespace weldad

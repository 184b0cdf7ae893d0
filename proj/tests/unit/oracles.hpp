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


// Direct reference implementations that the optimized code is compared
// against: quadratic attention, the step-by-step scan and brute-force
// ranking metrics.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include "weldad/rng.hpp"
#include "weldad/tensor.hpp"

namespace weldad::testing {

// Kernel feature map elu(x) + 1.
inline double phi(double x) { return x > 0.0 ? x + 1.0 : std::exp(x); }

// Direct normalized-kernel weights, O(n m).
inline TensorD quadratic_oracle(const TensorD& q, const TensorD& k, const TensorD& v) {
  TensorD out({q.dim(0), v.dim(1)}, 0.0);
  for (std::size_t i = 0; i < q.dim(0); ++i) {
    std::vector<double> w(k.dim(0), 0.0);
    double total = 0.0;
    for (std::size_t j = 0; j < k.dim(0); ++j) {
      for (std::size_t e = 0; e < q.dim(1); ++e) w[j] += phi(q(i, e)) * phi(k(j, e));
      total += w[j];
    }
    for (std::size_t j = 0; j < k.dim(0); ++j) {
      for (std::size_t e = 0; e < v.dim(1); ++e) out(i, e) += w[j] / total * v(j, e);
    }
  }
  return out;
}

// Step-by-step recurrence: h = exp(delta a) h + delta x b, y = h c.
inline TensorD naive_scan(const TensorD& x, const TensorD& delta, const TensorD& a, const TensorD& b,
                   const TensorD& c) {
  const std::size_t steps = x.dim(0), dm = x.dim(1), n = a.dim(1);
  std::vector<double> h(dm * n, 0.0);
  TensorD y({steps, dm});
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t d = 0; d < dm; ++d) {
      double acc = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        double& state = h[d * n + s];
        state = std::exp(delta(t, d) * a(d, s)) * state + delta(t, d) * x(t, d) * b(t, s);
        acc += state * c(t, s);
      }
      y(t, d) = acc;
    }
  }
  return y;
}

inline double auroc_pairs(const std::vector<double>& s, const std::vector<int>& y) {
  double good = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      pairs += 1.0;
      good += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return good / pairs;
}

inline double ap_ranks(const std::vector<double>& s, const std::vector<int>& y) {
  const std::size_t n = s.size();
  std::vector<std::size_t> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    rank[i] = 1;
    for (std::size_t j = 0; j < n; ++j) {
      if (s[j] > s[i] || (s[j] == s[i] && j < i)) ++rank[i];
    }
  }
  double total = 0.0, positives = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (y[i] != 1) continue;
    positives += 1.0;
    double hits = 0.0;
    for (std::size_t j = 0; j < n; ++j) hits += (y[j] == 1 && rank[j] <= rank[i]) ? 1.0 : 0.0;
    total += hits / static_cast<double>(rank[i]);
  }
  return total / positives;
}

inline double f1_scan(const std::vector<double>& s, const std::vector<int>& y) {
  std::set<double> thresholds(s.begin(), s.end());
  thresholds.insert(std::numeric_limits<double>::infinity());
  double best = 0.0;
  for (double t : thresholds) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const bool flagged = s[i] >= t;
      if (flagged && y[i] == 1) ++tp;
      if (flagged && y[i] == 0) ++fp;
      if (!flagged && y[i] == 1) ++fn;
    }
    if (tp > 0) best = std::max(best, 2 * tp / (2 * tp + fp + fn));
  }
  return best;
}

struct Instance {
  std::vector<double> scores;
  std::vector<int> labels;
};

inline Instance random_instance(Rng& rng, bool need_negative) {
  std::uniform_int_distribution<std::size_t> size(2, 50);
  std::uniform_int_distribution<int> coarse(0, 6), bit(0, 1);
  std::uniform_real_distribution<double> fine(0.0, 1.0);
  const bool ties = bit(rng) == 1;
  Instance in;
  const std::size_t n = size(rng);
  for (std::size_t i = 0; i < n; ++i) {
    in.scores.push_back(ties ? coarse(rng) * 0.25 : fine(rng));
    in.labels.push_back(bit(rng));
  }
  in.labels[0] = 1;
  if (need_negative) in.labels[1] = 0;
  return in;
}

}  // namespace weldad::testing

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

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>

#include "weldad/tensor.hpp"

namespace weldad {

template <typename T>
using ParamMap = std::map<std::string, Tensor<T>>;

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

/// AdamW with decoupled weight decay: theta <- theta * (1 - lr * wd), then
/// theta <- theta - lr * m_hat / (sqrt(v_hat) + eps).
template <typename T>
class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {}) : config_(config) {}

  const AdamWConfig& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }
  double lr() const { return config_.lr; }
  std::uint64_t step_count() const { return step_; }

  const ParamMap<T>& first_moments() const { return m_; }
  const ParamMap<T>& second_moments() const { return v_; }

  void load_state(std::uint64_t step, ParamMap<T> m, ParamMap<T> v) {
    step_ = step;
    m_ = std::move(m);
    v_ = std::move(v);
  }

  /// Applies one update to every entry of `params`. Every parameter needs a
  /// finite, shape-equal gradient.
  void step(ParamMap<T>& params, const ParamMap<T>& grads) {
    for (const auto& [name, p] : params) {
      auto it = grads.find(name);
      if (it == grads.end()) throw Error("missing gradient for parameter '" + name + "'");
      if (it->second.shape() != p.shape()) {
        throw ShapeError("gradient shape mismatch for parameter '" + name + "'");
      }
      if (!it->second.all_finite()) {
        throw NonFiniteError("non-finite gradient for parameter '" + name + "'");
      }
    }
    ++step_;
    const double t = static_cast<double>(step_);
    const double bc1 = 1.0 - std::pow(config_.beta1, t);
    const double bc2 = 1.0 - std::pow(config_.beta2, t);
    const double decay = 1.0 - config_.lr * config_.weight_decay;
    for (auto& [name, p] : params) {
      const Tensor<T>& g = grads.at(name);
      auto [mit, fresh_m] = m_.try_emplace(name, p.shape(), T(0));
      auto [vit, fresh_v] = v_.try_emplace(name, p.shape(), T(0));
      (void)fresh_m;
      (void)fresh_v;
      Tensor<T>& m = mit->second;
      Tensor<T>& v = vit->second;
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = g[i];
        const double mi = config_.beta1 * m[i] + (1.0 - config_.beta1) * gi;
        const double vi = config_.beta2 * v[i] + (1.0 - config_.beta2) * gi * gi;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        const double m_hat = mi / bc1;
        const double v_hat = vi / bc2;
        const double theta = static_cast<double>(p[i]) * decay -
                             config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
        p[i] = static_cast<T>(theta);
      }
    }
  }

 private:
  AdamWConfig config_;
  std::uint64_t step_ = 0;
  ParamMap<T> m_;
  ParamMap<T> v_;
};

/// Cosine annealing without warmup, reaching lr_min at the final epoch.
inline double cosine_lr(int epoch, int total_epochs, double lr_max, double lr_min = 0.0) {
  if (total_epochs < 2) throw Error("cosine_lr needs at least two epochs");
  if (epoch < 0 || epoch >= total_epochs) throw Error("cosine_lr epoch out of range");
  const double phase = static_cast<double>(epoch) / static_cast<double>(total_epochs - 1);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * phase));
}

}  // namespace weldad

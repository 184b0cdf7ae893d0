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

#include "weldad/diagnostics.hpp"

#include <functional>
#include <memory>
#include <random>
#include <utility>

#include "weldad/decoder.hpp"
#include "weldad/encoders.hpp"
#include "weldad/model.hpp"
#include "weldad/objective.hpp"
#include "weldad/modulation.hpp"
#include "weldad/rng.hpp"
#include "weldad/synth.hpp"

namespace weldad {

namespace {

constexpr double kEps = 1e-4;

class Case {
 public:
  explicit Case(std::uint64_t seed) : rng_(seed), seed_(seed) {}

  ad::Graph& graph() { return *graph_; }
  ParamScope scope() { return ParamScope(*graph_, specs_); }

  ad::Var leaf(const std::string& name, Shape shape, double lo = -1.0, double hi = 1.0) {
    checked_.push_back(name);
    return bind(graph_->param(name, shape), name, lo, hi);
  }
  ad::Var fixed(const std::string& name, Shape shape, double lo = -1.0, double hi = 1.0) {
    return bind(graph_->input(name, shape), name, lo, hi);
  }
  void set_training() { options_ = {true, derive_seed(seed_, 0xF00)}; }

  // Contracts the output with fixed random weights so every element of the
  // output carries a distinct adjoint.
  void finish(ad::Var out) {
    loss_ = out.shape().empty() ? out : ad::sum(out * fixed("contract", out.shape()));
  }

  struct Worst {
    double error = 0.0;
    std::string leaf;
    double analytic = 0.0;
    double numeric = 0.0;
  };

  Worst run() {
    for (auto& [name, value] : init_params<double>(specs_, derive_seed(seed_, 0x1417))) {
      bindings_[name] = value;
      checked_.push_back(name);
    }
    Worst worst;
    for (const std::string& name : checked_) {
      const auto r = ad::grad_check(*graph_, bindings_, loss_, name, kEps, options_);
      if (r.max_rel_error >= worst.error) worst = {r.max_rel_error, name, r.analytic, r.numeric};
    }
    return worst;
  }

 private:
  ad::Var bind(ad::Var v, const std::string& name, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    TensorD t(v.shape());
    for (double& x : t.data()) x = u(rng_);
    bindings_[name] = std::move(t);
    return v;
  }

  std::unique_ptr<ad::Graph> graph_ = std::make_unique<ad::Graph>();
  std::vector<ParamSpec> specs_;
  ad::Bindings<double> bindings_;
  std::vector<std::string> checked_;
  ad::Var loss_;
  ad::ForwardOptions options_;
  Rng rng_;
  std::uint64_t seed_;
};

struct CaseDef {
  const char* module;
  const char* name;
  std::function<void(Case&)> build;
};

const std::vector<CaseDef>& case_table() {
  static const std::vector<CaseDef> table = {
      {"numeric_substrate", "arithmetic",
       [](Case& c) {
         auto a = c.leaf("a", {3, 4});
         auto b = c.leaf("b", {4}, 0.5, 1.5);
         c.finish((a + b) * a - a / b + 2.0 * (1.0 - a));
       }},
      {"numeric_substrate", "matmul",
       [](Case& c) { c.finish(ad::matmul(c.leaf("a", {3, 5}), c.leaf("b", {5, 2}))); }},
      {"numeric_substrate", "unary",
       [](Case& c) {
         auto x = c.leaf("x", {6}, -2.0, 2.0);
         auto p = c.leaf("p", {6}, 0.2, 2.0);
         c.finish(ad::exp(x) + ad::log(p) + ad::softplus(x) + ad::elu(x) + ad::sigmoid(x) +
                  ad::pow(p, 2.7));
       }},
      {"numeric_substrate", "piecewise",
       [](Case& c) {
         auto x = c.leaf("x", {8}, 0.1, 2.5);
         auto y = c.leaf("y", {8}, -2.5, -0.1);
         c.finish(ad::abs(x) + ad::abs(y) + ad::clamp_min(x - 1.3, 0.0) +
                  ad::smooth_l1(x - 1.2, 1.0) + ad::smooth_l1(y, 1.0));
       }},
      {"numeric_substrate", "reductions",
       [](Case& c) {
         auto a = c.leaf("a", {4, 5});
         c.finish(ad::sum(a, 0) * ad::mean(a, 0) + ad::sum(ad::max(a, 1)) * 3.0 - ad::mean(a) +
                  ad::sum(ad::sum(a, 1)));
       }},
      {"numeric_substrate", "layout",
       [](Case& c) {
         auto a = c.leaf("a", {2, 3});
         const ad::Var parts[] = {a, ad::broadcast_to(c.leaf("b", {3}), {2, 3})};
         auto cat = ad::concat(parts, 0);
         c.finish(ad::transpose(ad::reshape(ad::slice(cat, 0, 1, 4), {3, 3})) * ad::slice(cat, 0, 0, 3));
       }},
      {"numeric_substrate", "softmax_rows",
       [](Case& c) { c.finish(ad::softmax_rows(c.leaf("a", {3, 6}, -2.0, 2.0))); }},
      {"numeric_substrate", "cosine_similarity",
       [](Case& c) { c.finish(ad::cosine_similarity(c.leaf("a", {12}), c.leaf("b", {12}))); }},
      {"numeric_substrate", "topk_mean",
       [](Case& c) { c.finish(ad::topk_mean(c.leaf("a", {10}), 3)); }},
      {"numeric_substrate", "selective_scan",
       [](Case& c) {
         auto x = c.leaf("x", {8, 3});
         auto delta = ad::softplus(c.leaf("delta_raw", {8, 3}));
         auto a = -1.0 * ad::exp(c.leaf("a_log", {3, 2}));
         c.finish(ad::selective_scan(x, delta, a, c.leaf("b", {8, 2}), c.leaf("c", {8, 2})));
       }},
      {"numeric_substrate", "noisy_bottleneck_frozen",
       [](Case& c) {
         c.set_training();
         c.finish(ad::noisy_bottleneck(c.leaf("x", {6, 4}), 0.3, 0.2));
       }},
      {"phm_modulation", "ssm_encode",
       [](Case& c) {
         auto series = c.leaf("series", {12, 3}, -2.0, 2.0);
         c.finish(ssm_encode(series, SsmParams::declare(c.scope().sub("ssm"), 3, 4, 3)));
       }},
      {"phm_modulation", "film_modulate",
       [](Case& c) {
         auto h = c.leaf("h", {4});
         auto head = ModulationHead::declare(c.scope().sub("film"), 4, 6);
         auto [gamma, beta] = project_affine(h, head);
         c.finish(film_modulate(c.leaf("tokens", {5, 6}), gamma, beta));
       }},
      {"hier_encoders", "cross_attention",
       [](Case& c) {
         auto p = ProcessEncoderParams::declare(c.scope().sub("xattn"), 8, 2);
         c.finish(cross_attention(c.leaf("video", {5, 8}), c.leaf("audio", {6, 8}), p));
       }},
      {"hier_encoders", "gem_pool",
       [](Case& c) {
         auto p = 1.0 + ad::softplus(c.leaf("p_raw", {}));
         c.finish(gem_pool(c.leaf("tokens", {6, 4}, 0.05, 1.5), p));
       }},
      {"hier_encoders", "result_encode",
       [](Case& c) {
         auto p = ResultEncoderParams::declare(c.scope().sub("result"), 8, 8, 6);
         c.finish(result_encode(c.leaf("image", {3, 4, 8}, 0.05, 1.5), p));
       }},
      {"anti_gen_decoder", "linear_attention",
       [](Case& c) {
         c.finish(linear_attention(c.leaf("q", {5, 4}), c.leaf("k", {6, 4}), c.leaf("v", {6, 3})));
       }},
      {"anti_gen_decoder", "softmax_attention",
       [](Case& c) {
         c.finish(softmax_attention(c.leaf("q", {5, 4}), c.leaf("k", {6, 4}), c.leaf("v", {6, 3})));
       }},
      {"anti_gen_decoder", "decode",
       [](Case& c) {
         c.set_training();
         auto p = DecoderParams::declare(c.scope().sub("decoder"), 8, 8, 6, 2);
         c.finish(decode(noisy_bottleneck(c.leaf("tokens", {5, 8}), BottleneckConfig{}), p));
       }},
      {"objective_scoring", "recon_loss",
       [](Case& c) {
         LossConfig cfg;
         cfg.k = 5;
         c.finish(recon_loss(c.leaf("observed", {40}, -3.0, 3.0), c.leaf("predicted", {40}), cfg));
       }},
      {"objective_scoring", "text_loss",
       [](Case& c) {
         auto head = TextHead::declare(c.scope().sub("text"), 10, 6);
         c.finish(text_loss(c.leaf("predicted", {10}), c.fixed("anchor", {6}), head));
       }},
      {"objective_scoring", "anomaly_score",
       [](Case& c) {
         LossConfig cfg;
         cfg.k = 5;
         c.finish(anomaly_score(c.leaf("observed", {40}, -3.0, 3.0), c.leaf("predicted", {40}), cfg));
       }},
  };
  return table;
}

}  // namespace

std::vector<std::string> gradcheck_modules() {
  return {"numeric_substrate", "phm_modulation", "hier_encoders", "anti_gen_decoder",
          "objective_scoring", "pipeline"};
}

std::vector<GradCheckEntry> run_gradchecks(const std::string& module, std::size_t seeds) {
  bool known = module.empty();
  for (const auto& m : gradcheck_modules()) known = known || m == module;
  if (!known) throw Error("unknown gradcheck module '" + module + "'");
  std::vector<GradCheckEntry> out;
  for (const CaseDef& def : case_table()) {
    if (!module.empty() && module != def.module) continue;
    GradCheckEntry entry{def.module, def.name, 0.0, "", 0.0, 0.0, seeds};
    for (std::size_t s = 0; s < seeds; ++s) {
      Case c(derive_seed(0x6CEC, hash_name(def.name), s));
      def.build(c);
      const auto w = c.run();
      if (w.error >= entry.max_rel_error) {
        entry.max_rel_error = w.error;
        entry.worst_leaf = w.leaf;
        entry.analytic = w.analytic;
        entry.numeric = w.numeric;
      }
    }
    out.push_back(std::move(entry));
  }
  if (module.empty() || module == "pipeline") out.push_back(full_pipeline_gradcheck());
  return out;
}

GradCheckEntry full_pipeline_gradcheck(std::uint64_t seed) {
  ModelConfig cfg;
  cfg.steps = 16;
  cfg.channels = 6;
  cfg.n_video = 4;
  cfg.n_audio = 4;
  cfg.angles = 3;
  cfg.n_image = 4;
  cfg.width = 8;
  cfg.d_model = 8;
  cfg.d_state = 4;
  cfg.heads = 2;
  cfg.latent = 16;
  cfg.mlp_hidden = 16;
  cfg.text_dim = 8;
  cfg.loss.k = 4;
  cfg.detach_target = false;
  constexpr std::size_t kBatch = 4;

  const ModelGraph mg = build_model_graph(cfg, kBatch);
  ad::Bindings<double> b = init_params<double>(mg.specs, seed);
  Rng rng(derive_seed(seed, 0x1A9));
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(-1.0, 1.0), positive(0.05, 1.5);
  auto fill = [&](Shape shape, auto& dist) {
    TensorD t(std::move(shape));
    for (double& v : t.data()) v = dist(rng);
    return t;
  };
  const ModalityShapes shapes = cfg.shapes();
  for (std::size_t slot = 0; slot < kBatch; ++slot) {
    b[input_name(slot, "sensor")] = fill(shapes.sensor, normal);
    b[input_name(slot, "video")] = fill(shapes.video, unit);
    b[input_name(slot, "audio")] = fill(shapes.audio, unit);
    b[input_name(slot, "image")] = fill(shapes.image, positive);
  }
  b[kAnchorInput] = random_unit_vector(cfg.text_dim, derive_seed(seed, 0x7E47)).cast<double>();

  const ad::ForwardOptions options{true, derive_seed(seed, 0xF00)};
  GradCheckEntry entry{"pipeline", "full_model", 0.0, "", 0.0, 0.0, 1};
  for (const std::string& name : mg.graph->param_names()) {
    const auto r = ad::grad_check(*mg.graph, b, mg.loss, name, kEps, options);
    if (r.max_rel_error >= entry.max_rel_error) {
      entry.max_rel_error = r.max_rel_error;
      entry.worst_leaf = name;
      entry.analytic = r.analytic;
      entry.numeric = r.numeric;
    }
  }
  return entry;
}

}  // namespace weldad

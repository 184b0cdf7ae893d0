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


// Command-line front end: data generation, training, evaluation, the
// experiment runners, gradient checks and heatmap export.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "weldad/diagnostics.hpp"
#include "weldad/experiments.hpp"
#include "weldad/harness.hpp"
#include "weldad/heatmap.hpp"
#include "weldad/kv.hpp"
#include "weldad/synth.hpp"
#include "weldad/tensor_io.hpp"

namespace fs = std::filesystem;
using namespace weldad;

namespace {

KvDocument load_config(const std::string& path) {
  if (path.empty()) return {};
  KvDocument doc = KvDocument::load(path);
  check_config_keys(doc);
  return doc;
}

/// A dataset argument is either a manifest file or a directory written by
/// gen-data, in which case `<dir>/<split>.manifest` is used.
fs::path manifest_for(const fs::path& data, const std::string& split) {
  if (fs::is_directory(data)) return data / (split + ".manifest");
  return data;
}

fs::path data_dir(const fs::path& data) {
  return fs::is_directory(data) ? data : data.parent_path();
}

TensorF load_anchor(const fs::path& data, const std::string& anchor) {
  const fs::path path = anchor.empty() ? data_dir(data) / "text_anchor.phmt" : fs::path(anchor);
  return read_tensor_as<float>(path);
}

/// A training output directory holds best/ and final/; prefer best/.
Checkpoint load_ckpt(const fs::path& path) {
  if (fs::is_directory(path / "best")) return load_checkpoint(path / "best");
  return load_checkpoint(path);
}

SynthDatasets load_splits(const fs::path& data, const std::string& anchor) {
  SynthDatasets d;
  d.train = load_dataset(manifest_for(data, "train"));
  d.val = load_dataset(manifest_for(data, "val"));
  d.test = load_dataset(manifest_for(data, "test"));
  d.text_anchor = load_anchor(data, anchor);
  return d;
}

TrainConfig train_config(const std::string& config, const Dataset& data) {
  TrainConfig cfg = TrainConfig::from_kv(load_config(config));
  cfg.model.set_shapes(data.shapes);
  cfg.validate();
  return cfg;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& part : split(text, ',')) {
    const std::string t = trim(part);
    if (t.empty()) continue;
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used != t.size()) throw Error("not a number: " + t);
    out.push_back(v);
  }
  if (out.empty()) throw Error("empty list");
  return out;
}

void print_report(const EvalReport& r) {
  std::printf("%-16s auroc %.4f  ap %.4f  f1_max %.4f", r.variant.c_str(), r.auroc, r.ap,
              r.f1_max);
  for (const auto& [kind, value] : r.kind_auroc) std::printf("  %s %.4f", to_string(kind), value);
  if (r.latency_ms > 0.0) std::printf("  %.2f ms  %.1f fps", r.latency_ms, r.fps);
  std::printf("\n");
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const std::string s = text;
  write_file_bytes(path, std::span<const std::uint8_t>(
                             reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weldad: multimodal weld anomaly detection"};
  app.require_subcommand(1);

  // gen-data
  std::string config, out, data, anchor, ckpt, report;
  auto* gen = app.add_subcommand("gen-data", "Generate synthetic train/val/test splits");
  gen->add_option("--config", config, "Key-value configuration file");
  gen->add_option("--out", out, "Output directory")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train on the normal samples of a dataset");
  tr->add_option("--config", config, "Key-value configuration file");
  tr->add_option("--data", data, "Dataset directory or train manifest")->required();
  tr->add_option("--anchor", anchor, "Text anchor tensor (default: <data>/text_anchor.phmt)");
  tr->add_option("--out", out, "Checkpoint directory; best/ and final/ are written")
      ->required();
  bool quiet = false;
  tr->add_flag("--quiet", quiet, "Suppress per-epoch progress");

  // eval
  auto* ev = app.add_subcommand("eval", "Score a test split and report detection metrics");
  ev->add_option("--ckpt", ckpt, "Checkpoint or training output directory")->required();
  ev->add_option("--data", data, "Dataset directory or test manifest")->required();
  ev->add_option("--report", report, "Write the report to this file");

  // ablate
  std::string variant = "full";
  std::size_t replicates = 1;
  auto* ab = app.add_subcommand("ablate", "Train and evaluate one variant (or all)");
  ab->add_option("--variant", variant, "Variant tag or 'all'");
  ab->add_option("--config", config, "Key-value configuration file");
  ab->add_option("--data", data, "Dataset directory")->required();
  ab->add_option("--anchor", anchor, "Text anchor tensor");
  ab->add_option("--replicates", replicates, "Training seeds seed..seed+n-1; reports the mean")
      ->check(CLI::PositiveNumber);
  ab->add_option("--report", report, "Write report(s) to this file (or directory with 'all')");

  // robust
  std::string sigmas = "0,0.1,0.2,0.3";
  std::uint64_t noise_seed = 42;
  auto* rb = app.add_subcommand("robust", "Evaluate under additive sensor noise");
  rb->add_option("--ckpt", ckpt, "Checkpoint or training output directory")->required();
  rb->add_option("--data", data, "Dataset directory or test manifest")->required();
  rb->add_option("--sigmas", sigmas, "Comma-separated noise levels in channel std units");
  rb->add_option("--seed", noise_seed, "Noise seed");

  // bench
  std::size_t warmup = 5, iters = 50;
  auto* bn = app.add_subcommand("bench", "Single-sample inference latency");
  bn->add_option("--ckpt", ckpt, "Checkpoint or training output directory")->required();
  bn->add_option("--data", data, "Dataset directory or test manifest")->required();
  bn->add_option("--warmup", warmup, "Untimed iterations");
  bn->add_option("--iters", iters, "Timed iterations (at least 10)");

  // gradcheck
  std::string module;
  std::size_t seeds = 10;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  gc->add_option("--module", module, "Restrict to one module");
  gc->add_option("--seeds", seeds, "Random draws per case")->check(CLI::PositiveNumber);

  // heatmap
  std::uint64_t sample_id = 0;
  auto* hm = app.add_subcommand("heatmap", "Export the per-angle saliency heatmap of a sample");
  hm->add_option("--ckpt", ckpt, "Checkpoint or training output directory")->required();
  hm->add_option("--data", data, "Dataset directory or test manifest")->required();
  hm->add_option("--sample", sample_id, "Sample id")->required();
  hm->add_option("--out", out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const KvDocument doc = load_config(config);
      const SynthConfig sc = SynthConfig::from_kv(doc);
      const std::size_t text_dim = ModelConfig::from_kv(doc).text_dim;
      for (const auto& m : generate_dataset(sc, out, text_dim)) std::cout << m.string() << "\n";
    } else if (*tr) {
      const Dataset train_set = load_dataset(manifest_for(data, "train"));
      const Dataset val_set = load_dataset(manifest_for(data, "val"));
      const TrainConfig cfg = train_config(config, train_set);
      auto progress = [&](std::size_t epoch, double tl, double vl, double lr) {
        if (!quiet) {
          std::printf("epoch %3zu  train %.6f  val %.6f  lr %.3g\n", epoch + 1, tl, vl, lr);
          std::fflush(stdout);
        }
      };
      const TrainResult r = train(cfg, train_set, val_set, load_anchor(data, anchor), progress);
      save_checkpoint(r.best, fs::path(out) / "best");
      save_checkpoint(r.final, fs::path(out) / "final");
      std::printf("best epoch %zu of %zu\n", r.best.best_epoch + 1, cfg.epochs);
    } else if (*ev) {
      const Checkpoint c = load_ckpt(ckpt);
      const Dataset test = load_dataset(manifest_for(data, "test"));
      EvalReport r = evaluate(c.state, test);
      const LatencyStats lat = latency_bench(c.state, test, 3, 20);
      r.latency_ms = lat.ms_per_sample;
      r.fps = lat.fps;
      print_report(r);
      if (!report.empty()) write_text(report, r.to_text());
    } else if (*ab) {
      const SynthDatasets d = load_splits(data, anchor);
      const TrainConfig base = train_config(config, d.train);
      std::vector<Variant> variants;
      if (variant == "all") {
        variants.assign(std::begin(kAllVariants), std::end(kAllVariants));
      } else {
        variants.push_back(parse_variant(variant));
      }
      for (Variant v : variants) {
        TrainConfig cfg = base;
        cfg.model.variant = v;
        EvalReport r;
        if (replicates > 1) {
          const ReplicateSummary s = run_replicates(cfg, d, replicates);
          for (const auto& rep : s.reports) print_report(rep);
          r = s.mean;
          std::printf("mean over %zu seeds:\n", replicates);
        } else {
          r = run_ablation(v, cfg, d);
        }
        print_report(r);
        if (!report.empty()) {
          const fs::path target = variants.size() > 1
                                      ? fs::path(report) / (std::string(to_string(v)) + ".txt")
                                      : fs::path(report);
          write_text(target, r.to_text());
        }
      }
    } else if (*rb) {
      const Checkpoint c = load_ckpt(ckpt);
      const Dataset test = load_dataset(manifest_for(data, "test"));
      for (const auto& row : robustness_sweep(c.state, test, parse_list(sigmas), noise_seed)) {
        std::printf("sigma %.3f  ", row.sigma);
        print_report(row.report);
      }
    } else if (*bn) {
      const Checkpoint c = load_ckpt(ckpt);
      const Dataset test = load_dataset(manifest_for(data, "test"));
      const LatencyStats s = latency_bench(c.state, test, warmup, iters);
      std::printf("%.3f ms/sample  %.1f fps\n", s.ms_per_sample, s.fps);
    } else if (*gc) {
      double worst = 0.0;
      auto show = [&](const GradCheckEntry& e) {
        std::printf("%-18s %-24s %.3e  (%s, %zu cases)\n", e.module.c_str(), e.name.c_str(),
                    e.max_rel_error, e.worst_leaf.c_str(), e.cases);
        worst = std::max(worst, e.max_rel_error);
      };
      for (const auto& e : run_gradchecks(module, seeds)) show(e);
      std::printf("max relative error %.3e\n", worst);
      if (!(worst < 1e-4)) return 2;
    } else if (*hm) {
      const Checkpoint c = load_ckpt(ckpt);
      const Dataset test = load_dataset(manifest_for(data, "test"));
      const SampleRecord* found = nullptr;
      for (const auto& s : test.samples) {
        if (s.id == sample_id) found = &s;
      }
      if (found == nullptr) throw Error("no sample with id " + std::to_string(sample_id));
      const Heatmap h = compute_heatmap(c.state, *found);
      fs::create_directories(out);
      write_tensor(fs::path(out) / "heatmap.phmt", h.maps);
      write_tensor(fs::path(out) / "token_norms.phmt", h.token_norms);
      const std::size_t res = h.maps.dim(1);
      for (std::size_t m = 0; m < h.maps.dim(0); ++m) {
        TensorD one({res, res});
        for (std::size_t i = 0; i < res; ++i) {
          for (std::size_t j = 0; j < res; ++j) one(i, j) = h.maps(m, i, j);
        }
        write_pgm(fs::path(out) / ("angle_" + std::to_string(m) + ".pgm"), one);
        std::printf("angle %zu peak token %zu\n", m, heatmap_peak_token(h, m));
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

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


// Python bindings. Tensors cross the boundary as numpy arrays; configurations
// are plain dicts using the same keys as the key-value config files.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <filesystem>
#include <string>
#include <vector>

#include "weldad/diagnostics.hpp"
#include "weldad/experiments.hpp"
#include "weldad/harness.hpp"
#include "weldad/heatmap.hpp"
#include "weldad/metrics.hpp"
#include "weldad/synth.hpp"
#include "weldad/tensor_io.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace weldad;

namespace {

KvDocument to_kv(const py::dict& config) {
  KvDocument doc;
  for (const auto& [key, value] : config) {
    const std::string k = py::str(key);
    if (py::isinstance<py::bool_>(value)) {
      doc.set(k, value.cast<bool>());
    } else if (py::isinstance<py::float_>(value)) {
      doc.set(k, value.cast<double>());
    } else {
      doc.set(k, std::string(py::str(value)));
    }
  }
  check_config_keys(doc);
  return doc;
}

template <typename T>
py::array_t<T> to_numpy(const Tensor<T>& t) {
  py::array_t<T> out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

template <typename T>
Tensor<T> from_numpy(const py::array_t<T, py::array::c_style | py::array::forcecast>& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  Tensor<T> t(shape);
  std::copy(a.data(), a.data() + t.size(), t.data().begin());
  return t;
}

py::object any_to_numpy(const AnyTensor& t) {
  return std::visit([](const auto& v) -> py::object { return to_numpy(v); }, t);
}

py::dict report_dict(const EvalReport& r) {
  py::dict d;
  d["variant"] = r.variant;
  d["auroc"] = r.auroc;
  d["ap"] = r.ap;
  d["f1_max"] = r.f1_max;
  py::dict kinds;
  for (const auto& [kind, value] : r.kind_auroc) kinds[to_string(kind)] = value;
  d["kind_auroc"] = kinds;
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<std::string> defect;
  for (const auto& s : r.samples) {
    scores.push_back(s.score);
    labels.push_back(static_cast<int>(s.label));
    defect.push_back(to_string(s.kind));
  }
  d["scores"] = scores;
  d["labels"] = labels;
  d["defect_kinds"] = defect;
  if (r.latency_ms > 0.0) {
    d["latency_ms"] = r.latency_ms;
    d["fps"] = r.fps;
  }
  return d;
}

fs::path manifest_for(const fs::path& data, const std::string& split) {
  return fs::is_directory(data) ? data / (split + ".manifest") : data;
}

Checkpoint load_ckpt(const fs::path& path) {
  return fs::is_directory(path / "best") ? load_checkpoint(path / "best") : load_checkpoint(path);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multimodal process/result consistency anomaly detection";

  py::register_exception<Error>(m, "WeldadError", PyExc_RuntimeError);

  m.def("read_tensor", [](const fs::path& p) { return any_to_numpy(read_tensor(p)); },
        py::arg("path"), "Read a tensor file into a float32 or float64 array.");
  m.def(
      "write_tensor",
      [](const fs::path& p, const py::array& a) {
        if (a.dtype().is(py::dtype::of<float>())) {
          write_tensor(p, from_numpy<float>(a));
        } else {
          write_tensor(p, from_numpy<double>(a));
        }
      },
      py::arg("path"), py::arg("array"),
      "Write an array as a tensor file; float32 stays float32, anything else is stored as "
      "float64.");

  auto metric = [&](const char* name, double (*fn)(std::span<const double>, std::span<const int>),
                    const char* doc) {
    m.def(
        name,
        [fn](const std::vector<double>& scores, const std::vector<int>& labels) {
          return fn(scores, labels);
        },
        py::arg("scores"), py::arg("labels"), doc);
  };
  metric("auroc", &auroc, "Area under the ROC curve; labels are 1 for anomalous.");
  metric("average_precision", &average_precision, "Average precision.");
  metric("f1_max", &f1_max, "Best F1 over all score thresholds.");

  m.def(
      "generate_dataset",
      [](const fs::path& out, const py::dict& config) {
        const KvDocument doc = to_kv(config);
        return generate_dataset(SynthConfig::from_kv(doc), out, ModelConfig::from_kv(doc).text_dim);
      },
      py::arg("out"), py::arg("config") = py::dict(),
      "Generate train/val/test splits under `out`; returns the manifest paths.");

  m.def(
      "load_split",
      [](const fs::path& manifest) {
        const Dataset d = load_dataset(manifest);
        py::list samples;
        for (const auto& s : d.samples) {
          py::dict row;
          row["id"] = s.id;
          row["label"] = to_string(s.label);
          row["defect_kind"] = to_string(s.defect_kind);
          row["sensor"] = to_numpy(s.sensor_raw);
          row["video"] = to_numpy(s.feat_video);
          row["audio"] = to_numpy(s.feat_audio);
          row["image"] = to_numpy(s.feat_image);
          samples.append(row);
        }
        return samples;
      },
      py::arg("manifest"), "Load every sample of a manifest as dicts of arrays.");

  m.def(
      "train",
      [](const fs::path& data, const fs::path& out, const py::dict& config) {
        const Dataset train_set = load_dataset(manifest_for(data, "train"));
        const Dataset val = load_dataset(manifest_for(data, "val"));
        const fs::path dir = fs::is_directory(data) ? data : data.parent_path();
        const TensorF anchor = read_tensor_as<float>(dir / "text_anchor.phmt");
        TrainConfig cfg = TrainConfig::from_kv(to_kv(config));
        cfg.model.set_shapes(train_set.shapes);
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(cfg, train_set, val, anchor);
        }
        save_checkpoint(r.best, out / "best");
        save_checkpoint(r.final, out / "final");
        py::dict d;
        d["best_epoch"] = r.best.best_epoch;
        d["train_loss"] = r.final.train_loss;
        d["val_loss"] = r.final.val_loss;
        return d;
      },
      py::arg("data"), py::arg("out"), py::arg("config") = py::dict(),
      "Train on a generated dataset directory; writes best/ and final/ checkpoints.");

  m.def(
      "evaluate",
      [](const fs::path& ckpt, const fs::path& data) {
        const Checkpoint c = load_ckpt(ckpt);
        const Dataset test = load_dataset(manifest_for(data, "test"));
        py::gil_scoped_release release;
        EvalReport r = evaluate(c.state, test);
        py::gil_scoped_acquire acquire;
        return report_dict(r);
      },
      py::arg("ckpt"), py::arg("data"), "Score the test split and compute detection metrics.");

  m.def(
      "robustness",
      [](const fs::path& ckpt, const fs::path& data, const std::vector<double>& sigmas) {
        const Checkpoint c = load_ckpt(ckpt);
        const Dataset test = load_dataset(manifest_for(data, "test"));
        py::list rows;
        for (const auto& row : robustness_sweep(c.state, test, sigmas)) {
          py::dict d = report_dict(row.report);
          d["sigma"] = row.sigma;
          rows.append(d);
        }
        return rows;
      },
      py::arg("ckpt"), py::arg("data"), py::arg("sigmas") = std::vector<double>{0, 0.1, 0.2, 0.3},
      "Re-evaluate with sensor noise at each sigma (channel std units).");

  m.def(
      "heatmap",
      [](const fs::path& ckpt, const fs::path& data, std::uint64_t sample_id) {
        const Checkpoint c = load_ckpt(ckpt);
        const Dataset test = load_dataset(manifest_for(data, "test"));
        for (const auto& s : test.samples) {
          if (s.id == sample_id) return to_numpy(compute_heatmap(c.state, s).maps);
        }
        throw Error("no sample with id " + std::to_string(sample_id));
      },
      py::arg("ckpt"), py::arg("data"), py::arg("sample_id"),
      "Per-angle saliency maps (angles x res x res, scaled to [0, 1]).");

  m.def(
      "gradcheck",
      [](const std::string& module, std::size_t seeds) {
        py::list out;
        for (const auto& e : run_gradchecks(module, seeds)) {
          py::dict d;
          d["module"] = e.module;
          d["name"] = e.name;
          d["max_rel_error"] = e.max_rel_error;
          d["worst_leaf"] = e.worst_leaf;
          out.append(d);
        }
        return out;
      },
      py::arg("module") = "", py::arg("seeds") = 10,
      "Finite-difference gradient checks; an empty module runs all of them.");
}

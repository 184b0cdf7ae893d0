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

#include "weldad/dataset.hpp"

#include <cstdio>
#include <sstream>

#include "weldad/kv.hpp"
#include "weldad/tensor_io.hpp"

namespace weldad {

const char* to_string(Label label) {
  return label == Label::kNormal ? "normal" : "anomalous";
}

const char* to_string(DefectKind kind) {
  switch (kind) {
    case DefectKind::kNone: return "none";
    case DefectKind::kSurface: return "surface";
    case DefectKind::kProcessHidden: return "process_hidden";
    case DefectKind::kBoth: return "both";
  }
  return "none";
}

Label parse_label(const std::string& s) {
  if (s == "normal") return Label::kNormal;
  if (s == "anomalous") return Label::kAnomalous;
  throw Error("unknown label '" + s + "'");
}

DefectKind parse_defect_kind(const std::string& s) {
  for (DefectKind k : kAllDefectKinds) {
    if (s == to_string(k)) return k;
  }
  throw Error("unknown defect kind '" + s + "'");
}

std::map<DefectKind, std::size_t> Dataset::defect_histogram() const {
  std::map<DefectKind, std::size_t> h;
  for (DefectKind k : kAllDefectKinds) h[k] = 0;
  for (const auto& s : samples) ++h[s.defect_kind];
  return h;
}

ModalityShapes shapes_of(const SampleRecord& s) {
  return {s.sensor_raw.shape(), s.feat_video.shape(), s.feat_audio.shape(), s.feat_image.shape()};
}

void Dataset::validate() const {
  if (shapes.sensor.size() != 2 || shapes.video.size() != 2 || shapes.audio.size() != 2 ||
      shapes.image.size() != 3) {
    throw ShapeError("dataset modality shapes have the wrong rank");
  }
  if (shapes.video[1] != shapes.image[2] || shapes.audio[1] != shapes.image[2]) {
    throw ShapeError("video, audio and image features must share the feature width");
  }
  for (const auto& s : samples) {
    if (!(shapes_of(s) == shapes)) {
      throw ShapeError("sample " + std::to_string(s.id) + " deviates from manifest shapes");
    }
    if ((s.label == Label::kNormal) != (s.defect_kind == DefectKind::kNone)) {
      throw Error("sample " + std::to_string(s.id) + " has inconsistent label and defect kind");
    }
  }
}

namespace {

std::string shape_field(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(s[i]);
  }
  return out;
}

Shape parse_shape_field(const std::string& text) {
  Shape s;
  for (const auto& part : split(text, 'x')) s.push_back(std::stoul(part));
  return s;
}

std::map<std::string, std::string> parse_fields(const std::string& line) {
  std::map<std::string, std::string> fields;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw Error("malformed sample line: '" + line + "'");
    fields[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return fields;
}

}  // namespace

std::filesystem::path write_dataset(const Dataset& data, const std::filesystem::path& dir) {
  data.validate();
  namespace fs = std::filesystem;
  fs::create_directories(dir / data.split);
  KvDocument doc;
  doc.set("format", std::string("weldad-manifest-1"));
  doc.set("split", data.split);
  doc.set("sample_count", static_cast<std::uint64_t>(data.samples.size()));
  doc.set("seed", data.seed);
  doc.set("sensor_shape", shape_field(data.shapes.sensor));
  doc.set("video_shape", shape_field(data.shapes.video));
  doc.set("audio_shape", shape_field(data.shapes.audio));
  doc.set("image_shape", shape_field(data.shapes.image));
  std::string hist;
  for (const auto& [kind, count] : data.defect_histogram()) {
    if (!hist.empty()) hist += ',';
    hist += std::string(to_string(kind)) + ":" + std::to_string(count);
  }
  doc.set("defect_histogram", hist);
  auto& lines = doc.section("samples");
  for (const auto& s : data.samples) {
    char stem[32];
    std::snprintf(stem, sizeof(stem), "%06llu", static_cast<unsigned long long>(s.id));
    const std::string base = data.split + "/" + stem;
    write_tensor(dir / (base + "_sensor.phmt"), s.sensor_raw);
    write_tensor(dir / (base + "_video.phmt"), s.feat_video);
    write_tensor(dir / (base + "_audio.phmt"), s.feat_audio);
    write_tensor(dir / (base + "_image.phmt"), s.feat_image);
    std::string line = "id=" + std::to_string(s.id) + " label=" + to_string(s.label) +
                       " defect=" + to_string(s.defect_kind) + " sensor=" + base +
                       "_sensor.phmt video=" + base + "_video.phmt audio=" + base +
                       "_audio.phmt image=" + base + "_image.phmt";
    if (s.theta) {
      write_tensor(dir / (base + "_theta.phmt"), *s.theta);
      line += " theta=" + base + "_theta.phmt process_seed=" + std::to_string(s.process_seed) +
              " noise_seed=" + std::to_string(s.noise_seed);
    }
    lines.push_back(line);
  }
  const auto manifest = dir / (data.split + ".manifest");
  doc.save(manifest);
  return manifest;
}

Dataset load_dataset(const std::filesystem::path& manifest) {
  const KvDocument doc = KvDocument::load(manifest);
  if (doc.get_string("format", "") != "weldad-manifest-1") {
    throw Error(manifest.string() + ": not a weldad manifest");
  }
  const auto root = manifest.parent_path();
  Dataset data;
  data.split = doc.get_string("split");
  data.seed = doc.get_u64("seed", 0);
  data.shapes.sensor = parse_shape_field(doc.get_string("sensor_shape"));
  data.shapes.video = parse_shape_field(doc.get_string("video_shape"));
  data.shapes.audio = parse_shape_field(doc.get_string("audio_shape"));
  data.shapes.image = parse_shape_field(doc.get_string("image_shape"));
  for (const auto& line : doc.section("samples")) {
    const auto f = parse_fields(line);
    auto need = [&](const std::string& key) -> const std::string& {
      auto it = f.find(key);
      if (it == f.end()) throw Error("sample line lacks '" + key + "': " + line);
      return it->second;
    };
    SampleRecord s;
    s.id = std::stoull(need("id"));
    s.label = parse_label(need("label"));
    s.defect_kind = parse_defect_kind(need("defect"));
    s.sensor_raw = read_tensor_as<float>(root / need("sensor"));
    s.feat_video = read_tensor_as<float>(root / need("video"));
    s.feat_audio = read_tensor_as<float>(root / need("audio"));
    s.feat_image = read_tensor_as<float>(root / need("image"));
    if (f.count("theta")) {
      s.theta = read_tensor_as<double>(root / f.at("theta"));
      s.process_seed = std::stoull(need("process_seed"));
      s.noise_seed = std::stoull(need("noise_seed"));
    }
    data.samples.push_back(std::move(s));
  }
  const auto expected = static_cast<std::size_t>(doc.get_u64("sample_count"));
  if (expected != data.samples.size()) {
    throw Error(manifest.string() + ": sample_count does not match the sample list");
  }
  data.validate();
  return data;
}

}  // namespace weldad

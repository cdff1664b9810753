// Copyright 2026 The OAQ Authors. All Rights Reserved.
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


#include "oaq/model_io.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "oaq/blob.hpp"

namespace oaq {
namespace {

using nlohmann::json;

std::string weight_key(const std::string& layer) { return layer + "/weight"; }
std::string bias_key(const std::string& layer) { return layer + "/bias"; }

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw FormatError(std::string("manifest is missing '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest field '") + key + "': " + e.what());
  }
}

json observer_json(const RangeObserver& o) {
  return {{"r_min", o.r_min}, {"r_max", o.r_max}, {"momentum", o.momentum},
          {"initialized", o.initialized}};
}

json params_json(const QuantParams& p) {
  return {{"scale", p.scale},         {"zero_point", p.zero_point}, {"bits", p.bits},
          {"alpha", p.alpha},         {"r_min", p.r_min},           {"r_max", p.r_max},
          {"symmetric", p.symmetric}, {"degenerate", p.degenerate}};
}

}  // namespace

std::vector<uint8_t> model_blob(const ModelGraph& g) {
  std::vector<NamedTensor> entries;
  for (const auto& [name, w] : g.all_weights()) {
    entries.push_back({weight_key(name), w.weight});
    entries.push_back({bias_key(name), w.bias});
  }
  return encode_blob(entries);
}

json model_manifest(const ModelGraph& g, const std::string& blob_file, uint32_t blob_crc) {
  json layers = json::array();
  for (const auto& l : g.layers()) {
    layers.push_back({{"name", l.name},
                      {"kind", layer_kind_name(l.kind)},
                      {"inputs", l.inputs},
                      {"output", l.output},
                      {"units", l.units},
                      {"channels", l.channels},
                      {"kernel", l.kernel},
                      {"stride", l.stride},
                      {"pad", l.pad}});
  }
  json weights = json::object();
  for (const auto& [name, w] : g.all_weights()) {
    json entry = {{"weight", weight_key(name)},
                  {"bias", bias_key(name)},
                  {"alpha", w.quant.alpha},
                  {"bits", w.quant.bits},
                  {"symmetric", w.quant.symmetric}};
    entry["params"] = params_json(w.params());
    weights[name] = entry;
  }
  json records = json::object();
  for (const auto& [owner, rec] : g.records()) {
    json entry = {{"alpha", rec.alpha}, {"bits", rec.bits}, {"observer", observer_json(rec.observer)}};
    if (rec.ready()) entry["params"] = params_json(rec.params());
    records[owner] = entry;
  }
  return {{"format", "oaq-model"},
          {"version", kModelFormatVersion},
          {"input", {{"name", g.input_name()}, {"shape", g.input_shape()}}},
          {"layers", layers},
          {"weights", weights},
          {"records", records},
          {"blob", {{"file", blob_file}, {"crc32", blob_crc}}}};
}

ModelGraph model_from_parts(const json& manifest, std::span<const uint8_t> blob) {
  if (field<std::string>(manifest, "format") != "oaq-model") {
    throw FormatError("not an oaq model manifest");
  }
  const int version = field<int>(manifest, "version");
  if (version != kModelFormatVersion) {
    throw FormatError("unsupported model version " + std::to_string(version));
  }
  const json& blob_info = manifest.at("blob");
  if (field<uint32_t>(blob_info, "crc32") != crc32_of(blob)) {
    throw FormatError("blob checksum mismatch");
  }
  const auto entries = decode_blob(blob);

  const json& input = manifest.at("input");
  ModelGraph g(field<std::string>(input, "name"), field<Shape>(input, "shape"));
  for (const json& l : field<json>(manifest, "layers")) {
    LayerSpec s;
    s.name = field<std::string>(l, "name");
    s.kind = layer_kind_from_name(field<std::string>(l, "kind"));
    s.inputs = field<std::vector<std::string>>(l, "inputs");
    s.output = field<std::string>(l, "output");
    s.units = field<int64_t>(l, "units");
    s.channels = field<int64_t>(l, "channels");
    s.kernel = field<int>(l, "kernel");
    s.stride = field<int>(l, "stride");
    s.pad = field<int>(l, "pad");
    g.add(std::move(s));
  }
  g.finalize();

  const json& weights = field<json>(manifest, "weights");
  std::set<std::string> referenced;
  for (auto& [name, lw] : g.all_weights()) {
    if (!weights.contains(name)) throw FormatError("manifest lacks weights for '" + name + "'");
    const json& w = weights.at(name);
    const auto wk = field<std::string>(w, "weight");
    const auto bk = field<std::string>(w, "bias");
    const FloatTensor& wt = blob_get<float>(entries, wk);
    const FloatTensor& bt = blob_get<float>(entries, bk);
    if (wt.shape() != lw.weight.shape() || bt.shape() != lw.bias.shape()) {
      throw FormatError("tensor shape mismatch for layer '" + name + "'");
    }
    if (!referenced.insert(wk).second || !referenced.insert(bk).second) {
      throw FormatError("blob entry referenced twice by layer '" + name + "'");
    }
    lw.weight = wt;
    lw.bias = bt;
    lw.quant.alpha = field<double>(w, "alpha");
    lw.quant.bits = field<int>(w, "bits");
    lw.quant.symmetric = field<bool>(w, "symmetric");
  }
  if (weights.size() != g.all_weights().size()) {
    throw FormatError("manifest lists weights for unknown layers");
  }

  const json& records = field<json>(manifest, "records");
  if (records.size() != g.records().size()) {
    throw FormatError("manifest records disagree with the graph");
  }
  for (auto& [owner, rec] : g.records()) {
    if (!records.contains(owner)) throw FormatError("manifest lacks record '" + owner + "'");
    const json& r = records.at(owner);
    rec.alpha = field<double>(r, "alpha");
    rec.bits = field<int>(r, "bits");
    const json& o = field<json>(r, "observer");
    rec.observer.r_min = field<double>(o, "r_min");
    rec.observer.r_max = field<double>(o, "r_max");
    rec.observer.momentum = field<double>(o, "momentum");
    rec.observer.initialized = field<bool>(o, "initialized");
  }
  return g;
}

void save_model(const ModelGraph& g, const std::string& path) {
  const std::vector<uint8_t> blob = model_blob(g);
  const std::string blob_path = path + ".bin";
  const std::string blob_file = std::filesystem::path(blob_path).filename().string();
  write_file_bytes(blob_path, blob);
  const std::string text = model_manifest(g, blob_file, crc32_of(blob)).dump(2) + "\n";
  write_file_bytes(path, std::span(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
}

ModelGraph load_model(const std::string& path) {
  const auto text = read_file_bytes(path);
  json manifest;
  try {
    manifest = json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    throw FormatError("cannot parse manifest '" + path + "': " + e.what());
  }
  const auto blob_file = field<std::string>(field<json>(manifest, "blob"), "file");
  const auto blob_path = std::filesystem::path(path).parent_path() / blob_file;
  return model_from_parts(manifest, read_file_bytes(blob_path.string()));
}

void save_dataset(const Dataset& d, const std::string& path) {
  d.validate();
  std::vector<NamedTensor> entries{{"inputs", d.inputs},
                                   {"classes", Int32Tensor({1}, static_cast<int32_t>(d.classes))}};
  if (!d.labels.empty()) entries.push_back({"labels", d.labels});
  if (!d.targets.empty()) entries.push_back({"targets", d.targets});
  write_file_bytes(path, encode_blob(entries));
}

Dataset load_dataset(const std::string& path) {
  const auto entries = decode_blob(read_file_bytes(path));
  Dataset d;
  d.inputs = blob_get<float>(entries, "inputs");
  if (blob_has(entries, "classes")) d.classes = blob_get<int32_t>(entries, "classes")[0];
  if (blob_has(entries, "labels")) d.labels = blob_get<int32_t>(entries, "labels");
  if (blob_has(entries, "targets")) d.targets = blob_get<float>(entries, "targets");
  d.validate();
  return d;
}

}  // namespace oaq

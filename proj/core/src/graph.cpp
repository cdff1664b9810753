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

#include "oaq/graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "oaq/qconv.hpp"
#include "oaq/random.hpp"

namespace oaq {
namespace {

struct KindName {
  LayerKind kind;
  const char* name;
};

constexpr KindName kKindNames[] = {
    {LayerKind::kFullyConnected, "fully_connected"},
    {LayerKind::kConv2d, "conv2d"},
    {LayerKind::kDepthwiseConv2d, "depthwise_conv2d"},
    {LayerKind::kRelu, "relu"},
    {LayerKind::kRelu6, "relu6"},
    {LayerKind::kAdd, "add"},
    {LayerKind::kConcat, "concat"},
    {LayerKind::kMaxPool, "maxpool"},
    {LayerKind::kAvgPool, "avgpool"},
    {LayerKind::kPad, "pad"},
    {LayerKind::kSoftmax, "softmax"},
};

bool is_activation(LayerKind kind) { return kind == LayerKind::kRelu || kind == LayerKind::kRelu6; }

void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidArgumentError(what);
}

Shape spatial_out(const Shape& in, int kernel, int stride, int pad, int64_t channels) {
  require(in.size() == 3, "spatial layer needs an [H, W, C] input, got " + shape_string(in));
  return {conv_output_size(in[0], kernel, stride, pad), conv_output_size(in[1], kernel, stride, pad),
          channels};
}

}  // namespace

const char* layer_kind_name(LayerKind kind) {
  for (const auto& kn : kKindNames) {
    if (kn.kind == kind) return kn.name;
  }
  return "unknown";
}

LayerKind layer_kind_from_name(const std::string& name) {
  for (const auto& kn : kKindNames) {
    if (name == kn.name) return kn.kind;
  }
  throw FormatError("unknown layer kind '" + name + "'");
}

bool is_weighted(LayerKind kind) {
  return kind == LayerKind::kFullyConnected || kind == LayerKind::kConv2d ||
         kind == LayerKind::kDepthwiseConv2d;
}

QuantParams ActivationRecord::params() const {
  if (!observer.initialized) throw InvalidArgumentError("activation range not observed yet");
  return derive_scale(observer.r_min, observer.r_max, bits, alpha, /*symmetric=*/false);
}

QuantParams LayerWeights::params() const {
  const auto [lo, hi] = std::minmax_element(weight.data().begin(), weight.data().end());
  return derive_scale(*lo, *hi, quant.bits, quant.alpha, quant.symmetric);
}

ModelGraph::ModelGraph(std::string input_name, Shape sample_shape)
    : input_name_(std::move(input_name)), input_shape_(std::move(sample_shape)) {
  require(!input_shape_.empty(), "input shape must not be empty");
  for (int64_t d : input_shape_) require(d > 0, "input shape must be positive");
  shapes_[input_name_] = input_shape_;
}

void ModelGraph::add(LayerSpec spec) {
  require(!spec.name.empty() && !spec.output.empty(), "layer needs a name and an output");
  require(!spec.inputs.empty(), "layer '" + spec.name + "' has no inputs");
  require(shapes_.count(spec.output) == 0, "value '" + spec.output + "' defined twice");
  for (const auto& l : layers_) require(l.name != spec.name, "duplicate layer name " + spec.name);
  for (const auto& in : spec.inputs) {
    require(shapes_.count(in) > 0,
            "layer '" + spec.name + "' reads undefined value '" + in + "'");
  }
  const bool multi = spec.kind == LayerKind::kAdd || spec.kind == LayerKind::kConcat;
  require(multi ? spec.inputs.size() >= 2 : spec.inputs.size() == 1,
          "layer '" + spec.name + "' has the wrong number of inputs");

  const Shape& in = shapes_.at(spec.inputs[0]);
  Shape out;
  switch (spec.kind) {
    case LayerKind::kFullyConnected: {
      require(spec.units > 0, "fully-connected layer needs units > 0");
      out = {spec.units};
      LayerWeights w;
      w.weight = FloatTensor({shape_numel(in), spec.units});
      w.bias = FloatTensor({spec.units});
      weights_[spec.name] = std::move(w);
      break;
    }
    case LayerKind::kConv2d:
    case LayerKind::kDepthwiseConv2d: {
      require(spec.kernel > 0 && spec.stride > 0 && spec.pad >= 0, "invalid conv geometry");
      const bool depthwise = spec.kind == LayerKind::kDepthwiseConv2d;
      require(in.size() == 3, "conv needs an [H, W, C] input");
      if (depthwise) spec.channels = in[2];
      require(spec.channels > 0, "conv needs channels > 0");
      out = spatial_out(in, spec.kernel, spec.stride, spec.pad, spec.channels);
      LayerWeights w;
      w.weight = FloatTensor({spec.kernel, spec.kernel, depthwise ? 1 : in[2], spec.channels});
      w.bias = FloatTensor({spec.channels});
      weights_[spec.name] = std::move(w);
      break;
    }
    case LayerKind::kRelu:
    case LayerKind::kRelu6:
    case LayerKind::kSoftmax:
      out = in;
      break;
    case LayerKind::kAdd:
      for (const auto& v : spec.inputs) {
        require(shapes_.at(v) == in, "add inputs must share a shape");
      }
      out = in;
      break;
    case LayerKind::kConcat: {
      out = in;
      out.back() = 0;
      for (const auto& v : spec.inputs) {
        const Shape& s = shapes_.at(v);
        require(s.size() == in.size() && std::equal(s.begin(), s.end() - 1, in.begin()),
                "concat inputs must agree except on the last axis");
        out.back() += s.back();
      }
      break;
    }
    case LayerKind::kMaxPool:
    case LayerKind::kAvgPool:
      require(spec.kernel > 0 && spec.stride > 0, "pooling needs kernel and stride");
      out = spatial_out(in, spec.kernel, spec.stride, 0, in.size() == 3 ? in[2] : 0);
      break;
    case LayerKind::kPad:
      require(in.size() == 3 && spec.pad > 0, "pad needs an [H, W, C] input and pad > 0");
      out = {in[0] + 2 * spec.pad, in[1] + 2 * spec.pad, in[2]};
      break;
  }
  shapes_[spec.output] = out;
  layers_.push_back(std::move(spec));
  finalized_ = false;
}

const std::string& ModelGraph::output_name() const {
  require(!layers_.empty(), "graph has no layers");
  return layers_.back().output;
}

const Shape& ModelGraph::value_shape(const std::string& value) const {
  auto it = shapes_.find(value);
  require(it != shapes_.end(), "unknown value '" + value + "'");
  return it->second;
}

const LayerSpec* ModelGraph::producer(const std::string& value) const {
  for (const auto& l : layers_) {
    if (l.output == value) return &l;
  }
  return nullptr;
}

std::vector<const LayerSpec*> ModelGraph::consumers(const std::string& value) const {
  std::vector<const LayerSpec*> out;
  for (const auto& l : layers_) {
    if (std::find(l.inputs.begin(), l.inputs.end(), value) != l.inputs.end()) out.push_back(&l);
  }
  return out;
}

std::optional<LayerKind> ModelGraph::fused_activation(const LayerSpec& weighted) const {
  const auto users = consumers(weighted.output);
  if (users.size() == 1 && is_activation(users[0]->kind)) return users[0]->kind;
  return std::nullopt;
}

std::string ModelGraph::output_record_value(const LayerSpec& weighted) const {
  if (fused_activation(weighted)) return consumers(weighted.output)[0]->output;
  return weighted.output;
}

std::optional<std::string> ModelGraph::record_owner(const std::string& value) const {
  std::string v = value;
  for (auto it = aliases_.find(v); it != aliases_.end(); it = aliases_.find(v)) v = it->second;
  if (records_.count(v)) return v;
  return std::nullopt;
}

ActivationRecord& ModelGraph::record(const std::string& owner) {
  auto it = records_.find(owner);
  require(it != records_.end(), "no quantization record for '" + owner + "'");
  return it->second;
}

const ActivationRecord& ModelGraph::record(const std::string& owner) const {
  auto it = records_.find(owner);
  require(it != records_.end(), "no quantization record for '" + owner + "'");
  return it->second;
}

LayerWeights& ModelGraph::weights(const std::string& layer) {
  auto it = weights_.find(layer);
  require(it != weights_.end(), "layer '" + layer + "' has no weights");
  return it->second;
}

const LayerWeights& ModelGraph::weights(const std::string& layer) const {
  auto it = weights_.find(layer);
  require(it != weights_.end(), "layer '" + layer + "' has no weights");
  return it->second;
}

std::vector<const LayerSpec*> ModelGraph::weighted_layers() const {
  std::vector<const LayerSpec*> out;
  for (const auto& l : layers_) {
    if (is_weighted(l.kind)) out.push_back(&l);
  }
  return out;
}

int ModelGraph::groups(const LayerSpec& layer) const {
  if (layer.kind != LayerKind::kDepthwiseConv2d) return 1;
  return static_cast<int>(value_shape(layer.inputs[0]).back());
}

void ModelGraph::finalize(int activation_bits, int weight_bits, double alpha_init) {
  require(!layers_.empty(), "graph has no layers");
  std::map<std::string, ActivationRecord> previous = std::move(records_);
  records_.clear();
  aliases_.clear();

  auto place = [&](const std::string& value) {
    auto it = previous.find(value);
    if (it != previous.end()) {
      records_[value] = it->second;
    } else {
      ActivationRecord r;
      r.bits = activation_bits;
      r.alpha = alpha_init;
      records_[value] = r;
    }
  };
  auto quantized = [&](const std::string& value) { return record_owner(value).has_value(); };

  place(input_name_);
  for (size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& l = layers_[i];
    const std::string where = "layer '" + l.name + "': ";
    switch (l.kind) {
      case LayerKind::kFullyConnected:
      case LayerKind::kConv2d:
      case LayerKind::kDepthwiseConv2d:
        require(quantized(l.inputs[0]), where + "weighted layer input must be quantized");
        if (!fused_activation(l)) place(l.output);
        break;
      case LayerKind::kRelu:
      case LayerKind::kRelu6: {
        const LayerSpec* p = producer(l.inputs[0]);
        const bool fused = p && is_weighted(p->kind) && fused_activation(*p);
        require(fused || quantized(l.inputs[0]), where + "activation input must be quantized");
        place(l.output);
        break;
      }
      case LayerKind::kAdd:
      case LayerKind::kConcat:
      case LayerKind::kAvgPool:
        for (const auto& v : l.inputs) require(quantized(v), where + "input must be quantized");
        place(l.output);
        break;
      case LayerKind::kMaxPool:
      case LayerKind::kPad:
        require(quantized(l.inputs[0]), where + "input must be quantized");
        aliases_[l.output] = l.inputs[0];
        break;
      case LayerKind::kSoftmax:
        require(i + 1 == layers_.size(), where + "softmax must be the final layer");
        require(quantized(l.inputs[0]), where + "softmax input must be quantized");
        break;
    }
  }
  for (auto& [name, w] : weights_) {
    if (!finalized_) {
      w.quant.bits = weight_bits;
      if (w.quant.alpha == 1.0) w.quant.alpha = alpha_init;
    }
  }
  finalized_ = true;
}

bool ModelGraph::operator==(const ModelGraph& other) const {
  return input_name_ == other.input_name_ && input_shape_ == other.input_shape_ &&
         layers_ == other.layers_ && shapes_ == other.shapes_ && records_ == other.records_ &&
         aliases_ == other.aliases_ && weights_ == other.weights_;
}

void initialize_weights(ModelGraph& g, uint64_t seed) {
  uint32_t stream = 0;
  for (const auto& l : g.layers()) {
    ++stream;
    if (!is_weighted(l.kind)) continue;
    LayerWeights& w = g.weights(l.name);
    const Shape& s = w.weight.shape();
    const int64_t fan_in = l.kind == LayerKind::kFullyConnected ? s[0] : s[0] * s[1] * s[2];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    PhiloxStream rng(seed, stream, 0x77656967u);
    for (int64_t i = 0; i < w.weight.numel(); ++i) {
      w.weight[i] = static_cast<float>((2.0 * rng.uniform() - 1.0) * bound);
    }
    std::fill(w.bias.data().begin(), w.bias.data().end(), 0.0f);
  }
}

namespace {

std::vector<int64_t> parse_dims(const std::string& text, char sep) {
  std::vector<int64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    try {
      size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v <= 0) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw InvalidArgumentError("bad architecture dimension '" + item + "'");
    }
  }
  return out;
}

ModelGraph make_mlp(const std::vector<int64_t>& dims) {
  require(dims.size() >= 2, "mlp needs at least input and output sizes");
  ModelGraph g("input", {dims[0]});
  std::string prev = "input";
  for (size_t i = 1; i < dims.size(); ++i) {
    const std::string fc = "fc" + std::to_string(i);
    const bool last = i + 1 == dims.size();
    g.add({.name = fc, .kind = LayerKind::kFullyConnected, .inputs = {prev}, .output = fc,
           .units = dims[i]});
    if (last) {
      g.add({.name = "softmax", .kind = LayerKind::kSoftmax, .inputs = {fc}, .output = "probs"});
    } else {
      const std::string act = "relu" + std::to_string(i);
      g.add({.name = act, .kind = LayerKind::kRelu, .inputs = {fc}, .output = act});
      prev = act;
    }
  }
  return g;
}

ModelGraph make_cnn(const std::vector<int64_t>& hwc, int64_t classes) {
  require(hwc.size() == 3, "cnn input must be HxWxC");
  ModelGraph g("input", {hwc[0], hwc[1], hwc[2]});
  auto add = [&](LayerSpec s) { g.add(std::move(s)); };
  using K = LayerKind;
  add({.name = "conv1", .kind = K::kConv2d, .inputs = {"input"}, .output = "conv1", .channels = 8,
       .kernel = 3, .stride = 1, .pad = 1});
  add({.name = "relu1", .kind = K::kRelu, .inputs = {"conv1"}, .output = "relu1"});
  add({.name = "dw1", .kind = K::kDepthwiseConv2d, .inputs = {"relu1"}, .output = "dw1",
       .kernel = 3, .stride = 1, .pad = 1});
  add({.name = "relu6_1", .kind = K::kRelu6, .inputs = {"dw1"}, .output = "relu6_1"});
  add({.name = "pw1", .kind = K::kConv2d, .inputs = {"relu6_1"}, .output = "pw1", .channels = 8,
       .kernel = 1});
  add({.name = "add1", .kind = K::kAdd, .inputs = {"relu1", "pw1"}, .output = "add1"});
  add({.name = "pool1", .kind = K::kMaxPool, .inputs = {"add1"}, .output = "pool1", .kernel = 2,
       .stride = 2});
  add({.name = "pad1", .kind = K::kPad, .inputs = {"pool1"}, .output = "pad1", .pad = 1});
  add({.name = "conv2", .kind = K::kConv2d, .inputs = {"pad1"}, .output = "conv2", .channels = 8,
       .kernel = 3});
  add({.name = "relu2", .kind = K::kRelu, .inputs = {"conv2"}, .output = "relu2"});
  add({.name = "cat1", .kind = K::kConcat, .inputs = {"pool1", "relu2"}, .output = "cat1"});
  add({.name = "pool2", .kind = K::kAvgPool, .inputs = {"cat1"}, .output = "pool2", .kernel = 2,
       .stride = 2});
  add({.name = "fc1", .kind = K::kFullyConnected, .inputs = {"pool2"}, .output = "fc1",
       .units = classes});
  add({.name = "softmax", .kind = K::kSoftmax, .inputs = {"fc1"}, .output = "probs"});
  return g;
}

}  // namespace

ModelGraph make_architecture(const std::string& spec) {
  const auto colon = spec.find(':');
  require(colon != std::string::npos, "architecture must look like 'mlp:...' or 'cnn:...'");
  const std::string family = spec.substr(0, colon);
  const std::string rest = spec.substr(colon + 1);
  ModelGraph g;
  if (family == "mlp") {
    g = make_mlp(parse_dims(rest, '-'));
  } else if (family == "cnn") {
    const auto dash = rest.find('-');
    require(dash != std::string::npos, "cnn spec must be 'cnn:HxWxC-CLASSES'");
    const auto classes = parse_dims(rest.substr(dash + 1), '-');
    require(classes.size() == 1, "cnn spec needs one class count");
    g = make_cnn(parse_dims(rest.substr(0, dash), 'x'), classes[0]);
  } else {
    throw InvalidArgumentError("unknown architecture family '" + family + "'");
  }
  g.finalize();
  return g;
}

}  // namespace oaq

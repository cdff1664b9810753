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

// Layer graph with quantization records.
//
// Every quantization point owns one ActivationRecord shared by its fake
// quantization (float training path) and its real quantization (integer
// shadow path and inference). Quantization points are placed automatically:
// the graph input, the outputs of activations, merges and average pools, and
// the outputs of weighted layers unless a ReLU/ReLU6 directly consumes them,
// in which case the activation is fused and the record sits after it. Max
// pooling and padding reuse their input's record.

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "oaq/observer.hpp"
#include "oaq/quant.hpp"
#include "oaq/tensor.hpp"

namespace oaq {

enum class LayerKind {
  kFullyConnected,
  kConv2d,
  kDepthwiseConv2d,
  kRelu,
  kRelu6,
  kAdd,
  kConcat,
  kMaxPool,
  kAvgPool,
  kPad,
  kSoftmax,
};

const char* layer_kind_name(LayerKind kind);
LayerKind layer_kind_from_name(const std::string& name);
bool is_weighted(LayerKind kind);

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::kFullyConnected;
  std::vector<std::string> inputs;
  std::string output;
  int64_t units = 0;     // fully-connected output features
  int64_t channels = 0;  // conv2d output channels
  int kernel = 0;        // conv / pool window
  int stride = 1;
  int pad = 0;  // conv zero padding, or the pad layer's border

  bool operator==(const LayerSpec&) const = default;
};

/// Shared (r_min, r_max, alpha) record of a quantization point.
struct ActivationRecord {
  RangeObserver observer;
  double alpha = 1.0;
  int bits = 8;

  bool ready() const noexcept { return observer.initialized; }
  /// Asymmetric params from the observed range and alpha; requires ready().
  QuantParams params() const;

  bool operator==(const ActivationRecord&) const = default;
};

/// Weight quantization record; the range follows the current weight extremes.
struct WeightRecord {
  double alpha = 1.0;
  int bits = 8;
  bool symmetric = true;

  bool operator==(const WeightRecord&) const = default;
};

struct LayerWeights {
  FloatTensor weight;  // FC: [in, units]; conv: [k, k, cin/groups, cout]
  FloatTensor bias;    // [units] or [cout]
  WeightRecord quant;

  QuantParams params() const;
  bool operator==(const LayerWeights&) const = default;
};

class ModelGraph {
 public:
  ModelGraph() = default;
  /// sample_shape excludes the batch dimension: [features] or [H, W, C].
  ModelGraph(std::string input_name, Shape sample_shape);

  /// Appends a layer; inputs must name values defined earlier, which keeps
  /// the graph acyclic. Weighted layers get zero-initialized parameters.
  void add(LayerSpec spec);
  /// Places quantization records and checks the structural invariants. Called
  /// by every consumer; idempotent. Throws InvalidArgumentError.
  void finalize(int activation_bits = 8, int weight_bits = 8, double alpha_init = 1.0);
  bool finalized() const noexcept { return finalized_; }

  const std::string& input_name() const noexcept { return input_name_; }
  const Shape& input_shape() const noexcept { return input_shape_; }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  const std::string& output_name() const;
  const Shape& value_shape(const std::string& value) const;
  const LayerSpec* producer(const std::string& value) const;
  std::vector<const LayerSpec*> consumers(const std::string& value) const;

  /// Name of the value owning the record that quantizes `value`, following
  /// max-pool and pad aliases; nullopt when the value is not quantized.
  std::optional<std::string> record_owner(const std::string& value) const;
  bool has_record(const std::string& value) const { return records_.count(value) > 0; }
  ActivationRecord& record(const std::string& owner);
  const ActivationRecord& record(const std::string& owner) const;
  std::map<std::string, ActivationRecord>& records() noexcept { return records_; }
  const std::map<std::string, ActivationRecord>& records() const noexcept { return records_; }

  /// The activation fused into a weighted layer's requantization, if any.
  std::optional<LayerKind> fused_activation(const LayerSpec& weighted) const;
  /// Value whose record is the weighted layer's output record.
  std::string output_record_value(const LayerSpec& weighted) const;

  LayerWeights& weights(const std::string& layer);
  const LayerWeights& weights(const std::string& layer) const;
  std::map<std::string, LayerWeights>& all_weights() noexcept { return weights_; }
  const std::map<std::string, LayerWeights>& all_weights() const noexcept { return weights_; }

  /// Weighted layers in execution order.
  std::vector<const LayerSpec*> weighted_layers() const;
  /// Conv groups for a weighted layer (1 for FC and dense conv).
  int groups(const LayerSpec& layer) const;

  bool operator==(const ModelGraph& other) const;

 private:
  std::string input_name_;
  Shape input_shape_;
  std::vector<LayerSpec> layers_;
  std::map<std::string, Shape> shapes_;
  std::map<std::string, ActivationRecord> records_;
  std::map<std::string, std::string> aliases_;
  std::map<std::string, LayerWeights> weights_;
  bool finalized_ = false;
};

/// Kaiming-style uniform initialization of every weighted layer, zero biases.
void initialize_weights(ModelGraph& g, uint64_t seed);

/// Preset architectures. Accepted names: "mlp:IN-H1-...-OUT" (ReLU hidden
/// layers, softmax head), "cnn:HxWxC-CLASSES" (conv, depthwise, residual add,
/// pooling and FC head over an NHWC input).
ModelGraph make_architecture(const std::string& spec);

}  // namespace oaq

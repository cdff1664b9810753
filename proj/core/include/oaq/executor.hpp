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


// Float executor for a ModelGraph: forward pass with optional fake
// quantization and observer updates, reverse-mode gradients, SGD.

#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "oaq/graph.hpp"

namespace oaq {

struct ForwardOptions {
  /// Fake-quantize activation records and weights.
  bool quantize = true;
  bool quantize_weights = true;
  /// Fold this batch into the activation observers before quantizing.
  bool observe = false;
  /// When set, only these record owners are fake-quantized.
  const std::set<std::string>* only_records = nullptr;
};

struct ForwardState {
  int64_t batch = 0;
  /// Every graph value after any fake quantization, batch-major.
  std::map<std::string, FloatTensor> values;
  /// Record owners that were fake-quantized: value before quantization and
  /// the params used.
  std::map<std::string, FloatTensor> pre_quant;
  std::map<std::string, QuantParams> act_params;
  /// Weights used by the pass (fake-quantized when enabled) and their params.
  std::map<std::string, FloatTensor> used_weights;
  std::map<std::string, QuantParams> weight_params;
  std::map<std::string, std::vector<int64_t>> argmax;  // max-pool routing
  std::string logits_value;  // softmax input, or the graph output
  FloatTensor output;        // probabilities when the head is a softmax
};

/// Runs the graph on a batch [B, ...input shape]. Observing mutates the
/// graph's records; the const overload rejects it.
ForwardState forward(ModelGraph& g, const FloatTensor& batch, const ForwardOptions& opt);
ForwardState forward(const ModelGraph& g, const FloatTensor& batch, const ForwardOptions& opt);

struct Gradients {
  std::map<std::string, FloatTensor> weight;
  std::map<std::string, FloatTensor> bias;
  FloatTensor input;  // gradient with respect to the batch before quantization
};

/// Backpropagates grad_logits (gradient at st.logits_value) through the pass.
/// Fake quantization uses the straight-through estimator on activations and
/// identity on weights. The batch gradient is only formed when input_grad.
Gradients backward(const ModelGraph& g, const ForwardState& st, const FloatTensor& grad_logits,
                   bool input_grad = false);

struct LossResult {
  double loss = 0.0;
  FloatTensor grad;  // with respect to the logits
};

/// Mean softmax cross-entropy over the batch.
LossResult softmax_cross_entropy(const FloatTensor& logits, const Int32Tensor& labels);
/// Mean over the batch of the summed squared error.
LossResult mean_squared_error(const FloatTensor& output, const FloatTensor& targets);

/// Row-wise argmax of a [B, C] tensor.
std::vector<int32_t> argmax_rows(const FloatTensor& t);

struct SgdConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 0.0;
};

/// SGD with heavy-ball momentum: v = m v + g; w -= lr v.
class Sgd {
 public:
  explicit Sgd(SgdConfig cfg = {});
  void step(ModelGraph& g, const Gradients& grads);
  const SgdConfig& config() const noexcept { return cfg_; }

 private:
  SgdConfig cfg_;
  std::map<std::string, std::vector<float>> velocity_;
};

}  // namespace oaq

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


// Quantization-overflow-aware calibration: fake quantization, the alpha
// update rule and the training step with its 16-bit shadow measurement.

#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "oaq/accumulator.hpp"
#include "oaq/datasets.hpp"
#include "oaq/executor.hpp"
#include "oaq/graph.hpp"

namespace oaq {

struct CalibConfig {
  double lr_i = 0.05;  // increase rate, decayed per update event
  double lr_d = 0.001;
  double l_c = 0.2;  // cap on a single increase
  int update_every = 10;
  double lr_i_decay = 0.99;
  double alpha_init = 1.0;
  bool skip_first_layer_weights = false;
  /// Alpha stays fixed for this trailing fraction of the scheduled steps.
  double freeze_fraction = 0.1;
  /// Accumulator used by the shadow overflow measurement.
  AccumulatorConfig shadow{};

  /// Throws InvalidArgumentError on a non-positive rate or period.
  void validate() const;
};

/// lr_i * lr_i_decay^floor(step / update_every).
double lr_i_at(const CalibConfig& cfg, int64_t step);

/// One alpha update from an overflow count. Positive counts add
/// min(lr_i(step) * ln(n_o), l_c), with a single overflow adding
/// min(lr_i(step), l_c); zero subtracts lr_d down to a floor of 1.
double update_alpha(double alpha, uint64_t n_o, const CalibConfig& cfg, int64_t step);

/// dequantize(quantize(t, p), p).
FloatTensor fake_quant_forward(const FloatTensor& t, const QuantParams& p);
/// Straight-through gradient: grad where t rounds into the effective range,
/// zero where quantization clamps.
FloatTensor fake_quant_backward(const FloatTensor& grad, const FloatTensor& t,
                                const QuantParams& p);
bool ste_passes(double r, const QuantParams& p);

/// Replays every weighted layer of a quantized forward pass with real
/// integer tensors in the given accumulator and returns N_o per layer.
/// Centered weights outside int8 count as one event each.
std::map<std::string, OverflowReport> shadow_overflow(const ModelGraph& g, const ForwardState& st,
                                                      const AccumulatorConfig& acc);

/// Summed N_o per activation record over the weighted layers it feeds.
std::map<std::string, uint64_t> record_overflow(
    const ModelGraph& g, const std::map<std::string, OverflowReport>& layer_reports);

/// Applies update_alpha to every weight and activation record.
void apply_alpha_updates(ModelGraph& g, const std::map<std::string, OverflowReport>& layer_reports,
                         const CalibConfig& cfg, int64_t step);

struct QoatStepResult {
  double loss = 0.0;
  bool shadow_ran = false;
  bool alpha_updated = false;
  std::map<std::string, OverflowReport> reports;  // per weighted layer
};

/// One training step on a batch. Runs the fake-quantized forward pass with
/// observer updates, backpropagates, and every update_every steps measures
/// N_o with the shadow path and updates alpha (unless frozen by
/// total_steps and freeze_fraction). Throws NumericError on a non-finite
/// loss.
QoatStepResult qoat_step(ModelGraph& g, const Dataset& batch, const CalibConfig& cfg, int64_t step,
                         Sgd& opt, int64_t total_steps = 0);

}  // namespace oaq

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


// Integer-only inference over a calibrated ModelGraph.

#pragma once

#include <map>
#include <string>

#include "oaq/accumulator.hpp"
#include "oaq/graph.hpp"
#include "oaq/qconv.hpp"
#include "oaq/qgemm.hpp"

namespace oaq {

struct IntegerModel {
  ModelGraph graph;
  /// Params of every record owner.
  std::map<std::string, QuantParams> params;
  /// One plan per weighted layer; FC plans leave the geometry at its default.
  std::map<std::string, QConvPlan> plans;

  /// Params that quantize `value`, following aliases.
  const QuantParams& value_params(const std::string& value) const;
};

/// Freezes the graph's records and weights into integer plans. Fused
/// ReLU/ReLU6 tighten the clamp of the producing layer. Throws when a record
/// was never observed or a multiplier leaves (0, 1).
IntegerModel compile_integer_model(const ModelGraph& g);

struct InferenceOptions {
  AccumulatorConfig acc{};
  /// Per weighted layer injection settings.
  std::map<std::string, OverflowInjection> injections;
};

struct InferenceResult {
  FloatTensor output;  // probabilities for a softmax head, else dequantized
  FloatTensor logits;  // dequantized softmax input, or the output
  std::map<std::string, OverflowReport> layer_reports;
  OverflowReport total;  // counts only
};

InferenceResult run_integer(const IntegerModel& m, const FloatTensor& batch,
                            const InferenceOptions& opt = {});

}  // namespace oaq

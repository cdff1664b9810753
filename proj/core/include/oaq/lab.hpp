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


// Overflow studies: Monte Carlo non-overflow ratio, injection sweeps and the
// per-layer alpha table.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "oaq/accumulator.hpp"
#include "oaq/datasets.hpp"
#include "oaq/graph.hpp"
#include "oaq/integer_model.hpp"

namespace oaq {

enum class OperandDistribution { kUniform, kTruncatedNormal };

const char* distribution_name(OperandDistribution d);
OperandDistribution distribution_from_name(const std::string& name);

struct McConfig {
  std::vector<int> bits{4, 5, 6, 7, 8};
  std::vector<int64_t> depths{9, 64, 256, 1024};
  int64_t trials = 100000;
  int accumulator_bits = 16;
  uint64_t seed = 0;
  OperandDistribution distribution = OperandDistribution::kUniform;
  int threads = 1;

  void validate() const;
};

struct McCell {
  int bits = 0;
  int64_t depth = 0;
  int64_t trials = 0;
  int64_t non_overflow = 0;

  double ratio() const { return static_cast<double>(non_overflow) / static_cast<double>(trials); }
  /// Binomial standard error of ratio().
  double std_error() const;
};

/// One cell per (bits, depth) in bits-major order. Every trial draws its
/// operands from its own counter-based stream, so the table does not depend
/// on the thread count.
std::vector<McCell> mc_non_overflow_ratio(const McConfig& cfg);

/// True when the single trial overflows; exposed for tests.
bool mc_trial_overflows(int bits, int64_t depth, int accumulator_bits, uint64_t seed,
                        uint32_t trial, OperandDistribution dist);

struct InjectionSpec {
  /// "all", "first", "second", "last", or a comma list of layer names or
  /// zero-based weighted-layer indices.
  std::string target_layers = "all";
  std::vector<double> ratios{0.0};
  OverflowPolicy mode = OverflowPolicy::kWrap;
  InjectionSite site = InjectionSite::kStep;
  uint64_t seed = 0;

  void validate() const;
};

/// Weighted layer names selected by an InjectionSpec selector.
std::vector<std::string> resolve_layer_selector(const ModelGraph& g, const std::string& selector);

struct InjectionPoint {
  double ratio = 0.0;
  double accuracy = 0.0;
  uint64_t events = 0;
};

/// Integer inference on eval_set once per ratio with injection in the
/// targeted layers (salt = weighted-layer index).
std::vector<InjectionPoint> inject_overflow(const IntegerModel& m, const InjectionSpec& spec,
                                            const Dataset& eval_set,
                                            const AccumulatorConfig& base = {});

/// Accuracy of integer inference, with the per-layer reports.
struct IntegerEval {
  double accuracy = 0.0;
  std::map<std::string, OverflowReport> layer_reports;
  uint64_t events = 0;
};
IntegerEval evaluate_integer(const IntegerModel& m, const Dataset& data,
                             const InferenceOptions& opt = {}, int64_t batch_size = 0);

struct AlphaRow {
  std::string layer;
  std::string kind;
  double weight_alpha = 1.0;
  int weight_bits = 8;
  double activation_alpha = 1.0;  // alpha of the record feeding the layer
  int activation_bits = 8;

  double weight_effective_bits() const;
  double activation_effective_bits() const;
};

/// b - log2(alpha).
double effective_bits(int bits, double alpha);

/// One row per weighted layer in execution order.
std::vector<AlphaRow> alpha_report(const ModelGraph& g);

}  // namespace oaq

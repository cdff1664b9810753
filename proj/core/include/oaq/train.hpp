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


#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "oaq/datasets.hpp"
#include "oaq/executor.hpp"
#include "oaq/graph.hpp"
#include "oaq/qoat.hpp"

namespace oaq {

struct TrainConfig {
  int64_t batch_size = 32;
  SgdConfig sgd;
  /// False trains the float baseline: no fake quantization, no alpha updates.
  bool quantize = true;
  /// Stops after this many steps when positive.
  int64_t max_steps = 0;
  uint64_t seed = 0;
  int activation_bits = 8;
  int weight_bits = 8;
  CalibConfig calib;
};

/// Snapshot taken at every shadow measurement.
struct CalibEvent {
  int64_t step = 0;
  std::map<std::string, uint64_t> layer_overflow;
  std::map<std::string, double> weight_alpha;
  std::map<std::string, double> activation_alpha;
};

struct TrainResult {
  int64_t steps = 0;
  std::vector<double> losses;
  std::vector<CalibEvent> events;
};

/// Minibatch training with qoat_step (or plain float steps). The graph is
/// updated in place. Zero epochs only initializes the observers from one
/// pass over the data. A graph whose observers were never initialized
/// starts from calib.alpha_init and the configured bit widths.
TrainResult train_toy(ModelGraph& g, const Dataset& data, int epochs, const TrainConfig& cfg);

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;
  int64_t examples = 0;
};

/// Float evaluation, optionally with fake quantization from the current
/// records.
EvalResult evaluate(const ModelGraph& g, const Dataset& data, bool quantized,
                    int64_t batch_size = 256);

}  // namespace oaq

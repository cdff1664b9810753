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


#include "oaq/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oaq/random.hpp"

namespace oaq {
namespace {

std::vector<int64_t> shuffled(int64_t n, uint64_t seed, uint32_t epoch) {
  std::vector<int64_t> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  PhiloxStream rng(seed, 0x73687566u, epoch);
  for (int64_t i = n - 1; i > 0; --i) {
    const int64_t j = rng.uniform_int(0, static_cast<int32_t>(i));
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
  }
  return idx;
}

bool any_observed(const ModelGraph& g) {
  for (const auto& [name, rec] : g.records()) {
    if (rec.ready()) return true;
  }
  return false;
}

void reset_quant_state(ModelGraph& g, const TrainConfig& cfg) {
  for (auto& [name, rec] : g.records()) {
    rec.alpha = cfg.calib.alpha_init;
    rec.bits = cfg.activation_bits;
  }
  for (auto& [name, w] : g.all_weights()) {
    w.quant.alpha = cfg.calib.alpha_init;
    w.quant.bits = cfg.weight_bits;
  }
}

LossResult loss_for(const Dataset& batch, const FloatTensor& logits) {
  return batch.classes > 0 ? softmax_cross_entropy(logits, batch.labels)
                           : mean_squared_error(logits, batch.targets);
}

CalibEvent snapshot(const ModelGraph& g, int64_t step,
                    const std::map<std::string, OverflowReport>& reports) {
  CalibEvent e;
  e.step = step;
  for (const auto& [name, r] : reports) e.layer_overflow[name] = r.events;
  for (const auto& [name, w] : g.all_weights()) e.weight_alpha[name] = w.quant.alpha;
  for (const auto& [name, rec] : g.records()) e.activation_alpha[name] = rec.alpha;
  return e;
}

}  // namespace

TrainResult train_toy(ModelGraph& g, const Dataset& data, int epochs, const TrainConfig& cfg) {
  data.validate();
  if (epochs < 0 || cfg.batch_size < 1) throw InvalidArgumentError("invalid training schedule");
  if (data.size() == 0) throw InvalidArgumentError("training set is empty");
  cfg.calib.validate();
  if (!g.finalized()) g.finalize(cfg.activation_bits, cfg.weight_bits, cfg.calib.alpha_init);
  if (cfg.quantize && !any_observed(g)) reset_quant_state(g, cfg);

  const int64_t n = data.size();
  const int64_t per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  TrainResult result;

  if (epochs == 0) {
    ForwardOptions fo;
    fo.observe = true;
    for (int64_t b = 0; b < per_epoch; ++b) {
      const int64_t begin = b * cfg.batch_size;
      forward(g, data.slice(begin, std::min(cfg.batch_size, n - begin)).inputs, fo);
    }
    return result;
  }

  int64_t total = per_epoch * epochs;
  if (cfg.max_steps > 0) total = std::min(total, cfg.max_steps);
  Sgd opt(cfg.sgd);
  int64_t step = 0;
  for (int epoch = 0; epoch < epochs && step < total; ++epoch) {
    const auto order = shuffled(n, cfg.seed, static_cast<uint32_t>(epoch));
    for (int64_t b = 0; b < per_epoch && step < total; ++b, ++step) {
      const int64_t begin = b * cfg.batch_size;
      const int64_t count = std::min(cfg.batch_size, n - begin);
      const Dataset batch = data.gather(std::vector<int64_t>(
          order.begin() + begin, order.begin() + begin + count));
      if (cfg.quantize) {
        const QoatStepResult r = qoat_step(g, batch, cfg.calib, step, opt, total);
        result.losses.push_back(r.loss);
        if (r.shadow_ran) result.events.push_back(snapshot(g, step, r.reports));
      } else {
        ForwardOptions fo;
        fo.quantize = false;
        const ForwardState st = forward(g, batch.inputs, fo);
        const LossResult loss = loss_for(batch, st.values.at(st.logits_value));
        if (!std::isfinite(loss.loss)) {
          throw NumericError("non-finite loss at step " + std::to_string(step));
        }
        result.losses.push_back(loss.loss);
        opt.step(g, backward(g, st, loss.grad));
      }
    }
  }
  result.steps = step;
  return result;
}

EvalResult evaluate(const ModelGraph& g, const Dataset& data, bool quantized, int64_t batch_size) {
  data.validate();
  if (batch_size < 1) throw InvalidArgumentError("batch size must be positive");
  ForwardOptions fo;
  fo.quantize = quantized;
  EvalResult r;
  int64_t correct = 0;
  double loss = 0.0;
  for (int64_t begin = 0; begin < data.size(); begin += batch_size) {
    const int64_t count = std::min(batch_size, data.size() - begin);
    const Dataset batch = data.slice(begin, count);
    const ForwardState st = forward(g, batch.inputs, fo);
    const FloatTensor& logits = st.values.at(st.logits_value);
    loss += loss_for(batch, logits).loss * static_cast<double>(count);
    if (batch.classes > 0) {
      const auto pred = argmax_rows(logits);
      for (int64_t i = 0; i < count; ++i) correct += pred[static_cast<size_t>(i)] == batch.labels[i];
    }
  }
  r.examples = data.size();
  r.loss = loss / static_cast<double>(r.examples);
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.examples);
  return r;
}

}  // namespace oaq

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


#include "oaq/qoat.hpp"

#include <algorithm>
#include <cmath>

#include "oaq/qconv.hpp"
#include "oaq/qgemm.hpp"

namespace oaq {
namespace {

struct CenteredWeights {
  Int8Tensor values;  // same shape as the weight tensor
  uint64_t violations = 0;
};

CenteredWeights center_weights(const FloatTensor& w, const QuantParams& p) {
  CenteredWeights out{Int8Tensor(w.shape()), 0};
  for (int64_t i = 0; i < w.numel(); ++i) {
    const int32_t c = quantize_value(w[i], p) - p.zero_point;
    if (c < -128 || c > 127) ++out.violations;
    out.values[i] = static_cast<int8_t>(std::clamp(c, -128, 127));
  }
  return out;
}

OverflowReport shadow_layer(const ModelGraph& g, const LayerSpec& l, const ForwardState& st,
                            const AccumulatorConfig& acc) {
  const auto owner = g.record_owner(l.inputs[0]);
  const auto ap = owner ? st.act_params.find(*owner) : st.act_params.end();
  const auto wp = st.weight_params.find(l.name);
  if (ap == st.act_params.end() || wp == st.weight_params.end()) {
    throw InvalidArgumentError("shadow pass needs a quantized forward pass for layer " + l.name);
  }
  const Int8Tensor q_a = quantize(st.values.at(l.inputs[0]), ap->second);
  const CenteredWeights cw = center_weights(g.weights(l.name).weight, wp->second);

  OverflowReport report;
  if (l.kind == LayerKind::kFullyConnected) {
    const auto [rows, depth] = as_matrix_dims(q_a.shape());
    report = count_gemm_overflow(q_a.reshaped({rows, depth}), cw.values, acc);
  } else {
    const int groups = g.groups(l);
    const ConvGeometry geom{l.kernel, l.kernel, l.stride, l.pad, groups};
    const int64_t depth = cw.values.dim(0) * cw.values.dim(1) * cw.values.dim(2);
    const int64_t cout = cw.values.dim(3), cout_g = cout / groups;
    const Int8Tensor flat = cw.values.reshaped({depth, cout});
    for (int grp = 0; grp < groups; ++grp) {
      Int8Tensor wg({depth, cout_g});
      for (int64_t j = 0; j < depth; ++j) {
        for (int64_t c = 0; c < cout_g; ++c) wg.at(j, c) = flat.at(j, grp * cout_g + c);
      }
      const Int8Tensor cols =
          im2col(q_a, geom, grp, static_cast<int8_t>(ap->second.zero_point));
      report.merge_counts(count_gemm_overflow(cols, wg, acc));
    }
  }
  report.events += cw.violations;
  report.per_output_flags.clear();
  return report;
}

}  // namespace

void CalibConfig::validate() const {
  if (!(lr_i > 0.0) || !(lr_d > 0.0) || !(l_c > 0.0)) {
    throw InvalidArgumentError("alpha learning rates must be positive");
  }
  if (update_every < 1) throw InvalidArgumentError("update_every must be >= 1");
  if (!(lr_i_decay > 0.0 && lr_i_decay <= 1.0)) {
    throw InvalidArgumentError("lr_i_decay must lie in (0, 1]");
  }
  if (!(alpha_init >= 1.0)) throw InvalidArgumentError("alpha_init must be >= 1");
  if (!(freeze_fraction >= 0.0 && freeze_fraction < 1.0)) {
    throw InvalidArgumentError("freeze_fraction must lie in [0, 1)");
  }
}

double lr_i_at(const CalibConfig& cfg, int64_t step) {
  const int64_t events = std::max<int64_t>(step, 0) / cfg.update_every;
  return cfg.lr_i * std::pow(cfg.lr_i_decay, static_cast<double>(events));
}

double update_alpha(double alpha, uint64_t n_o, const CalibConfig& cfg, int64_t step) {
  if (n_o == 0) return std::max(1.0, alpha - cfg.lr_d);
  const double lr = lr_i_at(cfg, step);
  const double inc = n_o == 1 ? lr : lr * std::log(static_cast<double>(n_o));
  return std::max(1.0, alpha + std::min(inc, cfg.l_c));
}

FloatTensor fake_quant_forward(const FloatTensor& t, const QuantParams& p) {
  FloatTensor out(t.shape());
  for (int64_t i = 0; i < t.numel(); ++i) {
    out[i] = static_cast<float>(dequantize_value(quantize_value(t[i], p), p));
  }
  return out;
}

bool ste_passes(double r, const QuantParams& p) {
  const double q = r / p.effective_scale() + p.zero_point;
  return q >= p.qmin() - 0.5 && q <= p.qmax() + 0.5;
}

FloatTensor fake_quant_backward(const FloatTensor& grad, const FloatTensor& t,
                                const QuantParams& p) {
  if (grad.shape() != t.shape()) throw ShapeError("gradient and input shapes differ");
  FloatTensor out(t.shape());
  for (int64_t i = 0; i < t.numel(); ++i) out[i] = ste_passes(t[i], p) ? grad[i] : 0.0f;
  return out;
}

std::map<std::string, OverflowReport> shadow_overflow(const ModelGraph& g, const ForwardState& st,
                                                      const AccumulatorConfig& acc) {
  AccumulatorConfig cfg = acc;
  cfg.count_events = true;
  std::map<std::string, OverflowReport> out;
  for (const LayerSpec* l : g.weighted_layers()) out[l->name] = shadow_layer(g, *l, st, cfg);
  return out;
}

std::map<std::string, uint64_t> record_overflow(
    const ModelGraph& g, const std::map<std::string, OverflowReport>& layer_reports) {
  std::map<std::string, uint64_t> out;
  for (const auto& [owner, rec] : g.records()) out[owner] = 0;
  for (const LayerSpec* l : g.weighted_layers()) {
    const auto owner = g.record_owner(l->inputs[0]);
    const auto it = layer_reports.find(l->name);
    if (owner && it != layer_reports.end()) out[*owner] += it->second.events;
  }
  return out;
}

void apply_alpha_updates(ModelGraph& g, const std::map<std::string, OverflowReport>& layer_reports,
                         const CalibConfig& cfg, int64_t step) {
  const auto weighted = g.weighted_layers();
  for (size_t i = 0; i < weighted.size(); ++i) {
    if (i == 0 && cfg.skip_first_layer_weights) continue;
    const auto it = layer_reports.find(weighted[i]->name);
    const uint64_t n_o = it == layer_reports.end() ? 0 : it->second.events;
    WeightRecord& w = g.weights(weighted[i]->name).quant;
    w.alpha = update_alpha(w.alpha, n_o, cfg, step);
  }
  for (const auto& [owner, n_o] : record_overflow(g, layer_reports)) {
    ActivationRecord& rec = g.record(owner);
    rec.alpha = update_alpha(rec.alpha, n_o, cfg, step);
  }
}

QoatStepResult qoat_step(ModelGraph& g, const Dataset& batch, const CalibConfig& cfg, int64_t step,
                         Sgd& opt, int64_t total_steps) {
  cfg.validate();
  ForwardOptions fo;
  fo.quantize = true;
  fo.observe = true;
  ForwardState st = forward(g, batch.inputs, fo);

  const FloatTensor& logits = st.values.at(st.logits_value);
  LossResult loss = batch.classes > 0 ? softmax_cross_entropy(logits, batch.labels)
                                      : mean_squared_error(logits, batch.targets);
  if (!std::isfinite(loss.loss)) {
    throw NumericError("non-finite loss at step " + std::to_string(step));
  }
  QoatStepResult result;
  result.loss = loss.loss;
  const Gradients grads = backward(g, st, loss.grad);

  if ((step + 1) % cfg.update_every == 0) {
    result.reports = shadow_overflow(g, st, cfg.shadow);
    result.shadow_ran = true;
    const int64_t freeze_at =
        total_steps > 0
            ? static_cast<int64_t>(std::ceil(total_steps * (1.0 - cfg.freeze_fraction)))
            : -1;
    if (freeze_at < 0 || step < freeze_at) {
      apply_alpha_updates(g, result.reports, cfg, step);
      result.alpha_updated = true;
    }
  }
  opt.step(g, grads);
  return result;
}

}  // namespace oaq

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


#include "oaq/integer_model.hpp"

#include <algorithm>
#include <cmath>

namespace oaq {
namespace {

constexpr int kAddPrescale = 16;

int8_t clamp_to(int64_t q, const QuantParams& p) {
  return static_cast<int8_t>(std::clamp<int64_t>(q, p.qmin(), p.qmax()));
}

Shape batched(int64_t batch, const Shape& sample) {
  Shape s{batch};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

Int8Tensor requant_tensor(const Int8Tensor& x, const QuantParams& pi, const QuantParams& po) {
  if (pi == po) return x;
  const Rescale r = compile_rescale(pi.effective_scale() / po.effective_scale());
  Int8Tensor y(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) {
    y[i] = clamp_to(po.zero_point + apply_rescale(int64_t{x[i]} - pi.zero_point, r), po);
  }
  return y;
}

FloatTensor softmax_rows(const FloatTensor& x) {
  FloatTensor y(x.shape());
  const int64_t cols = x.shape().back(), rows = x.numel() / cols;
  for (int64_t r = 0; r < rows; ++r) {
    const float* xr = x.data().data() + r * cols;
    float* yr = y.data().data() + r * cols;
    const float m = *std::max_element(xr, xr + cols);
    double sum = 0.0;
    for (int64_t c = 0; c < cols; ++c) sum += yr[c] = std::exp(xr[c] - m);
    for (int64_t c = 0; c < cols; ++c) yr[c] = static_cast<float>(yr[c] / sum);
  }
  return y;
}

}  // namespace

const QuantParams& IntegerModel::value_params(const std::string& value) const {
  const auto owner = graph.record_owner(value);
  if (!owner) throw InvalidArgumentError("value '" + value + "' is not quantized");
  return params.at(*owner);
}

IntegerModel compile_integer_model(const ModelGraph& g) {
  if (!g.finalized()) throw InvalidArgumentError("graph must be finalized");
  IntegerModel m;
  m.graph = g;
  for (const auto& [owner, rec] : g.records()) {
    if (!rec.ready()) throw InvalidArgumentError("record '" + owner + "' was never observed");
    m.params[owner] = rec.params();
  }
  for (const LayerSpec* l : g.weighted_layers()) {
    const LayerWeights& lw = g.weights(l->name);
    const QuantParams& pa = m.value_params(l->inputs[0]);
    const QuantParams pw = lw.params();
    const QuantParams& pc = m.params.at(g.output_record_value(*l));
    const Int8Tensor qw = quantize(lw.weight, pw);
    const Int32Tensor qbias = quantize_bias(lw.bias, pa, pw);
    QConvPlan plan;
    if (l->kind == LayerKind::kFullyConnected) {
      plan.in_channels = qw.dim(0);
      plan.out_channels = qw.dim(1);
      plan.gemm = build_plan(qw, pa, pw, pc, qbias);
    } else {
      const ConvGeometry geom{l->kernel, l->kernel, l->stride, l->pad, g.groups(*l)};
      plan = build_conv_plan(qw, geom, pa, pw, pc, qbias);
    }
    if (const auto act = g.fused_activation(*l)) {
      plan.gemm.out_min = std::max(plan.gemm.out_min, pc.zero_point);
      if (*act == LayerKind::kRelu6) {
        plan.gemm.out_max = std::min(plan.gemm.out_max, quantize_value(6.0, pc));
      }
    }
    m.plans[l->name] = std::move(plan);
  }
  return m;
}

InferenceResult run_integer(const IntegerModel& m, const FloatTensor& batch,
                            const InferenceOptions& opt) {
  const ModelGraph& g = m.graph;
  if (batch.rank() != g.input_shape().size() + 1 ||
      !std::equal(g.input_shape().begin(), g.input_shape().end(), batch.shape().begin() + 1)) {
    throw ShapeError("batch shape " + shape_string(batch.shape()) + " does not match input " +
                     shape_string(g.input_shape()));
  }
  const int64_t n = batch.dim(0);
  InferenceResult result;
  std::map<std::string, Int8Tensor> values;
  values[g.input_name()] = quantize(batch, m.value_params(g.input_name()));

  for (const LayerSpec& l : g.layers()) {
    const Int8Tensor& x = values.at(l.inputs[0]);
    const Shape out_shape = batched(n, g.value_shape(l.output));
    switch (l.kind) {
      case LayerKind::kFullyConnected:
      case LayerKind::kConv2d:
      case LayerKind::kDepthwiseConv2d: {
        const QConvPlan& plan = m.plans.at(l.name);
        AccumulatorConfig cfg = opt.acc;
        const auto inj = opt.injections.find(l.name);
        if (inj != opt.injections.end()) cfg.injection = inj->second;
        std::pair<Int8Tensor, OverflowReport> r;
        if (l.kind == LayerKind::kFullyConnected) {
          r = oaq_qgemm(x.reshaped({n, plan.in_channels}), plan.gemm, cfg);
        } else {
          r = oaq_conv2d(x, plan, cfg);
        }
        result.total.merge_counts(r.second);
        result.layer_reports[l.name] = std::move(r.second);
        values[l.output] = r.first.reshaped(out_shape);
        break;
      }
      case LayerKind::kRelu:
      case LayerKind::kRelu6: {
        const LayerSpec* p = g.producer(l.inputs[0]);
        if (p && is_weighted(p->kind) && g.fused_activation(*p)) {
          values[l.output] = x;  // already clamped by the producer
          break;
        }
        const QuantParams& pi = m.value_params(l.inputs[0]);
        Int8Tensor clipped(x.shape());
        const int32_t hi = l.kind == LayerKind::kRelu6 ? quantize_value(6.0, pi) : pi.qmax();
        for (int64_t i = 0; i < x.numel(); ++i) {
          clipped[i] = static_cast<int8_t>(std::clamp<int32_t>(x[i], pi.zero_point, hi));
        }
        values[l.output] = requant_tensor(clipped, pi, m.value_params(l.output));
        break;
      }
      case LayerKind::kAdd: {
        const QuantParams& po = m.value_params(l.output);
        std::vector<int64_t> acc(static_cast<size_t>(x.numel()), 0);
        for (const auto& name : l.inputs) {
          const QuantParams& pi = m.value_params(name);
          const Rescale r = compile_rescale(std::ldexp(
              pi.effective_scale() / po.effective_scale(), kAddPrescale));
          const Int8Tensor& xi = values.at(name);
          for (int64_t i = 0; i < xi.numel(); ++i) {
            acc[static_cast<size_t>(i)] += apply_rescale(int64_t{xi[i]} - pi.zero_point, r);
          }
        }
        Int8Tensor y(out_shape);
        const int64_t half = int64_t{1} << (kAddPrescale - 1);
        for (int64_t i = 0; i < y.numel(); ++i) {
          const int64_t a = acc[static_cast<size_t>(i)];
          const int64_t s = a >= 0 ? (a + half) >> kAddPrescale : -((-a + half) >> kAddPrescale);
          y[i] = clamp_to(po.zero_point + s, po);
        }
        values[l.output] = std::move(y);
        break;
      }
      case LayerKind::kConcat: {
        const QuantParams& po = m.value_params(l.output);
        Int8Tensor y(out_shape);
        const int64_t total = out_shape.back(), rows = y.numel() / total;
        int64_t offset = 0;
        for (const auto& name : l.inputs) {
          const Int8Tensor part = requant_tensor(values.at(name), m.value_params(name), po);
          const int64_t width = part.shape().back();
          for (int64_t r = 0; r < rows; ++r) {
            std::copy_n(part.data().data() + r * width, width,
                        y.data().data() + r * total + offset);
          }
          offset += width;
        }
        values[l.output] = std::move(y);
        break;
      }
      case LayerKind::kMaxPool:
      case LayerKind::kAvgPool: {
        const int64_t h = x.dim(1), w = x.dim(2), c = x.dim(3);
        const int64_t oh = out_shape[1], ow = out_shape[2];
        const QuantParams& pi = m.value_params(l.inputs[0]);
        const QuantParams& po = m.value_params(l.output);
        const bool is_max = l.kind == LayerKind::kMaxPool;
        const Rescale r = is_max ? Rescale{}
                                 : compile_rescale(pi.effective_scale() /
                                                   (po.effective_scale() * l.kernel * l.kernel));
        Int8Tensor y(out_shape);
        for (int64_t b = 0; b < n; ++b) {
          for (int64_t i = 0; i < oh; ++i) {
            for (int64_t j = 0; j < ow; ++j) {
              for (int64_t ch = 0; ch < c; ++ch) {
                int64_t acc = is_max ? -129 : 0;
                for (int kh = 0; kh < l.kernel; ++kh) {
                  for (int kw = 0; kw < l.kernel; ++kw) {
                    const int64_t v =
                        x[((b * h + i * l.stride + kh) * w + j * l.stride + kw) * c + ch];
                    acc = is_max ? std::max(acc, v) : acc + (v - pi.zero_point);
                  }
                }
                y[((b * oh + i) * ow + j) * c + ch] =
                    is_max ? static_cast<int8_t>(acc)
                           : clamp_to(po.zero_point + apply_rescale(acc, r), po);
              }
            }
          }
        }
        values[l.output] = std::move(y);
        break;
      }
      case LayerKind::kPad: {
        const int64_t h = x.dim(1), w = x.dim(2), c = x.dim(3);
        Int8Tensor y(out_shape, static_cast<int8_t>(m.value_params(l.inputs[0]).zero_point));
        for (int64_t b = 0; b < n; ++b) {
          for (int64_t i = 0; i < h; ++i) {
            std::copy_n(x.data().data() + (b * h + i) * w * c, w * c,
                        y.data().data() + ((b * out_shape[1] + i + l.pad) * out_shape[2] + l.pad) * c);
          }
        }
        values[l.output] = std::move(y);
        break;
      }
      case LayerKind::kSoftmax:
        result.logits = dequantize(x, m.value_params(l.inputs[0]));
        result.output = softmax_rows(result.logits);
        break;
    }
  }
  if (result.output.empty()) {
    result.logits = dequantize(values.at(g.output_name()), m.value_params(g.output_name()));
    result.output = result.logits;
  }
  return result;
}

}  // namespace oaq

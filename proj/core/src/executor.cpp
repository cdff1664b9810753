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


#include "oaq/executor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "oaq/qoat.hpp"

namespace oaq {
namespace {

Shape batched(int64_t batch, const Shape& sample) {
  Shape s{batch};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

struct Spatial {
  int64_t b, h, w, c;
};

Spatial spatial(const FloatTensor& t) {
  if (t.rank() != 4) throw ShapeError("expected an NHWC tensor, got " + shape_string(t.shape()));
  return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
}

// Weights [KH, KW, Cin/groups, Cout]; zero padding.
void conv_forward(const FloatTensor& x, const FloatTensor& w, const FloatTensor& bias,
                  const LayerSpec& l, int groups, FloatTensor& y) {
  const Spatial in = spatial(x);
  const Spatial out = spatial(y);
  const int64_t k = l.kernel, cin_g = w.dim(2), cout = w.dim(3), cout_g = cout / groups;
  const float* xp = x.data().data();
  const float* wp = w.data().data();
  float* yp = y.data().data();
  for (int64_t b = 0; b < out.b; ++b) {
    for (int64_t oh = 0; oh < out.h; ++oh) {
      for (int64_t ow = 0; ow < out.w; ++ow) {
        float* yrow = yp + ((b * out.h + oh) * out.w + ow) * cout;
        for (int64_t oc = 0; oc < cout; ++oc) yrow[oc] = bias[oc];
        for (int64_t kh = 0; kh < k; ++kh) {
          const int64_t ih = oh * l.stride - l.pad + kh;
          if (ih < 0 || ih >= in.h) continue;
          for (int64_t kw = 0; kw < k; ++kw) {
            const int64_t iw = ow * l.stride - l.pad + kw;
            if (iw < 0 || iw >= in.w) continue;
            const float* xpix = xp + ((b * in.h + ih) * in.w + iw) * in.c;
            for (int64_t g = 0; g < groups; ++g) {
              for (int64_t ci = 0; ci < cin_g; ++ci) {
                const float xv = xpix[g * cin_g + ci];
                if (xv == 0.0f) continue;
                const float* wrow = wp + ((kh * k + kw) * cin_g + ci) * cout + g * cout_g;
                float* yg = yrow + g * cout_g;
                for (int64_t oc = 0; oc < cout_g; ++oc) yg[oc] += xv * wrow[oc];
              }
            }
          }
        }
      }
    }
  }
}

void conv_backward(const FloatTensor& x, const FloatTensor& w, const FloatTensor& dy,
                   const LayerSpec& l, int groups, FloatTensor& dx, FloatTensor& dw,
                   FloatTensor& db) {
  const Spatial in = spatial(x);
  const Spatial out = spatial(dy);
  const int64_t k = l.kernel, cin_g = w.dim(2), cout = w.dim(3), cout_g = cout / groups;
  const float* xp = x.data().data();
  const float* wp = w.data().data();
  float* dxp = dx.data().data();
  float* dwp = dw.data().data();
  for (int64_t b = 0; b < out.b; ++b) {
    for (int64_t oh = 0; oh < out.h; ++oh) {
      for (int64_t ow = 0; ow < out.w; ++ow) {
        const float* drow = dy.data().data() + ((b * out.h + oh) * out.w + ow) * cout;
        for (int64_t oc = 0; oc < cout; ++oc) db[oc] += drow[oc];
        for (int64_t kh = 0; kh < k; ++kh) {
          const int64_t ih = oh * l.stride - l.pad + kh;
          if (ih < 0 || ih >= in.h) continue;
          for (int64_t kw = 0; kw < k; ++kw) {
            const int64_t iw = ow * l.stride - l.pad + kw;
            if (iw < 0 || iw >= in.w) continue;
            const int64_t pix = ((b * in.h + ih) * in.w + iw) * in.c;
            for (int64_t g = 0; g < groups; ++g) {
              const float* dg = drow + g * cout_g;
              for (int64_t ci = 0; ci < cin_g; ++ci) {
                const int64_t woff = ((kh * k + kw) * cin_g + ci) * cout + g * cout_g;
                const float xv = xp[pix + g * cin_g + ci];
                float acc = 0.0f;
                for (int64_t oc = 0; oc < cout_g; ++oc) {
                  acc += dg[oc] * wp[woff + oc];
                  dwp[woff + oc] += xv * dg[oc];
                }
                dxp[pix + g * cin_g + ci] += acc;
              }
            }
          }
        }
      }
    }
  }
}

void fc_forward(const FloatTensor& x, const FloatTensor& w, const FloatTensor& bias,
                FloatTensor& y) {
  const int64_t batch = y.dim(0), in = w.dim(0), out = w.dim(1);
  const float* xp = x.data().data();
  const float* wp = w.data().data();
  for (int64_t b = 0; b < batch; ++b) {
    float* yrow = y.data().data() + b * out;
    for (int64_t o = 0; o < out; ++o) yrow[o] = bias[o];
    for (int64_t i = 0; i < in; ++i) {
      const float xv = xp[b * in + i];
      if (xv == 0.0f) continue;
      const float* wrow = wp + i * out;
      for (int64_t o = 0; o < out; ++o) yrow[o] += xv * wrow[o];
    }
  }
}

// Eight interleaved partial sums so the reduction vectorizes in a fixed order.
float dot(const float* a, const float* b, int64_t n) {
  float part[8] = {};
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (int k = 0; k < 8; ++k) part[k] += a[i + k] * b[i + k];
  }
  for (; i < n; ++i) part[0] += a[i] * b[i];
  return ((part[0] + part[1]) + (part[2] + part[3])) + ((part[4] + part[5]) + (part[6] + part[7]));
}

void fc_backward(const FloatTensor& x, const FloatTensor& w, const FloatTensor& dy, bool need_dx,
                 FloatTensor& dx, FloatTensor& dw, FloatTensor& db) {
  const int64_t batch = dy.dim(0), in = w.dim(0), out = w.dim(1);
  const float* xp = x.data().data();
  const float* wp = w.data().data();
  float* dwp = dw.data().data();
  for (int64_t b = 0; b < batch; ++b) {
    const float* drow = dy.data().data() + b * out;
    for (int64_t o = 0; o < out; ++o) db[o] += drow[o];
    for (int64_t i = 0; i < in; ++i) {
      const float* wrow = wp + i * out;
      float* dwrow = dwp + i * out;
      const float xv = xp[b * in + i];
      if (xv != 0.0f) {
        for (int64_t o = 0; o < out; ++o) dwrow[o] += xv * drow[o];
      }
      if (need_dx) dx[b * in + i] += dot(drow, wrow, out);
    }
  }
}

// Calls fn(out_index, in_index) for every window element of a pooling layer.
template <typename Fn>
void for_each_window(const Spatial& in, const Spatial& out, const LayerSpec& l, Fn&& fn) {
  for (int64_t b = 0; b < out.b; ++b) {
    for (int64_t oh = 0; oh < out.h; ++oh) {
      for (int64_t ow = 0; ow < out.w; ++ow) {
        for (int64_t c = 0; c < out.c; ++c) {
          const int64_t o = ((b * out.h + oh) * out.w + ow) * out.c + c;
          for (int64_t kh = 0; kh < l.kernel; ++kh) {
            for (int64_t kw = 0; kw < l.kernel; ++kw) {
              const int64_t ih = oh * l.stride + kh, iw = ow * l.stride + kw;
              fn(o, ((b * in.h + ih) * in.w + iw) * in.c + c);
            }
          }
        }
      }
    }
  }
}

bool fake_quantized_here(const ModelGraph& g, const std::string& value, const ForwardOptions& opt) {
  return opt.quantize && g.has_record(value) &&
         (opt.only_records == nullptr || opt.only_records->count(value) > 0);
}

ForwardState run_forward(ModelGraph& g, const FloatTensor& batch, const ForwardOptions& opt) {
  if (!g.finalized()) throw InvalidArgumentError("graph must be finalized before execution");
  if (batch.rank() != g.input_shape().size() + 1 ||
      !std::equal(g.input_shape().begin(), g.input_shape().end(), batch.shape().begin() + 1)) {
    throw ShapeError("batch shape " + shape_string(batch.shape()) + " does not match input " +
                     shape_string(g.input_shape()));
  }
  ForwardState st;
  st.batch = batch.dim(0);

  auto settle = [&](const std::string& value, FloatTensor t) {
    if (fake_quantized_here(g, value, opt)) {
      ActivationRecord& rec = g.record(value);
      if (opt.observe) rec.observer = observe_range(rec.observer, t);
      const QuantParams p = rec.params();
      FloatTensor q = fake_quant_forward(t, p);
      st.pre_quant[value] = std::move(t);
      st.act_params[value] = p;
      t = std::move(q);
    }
    st.values[value] = std::move(t);
  };

  settle(g.input_name(), batch);
  for (const LayerSpec& l : g.layers()) {
    const FloatTensor& x = st.values.at(l.inputs[0]);
    FloatTensor y(batched(st.batch, g.value_shape(l.output)));
    switch (l.kind) {
      case LayerKind::kFullyConnected:
      case LayerKind::kConv2d:
      case LayerKind::kDepthwiseConv2d: {
        const LayerWeights& lw = g.weights(l.name);
        FloatTensor w = lw.weight;
        if (opt.quantize && opt.quantize_weights) {
          const QuantParams wp = lw.params();
          w = fake_quant_forward(lw.weight, wp);
          st.weight_params[l.name] = wp;
        }
        if (l.kind == LayerKind::kFullyConnected) {
          fc_forward(x, w, lw.bias, y);
        } else {
          conv_forward(x, w, lw.bias, l, g.groups(l), y);
        }
        st.used_weights[l.name] = std::move(w);
        break;
      }
      case LayerKind::kRelu:
        for (int64_t i = 0; i < y.numel(); ++i) y[i] = std::max(x[i], 0.0f);
        break;
      case LayerKind::kRelu6:
        for (int64_t i = 0; i < y.numel(); ++i) y[i] = std::clamp(x[i], 0.0f, 6.0f);
        break;
      case LayerKind::kAdd:
        y = x;
        for (size_t k = 1; k < l.inputs.size(); ++k) {
          const FloatTensor& other = st.values.at(l.inputs[k]);
          for (int64_t i = 0; i < y.numel(); ++i) y[i] += other[i];
        }
        break;
      case LayerKind::kConcat: {
        const int64_t rows = y.numel() / y.shape().back();
        int64_t offset = 0;
        for (const auto& name : l.inputs) {
          const FloatTensor& part = st.values.at(name);
          const int64_t width = part.shape().back();
          for (int64_t r = 0; r < rows; ++r) {
            std::copy_n(part.data().data() + r * width, width,
                        y.data().data() + r * y.shape().back() + offset);
          }
          offset += width;
        }
        break;
      }
      case LayerKind::kMaxPool: {
        std::vector<int64_t> arg(static_cast<size_t>(y.numel()), -1);
        std::fill(y.data().begin(), y.data().end(), -std::numeric_limits<float>::infinity());
        for_each_window(spatial(x), spatial(y), l, [&](int64_t o, int64_t i) {
          if (x[i] > y[o] || arg[static_cast<size_t>(o)] < 0) {
            y[o] = x[i];
            arg[static_cast<size_t>(o)] = i;
          }
        });
        st.argmax[l.name] = std::move(arg);
        break;
      }
      case LayerKind::kAvgPool: {
        const float inv = 1.0f / static_cast<float>(l.kernel * l.kernel);
        for_each_window(spatial(x), spatial(y), l, [&](int64_t o, int64_t i) { y[o] += x[i]; });
        for (float& v : y.data()) v *= inv;
        break;
      }
      case LayerKind::kPad: {
        const Spatial in = spatial(x), out = spatial(y);
        for (int64_t b = 0; b < in.b; ++b) {
          for (int64_t h = 0; h < in.h; ++h) {
            std::copy_n(x.data().data() + (b * in.h + h) * in.w * in.c, in.w * in.c,
                        y.data().data() + ((b * out.h + h + l.pad) * out.w + l.pad) * out.c);
          }
        }
        break;
      }
      case LayerKind::kSoftmax: {
        const int64_t cols = x.shape().back(), rows = x.numel() / cols;
        for (int64_t r = 0; r < rows; ++r) {
          const float* xr = x.data().data() + r * cols;
          float* yr = y.data().data() + r * cols;
          const float m = *std::max_element(xr, xr + cols);
          double sum = 0.0;
          for (int64_t c = 0; c < cols; ++c) sum += yr[c] = std::exp(xr[c] - m);
          for (int64_t c = 0; c < cols; ++c) yr[c] = static_cast<float>(yr[c] / sum);
        }
        st.logits_value = l.inputs[0];
        break;
      }
    }
    settle(l.output, std::move(y));
  }
  if (st.logits_value.empty()) st.logits_value = g.output_name();
  st.output = st.values.at(g.output_name());
  return st;
}

void accumulate_into(std::map<std::string, FloatTensor>& grads, const std::string& value,
                     const FloatTensor& g) {
  auto it = grads.find(value);
  if (it == grads.end()) {
    grads.emplace(value, g);
    return;
  }
  for (int64_t i = 0; i < g.numel(); ++i) it->second[i] += g[i];
}

}  // namespace

ForwardState forward(ModelGraph& g, const FloatTensor& batch, const ForwardOptions& opt) {
  return run_forward(g, batch, opt);
}

ForwardState forward(const ModelGraph& g, const FloatTensor& batch, const ForwardOptions& opt) {
  if (opt.observe) throw InvalidArgumentError("observing needs a mutable graph");
  // Without observation the pass never writes to the graph.
  return run_forward(const_cast<ModelGraph&>(g), batch, opt);
}

Gradients backward(const ModelGraph& g, const ForwardState& st, const FloatTensor& grad_logits,
                   bool input_grad) {
  std::map<std::string, FloatTensor> grads;
  grads.emplace(st.logits_value, grad_logits);
  Gradients out;

  // Gradient arriving at a value, routed through its fake quantization.
  auto take = [&](const std::string& value) -> std::optional<FloatTensor> {
    auto it = grads.find(value);
    if (it == grads.end()) return std::nullopt;
    FloatTensor gval = std::move(it->second);
    grads.erase(it);
    auto pq = st.pre_quant.find(value);
    if (pq != st.pre_quant.end()) {
      gval = fake_quant_backward(gval, pq->second, st.act_params.at(value));
    }
    return gval;
  };

  const auto& layers = g.layers();
  for (auto li = layers.rbegin(); li != layers.rend(); ++li) {
    const LayerSpec& l = *li;
    if (l.kind == LayerKind::kSoftmax) continue;  // folded into the loss
    auto dy_opt = take(l.output);
    if (!dy_opt) continue;
    const FloatTensor& dy = *dy_opt;
    const FloatTensor& x = st.values.at(l.inputs[0]);
    const bool need_dx = input_grad || l.inputs[0] != g.input_name();
    FloatTensor dx(x.shape());
    switch (l.kind) {
      case LayerKind::kFullyConnected:
      case LayerKind::kConv2d:
      case LayerKind::kDepthwiseConv2d: {
        const FloatTensor& w = st.used_weights.at(l.name);
        FloatTensor dw(w.shape());
        FloatTensor db(g.weights(l.name).bias.shape());
        if (l.kind == LayerKind::kFullyConnected) {
          fc_backward(x, w, dy, need_dx, dx, dw, db);
        } else {
          conv_backward(x, w, dy, l, g.groups(l), dx, dw, db);
        }
        out.weight[l.name] = std::move(dw);
        out.bias[l.name] = std::move(db);
        break;
      }
      case LayerKind::kRelu:
        for (int64_t i = 0; i < dx.numel(); ++i) dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
        break;
      case LayerKind::kRelu6:
        for (int64_t i = 0; i < dx.numel(); ++i) {
          dx[i] = x[i] > 0.0f && x[i] < 6.0f ? dy[i] : 0.0f;
        }
        break;
      case LayerKind::kAdd:
        for (const auto& name : l.inputs) accumulate_into(grads, name, dy);
        continue;
      case LayerKind::kConcat: {
        const int64_t total = dy.shape().back(), rows = dy.numel() / total;
        int64_t offset = 0;
        for (const auto& name : l.inputs) {
          const FloatTensor& part = st.values.at(name);
          const int64_t width = part.shape().back();
          FloatTensor dp(part.shape());
          for (int64_t r = 0; r < rows; ++r) {
            std::copy_n(dy.data().data() + r * total + offset, width,
                        dp.data().data() + r * width);
          }
          accumulate_into(grads, name, dp);
          offset += width;
        }
        continue;
      }
      case LayerKind::kMaxPool: {
        const auto& arg = st.argmax.at(l.name);
        for (int64_t o = 0; o < dy.numel(); ++o) dx[arg[static_cast<size_t>(o)]] += dy[o];
        break;
      }
      case LayerKind::kAvgPool: {
        const float inv = 1.0f / static_cast<float>(l.kernel * l.kernel);
        for_each_window(spatial(x), spatial(dy), l,
                        [&](int64_t o, int64_t i) { dx[i] += dy[o] * inv; });
        break;
      }
      case LayerKind::kPad: {
        const Spatial in = spatial(x), o = spatial(dy);
        for (int64_t b = 0; b < in.b; ++b) {
          for (int64_t h = 0; h < in.h; ++h) {
            std::copy_n(dy.data().data() + ((b * o.h + h + l.pad) * o.w + l.pad) * o.c,
                        in.w * in.c, dx.data().data() + (b * in.h + h) * in.w * in.c);
          }
        }
        break;
      }
      case LayerKind::kSoftmax:
        break;
    }
    accumulate_into(grads, l.inputs[0], dx);
  }
  if (input_grad) {
    if (auto gin = take(g.input_name())) out.input = std::move(*gin);
  }
  return out;
}

LossResult softmax_cross_entropy(const FloatTensor& logits, const Int32Tensor& labels) {
  if (logits.rank() != 2 || labels.rank() != 1 || labels.dim(0) != logits.dim(0)) {
    throw ShapeError("cross-entropy needs [B, C] logits and [B] labels");
  }
  const int64_t rows = logits.dim(0), cols = logits.dim(1);
  LossResult r;
  r.grad = FloatTensor(logits.shape());
  double total = 0.0;
  for (int64_t b = 0; b < rows; ++b) {
    const int32_t label = labels[b];
    if (label < 0 || label >= cols) throw ShapeError("label outside the logit range");
    const float* z = logits.data().data() + b * cols;
    const double m = *std::max_element(z, z + cols);
    double sum = 0.0;
    for (int64_t c = 0; c < cols; ++c) sum += std::exp(z[c] - m);
    const double log_sum = std::log(sum) + m;
    total += log_sum - z[label];
    for (int64_t c = 0; c < cols; ++c) {
      const double p = std::exp(z[c] - log_sum);
      r.grad.at(b, c) = static_cast<float>((p - (c == label ? 1.0 : 0.0)) / rows);
    }
  }
  r.loss = total / static_cast<double>(rows);
  return r;
}

LossResult mean_squared_error(const FloatTensor& output, const FloatTensor& targets) {
  if (output.shape() != targets.shape()) throw ShapeError("output and target shapes differ");
  const int64_t rows = output.dim(0);
  LossResult r;
  r.grad = FloatTensor(output.shape());
  double total = 0.0;
  for (int64_t i = 0; i < output.numel(); ++i) {
    const double d = static_cast<double>(output[i]) - targets[i];
    total += d * d;
    r.grad[i] = static_cast<float>(2.0 * d / rows);
  }
  r.loss = total / static_cast<double>(rows);
  return r;
}

std::vector<int32_t> argmax_rows(const FloatTensor& t) {
  const auto [rows, cols] = as_matrix_dims(t.shape());
  std::vector<int32_t> out(static_cast<size_t>(rows));
  for (int64_t r = 0; r < rows; ++r) {
    const float* row = t.data().data() + r * cols;
    out[static_cast<size_t>(r)] = static_cast<int32_t>(std::max_element(row, row + cols) - row);
  }
  return out;
}

Sgd::Sgd(SgdConfig cfg) : cfg_(cfg) {
  if (!(cfg_.learning_rate > 0.0) || cfg_.momentum < 0.0 || cfg_.momentum >= 1.0 ||
      cfg_.weight_decay < 0.0) {
    throw InvalidArgumentError("invalid SGD configuration");
  }
}

void Sgd::step(ModelGraph& g, const Gradients& grads) {
  auto update = [&](const std::string& key, FloatTensor& param, const FloatTensor& grad,
                    bool decay) {
    auto& vel = velocity_[key];
    if (vel.empty()) vel.assign(static_cast<size_t>(param.numel()), 0.0f);
    const float lr = static_cast<float>(cfg_.learning_rate);
    const float mom = static_cast<float>(cfg_.momentum);
    const float wd = decay ? static_cast<float>(cfg_.weight_decay) : 0.0f;
    for (int64_t i = 0; i < param.numel(); ++i) {
      float& v = vel[static_cast<size_t>(i)];
      v = mom * v + grad[i] + wd * param[i];
      param[i] -= lr * v;
    }
  };
  for (const auto& [name, gw] : grads.weight) {
    update(name + "/weight", g.weights(name).weight, gw, true);
  }
  for (const auto& [name, gb] : grads.bias) update(name + "/bias", g.weights(name).bias, gb, false);
}

}  // namespace oaq

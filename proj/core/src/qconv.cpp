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

#include "oaq/qconv.hpp"

#include <vector>

#include "oaq/parallel.hpp"
#include "oaq/qgemm_internal.hpp"

namespace oaq {
namespace {

struct ConvDims {
  int64_t batch, height, width, channels;
  int64_t out_h, out_w;
  int64_t cin_g, cout_g;
};

ConvDims conv_dims(const Int8Tensor& input, const QConvPlan& plan) {
  if (input.rank() != 4) {
    throw ShapeError("conv input must be NHWC, got " + shape_string(input.shape()));
  }
  const ConvGeometry& g = plan.geometry;
  ConvDims d{};
  d.batch = input.dim(0);
  d.height = input.dim(1);
  d.width = input.dim(2);
  d.channels = input.dim(3);
  if (d.channels != plan.in_channels) {
    throw ShapeError("conv input has " + std::to_string(d.channels) + " channels, plan expects " +
                     std::to_string(plan.in_channels));
  }
  if (g.groups < 1 || d.channels % g.groups != 0) {
    throw ShapeError("input channels not divisible by groups");
  }
  d.out_h = conv_output_size(d.height, g.kernel_h, g.stride, g.pad);
  d.out_w = conv_output_size(d.width, g.kernel_w, g.stride, g.pad);
  d.cin_g = plan.in_channels / g.groups;
  d.cout_g = plan.out_channels / g.groups;
  return d;
}

// Gathers the receptive field of one output pixel for one group in
// (kh, kw, ci) order.
void gather_patch(const Int8Tensor& input, const ConvGeometry& g, const ConvDims& d, int64_t pixel,
                  int64_t group, int8_t pad_value, int8_t* dst) {
  const int64_t b = pixel / (d.out_h * d.out_w);
  const int64_t oh = (pixel / d.out_w) % d.out_h;
  const int64_t ow = pixel % d.out_w;
  const int8_t* src = input.data().data();
  int64_t idx = 0;
  for (int kh = 0; kh < g.kernel_h; ++kh) {
    const int64_t ih = oh * g.stride - g.pad + kh;
    for (int kw = 0; kw < g.kernel_w; ++kw) {
      const int64_t iw = ow * g.stride - g.pad + kw;
      const bool inside = ih >= 0 && ih < d.height && iw >= 0 && iw < d.width;
      const int8_t* px = inside ? src + ((b * d.height + ih) * d.width + iw) * d.channels +
                                      group * d.cin_g
                                : nullptr;
      for (int64_t ci = 0; ci < d.cin_g; ++ci) dst[idx++] = inside ? px[ci] : pad_value;
    }
  }
}

}  // namespace

int64_t conv_output_size(int64_t input, int kernel, int stride, int pad) {
  if (stride < 1 || kernel < 1 || pad < 0) throw ShapeError("invalid convolution geometry");
  const int64_t span = input + 2 * pad - kernel;
  if (span < 0) {
    throw ShapeError("kernel " + std::to_string(kernel) + " larger than padded input " +
                     std::to_string(input + 2 * pad));
  }
  return span / stride + 1;
}

QConvPlan build_conv_plan(const Int8Tensor& q_weights, const ConvGeometry& geometry,
                          const QuantParams& params_a, const QuantParams& params_b,
                          const QuantParams& params_c, const Int32Tensor& layer_bias) {
  if (q_weights.rank() != 4) {
    throw ShapeError("conv weights must be [KH, KW, Cin/groups, Cout], got " +
                     shape_string(q_weights.shape()));
  }
  if (q_weights.dim(0) != geometry.kernel_h || q_weights.dim(1) != geometry.kernel_w) {
    throw ShapeError("conv weights disagree with kernel size");
  }
  if (geometry.groups < 1 || q_weights.dim(3) % geometry.groups != 0) {
    throw ShapeError("output channels not divisible by groups");
  }
  if (geometry.stride < 1 || geometry.pad < 0) throw ShapeError("invalid stride or padding");
  QConvPlan plan;
  plan.geometry = geometry;
  plan.in_channels = q_weights.dim(2) * geometry.groups;
  plan.out_channels = q_weights.dim(3);
  const int64_t depth = q_weights.dim(0) * q_weights.dim(1) * q_weights.dim(2);
  plan.gemm = build_plan(q_weights.reshaped({depth, plan.out_channels}), params_a, params_b,
                         params_c, layer_bias);
  return plan;
}

Int8Tensor im2col(const Int8Tensor& q_input, const ConvGeometry& geometry, int group,
                  int8_t pad_value) {
  QConvPlan shape_only;
  shape_only.geometry = geometry;
  shape_only.in_channels = q_input.rank() == 4 ? q_input.dim(3) : 0;
  shape_only.out_channels = geometry.groups;
  const ConvDims d = conv_dims(q_input, shape_only);
  const int64_t pixels = d.batch * d.out_h * d.out_w;
  const int64_t depth = int64_t{geometry.kernel_h} * geometry.kernel_w * d.cin_g;
  Int8Tensor cols({pixels, depth});
  for (int64_t p = 0; p < pixels; ++p) {
    gather_patch(q_input, geometry, d, p, group, pad_value, cols.data().data() + p * depth);
  }
  return cols;
}

std::pair<Int8Tensor, OverflowReport> oaq_conv2d(const Int8Tensor& q_input, const QConvPlan& plan,
                                                 const AccumulatorConfig& cfg) {
  const ConvDims d = conv_dims(q_input, plan);
  const ConvGeometry& g = plan.geometry;
  const int64_t pixels = d.batch * d.out_h * d.out_w;
  const int64_t depth = plan.depth();
  const int8_t pad_value = static_cast<int8_t>(plan.gemm.z_in);

  Int8Tensor out({d.batch, d.out_h, d.out_w, plan.out_channels});
  std::vector<uint8_t> flags;
  if (cfg.count_events) flags.assign(static_cast<size_t>(pixels * plan.out_channels), 0);
  const int chunks = chunk_count(pixels, cfg.threads);
  std::vector<OverflowReport> partial(static_cast<size_t>(chunks));

  parallel_chunks(pixels, cfg.threads, [&](int64_t begin, int64_t end, int chunk) {
    OverflowReport& rep = partial[static_cast<size_t>(chunk)];
    std::vector<int8_t> patch(static_cast<size_t>(depth));
    for (int64_t p = begin; p < end; ++p) {
      for (int64_t grp = 0; grp < g.groups; ++grp) {
        gather_patch(q_input, g, d, p, grp, pad_value, patch.data());
        for (int64_t oc = grp * d.cout_g; oc < (grp + 1) * d.cout_g; ++oc) {
          const int8_t* w = plan.gemm.centered_by_column.data().data() + oc * depth;
          const detail::AccumResult r = detail::accumulate(patch.data(), w, depth, cfg, p, oc);
          rep.steps += r.steps;
          if (r.events > 0) {
            rep.events += r.events;
            flags[static_cast<size_t>(p * plan.out_channels + oc)] = 1;
            const OverflowCoord coord{p, oc, r.first_step};
            if (!rep.first_event || coord < *rep.first_event) rep.first_event = coord;
          }
          out[p * plan.out_channels + oc] = detail::requantize(r.value, oc, plan.gemm);
        }
      }
    }
  });

  OverflowReport report;
  report.rows = pixels;
  report.cols = plan.out_channels;
  for (const auto& r : partial) report.merge_counts(r);
  if (report.events > 0) report.per_output_flags = std::move(flags);
  return {std::move(out), std::move(report)};
}

std::pair<Int8Tensor, OverflowReport> oaq_conv2d_im2col(const Int8Tensor& q_input,
                                                        const QConvPlan& plan,
                                                        const AccumulatorConfig& cfg) {
  const ConvDims d = conv_dims(q_input, plan);
  const ConvGeometry& g = plan.geometry;
  const int64_t pixels = d.batch * d.out_h * d.out_w;
  const int64_t depth = plan.depth();
  const int8_t pad_value = static_cast<int8_t>(plan.gemm.z_in);

  Int8Tensor out({d.batch, d.out_h, d.out_w, plan.out_channels});
  OverflowReport report;
  report.rows = pixels;
  report.cols = plan.out_channels;
  std::vector<uint8_t> flags(static_cast<size_t>(pixels * plan.out_channels), 0);

  for (int grp = 0; grp < g.groups; ++grp) {
    const Int8Tensor cols = im2col(q_input, g, grp, pad_value);
    const int64_t col_base = grp * d.cout_g;
    Int8Tensor weights({d.cout_g, depth});
    for (int64_t oc = 0; oc < d.cout_g; ++oc) {
      for (int64_t j = 0; j < depth; ++j) {
        weights.at(oc, j) = plan.gemm.centered_by_column.at(col_base + oc, j);
      }
    }
    const OverflowReport part = detail::run_gemm(
        cols, weights, cfg, col_base, [&](int64_t p, int64_t oc, int64_t held) {
          out[p * plan.out_channels + col_base + oc] =
              detail::requantize(held, col_base + oc, plan.gemm);
        });
    report.merge_counts(part);
    if (!part.per_output_flags.empty()) {
      for (int64_t p = 0; p < pixels; ++p) {
        for (int64_t oc = 0; oc < d.cout_g; ++oc) {
          if (part.flagged(p, oc)) flags[static_cast<size_t>(p * plan.out_channels + col_base + oc)] = 1;
        }
      }
    }
  }
  if (report.events > 0) report.per_output_flags = std::move(flags);
  return {std::move(out), std::move(report)};
}

}  // namespace oaq

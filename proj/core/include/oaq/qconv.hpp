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

#include <utility>

#include "oaq/qgemm.hpp"

namespace oaq {

/// NHWC convolution geometry. Weights are [kernel_h, kernel_w, in_channels /
/// groups, out_channels]; depthwise is groups == in_channels == out_channels.
struct ConvGeometry {
  int kernel_h = 1;
  int kernel_w = 1;
  int stride = 1;
  int pad = 0;  // same amount on every border
  int groups = 1;

  bool operator==(const ConvGeometry&) const = default;
};

/// Output spatial size for one axis; throws ShapeError when the window does
/// not fit.
int64_t conv_output_size(int64_t input, int kernel, int stride, int pad);

struct QConvPlan {
  ConvGeometry geometry;
  int64_t in_channels = 0;
  int64_t out_channels = 0;
  /// Reduction rows ordered (kh, kw, ci) row-major; columns are output
  /// channels.
  QGemmPlan gemm;

  int64_t depth() const { return gemm.depth; }
};

QConvPlan build_conv_plan(const Int8Tensor& q_weights, const ConvGeometry& geometry,
                          const QuantParams& params_a, const QuantParams& params_b,
                          const QuantParams& params_c, const Int32Tensor& layer_bias = {});

/// Direct convolution. Out-of-bounds taps read the input zero point, so the
/// padding is an exact real zero. Report rows are flattened output pixels
/// (b, oh, ow), columns are output channels, steps follow (kh, kw, ci).
std::pair<Int8Tensor, OverflowReport> oaq_conv2d(const Int8Tensor& q_input, const QConvPlan& plan,
                                                 const AccumulatorConfig& cfg = {});

/// im2col lowering followed by one GEMM per group. Bit-identical to
/// oaq_conv2d, outputs and reports alike.
std::pair<Int8Tensor, OverflowReport> oaq_conv2d_im2col(const Int8Tensor& q_input,
                                                        const QConvPlan& plan,
                                                        const AccumulatorConfig& cfg = {});

/// Patch matrix [B*OH*OW, KH*KW*C/groups] for one group, padded with pad_value.
Int8Tensor im2col(const Int8Tensor& q_input, const ConvGeometry& geometry, int group,
                  int8_t pad_value);

}  // namespace oaq

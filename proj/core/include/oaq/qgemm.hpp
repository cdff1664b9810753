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

// Quantized matrix multiply C = A x B with A: [M, N] activations and
// B: [N, K] weights, all int8-range.
//
//   q_c = Z_c + P * sum_j (q_a - Z_a)(q_b - Z_b)                   (direct)
//       = Z_c + P * (N Z_a Z_b - Z_a M_b - Z_b M_a + sum_j q_a q_b)   (expanded)
//       = Z_c + P * (sum_j q_a (q_b - Z_b) + B)                       (centered)
//
// with M_b[k] = sum_j q_b[j, k], M_a[i] = sum_j q_a[i, j],
// B[k] = -Z_a M_b[k] + N Z_a Z_b and P = S'_a S'_b / S'_c. Only the
// centered form keeps the hot loop free of zero points, which is what lets
// it run in a narrow accumulator.

#pragma once

#include <utility>
#include <vector>

#include "oaq/accumulator.hpp"
#include "oaq/quant.hpp"
#include "oaq/tensor.hpp"

namespace oaq {

enum class GemmForm { kDirect, kExpanded, kCenteredBias };

/// Raised when q_b - Z_b leaves [-128, 127] for some weight.
class CenteredWeightOverflowError : public Error {
 public:
  CenteredWeightOverflowError(const std::string& what,
                              std::vector<std::pair<int64_t, int64_t>> offending)
      : Error(what), offending_(std::move(offending)) {}

  /// (j, k) coordinates of every offending weight.
  const std::vector<std::pair<int64_t, int64_t>>& offending() const noexcept { return offending_; }

 private:
  std::vector<std::pair<int64_t, int64_t>> offending_;
};

/// Inference-time constants for one weight matrix.
struct QGemmPlan {
  Int8Tensor q_weights;         // [N, K]
  Int8Tensor centered_weights;  // [N, K], q_b - Z_b
  Int32Tensor bias_term;        // [K], B
  Int32Tensor col_sums;         // [K], M_b
  /// Optional layer bias already in accumulator units (scale S'_a S'_b);
  /// empty means none. Added next to B after the narrow accumulation.
  Int32Tensor layer_bias;
  FixedPointMultiplier multiplier;
  int32_t z_in = 0;   // Z_a, also the padding value for convolutions
  int32_t z_w = 0;    // Z_b
  int32_t z_out = 0;  // Z_c
  int64_t depth = 0;  // N
  /// Output clamp, the effective range of params_c unless tightened for a
  /// fused activation.
  int32_t out_min = -128;
  int32_t out_max = 127;
  /// [K, N] copy of centered_weights for contiguous column access.
  Int8Tensor centered_by_column;

  int64_t out_features() const { return bias_term.numel(); }
  /// Throws Error if the stored constants disagree with a recomputation.
  void validate() const;
};

/// Column sums M_b and bias term B by direct summation.
Int32Tensor column_sums(const Int8Tensor& q_weights);
Int32Tensor bias_term(const Int8Tensor& q_weights, int32_t z_in, int32_t z_w);

/// Precomputes the constants of the centered form. Throws
/// CenteredWeightOverflowError if any q_b - Z_b leaves int8, and
/// InvalidMultiplierError if P is not in (0, 1).
QGemmPlan build_plan(const Int8Tensor& q_weights, const QuantParams& params_a,
                     const QuantParams& params_b, const QuantParams& params_c,
                     const Int32Tensor& layer_bias = {});

/// Quantizes a real bias with scale S'_a S'_b and zero point 0.
Int32Tensor quantize_bias(const FloatTensor& bias, const QuantParams& params_a,
                          const QuantParams& params_b);

/// Exact evaluation with 64-bit accumulation in the chosen algebraic form.
/// The raw accumulator is saturated to int32 before requantization.
Int8Tensor reference_qgemm(const Int8Tensor& q_a, const Int8Tensor& q_b,
                           const QuantParams& params_a, const QuantParams& params_b,
                           const QuantParams& params_c, GemmForm form = GemmForm::kDirect);

/// Raw accumulator values (before requantization) of the chosen form.
std::vector<int64_t> reference_accumulators(const Int8Tensor& q_a, const Int8Tensor& q_b,
                                            int32_t z_a, int32_t z_b, GemmForm form);

/// Centered-form GEMM in the configured accumulator. Partial sums are formed
/// in ascending j; every step whose running sum leaves the accumulator range
/// is an overflow event, then wrapped or saturated per policy.
std::pair<Int8Tensor, OverflowReport> oaq_qgemm(const Int8Tensor& q_a, const QGemmPlan& plan,
                                                const AccumulatorConfig& cfg = {});

/// Accumulation only: the narrow-accumulator sums of q_a x centered weights
/// and their overflow report. Used by the calibration shadow path, which
/// needs N_o but not requantized outputs.
OverflowReport count_gemm_overflow(const Int8Tensor& q_a, const Int8Tensor& centered_weights,
                                   const AccumulatorConfig& cfg = {});

namespace detail {

/// Result of one output element's accumulation.
struct AccumResult {
  int64_t value = 0;  // held accumulator value after wrap/saturate
  uint32_t events = 0;
  int64_t first_step = -1;
  uint64_t steps = 0;
};

/// Accumulates sum_j a[j] * w[j] for output (row, col); a and w are
/// contiguous of length n. The coordinates feed the injection hash.
AccumResult accumulate(const int8_t* a, const int8_t* w, int64_t n, const AccumulatorConfig& cfg,
                       int64_t row, int64_t col);

/// Requantizes a held accumulator value through the plan constants.
int8_t requantize(int64_t held, int64_t col, const QGemmPlan& plan);

}  // namespace detail
}  // namespace oaq

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

// Affine fixed-point mapping r = S' (q - Z) with the range-mapping factor
// alpha folded into the effective scale S' = alpha * S.

#pragma once

#include <cmath>
#include <cstdint>

#include "oaq/tensor.hpp"

namespace oaq {

inline constexpr int kMinBits = 2;
inline constexpr int kMaxBits = 8;
/// Absolute width a zero-width observed range is widened to.
inline constexpr double kDegenerateRangeWidth = 1e-5;

/// Round half away from zero.
inline double round_half_away(double x) { return std::round(x); }

struct QuantParams {
  double scale = 1.0;  // S, before alpha
  int32_t zero_point = 0;
  int bits = 8;
  double alpha = 1.0;
  double r_min = 0.0;  // observed range after zero inclusion
  double r_max = 0.0;
  bool symmetric = false;
  bool degenerate = false;

  double effective_scale() const noexcept { return alpha * scale; }
  /// Physical signed b-bit range.
  int32_t physical_min() const noexcept { return -(1 << (bits - 1)); }
  int32_t physical_max() const noexcept { return (1 << (bits - 1)) - 1; }
  /// [floor(q_lo / alpha), floor(q_hi / alpha)].
  int32_t qmin() const noexcept;
  int32_t qmax() const noexcept;
  /// Real interval the effective integer range covers.
  double real_min() const noexcept { return effective_scale() * (qmin() - zero_point); }
  double real_max() const noexcept { return effective_scale() * (qmax() - zero_point); }

  /// Throws InvalidArgumentError when any field invariant is broken.
  void validate() const;

  bool operator==(const QuantParams&) const = default;
};

/// Effective range bounds for a b-bit signed range narrowed by alpha.
int32_t effective_qmin(int bits, double alpha);
int32_t effective_qmax(int bits, double alpha);

/// Builds the mapping for an observed real range. The range is first
/// extended to contain 0.0, then Z is rounded to the nearest integer inside
/// the effective range so that 0.0 is exactly representable; the width of the
/// covered range is preserved. Symmetric mode pins Z = 0.
QuantParams derive_scale(double r_min, double r_max, int bits = 8, double alpha = 1.0,
                         bool symmetric = false);

/// Same range and flags, new alpha. Z is re-derived for the narrowed range.
QuantParams with_alpha(const QuantParams& p, double alpha);

/// clamp(round(r / S') + Z, qmin, qmax). NaN maps to Z.
int32_t quantize_value(double r, const QuantParams& p);
double dequantize_value(int32_t q, const QuantParams& p);

Int8Tensor quantize(const FloatTensor& t, const QuantParams& p);

template <typename T>
FloatTensor dequantize(const Tensor<T>& t, const QuantParams& p) {
  FloatTensor out(t.shape());
  const double s = p.effective_scale();
  for (int64_t i = 0; i < t.numel(); ++i) {
    out[i] = static_cast<float>(s * (static_cast<double>(t[i]) - p.zero_point));
  }
  return out;
}

/// Real multiplier P = mantissa * 2^-31 * 2^-right_shift with a normalized
/// mantissa in [2^30, 2^31).
struct FixedPointMultiplier {
  int32_t mantissa = 0;
  int right_shift = 0;

  double value() const noexcept {
    return std::ldexp(static_cast<double>(mantissa), -31 - right_shift);
  }
  bool operator==(const FixedPointMultiplier&) const = default;
};

/// Requires 0 < P < 1; throws InvalidMultiplierError otherwise.
FixedPointMultiplier compile_multiplier(double real_multiplier);

/// round(x * P) with integer multiply and arithmetic shift only, rounding
/// half away from zero on the shifted-out bits.
int32_t apply_multiplier(int32_t x, const FixedPointMultiplier& m);

/// Integer rescale by an arbitrary positive ratio (< 2^30). Used where a
/// requantization may grow values, e.g. elementwise adds and concats.
struct Rescale {
  int32_t mantissa = 0;
  int shift = 0;  // negative values shift left

  double value() const noexcept { return std::ldexp(static_cast<double>(mantissa), -31 - shift); }
  bool operator==(const Rescale&) const = default;
};

Rescale compile_rescale(double ratio);
int64_t apply_rescale(int64_t x, const Rescale& r);

}  // namespace oaq

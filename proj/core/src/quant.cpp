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

#include "oaq/quant.hpp"

#include <algorithm>
#include <limits>

namespace oaq {
namespace {

void check_bits_alpha(int bits, double alpha) {
  if (bits < kMinBits || bits > kMaxBits) {
    throw InvalidArgumentError("bits must be in [2, 8], got " + std::to_string(bits));
  }
  if (!std::isfinite(alpha) || alpha < 1.0) {
    throw InvalidArgumentError("alpha must be finite and >= 1, got " + std::to_string(alpha));
  }
}

// Assumes lo <= 0 <= hi and hi > lo.
QuantParams build(double lo, double hi, int bits, double alpha, bool symmetric, bool degenerate) {
  QuantParams p;
  p.bits = bits;
  p.alpha = alpha;
  p.symmetric = symmetric;
  p.degenerate = degenerate;
  p.r_min = lo;
  p.r_max = hi;
  p.scale = (hi - lo) / static_cast<double>((1 << bits) - 1);
  if (symmetric) {
    p.zero_point = 0;
  } else {
    const int32_t qlo = effective_qmin(bits, alpha);
    const int32_t qhi = effective_qmax(bits, alpha);
    const double zp = static_cast<double>(qlo) - lo / p.effective_scale();
    p.zero_point = static_cast<int32_t>(std::clamp(round_half_away(zp), static_cast<double>(qlo),
                                                   static_cast<double>(qhi)));
  }
  return p;
}

}  // namespace

int32_t effective_qmin(int bits, double alpha) {
  return static_cast<int32_t>(std::floor(static_cast<double>(-(1 << (bits - 1))) / alpha));
}

int32_t effective_qmax(int bits, double alpha) {
  return static_cast<int32_t>(std::floor(static_cast<double>((1 << (bits - 1)) - 1) / alpha));
}

int32_t QuantParams::qmin() const noexcept { return effective_qmin(bits, alpha); }
int32_t QuantParams::qmax() const noexcept { return effective_qmax(bits, alpha); }

void QuantParams::validate() const {
  check_bits_alpha(bits, alpha);
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw InvalidArgumentError("scale must be positive and finite");
  }
  if (!(r_min <= 0.0 && 0.0 <= r_max)) {
    throw InvalidArgumentError("observed range must contain 0");
  }
  if (zero_point < qmin() || zero_point > qmax()) {
    throw InvalidArgumentError("zero point " + std::to_string(zero_point) +
                               " outside effective range");
  }
  if (symmetric && zero_point != 0) {
    throw InvalidArgumentError("symmetric params need a zero point of 0");
  }
}

QuantParams derive_scale(double r_min, double r_max, int bits, double alpha, bool symmetric) {
  check_bits_alpha(bits, alpha);
  if (!std::isfinite(r_min) || !std::isfinite(r_max)) {
    throw InvalidArgumentError("range bounds must be finite");
  }
  if (r_max < r_min) {
    throw InvalidArgumentError("r_max < r_min");
  }
  bool degenerate = false;
  if (r_max == r_min) {
    degenerate = true;
    r_min -= kDegenerateRangeWidth / 2;
    r_max += kDegenerateRangeWidth / 2;
  }
  double lo = std::min(r_min, 0.0);
  double hi = std::max(r_max, 0.0);
  if (symmetric) {
    const double m = std::max(-lo, hi);
    lo = -m;
    hi = m;
  }
  return build(lo, hi, bits, alpha, symmetric, degenerate);
}

QuantParams with_alpha(const QuantParams& p, double alpha) {
  check_bits_alpha(p.bits, alpha);
  return build(p.r_min, p.r_max, p.bits, alpha, p.symmetric, p.degenerate);
}

int32_t quantize_value(double r, const QuantParams& p) {
  if (std::isnan(r)) return p.zero_point;
  const double inv = 1.0 / p.effective_scale();
  const double q = round_half_away(r * inv) + static_cast<double>(p.zero_point);
  return static_cast<int32_t>(
      std::clamp(q, static_cast<double>(p.qmin()), static_cast<double>(p.qmax())));
}

double dequantize_value(int32_t q, const QuantParams& p) {
  return p.effective_scale() * (static_cast<double>(q) - p.zero_point);
}

Int8Tensor quantize(const FloatTensor& t, const QuantParams& p) {
  Int8Tensor out(t.shape());
  for (int64_t i = 0; i < t.numel(); ++i) {
    out[i] = static_cast<int8_t>(quantize_value(static_cast<double>(t[i]), p));
  }
  return out;
}

FixedPointMultiplier compile_multiplier(double real_multiplier) {
  if (!(real_multiplier > 0.0) || !(real_multiplier < 1.0)) {
    throw InvalidMultiplierError("requantization multiplier must lie in (0, 1), got " +
                                 std::to_string(real_multiplier));
  }
  int exponent = 0;
  const double frac = std::frexp(real_multiplier, &exponent);  // frac in [0.5, 1)
  int64_t mantissa = std::llround(std::ldexp(frac, 31));
  if (mantissa == (int64_t{1} << 31)) {
    if (exponent == 0) {
      mantissa = std::numeric_limits<int32_t>::max();
    } else {
      mantissa /= 2;
      ++exponent;
    }
  }
  FixedPointMultiplier m;
  m.mantissa = static_cast<int32_t>(mantissa);
  m.right_shift = -exponent;
  return m;
}

int32_t apply_multiplier(int32_t x, const FixedPointMultiplier& m) {
  const int64_t prod = static_cast<int64_t>(x) * m.mantissa;
  const int total = 31 + m.right_shift;
  if (total >= 63) return 0;  // |prod| < 2^62, rounds to zero
  const int64_t half = int64_t{1} << (total - 1);
  const int64_t r = prod >= 0 ? (prod + half) >> total : -((-prod + half) >> total);
  return static_cast<int32_t>(r);
}

Rescale compile_rescale(double ratio) {
  if (!(ratio > 0.0) || !std::isfinite(ratio) || ratio >= std::ldexp(1.0, 30)) {
    throw NumericError("integer rescale ratio out of range: " + std::to_string(ratio));
  }
  int exponent = 0;
  const double frac = std::frexp(ratio, &exponent);
  int64_t mantissa = std::llround(std::ldexp(frac, 31));
  if (mantissa == (int64_t{1} << 31)) {
    mantissa /= 2;
    ++exponent;
  }
  Rescale r;
  r.mantissa = static_cast<int32_t>(mantissa);
  r.shift = -exponent;
  return r;
}

int64_t apply_rescale(int64_t x, const Rescale& r) {
  const __int128 prod = static_cast<__int128>(x) * r.mantissa;
  const int total = 31 + r.shift;
  if (total >= 126) return 0;
  if (total <= 0) return static_cast<int64_t>(prod << -total);
  const __int128 half = static_cast<__int128>(1) << (total - 1);
  const __int128 v = prod >= 0 ? (prod + half) >> total : -((-prod + half) >> total);
  return static_cast<int64_t>(v);
}

}  // namespace oaq

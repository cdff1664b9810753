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

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace oaq {

enum class AccumulatorWidth : int { k16 = 16, k32 = 32 };
enum class OverflowPolicy { kWrap, kSaturate };

const char* policy_name(OverflowPolicy policy);
OverflowPolicy policy_from_name(const std::string& name);

/// Where forced overflow is applied: on individual accumulation steps, or on
/// the final accumulator value of an output element.
enum class InjectionSite { kStep, kOutput };

/// Seeded forced-overflow perturbation. A selected step (or output) gets
/// +-2^(width-1) added in the direction of its sign, which always pushes the
/// running sum out of range.
struct OverflowInjection {
  double ratio = 0.0;
  uint64_t seed = 0;
  uint32_t salt = 0;  // distinguishes layers sharing a seed
  InjectionSite site = InjectionSite::kStep;
};

struct AccumulatorConfig {
  AccumulatorWidth width = AccumulatorWidth::k16;
  OverflowPolicy overflow_policy = OverflowPolicy::kWrap;
  /// When false the kernels skip all bookkeeping and return an empty report.
  bool count_events = true;
  /// 1 is the canonical sequential order. L > 1 accumulates L interleaved
  /// partial sums (j mod L) and merges them in lane order at the end.
  int lanes = 1;
  int threads = 1;
  std::optional<OverflowInjection> injection;

  int bits() const noexcept { return static_cast<int>(width); }
  int64_t min_value() const noexcept { return -(int64_t{1} << (bits() - 1)); }
  int64_t max_value() const noexcept { return (int64_t{1} << (bits() - 1)) - 1; }
};

struct OverflowCoord {
  int64_t row = 0;
  int64_t col = 0;
  int64_t step = 0;  // j index, or depth + lane - 1 for lane merges

  auto operator<=>(const OverflowCoord&) const = default;
};

/// Overflow bookkeeping for one kernel invocation. `events` counts
/// accumulation steps whose running sum left the accumulator range.
struct OverflowReport {
  uint64_t events = 0;
  uint64_t steps = 0;
  int64_t rows = 0;
  int64_t cols = 0;
  /// rows * cols flags, one per output element; empty iff events == 0.
  std::vector<uint8_t> per_output_flags;
  std::optional<OverflowCoord> first_event;

  uint64_t flagged_outputs() const;
  bool flagged(int64_t row, int64_t col) const;

  /// Sums counts, ORs flags over the same output grid, keeps the smallest
  /// first_event. Associative and commutative.
  void merge(const OverflowReport& other);
  /// Counts and first_event only; for combining reports over different grids.
  void merge_counts(const OverflowReport& other);

  bool operator==(const OverflowReport&) const = default;
};

}  // namespace oaq

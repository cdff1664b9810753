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

#include <algorithm>
#include <vector>

#include "oaq/errors.hpp"
#include "oaq/qgemm.hpp"
#include "oaq/random.hpp"

namespace oaq {

const char* policy_name(OverflowPolicy policy) {
  return policy == OverflowPolicy::kWrap ? "wrap" : "saturate";
}

OverflowPolicy policy_from_name(const std::string& name) {
  if (name == "wrap") return OverflowPolicy::kWrap;
  if (name == "saturate") return OverflowPolicy::kSaturate;
  throw InvalidArgumentError("unknown overflow policy '" + name + "'");
}

uint64_t OverflowReport::flagged_outputs() const {
  return static_cast<uint64_t>(std::count(per_output_flags.begin(), per_output_flags.end(), 1));
}

bool OverflowReport::flagged(int64_t row, int64_t col) const {
  if (per_output_flags.empty()) return false;
  return per_output_flags[static_cast<size_t>(row * cols + col)] != 0;
}

void OverflowReport::merge_counts(const OverflowReport& other) {
  events += other.events;
  steps += other.steps;
  if (other.first_event && (!first_event || *other.first_event < *first_event)) {
    first_event = other.first_event;
  }
}

void OverflowReport::merge(const OverflowReport& other) {
  if (!per_output_flags.empty() && !other.per_output_flags.empty() &&
      per_output_flags.size() != other.per_output_flags.size()) {
    throw ShapeError("cannot merge overflow flags over different output grids");
  }
  if (rows == 0 && cols == 0) {
    rows = other.rows;
    cols = other.cols;
  }
  merge_counts(other);
  if (per_output_flags.empty()) {
    per_output_flags = other.per_output_flags;
  } else if (!other.per_output_flags.empty()) {
    for (size_t i = 0; i < per_output_flags.size(); ++i) {
      per_output_flags[i] |= other.per_output_flags[i];
    }
  }
}

namespace detail {
namespace {

constexpr uint32_t kOutputSiteStep = 0xFFFFFFFFu;

inline int64_t wrap_to(int64_t v, int bits) {
  if (bits == 16) return static_cast<int16_t>(static_cast<uint16_t>(v));
  return static_cast<int32_t>(static_cast<uint32_t>(v));
}

inline int64_t push_out(int64_t v, int bits) {
  const int64_t half = int64_t{1} << (bits - 1);
  return v >= 0 ? v + half : v - half;
}

// One accumulation step on a held value; returns the new held value and
// whether the exact sum left the range.
inline int64_t settle(int64_t exact, const AccumulatorConfig& cfg, bool& out_of_range) {
  const int64_t lo = cfg.min_value();
  const int64_t hi = cfg.max_value();
  out_of_range = exact < lo || exact > hi;
  if (!out_of_range) return exact;
  if (cfg.overflow_policy == OverflowPolicy::kSaturate) return std::clamp(exact, lo, hi);
  return wrap_to(exact, cfg.bits());
}

template <int kBits>
inline int64_t plain_sum(const int8_t* a, const int8_t* w, int64_t n) {
  // No bookkeeping: two's-complement wrap in the narrow type.
  if constexpr (kBits == 16) {
    uint16_t acc = 0;
    for (int64_t j = 0; j < n; ++j) {
      acc = static_cast<uint16_t>(acc + static_cast<uint16_t>(static_cast<int16_t>(a[j]) * w[j]));
    }
    return static_cast<int16_t>(acc);
  } else {
    uint32_t acc = 0;
    for (int64_t j = 0; j < n; ++j) {
      acc += static_cast<uint32_t>(static_cast<int32_t>(a[j]) * w[j]);
    }
    return static_cast<int32_t>(acc);
  }
}

}  // namespace

AccumResult accumulate(const int8_t* a, const int8_t* w, int64_t n, const AccumulatorConfig& cfg,
                       int64_t row, int64_t col) {
  AccumResult res;
  const bool inject = cfg.injection.has_value() && cfg.injection->ratio > 0.0;
  const bool step_inject = inject && cfg.injection->site == InjectionSite::kStep;
  const int lanes = std::max(1, cfg.lanes);

  if (!cfg.count_events && !inject && lanes == 1 &&
      cfg.overflow_policy == OverflowPolicy::kWrap) {
    res.value = cfg.width == AccumulatorWidth::k16 ? plain_sum<16>(a, w, n) : plain_sum<32>(a, w, n);
    return res;
  }

  auto note = [&](bool oor, int64_t step) {
    if (oor) {
      if (res.events == 0) res.first_step = step;
      ++res.events;
    }
  };
  auto injected = [&](int64_t step) {
    return counter_uniform(cfg.injection->seed, cfg.injection->salt, static_cast<uint32_t>(row),
                           static_cast<uint32_t>(col),
                           static_cast<uint32_t>(step)) < cfg.injection->ratio;
  };

  bool oor = false;
  if (lanes == 1) {
    int64_t held = 0;
    for (int64_t j = 0; j < n; ++j) {
      int64_t exact = held + static_cast<int64_t>(a[j]) * w[j];
      if (step_inject && injected(j)) exact = push_out(exact, cfg.bits());
      held = settle(exact, cfg, oor);
      note(oor, j);
    }
    res.value = held;
    res.steps = static_cast<uint64_t>(n);
  } else {
    std::vector<int64_t> lane(static_cast<size_t>(lanes), 0);
    for (int64_t j = 0; j < n; ++j) {
      int64_t& held = lane[static_cast<size_t>(j % lanes)];
      int64_t exact = held + static_cast<int64_t>(a[j]) * w[j];
      if (step_inject && injected(j)) exact = push_out(exact, cfg.bits());
      held = settle(exact, cfg, oor);
      note(oor, j);
    }
    int64_t held = lane[0];
    for (int l = 1; l < lanes; ++l) {
      const int64_t step = n + l - 1;
      int64_t exact = held + lane[static_cast<size_t>(l)];
      if (step_inject && injected(step)) exact = push_out(exact, cfg.bits());
      held = settle(exact, cfg, oor);
      note(oor, step);
    }
    res.value = held;
    res.steps = static_cast<uint64_t>(n + lanes - 1);
  }

  if (inject && cfg.injection->site == InjectionSite::kOutput) {
    const int64_t step = static_cast<int64_t>(res.steps);
    if (counter_uniform(cfg.injection->seed, cfg.injection->salt, static_cast<uint32_t>(row),
                        static_cast<uint32_t>(col), kOutputSiteStep) < cfg.injection->ratio) {
      res.value = settle(push_out(res.value, cfg.bits()), cfg, oor);
      note(oor, step);
    }
    ++res.steps;
  }
  if (!cfg.count_events) {
    res.events = 0;
    res.first_step = -1;
    res.steps = 0;
  }
  return res;
}

}  // namespace detail
}  // namespace oaq

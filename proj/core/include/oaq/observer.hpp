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

#include <span>

#include "oaq/tensor.hpp"

namespace oaq {

inline constexpr double kDefaultEmaMomentum = 0.99;

/// Exponential moving average of batch extremes. The first observation
/// initializes the range; later ones blend m * old + (1 - m) * batch.
struct RangeObserver {
  double r_min = 0.0;
  double r_max = 0.0;
  double momentum = kDefaultEmaMomentum;
  bool initialized = false;

  bool operator==(const RangeObserver&) const = default;
};

/// Returns the updated observer. Non-finite elements are ignored; throws
/// InvalidArgumentError on an empty batch or a momentum outside (0, 1).
RangeObserver observe_range(const RangeObserver& obs, std::span<const float> batch);
inline RangeObserver observe_range(const RangeObserver& obs, const FloatTensor& batch) {
  return observe_range(obs, batch.data());
}

}  // namespace oaq

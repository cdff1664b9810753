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

#include "oaq/observer.hpp"

#include <cmath>
#include <limits>

namespace oaq {

RangeObserver observe_range(const RangeObserver& obs, std::span<const float> batch) {
  if (batch.empty()) throw InvalidArgumentError("cannot observe an empty batch");
  if (!(obs.momentum > 0.0 && obs.momentum < 1.0)) {
    throw InvalidArgumentError("observer momentum must lie in (0, 1)");
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (float v : batch) {
    if (!std::isfinite(v)) continue;
    lo = std::min(lo, static_cast<double>(v));
    hi = std::max(hi, static_cast<double>(v));
  }
  if (!std::isfinite(lo)) return obs;

  RangeObserver out = obs;
  if (!obs.initialized) {
    out.r_min = lo;
    out.r_max = hi;
    out.initialized = true;
  } else {
    out.r_min = obs.momentum * obs.r_min + (1.0 - obs.momentum) * lo;
    out.r_max = obs.momentum * obs.r_max + (1.0 - obs.momentum) * hi;
  }
  return out;
}

}  // namespace oaq

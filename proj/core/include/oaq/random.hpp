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

// Counter-based random streams. Every consumer derives its own stream from
// (seed, stream id) so results never depend on scheduling or thread count.

#pragma once

#include <array>
#include <cstdint>

namespace oaq {

using PhiloxBlock = std::array<uint32_t, 4>;
using PhiloxKey = std::array<uint32_t, 2>;

/// Philox4x32 with 10 rounds.
PhiloxBlock philox4x32(PhiloxBlock counter, PhiloxKey key);

/// Sequential draws from one Philox substream. The substream is fixed by the
/// seed and three 32-bit stream words; draws walk the fourth counter word.
class PhiloxStream {
 public:
  PhiloxStream(uint64_t seed, uint32_t stream0, uint32_t stream1 = 0, uint32_t stream2 = 0);

  uint32_t next_u32();
  uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [lo, hi], unbiased (Lemire's method with rejection).
  int32_t uniform_int(int32_t lo, int32_t hi);
  /// Standard normal via Box-Muller.
  double normal();

 private:
  void refill();

  PhiloxKey key_;
  PhiloxBlock counter_;
  PhiloxBlock buffer_{};
  int index_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Stateless uniform draw in [0, 1) for a coordinate, used where a decision
/// must be reproducible per element regardless of traversal order.
double counter_uniform(uint64_t seed, uint32_t a, uint32_t b, uint32_t c, uint32_t d);

}  // namespace oaq

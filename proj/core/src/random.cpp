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

#include "oaq/random.hpp"

#include <cmath>
#include <numbers>

namespace oaq {
namespace {

constexpr uint32_t kPhiloxM0 = 0xD2511F53;
constexpr uint32_t kPhiloxM1 = 0xCD9E8D57;
constexpr uint32_t kPhiloxW0 = 0x9E3779B9;
constexpr uint32_t kPhiloxW1 = 0xBB67AE85;

inline void mulhilo(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
  const uint64_t p = static_cast<uint64_t>(a) * b;
  hi = static_cast<uint32_t>(p >> 32);
  lo = static_cast<uint32_t>(p);
}

PhiloxKey split_seed(uint64_t seed) {
  return {static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)};
}

}  // namespace

PhiloxBlock philox4x32(PhiloxBlock ctr, PhiloxKey key) {
  for (int round = 0; round < 10; ++round) {
    uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return ctr;
}

PhiloxStream::PhiloxStream(uint64_t seed, uint32_t stream0, uint32_t stream1, uint32_t stream2)
    : key_(split_seed(seed)), counter_{0, stream0, stream1, stream2} {}

void PhiloxStream::refill() {
  buffer_ = philox4x32(counter_, key_);
  ++counter_[0];
  index_ = 0;
}

uint32_t PhiloxStream::next_u32() {
  if (index_ == 4) refill();
  return buffer_[index_++];
}

uint64_t PhiloxStream::next_u64() {
  const uint64_t hi = next_u32();
  return (hi << 32) | next_u32();
}

double PhiloxStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

int32_t PhiloxStream::uniform_int(int32_t lo, int32_t hi) {
  const uint32_t range = static_cast<uint32_t>(static_cast<int64_t>(hi) - lo) + 1u;
  if (range == 0) return static_cast<int32_t>(next_u32());  // full 32-bit span
  uint64_t m = static_cast<uint64_t>(next_u32()) * range;
  uint32_t low = static_cast<uint32_t>(m);
  if (low < range) {
    const uint32_t threshold = (0u - range) % range;
    while (low < threshold) {
      m = static_cast<uint64_t>(next_u32()) * range;
      low = static_cast<uint32_t>(m);
    }
  }
  return static_cast<int32_t>(static_cast<int64_t>(lo) + static_cast<int64_t>(m >> 32));
}

double PhiloxStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(theta);
  has_spare_ = true;
  return radius * std::cos(theta);
}

double counter_uniform(uint64_t seed, uint32_t a, uint32_t b, uint32_t c, uint32_t d) {
  const PhiloxBlock out = philox4x32({a, b, c, d}, split_seed(seed));
  const uint64_t bits = (static_cast<uint64_t>(out[0]) << 32) | out[1];
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace oaq

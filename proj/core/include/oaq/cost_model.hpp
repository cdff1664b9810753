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

#include <string>

namespace oaq {

/// Analytic SIMD throughput: one multiply-accumulate per accumulator lane
/// per instruction.
struct CostModel {
  int register_width_bits = 128;
  int accumulator_bits = 16;
  int operand_bits = 8;

  /// Throws InvalidArgumentError on widths that do not tile the register or
  /// operands whose product does not fit the accumulator.
  void validate() const;
  int lanes() const;
  int macs_per_instruction() const { return lanes(); }
};

struct CostComparison {
  int register_width_bits = 128;
  int operand_bits = 8;
  int macs_acc16 = 0;
  int macs_acc32 = 0;
  double speedup() const { return static_cast<double>(macs_acc16) / macs_acc32; }
};

CostComparison compare_accumulators(int register_width_bits = 128, int operand_bits = 8);

}  // namespace oaq

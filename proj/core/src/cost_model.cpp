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


#include "oaq/cost_model.hpp"

#include "oaq/errors.hpp"

namespace oaq {

void CostModel::validate() const {
  if (accumulator_bits != 16 && accumulator_bits != 32) {
    throw InvalidArgumentError("accumulator must be 16 or 32 bits");
  }
  if (register_width_bits < accumulator_bits || register_width_bits % accumulator_bits != 0) {
    throw InvalidArgumentError("register width must be a multiple of the accumulator width");
  }
  if (operand_bits < 1 || 2 * operand_bits > accumulator_bits) {
    throw InvalidArgumentError("operand product must fit the accumulator");
  }
}

int CostModel::lanes() const {
  validate();
  return register_width_bits / accumulator_bits;
}

CostComparison compare_accumulators(int register_width_bits, int operand_bits) {
  CostComparison c;
  c.register_width_bits = register_width_bits;
  c.operand_bits = operand_bits;
  c.macs_acc16 = CostModel{register_width_bits, 16, operand_bits}.macs_per_instruction();
  c.macs_acc32 = CostModel{register_width_bits, 32, operand_bits}.macs_per_instruction();
  return c;
}

}  // namespace oaq

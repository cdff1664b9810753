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

#include <functional>

#include "oaq/qgemm.hpp"

namespace oaq::detail {

/// Shared GEMM driver. weights_by_column is [K, N]; sink receives
/// (row, local column, held accumulator). Report columns are local, but
/// first_event and injection coordinates use col + col_offset.
OverflowReport run_gemm(const Int8Tensor& q_a, const Int8Tensor& weights_by_column,
                        const AccumulatorConfig& cfg, int64_t col_offset,
                        const std::function<void(int64_t, int64_t, int64_t)>& sink);

}  // namespace oaq::detail

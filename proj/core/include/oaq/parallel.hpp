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

#include <algorithm>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace oaq {

/// Splits [0, count) into at most `threads` contiguous chunks and runs
/// fn(begin, end, chunk_index) on each. Chunk boundaries depend only on
/// count and threads, so per-chunk results can be merged in chunk order.
template <typename Fn>
void parallel_chunks(int64_t count, int threads, Fn&& fn) {
  const int64_t workers = std::clamp<int64_t>(threads, 1, std::max<int64_t>(count, 1));
  if (workers == 1) {
    fn(int64_t{0}, count, 0);
    return;
  }
  const int64_t per = (count + workers - 1) / workers;
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));
  for (int64_t w = 0; w < workers; ++w) {
    const int64_t begin = w * per;
    const int64_t end = std::min(count, begin + per);
    pool.emplace_back([&, begin, end, w] {
      try {
        if (begin < end) fn(begin, end, static_cast<int>(w));
      } catch (...) {
        errors[static_cast<size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline int chunk_count(int64_t count, int threads) {
  return static_cast<int>(std::clamp<int64_t>(threads, 1, std::max<int64_t>(count, 1)));
}

}  // namespace oaq

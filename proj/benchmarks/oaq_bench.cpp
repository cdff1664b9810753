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

// Kernel throughput: narrow vs wide accumulation, bookkeeping overhead and
// Monte Carlo trials.

#include <benchmark/benchmark.h>

#include "oaq/lab.hpp"
#include "oaq/qgemm.hpp"
#include "oaq/random.hpp"

namespace oaq {
namespace {

struct Fixture {
  Int8Tensor q_a;
  QGemmPlan plan;
};

Fixture make_fixture(int64_t m, int64_t n, int64_t k) {
  PhiloxStream rng(17, 0);
  Fixture f;
  f.q_a = Int8Tensor({m, n});
  for (auto& v : f.q_a.data()) v = static_cast<int8_t>(rng.uniform_int(-128, 127));
  Int8Tensor q_w({n, k});
  for (auto& v : q_w.data()) v = static_cast<int8_t>(rng.uniform_int(-31, 31));
  const QuantParams pa = derive_scale(-1.0, 1.0, 8);
  const QuantParams pw = derive_scale(-0.25, 0.25, 8, 1.0, true);
  const QuantParams pc = derive_scale(-8.0, 8.0, 8);
  f.plan = build_plan(q_w, pa, pw, pc);
  return f;
}

void run_gemm(benchmark::State& state, AccumulatorWidth width, bool count_events) {
  const int64_t m = state.range(0), n = state.range(1), k = state.range(2);
  const Fixture f = make_fixture(m, n, k);
  AccumulatorConfig cfg;
  cfg.width = width;
  cfg.count_events = count_events;
  for (auto _ : state) {
    auto out = oaq_qgemm(f.q_a, f.plan, cfg);
    benchmark::DoNotOptimize(out);
  }
  state.SetItemsProcessed(state.iterations() * m * n * k);
  state.counters["MACs/s"] =
      benchmark::Counter(static_cast<double>(m * n * k), benchmark::Counter::kIsIterationInvariantRate);
}

void BM_Gemm16(benchmark::State& s) { run_gemm(s, AccumulatorWidth::k16, true); }
void BM_Gemm32(benchmark::State& s) { run_gemm(s, AccumulatorWidth::k32, true); }
void BM_Gemm16NoCount(benchmark::State& s) { run_gemm(s, AccumulatorWidth::k16, false); }
void BM_Gemm32NoCount(benchmark::State& s) { run_gemm(s, AccumulatorWidth::k32, false); }

#define OAQ_GEMM_ARGS ->Args({64, 64, 64})->Args({64, 256, 64})->Args({32, 1024, 32})
BENCHMARK(BM_Gemm16) OAQ_GEMM_ARGS;
BENCHMARK(BM_Gemm32) OAQ_GEMM_ARGS;
BENCHMARK(BM_Gemm16NoCount) OAQ_GEMM_ARGS;
BENCHMARK(BM_Gemm32NoCount) OAQ_GEMM_ARGS;

void BM_MonteCarlo(benchmark::State& state) {
  McConfig cfg;
  cfg.bits = {8};
  cfg.depths = {state.range(0)};
  cfg.trials = 2000;
  cfg.seed = 1;
  for (auto _ : state) {
    auto table = mc_non_overflow_ratio(cfg);
    benchmark::DoNotOptimize(table);
  }
  state.SetItemsProcessed(state.iterations() * cfg.trials);
}
BENCHMARK(BM_MonteCarlo)->Arg(9)->Arg(64)->Arg(1024);

}  // namespace
}  // namespace oaq

BENCHMARK_MAIN();

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

#include <gtest/gtest.h>

#include <cmath>

#include "oaq/qgemm.hpp"
#include "test_util.hpp"

namespace oaq {
namespace {

using testing::random_int8;
using testing::random_problem;

// Step replay of the centered-form accumulation in an int64 holder.
struct Replay {
  uint64_t events = 0;
  bool exact_left_range = false;
  int64_t held = 0;
  int64_t first_step = -1;
};

Replay replay(const Int8Tensor& q_a, const Int8Tensor& centered, int64_t i, int64_t c, int bits,
              OverflowPolicy policy) {
  const int64_t lo = -(int64_t{1} << (bits - 1));
  const int64_t hi = (int64_t{1} << (bits - 1)) - 1;
  const int64_t span = int64_t{1} << bits;
  Replay r;
  int64_t exact = 0;
  for (int64_t j = 0; j < q_a.dim(1); ++j) {
    const int64_t prod = int64_t{q_a.at(i, j)} * centered.at(j, c);
    exact += prod;
    if (exact < lo || exact > hi) r.exact_left_range = true;
    int64_t next = r.held + prod;
    if (next < lo || next > hi) {
      if (r.events == 0) r.first_step = j;
      ++r.events;
      if (policy == OverflowPolicy::kSaturate) {
        next = std::clamp(next, lo, hi);
      } else {
        next = ((next - lo) % span + span) % span + lo;
      }
    }
    r.held = next;
  }
  return r;
}

QuantParams unit_params() { return derive_scale(-128.0, 127.0, 8); }

TEST(ReferenceGemm, TinyDotProduct) {
  const Int8Tensor a({1, 2}, std::vector<int8_t>{1, 2});
  const Int8Tensor b({2, 1}, std::vector<int8_t>{3, 4});
  for (GemmForm form : {GemmForm::kDirect, GemmForm::kExpanded, GemmForm::kCenteredBias}) {
    EXPECT_EQ(reference_accumulators(a, b, 0, 0, form), std::vector<int64_t>{11});
  }
}

TEST(ReferenceGemm, FormsAgreeOnRandomProblems) {
  PhiloxStream rng(11, 1);
  for (int t = 0; t < 300; ++t) {
    const auto p = random_problem(rng, 12, true);
    const auto direct = reference_qgemm(p.q_a, p.q_b, p.pa, p.pb, p.pc, GemmForm::kDirect);
    EXPECT_EQ(direct, reference_qgemm(p.q_a, p.q_b, p.pa, p.pb, p.pc, GemmForm::kExpanded));
    EXPECT_EQ(direct, reference_qgemm(p.q_a, p.q_b, p.pa, p.pb, p.pc, GemmForm::kCenteredBias));
  }
}

TEST(ReferenceGemm, DimensionMismatchThrows) {
  const Int8Tensor a({2, 3});
  const Int8Tensor b({4, 2});
  EXPECT_THROW(reference_accumulators(a, b, 0, 0, GemmForm::kDirect), ShapeError);
}

TEST(ReferenceGemm, WithinScaleBoundOfFloatMatmul) {
  PhiloxStream rng(12, 1);
  for (int t = 0; t < 200; ++t) {
    const auto p = random_problem(rng, 8, true);
    const auto out = reference_qgemm(p.q_a, p.q_b, p.pa, p.pb, p.pc);
    const int64_t n = p.q_a.dim(1);
    for (int64_t i = 0; i < out.dim(0); ++i) {
      for (int64_t c = 0; c < out.dim(1); ++c) {
        double real = 0.0;
        for (int64_t j = 0; j < n; ++j) {
          real += dequantize_value(p.q_a.at(i, j), p.pa) * dequantize_value(p.q_b.at(j, c), p.pb);
        }
        if (real < p.pc.real_min() || real > p.pc.real_max()) continue;  // clamped
        const double bound = p.pc.effective_scale() / 2.0 + p.pc.effective_scale() * 1e-6;
        EXPECT_LE(std::abs(dequantize_value(out.at(i, c), p.pc) - real), bound);
      }
    }
  }
}

TEST(BuildPlan, SymmetricWeightsKeepWeights) {
  PhiloxStream rng(13, 1);
  const Int8Tensor w = random_int8(rng, {6, 3});
  const QuantParams pa = derive_scale(-1.0, 3.0, 8);
  const QuantParams pb = derive_scale(-1.0, 1.0, 8, 1.0, true);
  const QuantParams pc = derive_scale(-20.0, 20.0, 8);
  const QGemmPlan plan = build_plan(w, pa, pb, pc);
  EXPECT_EQ(plan.centered_weights, w);
  for (int64_t c = 0; c < 3; ++c) {
    EXPECT_EQ(plan.bias_term[c], -pa.zero_point * plan.col_sums[c]);
  }
  EXPECT_NO_THROW(plan.validate());
}

TEST(BuildPlan, ZeroPointsFreeBiasIsZero) {
  PhiloxStream rng(14, 1);
  const Int8Tensor w = random_int8(rng, {5, 4});
  const QGemmPlan plan =
      build_plan(w, derive_scale(-1, 1, 8, 1, true), derive_scale(-1, 1, 8, 1, true),
                 derive_scale(-10, 10, 8, 1, true));
  for (int64_t c = 0; c < 4; ++c) EXPECT_EQ(plan.bias_term[c], 0);
}

TEST(BuildPlan, AsymmetricBiasMatchesTermByTermSum) {
  PhiloxStream rng(15, 1);
  const int32_t z_a = 17;
  const int32_t z_b = -5;
  const Int8Tensor w = random_int8(rng, {20, 6}, -128, 122);
  const Int32Tensor b = bias_term(w, z_a, z_b);
  for (int64_t c = 0; c < 6; ++c) {
    int64_t s = 0;
    for (int64_t j = 0; j < 20; ++j) s += -int64_t{z_a} * w.at(j, c) + int64_t{z_a} * z_b;
    EXPECT_EQ(b[c], s);
  }
}

TEST(BuildPlan, CenteredWeightOverflowIdentifiesElements) {
  QuantParams pb = derive_scale(-1.0, 1.0, 8);
  pb.zero_point = -5;
  const Int8Tensor w({2, 2}, std::vector<int8_t>{0, 125, 127, -3});
  try {
    build_plan(w, unit_params(), pb, derive_scale(-1e6, 1e6, 8));
    FAIL() << "expected CenteredWeightOverflowError";
  } catch (const CenteredWeightOverflowError& e) {
    const std::vector<std::pair<int64_t, int64_t>> want{{0, 1}, {1, 0}};
    EXPECT_EQ(e.offending(), want);
  }
}

TEST(BuildPlan, ValidateDetectsStaleBias) {
  PhiloxStream rng(16, 1);
  QGemmPlan plan = build_plan(random_int8(rng, {4, 2}), derive_scale(-1, 3, 8),
                              derive_scale(-1, 1, 8, 1, true), derive_scale(-50, 50, 8));
  plan.bias_term[0] += 1;
  EXPECT_THROW(plan.validate(), Error);
}

TEST(QGemm, SaturatedTripleOverflowsAtThirdStep) {
  const Int8Tensor a({1, 3}, std::vector<int8_t>{127, 127, 127});
  const Int8Tensor w({3, 1}, std::vector<int8_t>{127, 127, 127});
  const QGemmPlan plan = build_plan(w, derive_scale(-1, 1, 8, 1, true),
                                    derive_scale(-1, 1, 8, 1, true), derive_scale(-2e4, 2e4, 8));
  const auto [out, rep] = oaq_qgemm(a, plan);
  EXPECT_GE(rep.events, 1u);
  ASSERT_TRUE(rep.first_event.has_value());
  EXPECT_EQ(rep.first_event->step, 2);
  EXPECT_TRUE(rep.flagged(0, 0));
  EXPECT_EQ(rep.steps, 3u);

  AccumulatorConfig wide;
  wide.width = AccumulatorWidth::k32;
  EXPECT_EQ(oaq_qgemm(a, plan, wide).second.events, 0u);
}

TEST(QGemm, AllZeroInputGivesBiasPath) {
  PhiloxStream rng(17, 1);
  const QuantParams pa = derive_scale(-1, 3, 8);
  const QuantParams pb = derive_scale(-1, 1, 8, 1, true);
  const QuantParams pc = derive_scale(-50, 50, 8);
  const QGemmPlan plan = build_plan(random_int8(rng, {64, 5}), pa, pb, pc);
  const Int8Tensor a({3, 64}, int8_t{0});
  const auto [out, rep] = oaq_qgemm(a, plan);
  EXPECT_EQ(rep.events, 0u);
  EXPECT_TRUE(rep.per_output_flags.empty());
  for (int64_t i = 0; i < 3; ++i) {
    for (int64_t c = 0; c < 5; ++c) {
      const int64_t q = pc.zero_point + apply_multiplier(plan.bias_term[c], plan.multiplier);
      EXPECT_EQ(out.at(i, c), std::clamp<int64_t>(q, pc.qmin(), pc.qmax()));
    }
  }
}

TEST(QGemm, AlphaFourDepthNineRarelyOverflows) {
  PhiloxStream rng(18, 1);
  const QuantParams p4 = derive_scale(-1, 1, 8, 4.0, true);
  int clean = 0;
  const int trials = 2000;
  for (int t = 0; t < trials; ++t) {
    const Int8Tensor a = random_int8(rng, {1, 9}, p4.qmin(), p4.qmax());
    const Int8Tensor w = random_int8(rng, {9, 1}, p4.qmin(), p4.qmax());
    if (count_gemm_overflow(a, w).events == 0) ++clean;
  }
  EXPECT_GE(clean, trials * 99 / 100);
}

TEST(QGemm, OverflowMatchesStepReplay) {
  PhiloxStream rng(19, 1);
  for (int t = 0; t < 400; ++t) {
    const int64_t m = rng.uniform_int(1, 6);
    const int64_t n = rng.uniform_int(1, 40);
    const int64_t k = rng.uniform_int(1, 6);
    const Int8Tensor a = random_int8(rng, {m, n});
    const Int8Tensor w = random_int8(rng, {n, k});
    for (OverflowPolicy policy : {OverflowPolicy::kWrap, OverflowPolicy::kSaturate}) {
      AccumulatorConfig cfg;
      cfg.overflow_policy = policy;
      const OverflowReport rep = count_gemm_overflow(a, w, cfg);
      uint64_t events = 0;
      for (int64_t i = 0; i < m; ++i) {
        for (int64_t c = 0; c < k; ++c) {
          const Replay r = replay(a, w, i, c, 16, policy);
          events += r.events;
          EXPECT_EQ(rep.flagged(i, c), r.exact_left_range);
          EXPECT_EQ(r.events > 0, r.exact_left_range);
        }
      }
      EXPECT_EQ(rep.events, events);
      EXPECT_LE(rep.events, rep.steps);
      EXPECT_EQ(rep.events == 0, rep.per_output_flags.empty());
    }
  }
}

TEST(QGemm, CleanNarrowPathEqualsReference) {
  PhiloxStream rng(20, 1);
  int compared = 0;
  for (int t = 0; t < 400; ++t) {
    const auto p = random_problem(rng, 16, true);
    const QGemmPlan plan = build_plan(p.q_b, p.pa, p.pb, p.pc);
    const auto [out16, rep] = oaq_qgemm(p.q_a, plan);
    AccumulatorConfig wide;
    wide.width = AccumulatorWidth::k32;
    const auto [out32, rep32] = oaq_qgemm(p.q_a, plan, wide);
    EXPECT_EQ(rep32.events, 0u);
    EXPECT_EQ(out32, reference_qgemm(p.q_a, p.q_b, p.pa, p.pb, p.pc));
    if (rep.events == 0) {
      EXPECT_EQ(out16, out32);
      ++compared;
    }
  }
  EXPECT_GT(compared, 0);
}

TEST(QGemm, SaturatePolicyHoldsBound) {
  const Int8Tensor a({1, 4}, std::vector<int8_t>{127, 127, 127, -1});
  const Int8Tensor w({4, 1}, std::vector<int8_t>{127, 127, 127, 127});
  AccumulatorConfig cfg;
  cfg.overflow_policy = OverflowPolicy::kSaturate;
  const Replay r = replay(a, w, 0, 0, 16, OverflowPolicy::kSaturate);
  EXPECT_EQ(r.held, 32767 - 127);
  EXPECT_EQ(count_gemm_overflow(a, w, cfg).events, 1u);
}

TEST(QGemm, LanesChangeOrderNotExactSum) {
  PhiloxStream rng(21, 1);
  const Int8Tensor a = random_int8(rng, {4, 32}, -20, 20);
  const Int8Tensor w = random_int8(rng, {32, 3}, -20, 20);
  AccumulatorConfig cfg;
  cfg.lanes = 4;
  const OverflowReport rep = count_gemm_overflow(a, w, cfg);
  EXPECT_EQ(rep.events, 0u);
  EXPECT_EQ(rep.steps, 4u * 3u * (32u + 3u));
}

TEST(QGemm, InjectionAtZeroRatioIsNoOp) {
  PhiloxStream rng(22, 1);
  const auto p = random_problem(rng, 16, false);
  const QGemmPlan plan = build_plan(p.q_b, p.pa, p.pb, p.pc);
  AccumulatorConfig cfg;
  const auto clean = oaq_qgemm(p.q_a, plan, cfg);
  cfg.injection = OverflowInjection{0.0, 5, 0, InjectionSite::kStep};
  const auto injected = oaq_qgemm(p.q_a, plan, cfg);
  EXPECT_EQ(clean.first, injected.first);
  EXPECT_EQ(clean.second, injected.second);
}

TEST(QGemm, FullInjectionFlagsEveryStep) {
  PhiloxStream rng(23, 1);
  const Int8Tensor a = random_int8(rng, {3, 10}, -5, 5);
  const Int8Tensor w = random_int8(rng, {10, 2}, -5, 5);
  AccumulatorConfig cfg;
  cfg.injection = OverflowInjection{1.0, 9, 0, InjectionSite::kStep};
  const OverflowReport rep = count_gemm_overflow(a, w, cfg);
  EXPECT_EQ(rep.events, rep.steps);
  cfg.injection->site = InjectionSite::kOutput;
  const OverflowReport out = count_gemm_overflow(a, w, cfg);
  EXPECT_EQ(out.events, 6u);
  EXPECT_EQ(out.flagged_outputs(), 6u);
}

TEST(QGemm, DeterministicAcrossThreadCounts) {
  PhiloxStream rng(24, 1);
  const Int8Tensor a = random_int8(rng, {37, 300});
  const QuantParams pb = derive_scale(-1, 1, 8, 1, true);
  const QGemmPlan plan = build_plan(random_int8(rng, {300, 7}), derive_scale(-1, 1, 8, 1, true),
                                    pb, derive_scale(-1e4, 1e4, 8));
  AccumulatorConfig cfg;
  cfg.injection = OverflowInjection{0.01, 3, 1, InjectionSite::kStep};
  const auto base = oaq_qgemm(a, plan, cfg);
  EXPECT_GT(base.second.events, 0u);
  for (int threads : {2, 3, 8}) {
    cfg.threads = threads;
    const auto other = oaq_qgemm(a, plan, cfg);
    EXPECT_EQ(base.first, other.first);
    EXPECT_EQ(base.second, other.second);
  }
}

TEST(QGemm, CountEventsOffGivesEmptyReport) {
  PhiloxStream rng(25, 1);
  const Int8Tensor a = random_int8(rng, {4, 500});
  const Int8Tensor w = random_int8(rng, {500, 3});
  AccumulatorConfig cfg;
  cfg.count_events = false;
  const OverflowReport rep = count_gemm_overflow(a, w, cfg);
  EXPECT_EQ(rep.events, 0u);
  EXPECT_EQ(rep.steps, 0u);
  EXPECT_TRUE(rep.per_output_flags.empty());
}

TEST(OverflowReport, MergeIsCommutativeAndAssociative) {
  auto make = [](uint64_t events, int64_t row, std::vector<uint8_t> flags) {
    OverflowReport r;
    r.rows = 2;
    r.cols = 2;
    r.events = events;
    r.steps = 10;
    r.per_output_flags = std::move(flags);
    if (events > 0) r.first_event = OverflowCoord{row, 0, 1};
    return r;
  };
  const OverflowReport a = make(2, 1, {0, 1, 0, 0});
  const OverflowReport b = make(1, 0, {1, 0, 0, 0});
  const OverflowReport c = make(0, 0, {});
  OverflowReport ab = a, ba = b;
  ab.merge(b);
  ba.merge(a);
  EXPECT_EQ(ab, ba);
  EXPECT_EQ(ab.events, 3u);
  EXPECT_EQ(ab.first_event->row, 0);
  EXPECT_EQ(ab.flagged_outputs(), 2u);
  OverflowReport ab_c = ab, bc = b;
  ab_c.merge(c);
  bc.merge(c);
  OverflowReport a_bc = a;
  a_bc.merge(bc);
  EXPECT_EQ(ab_c, a_bc);
}

}  // namespace
}  // namespace oaq

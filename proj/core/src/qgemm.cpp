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

#include "oaq/qgemm.hpp"

#include <algorithm>
#include <limits>

#include "oaq/parallel.hpp"
#include "oaq/qgemm_internal.hpp"

namespace oaq {
namespace {

constexpr int64_t kInt32Min = std::numeric_limits<int32_t>::min();
constexpr int64_t kInt32Max = std::numeric_limits<int32_t>::max();

int32_t saturate_i32(int64_t v) { return static_cast<int32_t>(std::clamp(v, kInt32Min, kInt32Max)); }

void check_matrix(const Int8Tensor& t, const char* what) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(what) + " must be rank 2, got " + shape_string(t.shape()));
  }
}

Int8Tensor transpose(const Int8Tensor& m) {
  const int64_t rows = m.dim(0);
  const int64_t cols = m.dim(1);
  Int8Tensor t({cols, rows});
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t c = 0; c < cols; ++c) t.at(c, r) = m.at(r, c);
  }
  return t;
}

}  // namespace

Int32Tensor column_sums(const Int8Tensor& q_weights) {
  check_matrix(q_weights, "weights");
  const int64_t n = q_weights.dim(0);
  const int64_t k = q_weights.dim(1);
  Int32Tensor sums({k}, 0);
  for (int64_t j = 0; j < n; ++j) {
    for (int64_t c = 0; c < k; ++c) sums[c] += q_weights.at(j, c);
  }
  return sums;
}

Int32Tensor bias_term(const Int8Tensor& q_weights, int32_t z_in, int32_t z_w) {
  const Int32Tensor sums = column_sums(q_weights);
  const int64_t n = q_weights.dim(0);
  Int32Tensor b(sums.shape());
  for (int64_t c = 0; c < sums.numel(); ++c) {
    const int64_t v = -static_cast<int64_t>(z_in) * sums[c] + n * static_cast<int64_t>(z_in) * z_w;
    if (v < kInt32Min || v > kInt32Max) throw NumericError("bias term exceeds int32");
    b[c] = static_cast<int32_t>(v);
  }
  return b;
}

void QGemmPlan::validate() const {
  check_matrix(q_weights, "weights");
  if (q_weights.dim(0) != depth) throw Error("plan depth disagrees with weights");
  for (int64_t i = 0; i < q_weights.numel(); ++i) {
    if (centered_weights[i] != q_weights[i] - z_w) throw Error("centered weights are stale");
  }
  if (column_sums(q_weights) != col_sums) throw Error("column sums are stale");
  if (oaq::bias_term(q_weights, z_in, z_w) != bias_term) {
    throw Error("bias term is stale");
  }
  if (centered_by_column != transpose(centered_weights)) throw Error("column copy is stale");
  if (!layer_bias.empty() && layer_bias.numel() != out_features()) {
    throw Error("layer bias size disagrees with output features");
  }
}

QGemmPlan build_plan(const Int8Tensor& q_weights, const QuantParams& params_a,
                     const QuantParams& params_b, const QuantParams& params_c,
                     const Int32Tensor& layer_bias) {
  check_matrix(q_weights, "weights");
  params_a.validate();
  params_b.validate();
  params_c.validate();

  QGemmPlan plan;
  plan.q_weights = q_weights;
  plan.depth = q_weights.dim(0);
  plan.z_in = params_a.zero_point;
  plan.z_w = params_b.zero_point;
  plan.z_out = params_c.zero_point;
  plan.out_min = params_c.qmin();
  plan.out_max = params_c.qmax();

  plan.centered_weights = Int8Tensor(q_weights.shape());
  std::vector<std::pair<int64_t, int64_t>> offending;
  const int64_t k = q_weights.dim(1);
  for (int64_t i = 0; i < q_weights.numel(); ++i) {
    const int32_t c = static_cast<int32_t>(q_weights[i]) - plan.z_w;
    if (c < -128 || c > 127) {
      offending.emplace_back(i / k, i % k);
    } else {
      plan.centered_weights[i] = static_cast<int8_t>(c);
    }
  }
  if (!offending.empty()) {
    const std::string what = std::to_string(offending.size()) +
                             " centered weights leave int8 with Z_b = " + std::to_string(plan.z_w);
    throw CenteredWeightOverflowError(what, std::move(offending));
  }
  plan.col_sums = column_sums(q_weights);
  plan.bias_term = oaq::bias_term(q_weights, plan.z_in, plan.z_w);
  if (!layer_bias.empty() && layer_bias.numel() != k) {
    throw ShapeError("layer bias has " + std::to_string(layer_bias.numel()) + " entries, need " +
                     std::to_string(k));
  }
  plan.layer_bias = layer_bias;
  plan.multiplier = compile_multiplier(params_a.effective_scale() * params_b.effective_scale() /
                                       params_c.effective_scale());
  plan.centered_by_column = transpose(plan.centered_weights);
  return plan;
}

Int32Tensor quantize_bias(const FloatTensor& bias, const QuantParams& params_a,
                          const QuantParams& params_b) {
  const double s = params_a.effective_scale() * params_b.effective_scale();
  Int32Tensor out(bias.shape());
  for (int64_t i = 0; i < bias.numel(); ++i) {
    const double q = round_half_away(static_cast<double>(bias[i]) / s);
    out[i] = static_cast<int32_t>(
        std::clamp(q, static_cast<double>(kInt32Min), static_cast<double>(kInt32Max)));
  }
  return out;
}

std::vector<int64_t> reference_accumulators(const Int8Tensor& q_a, const Int8Tensor& q_b,
                                            int32_t z_a, int32_t z_b, GemmForm form) {
  check_matrix(q_a, "activations");
  check_matrix(q_b, "weights");
  const int64_t m = q_a.dim(0);
  const int64_t n = q_a.dim(1);
  const int64_t k = q_b.dim(1);
  if (q_b.dim(0) != n) {
    throw ShapeError("inner dimensions disagree: " + shape_string(q_a.shape()) + " x " +
                     shape_string(q_b.shape()));
  }
  std::vector<int64_t> acc(static_cast<size_t>(m * k), 0);
  switch (form) {
    case GemmForm::kDirect:
      for (int64_t i = 0; i < m; ++i) {
        for (int64_t c = 0; c < k; ++c) {
          int64_t s = 0;
          for (int64_t j = 0; j < n; ++j) {
            s += (static_cast<int64_t>(q_a.at(i, j)) - z_a) * (static_cast<int64_t>(q_b.at(j, c)) - z_b);
          }
          acc[static_cast<size_t>(i * k + c)] = s;
        }
      }
      break;
    case GemmForm::kExpanded: {
      std::vector<int64_t> ma(static_cast<size_t>(m), 0), mb(static_cast<size_t>(k), 0);
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) ma[static_cast<size_t>(i)] += q_a.at(i, j);
      for (int64_t j = 0; j < n; ++j)
        for (int64_t c = 0; c < k; ++c) mb[static_cast<size_t>(c)] += q_b.at(j, c);
      for (int64_t i = 0; i < m; ++i) {
        for (int64_t c = 0; c < k; ++c) {
          int64_t s = 0;
          for (int64_t j = 0; j < n; ++j) s += static_cast<int64_t>(q_a.at(i, j)) * q_b.at(j, c);
          acc[static_cast<size_t>(i * k + c)] = n * int64_t{z_a} * z_b - int64_t{z_a} * mb[static_cast<size_t>(c)] -
                                                 int64_t{z_b} * ma[static_cast<size_t>(i)] + s;
        }
      }
      break;
    }
    case GemmForm::kCenteredBias: {
      // Centered weights kept in int32 here, so this form is defined even
      // when q_b - Z_b does not fit int8.
      for (int64_t c = 0; c < k; ++c) {
        int64_t mb = 0;
        for (int64_t j = 0; j < n; ++j) mb += q_b.at(j, c);
        const int64_t b = -int64_t{z_a} * mb + n * int64_t{z_a} * z_b;
        for (int64_t i = 0; i < m; ++i) {
          int64_t s = 0;
          for (int64_t j = 0; j < n; ++j) {
            s += static_cast<int64_t>(q_a.at(i, j)) * (static_cast<int64_t>(q_b.at(j, c)) - z_b);
          }
          acc[static_cast<size_t>(i * k + c)] = s + b;
        }
      }
      break;
    }
  }
  return acc;
}

Int8Tensor reference_qgemm(const Int8Tensor& q_a, const Int8Tensor& q_b,
                           const QuantParams& params_a, const QuantParams& params_b,
                           const QuantParams& params_c, GemmForm form) {
  params_a.validate();
  params_b.validate();
  params_c.validate();
  const auto acc =
      reference_accumulators(q_a, q_b, params_a.zero_point, params_b.zero_point, form);
  const FixedPointMultiplier mult = compile_multiplier(
      params_a.effective_scale() * params_b.effective_scale() / params_c.effective_scale());
  Int8Tensor out({q_a.dim(0), q_b.dim(1)});
  for (size_t i = 0; i < acc.size(); ++i) {
    const int64_t q =
        int64_t{params_c.zero_point} + apply_multiplier(saturate_i32(acc[i]), mult);
    out[static_cast<int64_t>(i)] =
        static_cast<int8_t>(std::clamp<int64_t>(q, params_c.qmin(), params_c.qmax()));
  }
  return out;
}

namespace detail {

int8_t requantize(int64_t held, int64_t col, const QGemmPlan& plan) {
  int64_t total = held + plan.bias_term[col];
  if (!plan.layer_bias.empty()) total += plan.layer_bias[col];
  const int64_t q = int64_t{plan.z_out} + apply_multiplier(saturate_i32(total), plan.multiplier);
  return static_cast<int8_t>(std::clamp<int64_t>(q, plan.out_min, plan.out_max));
}

OverflowReport run_gemm(const Int8Tensor& q_a, const Int8Tensor& weights_by_column,
                        const AccumulatorConfig& cfg, int64_t col_offset,
                        const std::function<void(int64_t, int64_t, int64_t)>& sink) {
  const int64_t m = q_a.dim(0);
  const int64_t n = q_a.dim(1);
  const int64_t k = weights_by_column.dim(0);
  const int chunks = chunk_count(m, cfg.threads);
  std::vector<OverflowReport> partial(static_cast<size_t>(chunks));
  std::vector<uint8_t> flags;
  if (cfg.count_events) flags.assign(static_cast<size_t>(m * k), 0);

  parallel_chunks(m, cfg.threads, [&](int64_t begin, int64_t end, int chunk) {
    OverflowReport& rep = partial[static_cast<size_t>(chunk)];
    for (int64_t i = begin; i < end; ++i) {
      const int8_t* a = q_a.data().data() + i * n;
      for (int64_t c = 0; c < k; ++c) {
        const int8_t* w = weights_by_column.data().data() + c * n;
        const AccumResult r = accumulate(a, w, n, cfg, i, c + col_offset);
        rep.steps += r.steps;
        if (r.events > 0) {
          rep.events += r.events;
          flags[static_cast<size_t>(i * k + c)] = 1;
          const OverflowCoord coord{i, c + col_offset, r.first_step};
          if (!rep.first_event || coord < *rep.first_event) rep.first_event = coord;
        }
        sink(i, c, r.value);
      }
    }
  });

  OverflowReport report;
  report.rows = m;
  report.cols = k;
  for (const auto& p : partial) report.merge_counts(p);
  if (report.events > 0) report.per_output_flags = std::move(flags);
  return report;
}

}  // namespace detail

std::pair<Int8Tensor, OverflowReport> oaq_qgemm(const Int8Tensor& q_a, const QGemmPlan& plan,
                                                const AccumulatorConfig& cfg) {
  check_matrix(q_a, "activations");
  if (q_a.dim(1) != plan.depth) {
    throw ShapeError("activation depth " + std::to_string(q_a.dim(1)) + " != plan depth " +
                     std::to_string(plan.depth));
  }
  const int64_t k = plan.out_features();
  Int8Tensor out({q_a.dim(0), k});
  OverflowReport report = detail::run_gemm(
      q_a, plan.centered_by_column, cfg, 0,
      [&](int64_t i, int64_t c, int64_t held) { out.at(i, c) = detail::requantize(held, c, plan); });
  return {std::move(out), std::move(report)};
}

OverflowReport count_gemm_overflow(const Int8Tensor& q_a, const Int8Tensor& centered_weights,
                                   const AccumulatorConfig& cfg) {
  check_matrix(q_a, "activations");
  check_matrix(centered_weights, "weights");
  if (q_a.dim(1) != centered_weights.dim(0)) {
    throw ShapeError("inner dimensions disagree: " + shape_string(q_a.shape()) + " x " +
                     shape_string(centered_weights.shape()));
  }
  return detail::run_gemm(q_a, transpose(centered_weights), cfg, 0,
                          [](int64_t, int64_t, int64_t) {});
}

}  // namespace oaq

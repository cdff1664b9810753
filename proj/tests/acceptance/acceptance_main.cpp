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

// Acceptance gate. Prints one PASS/FAIL line per criterion and exits nonzero
// when any criterion fails. Arguments select a subset, e.g. `oaq_acceptance 1 7`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "../unit/test_util.hpp"
#include "oaq/cost_model.hpp"
#include "oaq/integer_model.hpp"
#include "oaq/lab.hpp"
#include "oaq/model_io.hpp"
#include "oaq/qgemm.hpp"
#include "oaq/qoat.hpp"
#include "oaq/reports.hpp"
#include "oaq/train.hpp"

namespace oaq {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

AccumulatorConfig acc32() {
  AccumulatorConfig a;
  a.width = AccumulatorWidth::k32;
  return a;
}

// ---------------------------------------------------------------------------
// 1. Three GEMM formulations agree exactly.

Outcome criterion_algebra() {
  Outcome o;
  const auto t0 = Clock::now();
  PhiloxStream rng(1001, 1);
  int mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto p = testing::random_problem(rng, 16, t % 2 == 0);
    const Int8Tensor direct = reference_qgemm(p.q_a, p.q_b, p.pa, p.pb, p.pc, GemmForm::kDirect);
    const Int8Tensor expanded =
        reference_qgemm(p.q_a, p.q_b, p.pa, p.pb, p.pc, GemmForm::kExpanded);
    const Int8Tensor centered =
        reference_qgemm(p.q_a, p.q_b, p.pa, p.pb, p.pc, GemmForm::kCenteredBias);
    const Int8Tensor kernel = oaq_qgemm(p.q_a, build_plan(p.q_b, p.pa, p.pb, p.pc), acc32()).first;
    if (direct != expanded || direct != centered || direct != kernel) ++mismatches;
  }
  const double secs = seconds_since(t0);
  o.check(mismatches == 0, std::to_string(mismatches) + " mismatching problems");
  o.check(secs < 10.0, fmt("took %.1f s", secs));
  o.detail = o.pass ? fmt("1000 problems identical in %.2f s", secs) : o.detail;
  return o;
}

// ---------------------------------------------------------------------------
// 2. Dequantized kernel output within N S_a S_b / 2 + S_c / 2 of the float
// product of the dequantized operands (plus the real layer bias).

Outcome criterion_fidelity() {
  Outcome o;
  PhiloxStream rng(1002, 1);
  int64_t elements = 0, violations = 0;
  double worst_ratio = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const auto p = testing::random_problem(rng, 16, t % 2 == 0);
    const int64_t m = p.q_a.dim(0), n = p.q_a.dim(1), k = p.q_b.dim(1);
    const double sa = p.pa.effective_scale(), sb = p.pb.effective_scale();
    const double sc = p.pc.effective_scale();
    const FloatTensor bias = testing::random_float(rng, {k}, -sc * 20, sc * 20);
    const Int32Tensor qbias = quantize_bias(bias, p.pa, p.pb);
    const QGemmPlan plan = build_plan(p.q_b, p.pa, p.pb, p.pc, qbias);
    const Int8Tensor out = oaq_qgemm(p.q_a, plan, acc32()).first;
    const double bound = static_cast<double>(n) * sa * sb / 2.0 + sc / 2.0;
    for (int64_t i = 0; i < m; ++i) {
      for (int64_t c = 0; c < k; ++c) {
        long double real = bias[c];
        for (int64_t j = 0; j < n; ++j) {
          real += static_cast<long double>(dequantize_value(p.q_a.at(i, j), p.pa)) *
                  dequantize_value(p.q_b.at(j, c), p.pb);
        }
        const double target =
            std::clamp(static_cast<double>(real), p.pc.real_min(), p.pc.real_max());
        const double err = std::abs(dequantize_value(out.at(i, c), p.pc) - target);
        worst_ratio = std::max(worst_ratio, err / bound);
        ++elements;
        if (err > bound) ++violations;
      }
    }
  }
  o.check(violations == 0, std::to_string(violations) + " of " + std::to_string(elements) +
                               " elements outside the bound");
  if (o.pass) {
    o.detail = std::to_string(elements) + " elements, worst error " +
               fmt("%.3f", worst_ratio) + " of the bound";
  }
  return o;
}

// ---------------------------------------------------------------------------
// 3. 16-bit overflow detection against an exact step replay.

Outcome criterion_detection() {
  Outcome o;
  PhiloxStream rng(1003, 1);
  int64_t report_mismatch = 0, flag_mismatch = 0, output_mismatch = 0;
  int64_t overflowing = 0, clean = 0;
  for (int t = 0; t < 10000; ++t) {
    const int64_t m = rng.uniform_int(1, 4);
    const int64_t n = rng.uniform_int(1, 96);
    const int64_t k = rng.uniform_int(1, 4);
    const QuantParams pa = testing::random_params(rng, 6.0);
    const QuantParams pb = testing::random_params(rng, 2.0, rng.uniform() < 0.5);
    const double sab = pa.effective_scale() * pb.effective_scale();
    const QuantParams pc = derive_scale(-sab * 4000.0, sab * 4000.0, 8);
    const Int8Tensor q_a = testing::random_int8(rng, {m, n}, pa.qmin(), pa.qmax());
    const int32_t blo = std::max(pb.qmin(), -128 + pb.zero_point);
    const int32_t bhi = std::min(pb.qmax(), 127 + pb.zero_point);
    const Int8Tensor q_b = testing::random_int8(rng, {n, k}, blo, bhi);
    const QGemmPlan plan = build_plan(q_b, pa, pb, pc);

    AccumulatorConfig cfg;
    cfg.overflow_policy = t % 2 == 0 ? OverflowPolicy::kWrap : OverflowPolicy::kSaturate;
    const auto [out16, rep] = oaq_qgemm(q_a, plan, cfg);
    const auto [out32, rep32] = oaq_qgemm(q_a, plan, acc32());

    uint64_t events = 0;
    for (int64_t i = 0; i < m; ++i) {
      for (int64_t c = 0; c < k; ++c) {
        int64_t exact = 0, held = 0;
        bool left = false;
        for (int64_t j = 0; j < n; ++j) {
          const int64_t prod = int64_t{q_a.at(i, j)} * plan.centered_weights.at(j, c);
          exact += prod;
          left |= exact < -32768 || exact > 32767;
          int64_t next = held + prod;
          if (next < -32768 || next > 32767) {
            ++events;
            next = cfg.overflow_policy == OverflowPolicy::kSaturate
                       ? std::clamp<int64_t>(next, -32768, 32767)
                       : ((next + 32768) % 65536 + 65536) % 65536 - 32768;
          }
          held = next;
        }
        if (rep.flagged(i, c) != left) ++flag_mismatch;
      }
    }
    if (rep.events != events || (events == 0) != rep.per_output_flags.empty()) ++report_mismatch;
    if (rep.events == 0) {
      ++clean;
      if (out16 != out32) ++output_mismatch;
    } else {
      ++overflowing;
    }
  }
  o.check(report_mismatch == 0, std::to_string(report_mismatch) + " N_o mismatches");
  o.check(flag_mismatch == 0, std::to_string(flag_mismatch) + " flag mismatches");
  o.check(output_mismatch == 0, std::to_string(output_mismatch) + " clean outputs differ from 32-bit");
  o.check(overflowing > 0 && clean > 0, "problem mix lacks overflowing or clean cases");
  if (o.pass) {
    o.detail = "10000 GEMMs, " + std::to_string(overflowing) + " overflowing, " +
               std::to_string(clean) + " clean and bit-exact";
  }
  return o;
}

// ---------------------------------------------------------------------------
// 4. Monte Carlo non-overflow ratios.

Outcome criterion_monte_carlo() {
  Outcome o;
  const auto t0 = Clock::now();
  McConfig cfg;
  cfg.trials = 100000;
  cfg.seed = 2020;
  cfg.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const auto table = mc_non_overflow_ratio(cfg);
  const double secs = seconds_since(t0);

  auto cell = [&](int bits, int64_t depth) -> const McCell& {
    for (const auto& c : table) {
      if (c.bits == bits && c.depth == depth) return c;
    }
    throw Error("missing Monte Carlo cell");
  };
  auto within = [](const McCell& lower, const McCell& higher) {
    // lower.ratio() should not exceed higher.ratio() beyond 3 sigma.
    const double sigma = std::sqrt(lower.std_error() * lower.std_error() +
                                   higher.std_error() * higher.std_error());
    return lower.ratio() <= higher.ratio() + 3.0 * sigma;
  };
  o.check(cell(6, 9).ratio() >= 0.99, fmt("6-bit/N=9 ratio %.4f", cell(6, 9).ratio()));
  o.check(cell(8, 1024).ratio() <= 0.01, fmt("8-bit/N=1024 ratio %.4f", cell(8, 1024).ratio()));
  for (int b : cfg.bits) {
    for (size_t d = 1; d < cfg.depths.size(); ++d) {
      if (!within(cell(b, cfg.depths[d]), cell(b, cfg.depths[d - 1]))) {
        o.check(false, "increase in depth at bits " + std::to_string(b));
      }
    }
  }
  for (int64_t n : cfg.depths) {
    for (size_t i = 1; i < cfg.bits.size(); ++i) {
      if (!within(cell(cfg.bits[i], n), cell(cfg.bits[i - 1], n))) {
        o.check(false, "increase in bits at depth " + std::to_string(n));
      }
    }
  }
  o.check(secs < 60.0, fmt("took %.1f s", secs));

  // The seeded table is the regression baseline.
  std::ifstream in(OAQ_MC_BASELINE);
  std::stringstream want;
  want << in.rdbuf();
  const std::string got = mc_table_csv(table).str();
  if (!std::filesystem::exists(OAQ_MC_BASELINE)) {
    o.check(false, "baseline file missing");
  } else {
    o.check(want.str() == got, "table differs from the recorded baseline");
  }
  if (o.pass) {
    o.detail = fmt("6b/N9 %.4f, ", cell(6, 9).ratio()) +
               fmt("8b/N1024 %.5f, ", cell(8, 1024).ratio()) +
               fmt("monotone within 3 sigma, matches baseline, %.1f s", secs);
  }
  return o;
}

// ---------------------------------------------------------------------------
// 5, 6, 8. Calibration run on the digit MLP.

struct CalibrationRun {
  ModelGraph quantized, baseline;
  Dataset test;
  double train_seconds = 0.0;
  double float_accuracy = 0.0;
  IntegerEval held_out;
  std::vector<InjectionPoint> injection;
  IntegerEval clean_eval;
};

const CalibrationRun& calibration_run() {
  static const CalibrationRun run = [] {
    CalibrationRun r;
    DigitsConfig dc;
    dc.samples = 6000;
    dc.size = 32;
    dc.noise = 0.15;
    dc.seed = 1;
    auto [train, test] = split_dataset(make_digits(dc), 5000);
    r.test = std::move(test);

    TrainConfig tc;
    tc.max_steps = 5000;
    tc.seed = 3;
    tc.calib.lr_d = 1e-4;
    r.quantized = make_architecture("mlp:1024-64-32-10");
    initialize_weights(r.quantized, 7);
    r.baseline = r.quantized;

    const auto t0 = Clock::now();
    train_toy(r.quantized, train, 100, tc);
    const IntegerModel m = compile_integer_model(r.quantized);
    r.held_out = evaluate_integer(m, r.test);
    r.train_seconds = seconds_since(t0);

    tc.quantize = false;
    train_toy(r.baseline, train, 100, tc);
    r.float_accuracy = evaluate(r.baseline, r.test, false).accuracy;

    InjectionSpec spec;
    spec.ratios = {0.0, 0.0005, 0.05};
    spec.site = InjectionSite::kOutput;
    spec.seed = 5;
    r.injection = inject_overflow(m, spec, r.test);
    r.clean_eval = r.held_out;
    return r;
  }();
  return run;
}

Outcome criterion_calibration() {
  Outcome o;
  const CalibrationRun& r = calibration_run();
  std::string per_layer;
  for (const auto& [layer, rep] : r.held_out.layer_reports) {
    per_layer += (per_layer.empty() ? "" : " ") + layer + "=" + std::to_string(rep.events);
    o.check(rep.events == 0, layer + " N_o=" + std::to_string(rep.events));
  }
  double min_alpha = 1e9, min_bits = 1e9;
  for (const AlphaRow& row : alpha_report(r.quantized)) {
    min_alpha = std::min({min_alpha, row.weight_alpha, row.activation_alpha});
    min_bits = std::min({min_bits, row.weight_effective_bits(), row.activation_effective_bits()});
  }
  for (const auto& [owner, rec] : r.quantized.records()) {
    min_alpha = std::min(min_alpha, rec.alpha);
    min_bits = std::min(min_bits, effective_bits(rec.bits, rec.alpha));
  }
  o.check(min_alpha >= 1.0, fmt("min alpha %.4f", min_alpha));
  o.check(min_bits >= 4.0, fmt("min effective bits %.3f", min_bits));
  o.check(r.train_seconds < 300.0, fmt("took %.1f s", r.train_seconds));
  if (o.pass) {
    o.detail = "held-out N_o " + per_layer + fmt(", min alpha %.3f", min_alpha) +
               fmt(", min effective bits %.2f", min_bits) + fmt(", %.1f s", r.train_seconds);
  }
  return o;
}

Outcome criterion_accuracy() {
  Outcome o;
  const CalibrationRun& r = calibration_run();
  const double gap = (r.float_accuracy - r.held_out.accuracy) * 100.0;
  o.check(gap <= 2.0, fmt("gap %.2f points", gap));
  o.detail = fmt("float %.4f, ", r.float_accuracy) + fmt("int16 %.4f, ", r.held_out.accuracy) +
             fmt("gap %.2f points", gap);
  return o;
}

Outcome criterion_injection() {
  Outcome o;
  const CalibrationRun& r = calibration_run();
  const auto& c = r.injection;
  o.check(c.size() == 3, "expected three ratio points");
  if (!o.pass) return o;
  o.check(c[0].accuracy == r.clean_eval.accuracy, "ratio 0 differs from clean inference");
  o.check(c[1].accuracy <= c[0].accuracy && c[2].accuracy <= c[1].accuracy,
          "accuracy increases with ratio");
  const double drop = (c[0].accuracy - c[1].accuracy) * 100.0;
  o.check(std::abs(drop) < 1.0, fmt("0.05%% injection changes accuracy by %.2f points", drop));
  o.detail = fmt("accuracy %.4f", c[0].accuracy) + fmt(" / %.4f", c[1].accuracy) +
             fmt(" / %.4f at ratios 0 / 0.0005 / 0.05", c[2].accuracy);
  return o;
}

// ---------------------------------------------------------------------------
// 7. Alpha update rule.

Outcome criterion_alpha_rule() {
  Outcome o;
  auto cfg_with = [](double lr_i, double lr_d, double l_c) {
    CalibConfig c;
    c.lr_i = lr_i;
    c.lr_d = lr_d;
    c.l_c = l_c;
    c.update_every = 10;
    c.lr_i_decay = 0.99;
    return c;
  };
  struct Row {
    const char* name;
    double alpha;
    uint64_t n_o;
    CalibConfig cfg;
    int64_t step;
    double expected;
  };
  const std::vector<Row> rows = {
      {"decrease", 2.0, 0, cfg_with(0.05, 0.001, 0.2), 0, 2.0 - 0.001},
      {"log increase", 1.5, 100, cfg_with(0.01, 0.001, 0.1), 0, 1.5 + 0.01 * std::log(100.0)},
      {"cap", 1.5, 1000000000, cfg_with(0.01, 0.001, 0.1), 0, 1.5 + 0.1},
      {"cap huge", 3.0, UINT64_MAX, cfg_with(0.05, 0.001, 0.2), 0, 3.0 + 0.2},
      {"floor", 1.0005, 0, cfg_with(0.05, 0.001, 0.2), 0, 1.0},
      {"floor at one", 1.0, 0, cfg_with(0.05, 0.001, 0.2), 0, 1.0},
      {"single overflow", 1.0, 1, cfg_with(0.05, 0.001, 0.2), 0, 1.0 + 0.05},
      {"decay", 1.0, 100, cfg_with(0.01, 0.001, 0.1), 25,
       1.0 + 0.01 * std::pow(0.99, 2.0) * std::log(100.0)},
      {"decay boundary", 1.0, 100, cfg_with(0.01, 0.001, 0.1), 9, 1.0 + 0.01 * std::log(100.0)},
  };
  for (const Row& row : rows) {
    const double got = update_alpha(row.alpha, row.n_o, row.cfg, row.step);
    o.check(got == row.expected, std::string(row.name) + fmt(" gave %.17g", got));
  }
  const CalibConfig d = cfg_with(0.05, 0.001, 0.2);
  o.check(lr_i_at(d, 0) == 0.05 && lr_i_at(d, 10) == 0.05 * 0.99 &&
              lr_i_at(d, 30) == 0.05 * std::pow(0.99, 3.0),
          "lr_i decay schedule");
  if (o.pass) o.detail = std::to_string(rows.size()) + " table rows and the decay schedule exact";
  return o;
}

// ---------------------------------------------------------------------------
// 9. Cost model.

Outcome criterion_cost_model() {
  Outcome o;
  const CostComparison c = compare_accumulators(128, 8);
  o.check(c.macs_acc32 == 4, "acc32 lanes " + std::to_string(c.macs_acc32));
  o.check(c.macs_acc16 == 8, "acc16 lanes " + std::to_string(c.macs_acc16));
  o.check(c.speedup() == 2.0, fmt("ratio %.3f", c.speedup()));
  if (o.pass) o.detail = "128-bit register: 4 vs 8 MACs per instruction, ratio 2.0";
  return o;
}

// ---------------------------------------------------------------------------
// 10. Serialization roundtrip.

ModelGraph random_model(PhiloxStream& rng, uint64_t seed, FloatTensor& probe) {
  ModelGraph g;
  if (rng.uniform() < 0.3) {
    const int64_t side = rng.uniform_int(8, 12);
    const int64_t channels = rng.uniform_int(1, 3);
    g = make_architecture("cnn:" + std::to_string(side) + "x" + std::to_string(side) + "x" +
                          std::to_string(channels) + "-" + std::to_string(rng.uniform_int(2, 10)));
    probe = testing::random_float(rng, {4, side, side, channels}, -1.0, 1.0);
  } else {
    std::string spec = "mlp:" + std::to_string(rng.uniform_int(2, 64));
    const int hidden = rng.uniform_int(0, 3);
    for (int i = 0; i < hidden; ++i) spec += "-" + std::to_string(rng.uniform_int(2, 48));
    spec += "-" + std::to_string(rng.uniform_int(2, 10));
    g = make_architecture(spec);
    probe = testing::random_float(rng, {8, g.input_shape()[0]}, -2.0, 2.0);
  }
  initialize_weights(g, seed);
  for (auto& [name, w] : g.all_weights()) {
    for (int64_t i = 0; i < w.bias.numel(); ++i) w.bias[i] = static_cast<float>(rng.normal() * 0.1);
    w.quant.alpha = 1.0 + rng.uniform();
  }
  ForwardOptions fo;
  fo.observe = true;
  forward(g, testing::random_float(rng, probe.shape(), -2.0, 2.0), fo);
  for (auto& [owner, rec] : g.records()) rec.alpha = 1.0 + 2.0 * rng.uniform();
  return g;
}

Outcome criterion_roundtrip() {
  Outcome o;
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "oaq_acceptance_roundtrip";
  fs::remove_all(dir);
  fs::create_directories(dir);
  PhiloxStream rng(1010, 1);
  int graph_mismatch = 0, output_mismatch = 0;
  for (int t = 0; t < 100; ++t) {
    FloatTensor probe;
    const ModelGraph g = random_model(rng, 100 + t, probe);
    const std::string path = (dir / ("model" + std::to_string(t) + ".json")).string();
    save_model(g, path);
    const ModelGraph back = load_model(path);
    if (!(back == g)) ++graph_mismatch;
    const InferenceResult a = run_integer(compile_integer_model(g), probe);
    const InferenceResult b = run_integer(compile_integer_model(back), probe);
    if (a.output != b.output || a.logits != b.logits || a.layer_reports != b.layer_reports) {
      ++output_mismatch;
    }
  }
  fs::remove_all(dir);
  o.check(graph_mismatch == 0, std::to_string(graph_mismatch) + " graphs differ after load");
  o.check(output_mismatch == 0, std::to_string(output_mismatch) + " inference outputs differ");
  if (o.pass) o.detail = "100 random models bit-identical after save/load/infer";
  return o;
}

}  // namespace
}  // namespace oaq

int main(int argc, char** argv) {
  using namespace oaq;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"bit-exact GEMM algebra", criterion_algebra},
      {"quantization fidelity", criterion_fidelity},
      {"overflow detection soundness", criterion_detection},
      {"Monte Carlo non-overflow study", criterion_monte_carlo},
      {"calibration eliminates overflow", criterion_calibration},
      {"accuracy retention", criterion_accuracy},
      {"alpha update rule", criterion_alpha_rule},
      {"overflow injection study", criterion_injection},
      {"cost model", criterion_cost_model},
      {"serialization roundtrip", criterion_roundtrip},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    failures += out.pass ? 0 : 1;
    std::printf("criterion %2d %s: %s (%s)\n", id, out.pass ? "PASS" : "FAIL", criteria[i].first,
                out.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}

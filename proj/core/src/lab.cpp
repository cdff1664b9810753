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


#include "oaq/lab.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "oaq/executor.hpp"
#include "oaq/parallel.hpp"
#include "oaq/random.hpp"

namespace oaq {
namespace {

int32_t draw_operand(PhiloxStream& rng, int bits, OperandDistribution dist) {
  const int32_t lo = -(1 << (bits - 1));
  const int32_t hi = (1 << (bits - 1)) - 1;
  if (dist == OperandDistribution::kUniform) return rng.uniform_int(lo, hi);
  const double sigma = (1 << (bits - 1)) / 3.0;
  for (;;) {
    const double v = std::round(rng.normal() * sigma);
    if (v >= lo && v <= hi) return static_cast<int32_t>(v);
  }
}

}  // namespace

const char* distribution_name(OperandDistribution d) {
  return d == OperandDistribution::kUniform ? "uniform" : "truncated-normal";
}

OperandDistribution distribution_from_name(const std::string& name) {
  if (name == "uniform") return OperandDistribution::kUniform;
  if (name == "truncated-normal" || name == "normal") return OperandDistribution::kTruncatedNormal;
  throw InvalidArgumentError("unknown distribution '" + name + "'");
}

void McConfig::validate() const {
  if (bits.empty() || depths.empty()) throw InvalidArgumentError("bits and depths must be set");
  for (int b : bits) {
    if (b < kMinBits || b > kMaxBits) throw InvalidArgumentError("bits must lie in [2, 8]");
  }
  for (int64_t d : depths) {
    if (d < 1 || d > int64_t{1} << 31) throw InvalidArgumentError("depths must be positive");
  }
  if (trials < 1 || trials > int64_t{1} << 32) throw InvalidArgumentError("trials must be >= 1");
  if (accumulator_bits < 8 || accumulator_bits > 32) {
    throw InvalidArgumentError("accumulator bits must lie in [8, 32]");
  }
  if (threads < 1) throw InvalidArgumentError("threads must be >= 1");
}

double McCell::std_error() const {
  const double p = ratio();
  return std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

bool mc_trial_overflows(int bits, int64_t depth, int accumulator_bits, uint64_t seed,
                        uint32_t trial, OperandDistribution dist) {
  PhiloxStream rng(seed, static_cast<uint32_t>(bits), static_cast<uint32_t>(depth), trial);
  const int64_t lo = -(int64_t{1} << (accumulator_bits - 1));
  const int64_t hi = (int64_t{1} << (accumulator_bits - 1)) - 1;
  int64_t sum = 0;
  for (int64_t j = 0; j < depth; ++j) {
    const int64_t a = draw_operand(rng, bits, dist);
    const int64_t b = draw_operand(rng, bits, dist);
    sum += a * b;
    if (sum < lo || sum > hi) return true;
  }
  return false;
}

std::vector<McCell> mc_non_overflow_ratio(const McConfig& cfg) {
  cfg.validate();
  std::vector<McCell> table;
  for (int b : cfg.bits) {
    for (int64_t d : cfg.depths) {
      const int chunks = chunk_count(cfg.trials, cfg.threads);
      std::vector<int64_t> clean(static_cast<size_t>(chunks), 0);
      parallel_chunks(cfg.trials, cfg.threads, [&](int64_t begin, int64_t end, int chunk) {
        int64_t ok = 0;
        for (int64_t t = begin; t < end; ++t) {
          ok += !mc_trial_overflows(b, d, cfg.accumulator_bits, cfg.seed,
                                    static_cast<uint32_t>(t), cfg.distribution);
        }
        clean[static_cast<size_t>(chunk)] = ok;
      });
      McCell cell{b, d, cfg.trials, 0};
      for (int64_t c : clean) cell.non_overflow += c;
      table.push_back(cell);
    }
  }
  return table;
}

void InjectionSpec::validate() const {
  if (ratios.empty()) throw InvalidArgumentError("injection needs at least one ratio");
  for (double r : ratios) {
    if (!(r >= 0.0 && r <= 1.0)) throw InvalidArgumentError("injection ratios must lie in [0, 1]");
  }
}

std::vector<std::string> resolve_layer_selector(const ModelGraph& g, const std::string& selector) {
  const auto weighted = g.weighted_layers();
  if (weighted.empty()) throw InvalidArgumentError("graph has no weighted layers");
  std::vector<std::string> names;
  for (const LayerSpec* l : weighted) names.push_back(l->name);
  if (selector == "all") return names;
  if (selector == "first") return {names.front()};
  if (selector == "last") return {names.back()};
  if (selector == "second") {
    if (names.size() < 2) throw InvalidArgumentError("graph has a single weighted layer");
    return {names[1]};
  }
  std::vector<std::string> out;
  std::stringstream ss(selector);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (std::find(names.begin(), names.end(), item) != names.end()) {
      out.push_back(item);
      continue;
    }
    size_t used = 0;
    int64_t idx = -1;
    try {
      idx = std::stoll(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || idx < 0 || idx >= static_cast<int64_t>(names.size())) {
      throw InvalidArgumentError("layer selector '" + item + "' matches no weighted layer");
    }
    out.push_back(names[static_cast<size_t>(idx)]);
  }
  if (out.empty()) throw InvalidArgumentError("empty layer selector");
  return out;
}

IntegerEval evaluate_integer(const IntegerModel& m, const Dataset& data,
                             const InferenceOptions& opt, int64_t batch_size) {
  data.validate();
  if (data.classes <= 0) throw InvalidArgumentError("integer evaluation needs class labels");
  const int64_t n = data.size();
  const int64_t bs = batch_size > 0 ? batch_size : n;
  IntegerEval out;
  int64_t correct = 0;
  for (int64_t begin = 0; begin < n; begin += bs) {
    const int64_t count = std::min(bs, n - begin);
    const Dataset batch = data.slice(begin, count);
    const InferenceResult r = run_integer(m, batch.inputs, opt);
    const auto pred = argmax_rows(r.logits);
    for (int64_t i = 0; i < count; ++i) correct += pred[static_cast<size_t>(i)] == batch.labels[i];
    for (const auto& [name, rep] : r.layer_reports) {
      OverflowReport& acc = out.layer_reports[name];
      acc.merge_counts(rep);
      acc.cols = rep.cols;
      acc.rows += rep.rows;
    }
    out.events += r.total.events;
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return out;
}

std::vector<InjectionPoint> inject_overflow(const IntegerModel& m, const InjectionSpec& spec,
                                            const Dataset& eval_set,
                                            const AccumulatorConfig& base) {
  spec.validate();
  const auto targets = resolve_layer_selector(m.graph, spec.target_layers);
  const auto weighted = m.graph.weighted_layers();
  std::vector<InjectionPoint> curve;
  for (double ratio : spec.ratios) {
    InferenceOptions opt;
    opt.acc = base;
    opt.acc.overflow_policy = spec.mode;
    opt.acc.injection.reset();
    if (ratio > 0.0) {
      for (uint32_t i = 0; i < weighted.size(); ++i) {
        const std::string& name = weighted[i]->name;
        if (std::find(targets.begin(), targets.end(), name) == targets.end()) continue;
        opt.injections[name] = OverflowInjection{ratio, spec.seed, i, spec.site};
      }
    }
    const IntegerEval e = evaluate_integer(m, eval_set, opt);
    curve.push_back({ratio, e.accuracy, e.events});
  }
  return curve;
}

double effective_bits(int bits, double alpha) {
  if (!(alpha >= 1.0)) throw InvalidArgumentError("alpha must be >= 1");
  return bits - std::log2(alpha);
}

double AlphaRow::weight_effective_bits() const { return effective_bits(weight_bits, weight_alpha); }
double AlphaRow::activation_effective_bits() const {
  return effective_bits(activation_bits, activation_alpha);
}

std::vector<AlphaRow> alpha_report(const ModelGraph& g) {
  std::vector<AlphaRow> rows;
  for (const LayerSpec* l : g.weighted_layers()) {
    AlphaRow r;
    r.layer = l->name;
    r.kind = layer_kind_name(l->kind);
    const WeightRecord& w = g.weights(l->name).quant;
    r.weight_alpha = w.alpha;
    r.weight_bits = w.bits;
    if (const auto owner = g.record_owner(l->inputs[0])) {
      const ActivationRecord& rec = g.record(*owner);
      r.activation_alpha = rec.alpha;
      r.activation_bits = rec.bits;
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace oaq

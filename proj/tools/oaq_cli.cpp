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

// oaq: command-line front end.
//
// Exit codes: 0 success, 1 usage or input error, 2 overflow under --strict,
// 3 numeric failure.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "oaq/blob.hpp"
#include "oaq/cost_model.hpp"
#include "oaq/datasets.hpp"
#include "oaq/integer_model.hpp"
#include "oaq/lab.hpp"
#include "oaq/model_io.hpp"
#include "oaq/reports.hpp"
#include "oaq/train.hpp"

namespace oaq {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitStrictOverflow = 2;
constexpr int kExitNumeric = 3;

struct Common {
  uint64_t seed = 0;
  int threads = 1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  cmd->add_option("--threads", c.threads, "Worker threads")
      ->capture_default_str()
      ->check(CLI::Range(1, 256));
}

// "4..8" or "4,5,6".
template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  const auto dots = text.find("..");
  try {
    if (dots != std::string::npos) {
      const long long lo = std::stoll(text.substr(0, dots));
      const long long hi = std::stoll(text.substr(dots + 2));
      if (lo > hi) throw InvalidArgumentError("empty range '" + text + "'");
      for (long long v = lo; v <= hi; ++v) out.push_back(static_cast<T>(v));
      return out;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      size_t used = 0;
      if constexpr (std::is_floating_point_v<T>) {
        out.push_back(static_cast<T>(std::stod(item, &used)));
      } else {
        out.push_back(static_cast<T>(std::stoll(item, &used)));
      }
      if (used != item.size()) throw std::invalid_argument(item);
    }
  } catch (const std::logic_error&) {
    throw InvalidArgumentError("cannot parse list '" + text + "'");
  }
  if (out.empty()) throw InvalidArgumentError("empty list '" + text + "'");
  return out;
}

AccumulatorConfig accumulator(int bits, const std::string& policy, int threads) {
  AccumulatorConfig a;
  if (bits != 16 && bits != 32) throw InvalidArgumentError("--acc-bits must be 16 or 32");
  a.width = bits == 16 ? AccumulatorWidth::k16 : AccumulatorWidth::k32;
  a.overflow_policy = policy_from_name(policy);
  a.threads = threads;
  return a;
}

nlohmann::json layer_reports_json(const std::map<std::string, OverflowReport>& reports) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, r] : reports) j[name] = to_json(r);
  return j;
}

// ---------------------------------------------------------------------------

struct GenDataArgs {
  Common common;
  std::string kind = "blobs";
  int64_t samples = 1000;
  int64_t classes = 3;
  int64_t features = 2;
  double spread = 0.5;
  int size = 28;
  double noise = 0.1;
  bool image = false;
  std::string out;
};

int run_gen_data(const GenDataArgs& a) {
  Dataset d;
  if (a.kind == "blobs") {
    d = make_blobs({.samples = a.samples, .classes = a.classes, .features = a.features,
                    .spread = a.spread, .seed = a.common.seed});
  } else if (a.kind == "digits") {
    d = make_digits({.samples = a.samples, .size = a.size, .noise = a.noise,
                     .flatten = !a.image, .seed = a.common.seed});
  } else {
    throw InvalidArgumentError("--kind must be blobs or digits");
  }
  save_dataset(d, a.out);
  std::printf("wrote %lld examples of shape %s to %s\n", static_cast<long long>(d.size()),
              shape_string(d.sample_shape()).c_str(), a.out.c_str());
  return kExitOk;
}

struct InitArgs {
  Common common;
  std::string arch;
  std::string out;
};

int run_init_model(const InitArgs& a) {
  ModelGraph g = make_architecture(a.arch);
  initialize_weights(g, a.common.seed);
  save_model(g, a.out);
  std::printf("wrote %s (%zu layers, %zu weighted) to %s\n", a.arch.c_str(), g.layers().size(),
              g.weighted_layers().size(), a.out.c_str());
  return kExitOk;
}

struct QuantizeArgs {
  Common common;
  std::string model, calib, out;
  int bits = 8;
  bool asymmetric_weights = false;
  int64_t batch = 256;
};

int run_quantize(const QuantizeArgs& a) {
  ModelGraph g = load_model(a.model);
  const Dataset calib = load_dataset(a.calib);
  for (auto& [owner, rec] : g.records()) {
    rec.observer = RangeObserver{};
    rec.alpha = 1.0;
    rec.bits = a.bits;
  }
  for (auto& [name, w] : g.all_weights()) {
    w.quant.alpha = 1.0;
    w.quant.bits = a.bits;
    w.quant.symmetric = !a.asymmetric_weights;
  }
  ForwardOptions fo;
  fo.observe = true;
  for (int64_t begin = 0; begin < calib.size(); begin += a.batch) {
    forward(g, calib.slice(begin, std::min(a.batch, calib.size() - begin)).inputs, fo);
  }
  compile_integer_model(g);  // fails early on unusable params
  save_model(g, a.out);
  std::printf("calibrated %zu records on %lld examples, wrote %s\n", g.records().size(),
              static_cast<long long>(calib.size()), a.out.c_str());
  return kExitOk;
}

struct CalibrateArgs {
  Common common;
  std::string model, data, eval_data, config, out, report, alpha_csv;
  int epochs = 1;
  int64_t batch = 32;
  int64_t max_steps = 0;
  double lr = 0.05;
  double momentum = 0.9;
  bool float_only = false;
};

int run_calibrate(const CalibrateArgs& a) {
  ModelGraph g = load_model(a.model);
  const Dataset data = load_dataset(a.data);
  const Dataset eval = a.eval_data.empty() ? data : load_dataset(a.eval_data);
  TrainConfig cfg;
  cfg.batch_size = a.batch;
  cfg.max_steps = a.max_steps;
  cfg.seed = a.common.seed;
  cfg.sgd.learning_rate = a.lr;
  cfg.sgd.momentum = a.momentum;
  cfg.quantize = !a.float_only;
  if (!a.config.empty()) {
    const auto bytes = read_file_bytes(a.config);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("cannot parse config '" + a.config + "': " + e.what());
    }
    cfg.calib = calib_config_from_json(j);
  }
  cfg.calib.shadow.threads = a.common.threads;

  const TrainResult result = train_toy(g, data, a.epochs, cfg);
  save_model(g, a.out);

  nlohmann::json report = report_envelope("calibrate");
  report["config"] = to_json(cfg.calib);
  report["training"] = to_json(result);
  report["alpha"] = to_json(alpha_report(g));
  const EvalResult fq = evaluate(g, eval, cfg.quantize);
  nlohmann::json final_metrics = {{"examples", fq.examples},
                                  {cfg.quantize ? "fake_quant_accuracy" : "float_accuracy",
                                   fq.accuracy}};
  if (cfg.quantize) {
    InferenceOptions opt;
    opt.acc.threads = a.common.threads;
    const IntegerEval ie = evaluate_integer(compile_integer_model(g), eval, opt);
    final_metrics["integer_accuracy"] = ie.accuracy;
    final_metrics["overflow_events"] = ie.events;
    final_metrics["layer_overflow"] = layer_reports_json(ie.layer_reports);
    std::printf("steps %lld, fake-quant accuracy %.4f, int16 accuracy %.4f, N_o %llu\n",
                static_cast<long long>(result.steps), fq.accuracy, ie.accuracy,
                static_cast<unsigned long long>(ie.events));
  } else {
    std::printf("steps %lld, float accuracy %.4f\n", static_cast<long long>(result.steps),
                fq.accuracy);
  }
  report["final"] = final_metrics;
  if (!a.report.empty()) write_json_file(a.report, report);
  if (!a.alpha_csv.empty()) write_text_file(a.alpha_csv, alpha_report_csv(alpha_report(g)).str());
  return kExitOk;
}

struct InferArgs {
  Common common;
  std::string model, input, report, out;
  int acc_bits = 16;
  std::string policy = "wrap";
  bool strict = false;
};

int run_infer(const InferArgs& a) {
  const IntegerModel m = compile_integer_model(load_model(a.model));
  const Dataset data = load_dataset(a.input);
  InferenceOptions opt;
  opt.acc = accumulator(a.acc_bits, a.policy, a.common.threads);
  const InferenceResult r = run_integer(m, data.inputs, opt);
  const auto pred = argmax_rows(r.output.reshaped({data.size(), r.output.numel() / data.size()}));

  int64_t correct = 0;
  const bool labelled = data.classes > 0 && !data.labels.empty();
  if (labelled) {
    for (int64_t i = 0; i < data.size(); ++i) correct += pred[static_cast<size_t>(i)] == data.labels[i];
  }
  if (!a.out.empty()) {
    const int64_t width = r.output.numel() / data.size();
    std::vector<std::string> header{"index", "prediction"};
    for (int64_t c = 0; c < width; ++c) header.push_back("out" + std::to_string(c));
    CsvTable t(header);
    for (int64_t i = 0; i < data.size(); ++i) {
      std::vector<std::string> row{std::to_string(i), std::to_string(pred[static_cast<size_t>(i)])};
      for (int64_t c = 0; c < width; ++c) row.push_back(format_number(r.output[i * width + c]));
      t.add_row(std::move(row));
    }
    write_text_file(a.out, t.str());
  }

  std::printf("examples %lld, accumulator %d-bit %s\n", static_cast<long long>(data.size()),
              a.acc_bits, a.policy.c_str());
  std::printf("predictions:");
  for (int64_t i = 0; i < std::min<int64_t>(data.size(), 16); ++i) {
    std::printf(" %d", pred[static_cast<size_t>(i)]);
  }
  std::printf(data.size() > 16 ? " ...\n" : "\n");
  if (labelled) {
    std::printf("accuracy %.4f\n", static_cast<double>(correct) / static_cast<double>(data.size()));
  }
  std::printf("overflow events %llu over %llu steps\n",
              static_cast<unsigned long long>(r.total.events),
              static_cast<unsigned long long>(r.total.steps));
  for (const auto& [layer, rep] : r.layer_reports) {
    std::printf("  %-10s N_o %llu, flagged outputs %llu\n", layer.c_str(),
                static_cast<unsigned long long>(rep.events),
                static_cast<unsigned long long>(rep.flagged_outputs()));
  }

  if (!a.report.empty()) {
    nlohmann::json j = report_envelope("infer");
    j["accumulator_bits"] = a.acc_bits;
    j["policy"] = a.policy;
    j["examples"] = data.size();
    j["predictions"] = pred;
    if (labelled) j["accuracy"] = static_cast<double>(correct) / static_cast<double>(data.size());
    j["total"] = to_json(r.total);
    j["layers"] = layer_reports_json(r.layer_reports);
    write_json_file(a.report, j);
  }
  if (a.strict && r.total.events > 0) {
    std::fprintf(stderr, "error: %llu overflow events under --strict\n",
                 static_cast<unsigned long long>(r.total.events));
    return kExitStrictOverflow;
  }
  return kExitOk;
}

struct SimulateArgs {
  Common common;
  std::string bits = "4..8";
  std::string depths = "9,64,256,1024";
  int64_t trials = 100000;
  int acc_bits = 16;
  std::string distribution = "uniform";
  std::string out, json;
};

int run_simulate(const SimulateArgs& a) {
  McConfig cfg;
  cfg.bits = parse_list<int>(a.bits);
  cfg.depths = parse_list<int64_t>(a.depths);
  cfg.trials = a.trials;
  cfg.accumulator_bits = a.acc_bits;
  cfg.seed = a.common.seed;
  cfg.distribution = distribution_from_name(a.distribution);
  cfg.threads = a.common.threads;
  const auto table = mc_non_overflow_ratio(cfg);
  const std::string csv = mc_table_csv(table).str();
  if (!a.out.empty()) {
    write_text_file(a.out, csv);
  } else {
    std::fputs(csv.c_str(), stdout);
  }
  if (!a.json.empty()) write_json_file(a.json, to_json(table, cfg));
  return kExitOk;
}

struct InjectArgs {
  Common common;
  std::string model, data, layers = "all", ratios = "0,0.0005,0.05";
  std::string mode = "wrap", site = "step";
  int acc_bits = 16;
  std::string out, json;
};

int run_inject(const InjectArgs& a) {
  const IntegerModel m = compile_integer_model(load_model(a.model));
  const Dataset data = load_dataset(a.data);
  InjectionSpec spec;
  spec.target_layers = a.layers;
  spec.ratios = parse_list<double>(a.ratios);
  spec.mode = policy_from_name(a.mode);
  if (a.site != "step" && a.site != "output") throw InvalidArgumentError("--site must be step or output");
  spec.site = a.site == "step" ? InjectionSite::kStep : InjectionSite::kOutput;
  spec.seed = a.common.seed;
  const auto curve = inject_overflow(m, spec, data, accumulator(a.acc_bits, a.mode, a.common.threads));
  const std::string csv = injection_csv(curve).str();
  if (!a.out.empty()) {
    write_text_file(a.out, csv);
  } else {
    std::fputs(csv.c_str(), stdout);
  }
  if (!a.json.empty()) write_json_file(a.json, to_json(curve, spec));
  return kExitOk;
}

struct CostArgs {
  Common common;
  int register_bits = 128;
  int operand_bits = 8;
  std::string json;
};

int run_cost_model(const CostArgs& a) {
  const CostComparison c = compare_accumulators(a.register_bits, a.operand_bits);
  std::printf("register %d bits, operands %d bits\n", c.register_width_bits, c.operand_bits);
  std::printf("32-bit accumulator: %d MACs/instruction\n", c.macs_acc32);
  std::printf("16-bit accumulator: %d MACs/instruction\n", c.macs_acc16);
  std::printf("ratio: %s\n", format_number(c.speedup()).c_str());
  if (!a.json.empty()) write_json_file(a.json, to_json(c));
  return kExitOk;
}

struct AlphaArgs {
  Common common;
  std::string model, out, json;
};

int run_alpha_report(const AlphaArgs& a) {
  const auto rows = alpha_report(load_model(a.model));
  const std::string csv = alpha_report_csv(rows).str();
  if (!a.out.empty()) {
    write_text_file(a.out, csv);
  } else {
    std::fputs(csv.c_str(), stdout);
  }
  if (!a.json.empty()) {
    nlohmann::json j = report_envelope("alpha-report");
    j["layers"] = to_json(rows);
    write_json_file(a.json, j);
  }
  return kExitOk;
}

int run(int argc, char** argv) {
  CLI::App app{"Overflow-aware quantization toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "oaq 0.1.0");

  GenDataArgs gen;
  auto* c_gen = app.add_subcommand("gen-data", "Generate a toy dataset file");
  add_common(c_gen, gen.common);
  c_gen->add_option("--kind", gen.kind, "blobs or digits")->capture_default_str();
  c_gen->add_option("--samples", gen.samples)->capture_default_str();
  c_gen->add_option("--classes", gen.classes, "blobs only")->capture_default_str();
  c_gen->add_option("--features", gen.features, "blobs only")->capture_default_str();
  c_gen->add_option("--spread", gen.spread, "blobs only")->capture_default_str();
  c_gen->add_option("--size", gen.size, "digits canvas side")->capture_default_str();
  c_gen->add_option("--noise", gen.noise, "digits pixel noise")->capture_default_str();
  c_gen->add_flag("--image", gen.image, "keep digits as [H, W, 1] instead of flattening");
  c_gen->add_option("--out", gen.out)->required();

  InitArgs init;
  auto* c_init = app.add_subcommand("init-model", "Create a randomly initialized model");
  add_common(c_init, init.common);
  c_init->add_option("--arch", init.arch, "mlp:IN-H-...-OUT or cnn:HxWxC-CLASSES")->required();
  c_init->add_option("--out", init.out)->required();

  QuantizeArgs quant;
  auto* c_quant = app.add_subcommand("quantize", "Post-training quantization with alpha = 1");
  add_common(c_quant, quant.common);
  c_quant->add_option("--model", quant.model)->required();
  c_quant->add_option("--calib-data", quant.calib)->required();
  c_quant->add_option("--out", quant.out)->required();
  c_quant->add_option("--bits", quant.bits)->capture_default_str()->check(CLI::Range(2, 8));
  c_quant->add_flag("--asymmetric-weights", quant.asymmetric_weights,
                   "affine weights; fails when a centered weight leaves int8");
  c_quant->add_option("--batch", quant.batch)->capture_default_str()->check(CLI::PositiveNumber);

  CalibrateArgs cal;
  auto* c_cal = app.add_subcommand("calibrate", "Overflow-aware training and calibration");
  add_common(c_cal, cal.common);
  c_cal->add_option("--model", cal.model)->required();
  c_cal->add_option("--data", cal.data)->required();
  c_cal->add_option("--eval-data", cal.eval_data, "defaults to --data");
  c_cal->add_option("--epochs", cal.epochs)->capture_default_str()->check(CLI::NonNegativeNumber);
  c_cal->add_option("--config", cal.config, "JSON calibration config");
  c_cal->add_option("--out", cal.out)->required();
  c_cal->add_option("--report", cal.report, "JSON report");
  c_cal->add_option("--alpha-csv", cal.alpha_csv, "per-layer alpha table");
  c_cal->add_option("--batch-size", cal.batch)->capture_default_str()->check(CLI::PositiveNumber);
  c_cal->add_option("--max-steps", cal.max_steps)->capture_default_str();
  c_cal->add_option("--lr", cal.lr)->capture_default_str();
  c_cal->add_option("--momentum", cal.momentum)->capture_default_str();
  c_cal->add_flag("--float", cal.float_only, "train without quantization");

  InferArgs inf;
  auto* c_inf = app.add_subcommand("infer", "Integer-only inference");
  add_common(c_inf, inf.common);
  c_inf->add_option("--model", inf.model)->required();
  c_inf->add_option("--input", inf.input)->required();
  c_inf->add_option("--acc-bits", inf.acc_bits)->capture_default_str();
  c_inf->add_option("--policy", inf.policy, "wrap or saturate")->capture_default_str();
  c_inf->add_option("--report", inf.report, "JSON report");
  c_inf->add_option("--out", inf.out, "CSV of outputs");
  c_inf->add_flag("--strict", inf.strict, "exit 2 when any overflow occurs");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate-overflow", "Monte Carlo non-overflow ratios");
  add_common(c_sim, sim.common);
  c_sim->add_option("--bits", sim.bits, "range lo..hi or list")->capture_default_str();
  c_sim->add_option("--depths", sim.depths)->capture_default_str();
  c_sim->add_option("--trials", sim.trials)->capture_default_str()->check(CLI::PositiveNumber);
  c_sim->add_option("--acc-bits", sim.acc_bits)->capture_default_str();
  c_sim->add_option("--distribution", sim.distribution, "uniform or truncated-normal")
      ->capture_default_str();
  c_sim->add_option("--out", sim.out, "CSV table (stdout when omitted)");
  c_sim->add_option("--json", sim.json, "JSON report");

  InjectArgs inj;
  auto* c_inj = app.add_subcommand("inject", "Accuracy under forced overflow");
  add_common(c_inj, inj.common);
  c_inj->add_option("--model", inj.model)->required();
  c_inj->add_option("--data", inj.data)->required();
  c_inj->add_option("--layers", inj.layers, "all, first, second, last, or names/indices")
      ->capture_default_str();
  c_inj->add_option("--ratios", inj.ratios)->capture_default_str();
  c_inj->add_option("--mode", inj.mode, "wrap or saturate")->capture_default_str();
  c_inj->add_option("--site", inj.site, "step or output")->capture_default_str();
  c_inj->add_option("--acc-bits", inj.acc_bits)->capture_default_str();
  c_inj->add_option("--out", inj.out, "CSV curve (stdout when omitted)");
  c_inj->add_option("--json", inj.json, "JSON report");

  CostArgs cost;
  auto* c_cost = app.add_subcommand("cost-model", "MACs per SIMD instruction");
  add_common(c_cost, cost.common);
  c_cost->add_option("--register-bits", cost.register_bits)->capture_default_str();
  c_cost->add_option("--operand-bits", cost.operand_bits)->capture_default_str();
  c_cost->add_option("--json", cost.json, "JSON report");

  AlphaArgs alpha;
  auto* c_alpha = app.add_subcommand("alpha-report", "Per-layer alpha and effective bits");
  add_common(c_alpha, alpha.common);
  c_alpha->add_option("--model", alpha.model)->required();
  c_alpha->add_option("--out", alpha.out, "CSV table (stdout when omitted)");
  c_alpha->add_option("--json", alpha.json, "JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c_gen->parsed()) return run_gen_data(gen);
    if (c_init->parsed()) return run_init_model(init);
    if (c_quant->parsed()) return run_quantize(quant);
    if (c_cal->parsed()) return run_calibrate(cal);
    if (c_inf->parsed()) return run_infer(inf);
    if (c_sim->parsed()) return run_simulate(sim);
    if (c_inj->parsed()) return run_inject(inj);
    if (c_cost->parsed()) return run_cost_model(cost);
    if (c_alpha->parsed()) return run_alpha_report(alpha);
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const InvalidMultiplierError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace
}  // namespace oaq

int main(int argc, char** argv) { return oaq::run(argc, argv); }

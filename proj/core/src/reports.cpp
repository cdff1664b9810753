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


#include "oaq/reports.hpp"

#include <charconv>
#include <fstream>

namespace oaq {

using nlohmann::json;

json report_envelope(const std::string& kind) {
  return {{"schema", kReportSchema}, {"schema_version", kReportSchemaVersion}, {"kind", kind}};
}

json to_json(const OverflowReport& r) {
  json j = {{"events", r.events},
            {"steps", r.steps},
            {"rows", r.rows},
            {"cols", r.cols},
            {"flagged_outputs", r.flagged_outputs()}};
  if (r.first_event) {
    j["first_event"] = {{"row", r.first_event->row},
                        {"col", r.first_event->col},
                        {"step", r.first_event->step}};
  } else {
    j["first_event"] = nullptr;
  }
  return j;
}

json to_json(const std::vector<McCell>& table, const McConfig& cfg) {
  json cells = json::array();
  for (const auto& c : table) {
    cells.push_back({{"bits", c.bits},
                     {"depth", c.depth},
                     {"trials", c.trials},
                     {"non_overflow", c.non_overflow},
                     {"ratio", c.ratio()},
                     {"std_error", c.std_error()}});
  }
  json j = report_envelope("simulate-overflow");
  j["config"] = {{"bits", cfg.bits},
                 {"depths", cfg.depths},
                 {"trials", cfg.trials},
                 {"accumulator_bits", cfg.accumulator_bits},
                 {"seed", cfg.seed},
                 {"distribution", distribution_name(cfg.distribution)}};
  j["cells"] = cells;
  return j;
}

json to_json(const std::vector<AlphaRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    arr.push_back({{"layer", r.layer},
                   {"kind", r.kind},
                   {"weight_alpha", r.weight_alpha},
                   {"weight_effective_bits", r.weight_effective_bits()},
                   {"activation_alpha", r.activation_alpha},
                   {"activation_effective_bits", r.activation_effective_bits()}});
  }
  return arr;
}

json to_json(const TrainResult& r) {
  json events = json::array();
  for (const auto& e : r.events) {
    events.push_back({{"step", e.step},
                      {"layer_overflow", e.layer_overflow},
                      {"weight_alpha", e.weight_alpha},
                      {"activation_alpha", e.activation_alpha}});
  }
  return {{"steps", r.steps},
          {"final_loss", r.losses.empty() ? json(nullptr) : json(r.losses.back())},
          {"losses", r.losses},
          {"trajectory", events}};
}

json to_json(const std::vector<InjectionPoint>& curve, const InjectionSpec& spec) {
  json pts = json::array();
  for (const auto& p : curve) {
    pts.push_back({{"ratio", p.ratio}, {"accuracy", p.accuracy}, {"events", p.events}});
  }
  json j = report_envelope("inject");
  j["config"] = {{"layers", spec.target_layers},
                 {"mode", policy_name(spec.mode)},
                 {"site", spec.site == InjectionSite::kStep ? "step" : "output"},
                 {"seed", spec.seed}};
  j["points"] = pts;
  return j;
}

json to_json(const CostComparison& c) {
  json j = report_envelope("cost-model");
  j["register_bits"] = c.register_width_bits;
  j["operand_bits"] = c.operand_bits;
  j["macs_per_instruction"] = {{"acc16", c.macs_acc16}, {"acc32", c.macs_acc32}};
  j["ratio"] = c.speedup();
  return j;
}

json to_json(const CalibConfig& c) {
  return {{"lr_i", c.lr_i},
          {"lr_d", c.lr_d},
          {"l_c", c.l_c},
          {"update_every", c.update_every},
          {"lr_i_decay", c.lr_i_decay},
          {"alpha_init", c.alpha_init},
          {"skip_first_layer_weights", c.skip_first_layer_weights},
          {"freeze_fraction", c.freeze_fraction},
          {"shadow_accumulator_bits", c.shadow.bits()}};
}

CalibConfig calib_config_from_json(const json& j, CalibConfig base) {
  if (!j.is_object()) throw FormatError("calibration config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "lr_i") base.lr_i = value.get<double>();
      else if (key == "lr_d") base.lr_d = value.get<double>();
      else if (key == "l_c") base.l_c = value.get<double>();
      else if (key == "update_every") base.update_every = value.get<int>();
      else if (key == "lr_i_decay") base.lr_i_decay = value.get<double>();
      else if (key == "alpha_init") base.alpha_init = value.get<double>();
      else if (key == "skip_first_layer_weights") base.skip_first_layer_weights = value.get<bool>();
      else if (key == "freeze_fraction") base.freeze_fraction = value.get<double>();
      else if (key == "shadow_accumulator_bits") {
        const int bits = value.get<int>();
        if (bits != 16 && bits != 32) throw FormatError("shadow accumulator must be 16 or 32");
        base.shadow.width = bits == 16 ? AccumulatorWidth::k16 : AccumulatorWidth::k32;
      } else {
        throw FormatError("unknown calibration config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad calibration config: ") + e.what());
  }
  base.validate();
  return base;
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvTable::add_row(std::vector<std::string> row) {
  if (row.size() != header_.size()) throw InvalidArgumentError("CSV row width mismatch");
  rows_.push_back(std::move(row));
}

std::string CsvTable::str() const {
  auto line = [](const std::vector<std::string>& cells) {
    std::string s;
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) s += ',';
      s += cells[i];
    }
    return s + '\n';
  };
  std::string out = line(header_);
  for (const auto& r : rows_) out += line(r);
  return out;
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

CsvTable mc_table_csv(const std::vector<McCell>& table) {
  CsvTable t({"bits", "depth", "trials", "non_overflow", "ratio", "std_error"});
  for (const auto& c : table) {
    t.add_row({std::to_string(c.bits), std::to_string(c.depth), std::to_string(c.trials),
               std::to_string(c.non_overflow), format_number(c.ratio()),
               format_number(c.std_error())});
  }
  return t;
}

CsvTable alpha_report_csv(const std::vector<AlphaRow>& rows) {
  CsvTable t({"layer", "kind", "weight_alpha", "weight_effective_bits", "activation_alpha",
              "activation_effective_bits"});
  for (const auto& r : rows) {
    t.add_row({r.layer, r.kind, format_number(r.weight_alpha),
               format_number(r.weight_effective_bits()), format_number(r.activation_alpha),
               format_number(r.activation_effective_bits())});
  }
  return t;
}

CsvTable injection_csv(const std::vector<InjectionPoint>& curve) {
  CsvTable t({"ratio", "accuracy", "events"});
  for (const auto& p : curve) {
    t.add_row({format_number(p.ratio), format_number(p.accuracy), std::to_string(p.events)});
  }
  return t;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << text;
  if (!out) throw FormatError("write to '" + path + "' failed");
}

void write_json_file(const std::string& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace oaq

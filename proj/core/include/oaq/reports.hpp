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


// Report schemas. Every JSON report carries {"schema": "oaq-report",
// "schema_version", "kind"}; CSV tables use a header row and shortest
// round-trip number formatting.

#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oaq/accumulator.hpp"
#include "oaq/cost_model.hpp"
#include "oaq/lab.hpp"
#include "oaq/train.hpp"

namespace oaq {

inline constexpr const char* kReportSchema = "oaq-report";
inline constexpr int kReportSchemaVersion = 1;

nlohmann::json report_envelope(const std::string& kind);

nlohmann::json to_json(const OverflowReport& r);
nlohmann::json to_json(const std::vector<McCell>& table, const McConfig& cfg);
nlohmann::json to_json(const std::vector<AlphaRow>& rows);
nlohmann::json to_json(const TrainResult& r);
nlohmann::json to_json(const std::vector<InjectionPoint>& curve, const InjectionSpec& spec);
nlohmann::json to_json(const CostComparison& c);
nlohmann::json to_json(const CalibConfig& c);
/// Reads the fields present in `j` over `base`; unknown keys are errors.
CalibConfig calib_config_from_json(const nlohmann::json& j, CalibConfig base = {});

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  void add_row(std::vector<std::string> row);
  std::string str() const;
  size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Shortest decimal that round-trips the double.
std::string format_number(double v);

CsvTable mc_table_csv(const std::vector<McCell>& table);
CsvTable alpha_report_csv(const std::vector<AlphaRow>& rows);
CsvTable injection_csv(const std::vector<InjectionPoint>& curve);

void write_text_file(const std::string& path, const std::string& text);
void write_json_file(const std::string& path, const nlohmann::json& j);

}  // namespace oaq

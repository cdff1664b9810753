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


// Model files: a JSON manifest next to a binary blob (manifest path + ".bin")
// holding every weight and bias. Dataset files are bare blobs.

#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "oaq/datasets.hpp"
#include "oaq/graph.hpp"

namespace oaq {

inline constexpr int kModelFormatVersion = 1;

/// Writes the manifest to `path` and the blob to `path + ".bin"`.
void save_model(const ModelGraph& g, const std::string& path);
/// Throws FormatError on a version, checksum or reference mismatch.
ModelGraph load_model(const std::string& path);

/// In-memory halves of a model file, for tests and tools.
nlohmann::json model_manifest(const ModelGraph& g, const std::string& blob_file,
                              uint32_t blob_crc);
std::vector<uint8_t> model_blob(const ModelGraph& g);
ModelGraph model_from_parts(const nlohmann::json& manifest, std::span<const uint8_t> blob);

void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace oaq

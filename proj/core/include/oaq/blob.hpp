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


// Binary tensor container: a little-endian header with an entry table of
// (name, dtype, shape, byte offset, byte count) followed by 16-byte aligned
// row-major payloads.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "oaq/tensor.hpp"

namespace oaq {

using AnyTensor = std::variant<FloatTensor, Int8Tensor, Int16Tensor, Int32Tensor>;

struct NamedTensor {
  std::string name;
  AnyTensor tensor;

  bool operator==(const NamedTensor&) const = default;
};

inline constexpr uint32_t kBlobVersion = 1;

std::vector<uint8_t> encode_blob(const std::vector<NamedTensor>& entries);
/// Throws FormatError on a bad magic, version, bounds or duplicate name.
std::vector<NamedTensor> decode_blob(std::span<const uint8_t> bytes);

uint32_t crc32_of(std::span<const uint8_t> bytes);

std::vector<uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const uint8_t> bytes);

/// Finds a tensor by name and type; throws FormatError when missing or of
/// another dtype.
template <typename T>
const Tensor<T>& blob_get(const std::vector<NamedTensor>& entries, const std::string& name) {
  for (const auto& e : entries) {
    if (e.name != name) continue;
    if (const auto* t = std::get_if<Tensor<T>>(&e.tensor)) return *t;
    throw FormatError("blob entry '" + name + "' is not " + dtype_name(Tensor<T>::kDType));
  }
  throw FormatError("blob has no entry '" + name + "'");
}

bool blob_has(const std::vector<NamedTensor>& entries, const std::string& name);

}  // namespace oaq

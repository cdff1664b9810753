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


#include "oaq/blob.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <set>

namespace oaq {
namespace {

constexpr char kMagic[4] = {'O', 'A', 'Q', 'B'};
constexpr size_t kAlign = 16;

class Writer {
 public:
  template <typename T>
  void put(T v) {
    using U = std::make_unsigned_t<T>;
    const U u = static_cast<U>(v);
    for (size_t i = 0; i < sizeof(T); ++i) bytes_.push_back(static_cast<uint8_t>(u >> (8 * i)));
  }
  void put_bytes(const void* p, size_t n) {
    const auto* b = static_cast<const uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  void align() {
    while (bytes_.size() % kAlign != 0) bytes_.push_back(0);
  }
  size_t size() const { return bytes_.size(); }
  std::vector<uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> b) : b_(b) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    std::make_unsigned_t<T> u = 0;
    for (size_t i = 0; i < sizeof(T); ++i) {
      u |= static_cast<std::make_unsigned_t<T>>(static_cast<std::make_unsigned_t<T>>(b_[pos_ + i])
                                                << (8 * i));
    }
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  std::string get_string(size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  void need(size_t n) const {
    if (pos_ + n > b_.size()) throw FormatError("truncated blob header");
  }
  std::span<const uint8_t> b_;
  size_t pos_ = 0;
};

template <typename T>
void put_payload(Writer& w, const Tensor<T>& t) {
  for (T v : t.data()) {
    if constexpr (std::is_same_v<T, float>) {
      w.put(std::bit_cast<uint32_t>(v));
    } else {
      w.put(v);
    }
  }
}

template <typename T>
Tensor<T> read_payload(std::span<const uint8_t> bytes, const Shape& shape) {
  Tensor<T> t(shape);
  Reader r(bytes);
  for (int64_t i = 0; i < t.numel(); ++i) {
    if constexpr (std::is_same_v<T, float>) {
      t[i] = std::bit_cast<float>(r.get<uint32_t>());
    } else {
      t[i] = r.get<T>();
    }
  }
  return t;
}

DType dtype_of(const AnyTensor& t) {
  return std::visit([](const auto& x) { return std::decay_t<decltype(x)>::kDType; }, t);
}

const Shape& shape_of(const AnyTensor& t) {
  return std::visit([](const auto& x) -> const Shape& { return x.shape(); }, t);
}

}  // namespace

std::vector<uint8_t> encode_blob(const std::vector<NamedTensor>& entries) {
  std::set<std::string> seen;
  size_t header = 16;
  for (const auto& e : entries) {
    if (e.name.empty() || e.name.size() > 0xFFFF) throw FormatError("bad blob entry name");
    if (!seen.insert(e.name).second) throw FormatError("duplicate blob entry '" + e.name + "'");
    if (shape_of(e.tensor).empty()) throw FormatError("blob entry '" + e.name + "' is empty");
    header += 2 + e.name.size() + 2 + 8 * shape_of(e.tensor).size() + 16;
  }
  size_t offset = (header + kAlign - 1) / kAlign * kAlign;

  Writer w;
  w.put_bytes(kMagic, 4);
  w.put(kBlobVersion);
  w.put(static_cast<uint32_t>(entries.size()));
  w.put(uint32_t{0});
  for (const auto& e : entries) {
    const Shape& shape = shape_of(e.tensor);
    const uint64_t nbytes =
        static_cast<uint64_t>(shape_numel(shape)) * dtype_size(dtype_of(e.tensor));
    w.put(static_cast<uint16_t>(e.name.size()));
    w.put_bytes(e.name.data(), e.name.size());
    w.put(static_cast<uint8_t>(dtype_of(e.tensor)));
    w.put(static_cast<uint8_t>(shape.size()));
    for (int64_t d : shape) w.put(d);
    w.put(static_cast<uint64_t>(offset));
    w.put(nbytes);
    offset = (offset + nbytes + kAlign - 1) / kAlign * kAlign;
  }
  w.align();
  for (const auto& e : entries) {
    std::visit([&](const auto& t) { put_payload(w, t); }, e.tensor);
    w.align();
  }
  return std::move(w.bytes());
}

std::vector<NamedTensor> decode_blob(std::span<const uint8_t> bytes) {
  Reader r(bytes);
  if (r.get_string(4) != std::string(kMagic, 4)) throw FormatError("not an OAQ blob");
  const uint32_t version = r.get<uint32_t>();
  if (version != kBlobVersion) {
    throw FormatError("unsupported blob version " + std::to_string(version));
  }
  const uint32_t count = r.get<uint32_t>();
  r.get<uint32_t>();
  std::vector<NamedTensor> out;
  std::set<std::string> seen;
  for (uint32_t i = 0; i < count; ++i) {
    const std::string name = r.get_string(r.get<uint16_t>());
    if (!seen.insert(name).second) throw FormatError("duplicate blob entry '" + name + "'");
    const uint8_t code = r.get<uint8_t>();
    if (code > static_cast<uint8_t>(DType::kInt32)) throw FormatError("unknown dtype code");
    const auto dtype = static_cast<DType>(code);
    const uint8_t rank = r.get<uint8_t>();
    Shape shape(rank);
    for (auto& d : shape) {
      d = r.get<int64_t>();
      if (d <= 0) throw FormatError("non-positive dimension in blob entry '" + name + "'");
    }
    const uint64_t offset = r.get<uint64_t>();
    const uint64_t nbytes = r.get<uint64_t>();
    if (rank == 0 || nbytes != static_cast<uint64_t>(shape_numel(shape)) * dtype_size(dtype) ||
        offset > bytes.size() || nbytes > bytes.size() - offset) {
      throw FormatError("blob entry '" + name + "' is out of bounds");
    }
    const auto payload = bytes.subspan(offset, nbytes);
    NamedTensor e{name, {}};
    switch (dtype) {
      case DType::kFloat32: e.tensor = read_payload<float>(payload, shape); break;
      case DType::kInt8: e.tensor = read_payload<int8_t>(payload, shape); break;
      case DType::kInt16: e.tensor = read_payload<int16_t>(payload, shape); break;
      case DType::kInt32: e.tensor = read_payload<int32_t>(payload, shape); break;
    }
    out.push_back(std::move(e));
  }
  return out;
}

uint32_t crc32_of(std::span<const uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  size_t pos = 0;
  while (pos < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<size_t>(bytes.size() - pos, 1u << 30));
    crc = ::crc32(crc, bytes.data() + pos, chunk);
    pos += chunk;
  }
  return static_cast<uint32_t>(crc);
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file_bytes(const std::string& path, std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write to '" + path + "' failed");
}

bool blob_has(const std::vector<NamedTensor>& entries, const std::string& name) {
  for (const auto& e : entries) {
    if (e.name == name) return true;
  }
  return false;
}

}  // namespace oaq

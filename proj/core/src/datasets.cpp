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


#include "oaq/datasets.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>

#include "oaq/random.hpp"

namespace oaq {
namespace {

template <typename T>
Tensor<T> take_rows(const Tensor<T>& t, const std::vector<int64_t>& rows) {
  if (t.empty()) return {};
  Shape shape = t.shape();
  const int64_t stride = shape_numel(shape) / shape[0];
  shape[0] = static_cast<int64_t>(rows.size());
  std::vector<T> out;
  out.reserve(rows.size() * static_cast<size_t>(stride));
  for (int64_t r : rows) {
    if (r < 0 || r >= t.dim(0)) throw ShapeError("row index out of range");
    const T* src = t.data().data() + r * stride;
    out.insert(out.end(), src, src + stride);
  }
  return Tensor<T>(std::move(shape), std::move(out));
}

// Segments a..g as bits 0..6.
constexpr std::array<uint8_t, 10> kSegments = {
    0b0111111, 0b0000110, 0b1011011, 0b1001111, 0b1100110,
    0b1101101, 0b1111101, 0b0000111, 0b1111111, 0b1101111,
};

}  // namespace

Shape Dataset::sample_shape() const {
  if (inputs.empty()) return {};
  return Shape(inputs.shape().begin() + 1, inputs.shape().end());
}

void Dataset::validate() const {
  const int64_t n = size();
  if (!labels.empty() && (labels.rank() != 1 || labels.dim(0) != n)) {
    throw ShapeError("labels must be [" + std::to_string(n) + "]");
  }
  if (!targets.empty() && targets.dim(0) != n) {
    throw ShapeError("targets disagree with the example count");
  }
  if (classes > 0) {
    for (int32_t l : labels.data()) {
      if (l < 0 || l >= classes) throw ShapeError("label outside [0, classes)");
    }
  }
}

Dataset Dataset::gather(const std::vector<int64_t>& indices) const {
  Dataset out;
  out.inputs = take_rows(inputs, indices);
  out.labels = take_rows(labels, indices);
  out.targets = take_rows(targets, indices);
  out.classes = classes;
  return out;
}

Dataset Dataset::slice(int64_t begin, int64_t count) const {
  if (begin < 0 || count <= 0 || begin + count > size()) throw ShapeError("slice out of range");
  std::vector<int64_t> idx(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) idx[static_cast<size_t>(i)] = begin + i;
  return gather(idx);
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& d, int64_t count) {
  if (count <= 0 || count >= d.size()) {
    throw InvalidArgumentError("split point must leave both parts non-empty");
  }
  return {d.slice(0, count), d.slice(count, d.size() - count)};
}

Dataset make_blobs(const BlobsConfig& cfg) {
  if (cfg.samples < 1 || cfg.classes < 1 || cfg.features < 1 || !(cfg.spread >= 0.0)) {
    throw InvalidArgumentError("invalid blobs configuration");
  }
  PhiloxStream centers_rng(cfg.seed, 0x626c6f62u, 0);
  std::vector<double> centers(static_cast<size_t>(cfg.classes * cfg.features));
  for (double& c : centers) c = (2.0 * centers_rng.uniform() - 1.0) * cfg.center_box;

  Dataset d;
  d.classes = cfg.classes;
  d.inputs = FloatTensor({cfg.samples, cfg.features});
  d.labels = Int32Tensor({cfg.samples});
  for (int64_t i = 0; i < cfg.samples; ++i) {
    PhiloxStream rng(cfg.seed, 0x626c6f62u, 1, static_cast<uint32_t>(i));
    const int32_t label = rng.uniform_int(0, static_cast<int32_t>(cfg.classes - 1));
    d.labels[i] = label;
    for (int64_t f = 0; f < cfg.features; ++f) {
      const double c = centers[static_cast<size_t>(label * cfg.features + f)];
      d.inputs.at(i, f) = static_cast<float>(c + cfg.spread * rng.normal());
    }
  }
  return d;
}

Dataset make_digits(const DigitsConfig& cfg) {
  if (cfg.samples < 1 || cfg.size < 12 || cfg.jitter < 0 || !(cfg.noise >= 0.0)) {
    throw InvalidArgumentError("invalid digits configuration");
  }
  const int64_t side = cfg.size;
  Dataset d;
  d.classes = 10;
  d.inputs = cfg.flatten ? FloatTensor({cfg.samples, side * side})
                         : FloatTensor({cfg.samples, side, side, 1});
  d.labels = Int32Tensor({cfg.samples});

  for (int64_t i = 0; i < cfg.samples; ++i) {
    PhiloxStream rng(cfg.seed, 0x64696769u, static_cast<uint32_t>(i));
    const int32_t label = rng.uniform_int(0, 9);
    d.labels[i] = label;
    const uint8_t segs = kSegments[static_cast<size_t>(label)];

    const double w = side * (0.36 + 0.08 * rng.uniform());
    const double h = side * (0.60 + 0.10 * rng.uniform());
    const double t = std::max(2.0, side / 12.0 + rng.uniform());
    const double slant = 0.4 * rng.uniform() - 0.2;
    const double x0 = (side - w) / 2 + rng.uniform_int(-cfg.jitter, cfg.jitter);
    const double y0 = (side - h) / 2 + rng.uniform_int(-cfg.jitter, cfg.jitter);
    const double ink = 0.6 + 0.4 * rng.uniform();
    const double mid = y0 + h / 2;

    float* img = d.inputs.data().data() + i * side * side;
    for (int64_t y = 0; y < side; ++y) {
      for (int64_t x = 0; x < side; ++x) {
        const double px = x + 0.5 - slant * (mid - (y + 0.5));
        const double py = y + 0.5;
        auto in = [&](double xa, double xb, double ya, double yb) {
          return px >= xa && px < xb && py >= ya && py < yb;
        };
        const bool lit =
            ((segs & 1) && in(x0, x0 + w, y0, y0 + t)) ||
            ((segs & 2) && in(x0 + w - t, x0 + w, y0, mid)) ||
            ((segs & 4) && in(x0 + w - t, x0 + w, mid, y0 + h)) ||
            ((segs & 8) && in(x0, x0 + w, y0 + h - t, y0 + h)) ||
            ((segs & 16) && in(x0, x0 + t, mid, y0 + h)) ||
            ((segs & 32) && in(x0, x0 + t, y0, mid)) ||
            ((segs & 64) && in(x0, x0 + w, mid - t / 2, mid + t / 2));
        const double v = (lit ? ink : 0.0) + cfg.noise * rng.normal();
        img[y * side + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return d;
}

}  // namespace oaq

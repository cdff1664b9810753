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


#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "oaq/tensor.hpp"

namespace oaq {

/// Labelled examples; inputs are [n, ...sample shape], labels are [n].
/// Regression sets also carry targets [n, outputs] and leave classes at 0.
struct Dataset {
  FloatTensor inputs;
  Int32Tensor labels;
  FloatTensor targets;
  int64_t classes = 0;

  int64_t size() const { return inputs.empty() ? 0 : inputs.dim(0); }
  Shape sample_shape() const;
  Dataset gather(const std::vector<int64_t>& indices) const;
  Dataset slice(int64_t begin, int64_t count) const;
  /// Throws ShapeError when the parts disagree on the example count.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

struct BlobsConfig {
  int64_t samples = 1000;
  int64_t classes = 2;
  int64_t features = 2;
  double center_box = 3.0;  // centers uniform in [-box, box]^features
  double spread = 0.5;      // per-coordinate standard deviation
  uint64_t seed = 0;
};

/// Isotropic gaussian clusters, one per class.
Dataset make_blobs(const BlobsConfig& cfg);

struct DigitsConfig {
  int64_t samples = 1000;
  int size = 28;  // square canvas side
  double noise = 0.1;
  int jitter = 2;  // maximum glyph offset in pixels
  bool flatten = true;
  uint64_t seed = 0;
};

/// Procedural seven-segment digits with random offset, slant, stroke width,
/// intensity and additive gaussian noise. Pixels lie in [0, 1].
Dataset make_digits(const DigitsConfig& cfg);

/// First `count` examples and the rest.
std::pair<Dataset, Dataset> split_dataset(const Dataset& d, int64_t count);

}  // namespace oaq

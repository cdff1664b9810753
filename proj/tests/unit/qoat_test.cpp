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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "oaq/observer.hpp"
#include "oaq/qoat.hpp"
#include "oaq/train.hpp"
#include "test_util.hpp"

namespace oaq {
namespace {

using testing::random_float;

TEST(Observer, FirstBatchInitializes) {
  const FloatTensor batch({2}, std::vector<float>{-1.0f, 2.0f});
  const RangeObserver obs = observe_range(RangeObserver{}, batch);
  EXPECT_TRUE(obs.initialized);
  EXPECT_DOUBLE_EQ(obs.r_min, -1.0);
  EXPECT_DOUBLE_EQ(obs.r_max, 2.0);
}

TEST(Observer, EmaBlend) {
  RangeObserver prior;
  prior.r_min = -1.0;
  prior.r_max = 2.0;
  prior.initialized = true;
  const FloatTensor batch({3}, std::vector<float>{-3.0f, 0.0f, 1.0f});
  const RangeObserver obs = observe_range(prior, batch);
  EXPECT_NEAR(obs.r_min, -1.02, 1e-12);
  EXPECT_NEAR(obs.r_max, 1.99, 1e-12);
}

TEST(Observer, ConstantBatchesAreAFixedPoint) {
  const FloatTensor batch({2}, std::vector<float>{-0.5f, 4.0f});
  RangeObserver obs;
  for (int i = 0; i < 50; ++i) obs = observe_range(obs, batch);
  EXPECT_DOUBLE_EQ(obs.r_min, -0.5);
  EXPECT_DOUBLE_EQ(obs.r_max, 4.0);
}

TEST(Observer, ConvexCombinationProperty) {
  PhiloxStream rng(41, 1);
  RangeObserver obs;
  for (int i = 0; i < 100; ++i) {
    const FloatTensor batch = random_float(rng, {16}, -5.0 * rng.uniform(), 5.0 * rng.uniform());
    const RangeObserver next = observe_range(obs, batch);
    EXPECT_LE(next.r_min, next.r_max);
    if (obs.initialized) {
      const auto [lo, hi] = std::minmax_element(batch.data().begin(), batch.data().end());
      EXPECT_GE(next.r_min, std::min<double>(obs.r_min, *lo) - 1e-12);
      EXPECT_LE(next.r_min, std::max<double>(obs.r_min, *lo) + 1e-12);
      EXPECT_GE(next.r_max, std::min<double>(obs.r_max, *hi) - 1e-12);
      EXPECT_LE(next.r_max, std::max<double>(obs.r_max, *hi) + 1e-12);
    }
    obs = next;
  }
}

TEST(Observer, RejectsEmptyBatchAndIgnoresNaN) {
  EXPECT_THROW(observe_range(RangeObserver{}, std::span<const float>{}), InvalidArgumentError);
  const float nan = std::numeric_limits<float>::quiet_NaN();
  const FloatTensor batch({3}, std::vector<float>{nan, 1.0f, 3.0f});
  const RangeObserver obs = observe_range(RangeObserver{}, batch);
  EXPECT_DOUBLE_EQ(obs.r_min, 1.0);
  EXPECT_DOUBLE_EQ(obs.r_max, 3.0);
}

struct AlphaCase {
  double alpha;
  uint64_t n_o;
  double lr_i, lr_d, l_c;
  int64_t step;
  double expected;
};

TEST(UpdateAlpha, Table) {
  const double ln100 = 4.605170185988092;
  const std::vector<AlphaCase> cases = {
      {2.0, 0, 0.05, 0.001, 0.2, 0, 1.999},
      {1.5, 100, 0.01, 0.001, 0.1, 0, 1.5 + 0.01 * ln100},
      {1.5, 1000000000, 0.01, 0.001, 0.1, 0, 1.6},
      {1.0005, 0, 0.05, 0.001, 0.2, 0, 1.0},
      {1.0, 0, 0.05, 0.001, 0.2, 0, 1.0},
      {1.0, 1, 0.05, 0.001, 0.2, 0, 1.05},
      {1.0, 1, 0.5, 0.001, 0.2, 0, 1.2},
      // Two update events into training: lr_i decayed twice.
      {1.0, 100, 0.01, 0.001, 0.1, 25, 1.0 + 0.01 * 0.99 * 0.99 * ln100},
      {1.0, 1, 0.05, 0.001, 0.2, 10, 1.0 + 0.05 * 0.99},
  };
  for (const AlphaCase& c : cases) {
    CalibConfig cfg;
    cfg.lr_i = c.lr_i;
    cfg.lr_d = c.lr_d;
    cfg.l_c = c.l_c;
    EXPECT_NEAR(update_alpha(c.alpha, c.n_o, cfg, c.step), c.expected, 1e-12)
        << "alpha " << c.alpha << " n_o " << c.n_o << " step " << c.step;
  }
}

TEST(UpdateAlpha, DecaySchedule) {
  CalibConfig cfg;
  cfg.lr_i = 0.05;
  cfg.update_every = 10;
  cfg.lr_i_decay = 0.99;
  EXPECT_DOUBLE_EQ(lr_i_at(cfg, 0), 0.05);
  EXPECT_DOUBLE_EQ(lr_i_at(cfg, 9), 0.05);
  EXPECT_DOUBLE_EQ(lr_i_at(cfg, 10), 0.05 * 0.99);
  EXPECT_NEAR(lr_i_at(cfg, 1000), 0.05 * std::pow(0.99, 100), 1e-15);
}

TEST(UpdateAlpha, MonotoneResponseAndFloor) {
  PhiloxStream rng(42, 1);
  CalibConfig cfg;
  for (int i = 0; i < 2000; ++i) {
    const double alpha = 1.0 + 3.0 * rng.uniform();
    const uint64_t n_o = rng.uniform() < 0.3 ? 0 : static_cast<uint64_t>(rng.uniform_int(1, 1 << 30));
    const int64_t step = rng.uniform_int(0, 100000);
    const double next = update_alpha(alpha, n_o, cfg, step);
    if (n_o > 0) {
      EXPECT_GE(next, alpha);
      EXPECT_LE(next - alpha, cfg.l_c + 1e-15);
    } else {
      EXPECT_LE(next, alpha);
    }
    EXPECT_GE(next, 1.0);
  }
}

TEST(CalibConfig, RejectsNonPositiveRates) {
  CalibConfig cfg;
  cfg.lr_d = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidArgumentError);
  cfg = CalibConfig{};
  cfg.update_every = 0;
  EXPECT_THROW(cfg.validate(), InvalidArgumentError);
}

TEST(FakeQuant, GridValuesAreFixed) {
  const QuantParams p = derive_scale(-1.0, 3.0, 8);
  FloatTensor t({5});
  for (int i = 0; i < 5; ++i) t[i] = static_cast<float>(dequantize_value(p.qmin() + 40 * i, p));
  EXPECT_EQ(fake_quant_forward(t, p), t);
}

TEST(FakeQuant, OutOfRangeSaturates) {
  const QuantParams p = derive_scale(-1.0, 1.0, 8, 2.0);
  const FloatTensor t({2}, std::vector<float>{100.0f, -100.0f});
  const FloatTensor out = fake_quant_forward(t, p);
  EXPECT_FLOAT_EQ(out[0], static_cast<float>(p.real_max()));
  EXPECT_FLOAT_EQ(out[1], static_cast<float>(p.real_min()));
}

TEST(FakeQuant, EqualsQuantizeDequantizeComposition) {
  PhiloxStream rng(43, 1);
  for (int i = 0; i < 20; ++i) {
    const QuantParams p = with_alpha(testing::random_params(rng, 10.0), 1.0 + 3.0 * rng.uniform());
    const FloatTensor t = random_float(rng, {64}, -12.0, 12.0);
    EXPECT_EQ(fake_quant_forward(t, p), dequantize(quantize(t, p), p));
  }
}

TEST(FakeQuant, SteMasksClampedValues) {
  const QuantParams p = derive_scale(-1.0, 1.0, 8);
  const FloatTensor t({3}, std::vector<float>{0.3f, 5.0f, -5.0f});
  const FloatTensor g({3}, std::vector<float>{1.0f, 1.0f, 1.0f});
  const FloatTensor out = fake_quant_backward(g, t, p);
  EXPECT_EQ(out[0], 1.0f);
  EXPECT_EQ(out[1], 0.0f);
  EXPECT_EQ(out[2], 0.0f);
}

// The gradient backpropagated through the fake-quantized input equals the
// finite-difference gradient of the loss at the quantized point.
TEST(FakeQuant, SteGradientMatchesFiniteDifferences) {
  ModelGraph g = make_architecture("mlp:4-3");
  initialize_weights(g, 5);
  PhiloxStream rng(44, 1);
  ForwardOptions observe;
  observe.observe = true;
  forward(g, random_float(rng, {64, 4}, -2.0, 2.0), observe);

  const FloatTensor x = random_float(rng, {2, 4}, -1.0, 1.0);
  const FloatTensor targets = random_float(rng, {2, 3}, -1.0, 1.0);
  const std::set<std::string> only{"input"};
  ForwardOptions fo;
  fo.quantize_weights = false;
  fo.only_records = &only;
  const ForwardState st = forward(std::as_const(g), x, fo);
  ASSERT_TRUE(st.pre_quant.count("input"));
  const LossResult loss = mean_squared_error(st.values.at(st.logits_value), targets);
  const Gradients grads = backward(g, st, loss.grad, true);

  const FloatTensor& q = st.values.at("input");
  ForwardOptions plain;
  plain.quantize = false;
  auto loss_at = [&](const FloatTensor& in) {
    const ForwardState s = forward(std::as_const(g), in, plain);
    return mean_squared_error(s.values.at(s.logits_value), targets).loss;
  };
  const double h = 0.05;
  for (int64_t i = 0; i < q.numel(); ++i) {
    ASSERT_TRUE(ste_passes(x[i], st.act_params.at("input")));
    FloatTensor up = q, down = q;
    up[i] += static_cast<float>(h);
    down[i] -= static_cast<float>(h);
    const double fd = (loss_at(up) - loss_at(down)) / (2.0 * h);
    EXPECT_NEAR(grads.input[i], fd, 1e-4 * std::max(1.0, std::abs(fd))) << "element " << i;
  }
}

TEST(Qoat, ZeroWeightsAndInputsHaveNoOverflow) {
  ModelGraph g = make_architecture("mlp:16-8-4");
  ForwardOptions fo;
  fo.observe = true;
  const ForwardState st = forward(g, FloatTensor({4, 16}), fo);
  for (const auto& [layer, rep] : shadow_overflow(g, st, AccumulatorConfig{})) {
    EXPECT_EQ(rep.events, 0u) << layer;
  }
}

TEST(Qoat, SaturatedDeepLayerOverflows) {
  ModelGraph g = make_architecture("mlp:1024-4");
  for (auto& [name, w] : g.all_weights()) {
    for (int64_t i = 0; i < w.weight.numel(); ++i) w.weight[i] = 1.0f;
  }
  ForwardOptions fo;
  fo.observe = true;
  const ForwardState st = forward(g, FloatTensor({2, 1024}, 1.0f), fo);
  const auto reports = shadow_overflow(g, st, AccumulatorConfig{});
  EXPECT_GT(reports.at("fc1").events, 0u);
  AccumulatorConfig wide;
  wide.width = AccumulatorWidth::k32;
  EXPECT_EQ(shadow_overflow(g, st, wide).at("fc1").events, 0u);
}

TEST(Qoat, OverflowDrivesAlphaUpUntilClean) {
  // A stationary stream on a saturated depth-1024 layer: the update loop
  // must reach a clean state.
  ModelGraph g = make_architecture("mlp:1024-4");
  PhiloxStream rng(45, 1);
  for (auto& [name, w] : g.all_weights()) {
    for (int64_t i = 0; i < w.weight.numel(); ++i) w.weight[i] = 0.5f + 0.5f * float(rng.uniform());
  }
  const FloatTensor x = random_float(rng, {4, 1024}, 0.5, 1.0);
  CalibConfig cfg;
  ForwardOptions fo;
  fo.observe = true;
  bool clean = false;
  double last_alpha = 1.0;
  for (int step = 0; step < 2000 && !clean; ++step) {
    const ForwardState st = forward(g, x, fo);
    const auto reports = shadow_overflow(g, st, cfg.shadow);
    clean = reports.at("fc1").events == 0;
    apply_alpha_updates(g, reports, cfg, step);
    if (!clean) {
      EXPECT_GE(g.weights("fc1").quant.alpha, last_alpha);
    }
    last_alpha = g.weights("fc1").quant.alpha;
  }
  EXPECT_TRUE(clean);
  EXPECT_GT(g.weights("fc1").quant.alpha, 1.0);
}

TEST(Qoat, RecordIsSharedBetweenFakeAndRealPaths) {
  ModelGraph g = make_architecture("mlp:8-6-3");
  initialize_weights(g, 1);
  PhiloxStream rng(46, 1);
  const FloatTensor x = random_float(rng, {8, 8}, -1.0, 1.0);
  ForwardOptions fo;
  fo.observe = true;
  forward(g, x, fo);
  g.record("relu1").alpha = 2.5;
  g.weights("fc2").quant.alpha = 1.75;
  fo.observe = false;
  const ForwardState st = forward(g, x, fo);
  EXPECT_EQ(st.act_params.at("relu1"), g.record("relu1").params());
  EXPECT_DOUBLE_EQ(st.act_params.at("relu1").alpha, 2.5);
  EXPECT_DOUBLE_EQ(st.weight_params.at("fc2").alpha, 1.75);
}

TEST(Qoat, RecordOverflowSumsConsumers) {
  ModelGraph g = make_architecture("mlp:8-6-3");
  std::map<std::string, OverflowReport> reports;
  reports["fc1"].events = 3;
  reports["fc2"].events = 5;
  const auto per_record = record_overflow(g, reports);
  EXPECT_EQ(per_record.at("input"), 3u);
  EXPECT_EQ(per_record.at("relu1"), 5u);
  EXPECT_EQ(per_record.at("fc2"), 0u);
}

TEST(Qoat, SkipFirstLayerWeights) {
  ModelGraph g = make_architecture("mlp:8-6-3");
  std::map<std::string, OverflowReport> reports;
  reports["fc1"].events = 50;
  reports["fc2"].events = 50;
  CalibConfig cfg;
  cfg.skip_first_layer_weights = true;
  apply_alpha_updates(g, reports, cfg, 0);
  EXPECT_DOUBLE_EQ(g.weights("fc1").quant.alpha, 1.0);
  EXPECT_GT(g.weights("fc2").quant.alpha, 1.0);
  EXPECT_GT(g.record("input").alpha, 1.0);
}

TEST(Qoat, ShadowScheduleAndFreeze) {
  ModelGraph g = make_architecture("mlp:4-3");
  initialize_weights(g, 2);
  const Dataset data = make_blobs({.samples = 16, .classes = 3, .features = 4, .seed = 1});
  CalibConfig cfg;
  cfg.update_every = 5;
  Sgd opt;
  EXPECT_FALSE(qoat_step(g, data, cfg, 3, opt, 100).shadow_ran);
  const QoatStepResult on = qoat_step(g, data, cfg, 4, opt, 100);
  EXPECT_TRUE(on.shadow_ran);
  EXPECT_TRUE(on.alpha_updated);
  const QoatStepResult frozen = qoat_step(g, data, cfg, 94, opt, 100);
  EXPECT_TRUE(frozen.shadow_ran);
  EXPECT_FALSE(frozen.alpha_updated);
}

TEST(Qoat, NonFiniteLossAborts) {
  ModelGraph g = make_architecture("mlp:4-3");
  initialize_weights(g, 2);
  Dataset data;
  data.inputs = FloatTensor({4, 4}, 0.5f);
  data.labels = Int32Tensor({4});
  data.targets = FloatTensor({4, 3}, std::numeric_limits<float>::quiet_NaN());
  Sgd opt;
  EXPECT_THROW(qoat_step(g, data, CalibConfig{}, 0, opt), NumericError);
}

TEST(TrainToy, LinearModelSeparatesBlobs) {
  const Dataset data = make_blobs(
      {.samples = 400, .classes = 2, .features = 2, .center_box = 4.0, .spread = 0.4, .seed = 3});
  ModelGraph g = make_architecture("mlp:2-2");
  initialize_weights(g, 1);
  TrainConfig cfg;
  cfg.seed = 1;
  const TrainResult r = train_toy(g, data, 10, cfg);
  EXPECT_GT(r.steps, 0);
  EXPECT_GE(evaluate(g, data, true).accuracy, 0.99);
  EXPECT_GE(evaluate(g, data, false).accuracy, 0.99);
}

TEST(TrainToy, ZeroEpochsOnlyInitializesObservers) {
  const Dataset data = make_blobs({.samples = 50, .classes = 3, .features = 5, .seed = 2});
  ModelGraph g = make_architecture("mlp:5-4-3");
  initialize_weights(g, 1);
  const auto weights_before = g.all_weights();
  for (const auto& [owner, rec] : g.records()) EXPECT_FALSE(rec.ready());
  const TrainResult r = train_toy(g, data, 0, TrainConfig{});
  EXPECT_EQ(r.steps, 0);
  EXPECT_EQ(g.all_weights(), weights_before);
  for (const auto& [owner, rec] : g.records()) {
    EXPECT_TRUE(rec.ready()) << owner;
    EXPECT_DOUBLE_EQ(rec.alpha, 1.0);
  }
}

TEST(TrainToy, DeterministicForSeed) {
  const Dataset data = make_blobs({.samples = 64, .classes = 3, .features = 4, .seed = 4});
  auto run = [&] {
    ModelGraph g = make_architecture("mlp:4-8-3");
    initialize_weights(g, 9);
    TrainConfig cfg;
    cfg.seed = 5;
    cfg.batch_size = 8;
    train_toy(g, data, 3, cfg);
    return g;
  };
  EXPECT_TRUE(run() == run());
}

}  // namespace
}  // namespace oaq

// Copyright 2026 The PulseGuard Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "pulseguard/error.hpp"
#include "pulseguard/io.hpp"
#include "pulseguard/nnet.hpp"

namespace pulseguard::nnet {
namespace {

Architecture Tiny(int seq_len = 10) {
  Architecture a;
  a.encoder_hidden = {4, 3};
  a.decoder_hidden = {3, 4};
  a.seq_len = seq_len;
  return a;
}

std::vector<double> RandomSeq(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> x(n);
  for (double& v : x) v = g(rng);
  return x;
}

std::vector<dsp::Segment> SineSegments(int n, int len, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> freq(0.05, 0.2), phase(0, 6.28);
  std::vector<dsp::Segment> out;
  for (int i = 0; i < n; ++i) {
    dsp::Segment s;
    s.source_record_id = "s" + std::to_string(i);
    const double f = freq(rng), p = phase(rng);
    for (int t = 0; t < len; ++t) s.samples.push_back(std::sin(f * t + p));
    out.push_back(dsp::Normalize(s));
  }
  return out;
}

std::filesystem::path TempFile(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("pulseguard_test_" + name);
}

class ScopedThreads {
 public:
  explicit ScopedThreads(const char* n) {
    if (const char* old = std::getenv("PULSEGUARD_THREADS")) old_ = old;
    setenv("PULSEGUARD_THREADS", n, 1);
  }
  ~ScopedThreads() {
    if (old_.empty())
      unsetenv("PULSEGUARD_THREADS");
    else
      setenv("PULSEGUARD_THREADS", old_.c_str(), 1);
  }

 private:
  std::string old_;
};

TEST(LstmStep, ZeroWeightsGiveZeroState) {
  const auto l = LstmLayerParams::Zeros(3, 5);
  const auto s = LstmStep(l, Vector::Zero(3), Vector::Zero(5), Vector::Zero(5));
  EXPECT_EQ(s.h.norm(), 0.0);
  EXPECT_EQ(s.c.norm(), 0.0);
}

TEST(LstmStep, ScalarHandEvaluation) {
  auto l = LstmLayerParams::Zeros(1, 1);
  l.W << 0.5, -0.3, 0.8, 0.2;
  l.U << 0.1, 0.4, -0.6, 0.7;
  l.b << 0.05, 1.0, -0.1, 0.3;
  const double x = 0.9, h0 = -0.4, c0 = 0.25;
  auto sig = [](double v) { return 1 / (1 + std::exp(-v)); };
  const double i = sig(0.5 * x + 0.1 * h0 + 0.05);
  const double f = sig(-0.3 * x + 0.4 * h0 + 1.0);
  const double g = std::tanh(0.8 * x - 0.6 * h0 - 0.1);
  const double o = sig(0.2 * x + 0.7 * h0 + 0.3);
  const double c = f * c0 + i * g;
  const double h = o * std::tanh(c);
  const auto s = LstmStep(l, Vector::Constant(1, x), Vector::Constant(1, h0), Vector::Constant(1, c0));
  EXPECT_NEAR(s.c(0), c, 1e-12);
  EXPECT_NEAR(s.h(0), h, 1e-12);
}

TEST(LstmStep, SaturatedGatesHoldMemory) {
  auto l = LstmLayerParams::Zeros(2, 3);
  l.b_gate(Gate::kForget).setConstant(10);
  l.b_gate(Gate::kInput).setConstant(-10);
  Vector c0(3);
  c0 << 0.7, -1.2, 0.3;
  const auto s = LstmStep(l, Vector::Constant(2, 0.5), Vector::Constant(3, 0.1), c0);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(s.c(j), c0(j), 1e-4);
}

TEST(LstmStep, DimensionMismatchThrows) {
  const auto l = LstmLayerParams::Zeros(3, 5);
  EXPECT_THROW(LstmStep(l, Vector::Zero(2), Vector::Zero(5), Vector::Zero(5)), Error);
}

TEST(Reconstruct, FreshModelShape) {
  const auto m = InitModel(Architecture{}, 1);
  EXPECT_EQ(m.ParameterCount(), 4u * 80 * 81 + 4 * 80 + 4 * 40 * 120 + 4 * 40 + 4 * 40 * 80 +
                                    4 * 40 + 4 * 80 * 120 + 4 * 80 + 80 + 1);
  const auto y = Reconstruct(m, RandomSeq(256, 2));
  ASSERT_EQ(y.size(), 256u);
  for (double v : y) EXPECT_TRUE(std::isfinite(v));
}

TEST(Reconstruct, MatchesLoopOracle) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto arch = Tiny(24);
    arch.encoder_hidden = {7, 5};
    arch.decoder_hidden = {5, 6};
    const auto m = InitModel(arch, seed);
    const auto x = RandomSeq(24, seed + 50);
    const auto fast = Reconstruct(m, x);
    const auto slow = oracle::ReferenceReconstruct(m, x);
    for (int t = 0; t < 24; ++t) EXPECT_NEAR(fast[t], slow[t], 1e-12);
  }
}

TEST(Reconstruct, BatchColumnsMatchSingles) {
  const auto m = InitModel(Tiny(16), 3);
  Matrix x(16, 5);
  for (int b = 0; b < 5; ++b) {
    const auto s = RandomSeq(16, 10 + b);
    for (int t = 0; t < 16; ++t) x(t, b) = s[t];
  }
  const Matrix y = ReconstructBatch(m, x);
  for (int b = 0; b < 5; ++b) {
    const auto single = Reconstruct(m, std::vector<double>(x.col(b).data(), x.col(b).data() + 16));
    for (int t = 0; t < 16; ++t) EXPECT_NEAR(y(t, b), single[t], 1e-13);
  }
}

TEST(Reconstruct, OutputOrderIsAMirror) {
  auto reversed = InitModel(Tiny(12), 8);
  auto forward = reversed;
  forward.arch.reverse_output = false;
  const auto x = RandomSeq(12, 8);
  auto a = Reconstruct(reversed, x);
  const auto b = Reconstruct(forward, x);
  std::reverse(a.begin(), a.end());
  EXPECT_EQ(a, b);
  const auto ref = oracle::ReferenceReconstruct(forward, x);
  for (int t = 0; t < 12; ++t) EXPECT_NEAR(b[t], ref[t], 1e-12);
}

TEST(Reconstruct, WrongLengthThrows) {
  EXPECT_THROW(Reconstruct(InitModel(Tiny(), 1), RandomSeq(11, 1)), Error);
}

TEST(Loss, Examples) {
  const std::vector<double> a{1, 2, 3}, b{2, 3, 4};
  EXPECT_EQ(LossMse(a, a), 0.0);
  EXPECT_EQ(LossMse(b, a), 1.0);
  EXPECT_EQ(LossMse(std::vector<double>{0, 0}, std::vector<double>{1, 3}), 5.0);
}

TEST(Backward, ZeroLossGivesZeroGradients) {
  const auto m = ModelParams::Zeros(Tiny());
  const auto r = Backward(m, std::vector<double>(10, 0.0));
  EXPECT_EQ(r.loss, 0.0);
  EXPECT_EQ(GlobalNorm(r.grads), 0.0);
}

TEST(Backward, FiniteDifferencesTenSeeds) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto m = InitModel(Tiny(), seed);
    // Push weights away from initialization so every gate is exercised.
    std::mt19937_64 rng(seed * 77);
    std::normal_distribution<double> g(0, 0.3);
    for (auto& t : Tensors(m))
      for (double& v : t.data) v += g(rng);
    const auto check = oracle::CheckGradients(m, RandomSeq(10, seed + 100));
    EXPECT_LT(check.max_rel_error, 1e-4) << "seed " << seed;
    EXPECT_EQ(check.n_params, m.ParameterCount());
    m.arch.reverse_output = false;
    EXPECT_LT(oracle::CheckGradients(m, RandomSeq(10, seed + 200)).max_rel_error, 1e-4)
        << "forward order, seed " << seed;
  }
}

TEST(Backward, OutputBiasClosedForm) {
  const auto m = InitModel(Tiny(), 4);
  const auto x = RandomSeq(10, 4);
  const auto y = Reconstruct(m, x);
  double want = 0;
  for (int t = 0; t < 10; ++t) want += 2 * (y[t] - x[t]) / 10;
  const auto r = Backward(m, x);
  EXPECT_NEAR(r.grads.out_b, want, 1e-10);
  EXPECT_NEAR(r.loss, LossMse(y, x), 1e-14);
}

TEST(Clip, NormBounded) {
  auto g = InitModel(Tiny(), 2);
  for (auto& t : Tensors(g))
    for (double& v : t.data) v *= 40;
  const double before = ClipGlobalNorm(g, 5.0);
  EXPECT_GT(before, 5.0);
  EXPECT_LE(GlobalNorm(g), 5.0 + 1e-9);
  auto small = InitModel(Tiny(), 2);
  for (auto& t : Tensors(small))
    for (double& v : t.data) v *= 1e-3;
  const auto copy = small;
  ClipGlobalNorm(small, 5.0);
  EXPECT_TRUE(BitIdentical(small, copy));
}

TEST(Train, ZeroLearningRateLeavesParameters) {
  TrainConfig cfg;
  cfg.learning_rate = 0;
  cfg.max_epochs = 2;
  cfg.batch_size = 8;
  const auto segs = SineSegments(40, 16, 1);
  const auto r = Train(std::span(segs).first(32), std::span(segs).last(8), cfg, Tiny(16));
  EXPECT_TRUE(BitIdentical(r.model, InitModel(Tiny(16), cfg.seed)));
}

TEST(Train, ReducesLossAndIsDeterministic) {
  TrainConfig cfg;
  cfg.max_epochs = 15;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-2;
  cfg.seed = 3;
  auto arch = Tiny(32);
  arch.encoder_hidden = {8, 6};
  arch.decoder_hidden = {6, 8};
  const auto segs = SineSegments(96, 32, 2);
  const auto tr = std::span(segs).first(80), va = std::span(segs).last(16);
  TrainResult a, b;
  {
    ScopedThreads one("1");
    a = Train(tr, va, cfg, arch);
  }
  {
    ScopedThreads four("4");
    b = Train(tr, va, cfg, arch);
  }
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
    EXPECT_EQ(a.history[i].val_loss, b.history[i].val_loss);
  }
  EXPECT_TRUE(BitIdentical(a.model, b.model));
  double best = 1e300;
  for (const auto& e : a.history) best = std::min(best, e.val_loss);
  EXPECT_LT(best, 0.5 * a.history.front().val_loss);
  EXPECT_EQ(EvaluateLoss(a.model, va), best);
}

TEST(Train, EarlyStopsWithPatience) {
  TrainConfig cfg;
  cfg.max_epochs = 200;
  cfg.patience = 2;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.05;
  const auto segs = SineSegments(24, 12, 3);
  const auto r = Train(std::span(segs).first(16), std::span(segs).last(8), cfg, Tiny(12));
  EXPECT_LT(r.history.size(), 200u);
  EXPECT_EQ(static_cast<int>(r.history.size()), r.best_epoch + cfg.patience);
}

TEST(Train, LearningRateDecaysOnPlateau) {
  TrainConfig cfg;
  cfg.max_epochs = 40;
  cfg.patience = 6;
  cfg.lr_decay = 0.5;
  cfg.lr_patience = 2;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.05;
  const auto segs = SineSegments(24, 12, 3);
  const auto r = Train(std::span(segs).first(16), std::span(segs).last(8), cfg, Tiny(12));
  double best = std::numeric_limits<double>::infinity();
  double lr = cfg.learning_rate;
  int stale = 0;
  int decays = 0;
  for (const auto& e : r.history) {
    EXPECT_DOUBLE_EQ(e.learning_rate, lr) << "epoch " << e.epoch;
    if (e.val_loss < best) {
      best = e.val_loss;
      stale = 0;
    } else if (++stale % cfg.lr_patience == 0 && stale < cfg.patience) {
      lr *= cfg.lr_decay;
      ++decays;
    }
  }
  EXPECT_GT(decays, 0);
}

TEST(Train, EmptyCorpusThrows) {
  EXPECT_THROW(Train({}, {}, TrainConfig{}, Tiny()), Error);
}

TEST(Serialize, RoundTripIsBitExact) {
  auto m = InitModel(Architecture{}, 11);
  m.out_b = 0.1 + 0.2;
  const auto path = TempFile("model.json");
  SaveModel(m, path);
  const auto back = LoadModel(path);
  EXPECT_TRUE(BitIdentical(m, back));
  const auto x = RandomSeq(256, 5);
  EXPECT_EQ(Reconstruct(m, x), Reconstruct(back, x));
}

TEST(Serialize, DistinctErrors) {
  const auto m = InitModel(Tiny(), 1);
  const auto path = TempFile("model_bad.json");
  auto expect_code = [&](const std::string& text, ErrorCode code) {
    io::WriteText(path, text);
    try {
      LoadModel(path);
      ADD_FAILURE() << "no error";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), code) << e.what();
    }
  };
  const std::string good = ModelToJson(m).dump();
  expect_code(good.substr(0, good.size() / 2), ErrorCode::kModelFormat);
  auto j = ModelToJson(m);
  j["version"] = "pulseguard-lstm-ae/0";
  expect_code(j.dump(), ErrorCode::kModelVersion);
  j = ModelToJson(m);
  j["architecture"]["encoder_hidden"] = {5, 3};
  expect_code(j.dump(), ErrorCode::kModelDimension);
  j = ModelToJson(m);
  j["parameters"].erase("output");
  expect_code(j.dump(), ErrorCode::kModelFormat);
  j = ModelToJson(m);
  j["architecture"]["output_order"] = "sideways";
  expect_code(j.dump(), ErrorCode::kModelFormat);
  EXPECT_THROW(LoadModel(TempFile("does_not_exist.json")), Error);
}

}  // namespace
}  // namespace pulseguard::nnet

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

#ifndef PULSEGUARD_NNET_HPP_
#define PULSEGUARD_NNET_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pulseguard/dsp.hpp"

namespace pulseguard::nnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr const char* kModelVersion = "pulseguard-lstm-ae/1";

enum class Gate { kInput = 0, kForget = 1, kCell = 2, kOutput = 3 };

// One LSTM layer. The four gate blocks are stacked row-wise in the order
// input, forget, cell candidate, output.
struct LstmLayerParams {
  int input_dim = 0;
  int hidden_dim = 0;
  Matrix W;  // 4H x input_dim
  Matrix U;  // 4H x H
  Vector b;  // 4H

  static LstmLayerParams Zeros(int input_dim, int hidden_dim);

  auto W_gate(Gate g) { return W.middleRows(static_cast<int>(g) * hidden_dim, hidden_dim); }
  auto U_gate(Gate g) { return U.middleRows(static_cast<int>(g) * hidden_dim, hidden_dim); }
  auto b_gate(Gate g) { return b.segment(static_cast<int>(g) * hidden_dim, hidden_dim); }
  auto W_gate(Gate g) const { return W.middleRows(static_cast<int>(g) * hidden_dim, hidden_dim); }
  auto U_gate(Gate g) const { return U.middleRows(static_cast<int>(g) * hidden_dim, hidden_dim); }
  auto b_gate(Gate g) const { return b.segment(static_cast<int>(g) * hidden_dim, hidden_dim); }

  // Throws kModelDimension on shape mismatch, kModelFormat on non-finite
  // values.
  void Validate() const;
};

struct LstmState {
  Vector h;
  Vector c;
};

LstmState LstmStep(const LstmLayerParams& layer, const Vector& x,
                   const Vector& h_prev, const Vector& c_prev);

struct Architecture {
  int input_dim = 1;
  std::vector<int> encoder_hidden{80, 40};
  std::vector<int> decoder_hidden{40, 80};
  int seq_len = 256;
  // Decoder step k emits sample seq_len-1-k; reconstructions are always
  // returned in original time order.
  bool reverse_output = true;

  bool IsDefault() const;
  void Validate() const;
};

struct ModelParams {
  Architecture arch;
  std::vector<LstmLayerParams> encoder;
  std::vector<LstmLayerParams> decoder;
  Matrix out_w;  // 1 x last decoder hidden
  double out_b = 0.0;
  std::string version = kModelVersion;
  double pipeline_rate_hz = 32.0;
  double segment_len_s = 8.0;

  static ModelParams Zeros(const Architecture& arch);
  void Validate() const;
  std::size_t ParameterCount() const;
};

// Named views over every trainable tensor, in a fixed order.
struct TensorView {
  std::string name;
  std::span<double> data;
};
struct ConstTensorView {
  std::string name;
  std::span<const double> data;
};
std::vector<TensorView> Tensors(ModelParams& m);
std::vector<ConstTensorView> Tensors(const ModelParams& m);

// Xavier-uniform (gain 1) weights, zero biases, forget-gate bias +1.
ModelParams InitModel(const Architecture& arch, std::uint64_t seed);

double LossMse(std::span<const double> recon, std::span<const double> target);

// Sequences are columns of a seq_len x batch matrix.
Matrix ReconstructBatch(const ModelParams& model, const Matrix& inputs);

std::vector<double> Reconstruct(const ModelParams& model,
                                std::span<const double> samples);
// Requires a normalized segment of seq_len samples.
std::vector<double> Reconstruct(const ModelParams& model, const dsp::Segment& seg);

// Adds weight * d/dtheta sum_b mse_b to grads and returns sum_b mse_b.
double AccumulateGradients(const ModelParams& model, const Matrix& inputs,
                           double weight, ModelParams& grads);

struct BackwardResult {
  double loss = 0.0;
  ModelParams grads;
};

// Gradient of the single-sequence reconstruction MSE.
BackwardResult Backward(const ModelParams& model, std::span<const double> samples);

double GlobalNorm(const ModelParams& grads);
// Rescales grads so the global norm does not exceed max_norm; returns the
// norm before clipping.
double ClipGlobalNorm(ModelParams& grads, double max_norm);

struct AdamState {
  ModelParams m;
  ModelParams v;
  std::int64_t step = 0;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  int max_epochs = 100;
  int patience = 5;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  // Minibatches are split into shards of this many sequences; shard
  // gradients are reduced in shard order, independent of thread count.
  std::size_t shard_size = 16;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // The learning rate is multiplied by lr_decay after every lr_patience
  // epochs without a new best validation loss. 1.0 disables the schedule.
  double lr_decay = 1.0;
  int lr_patience = 2;

  void Validate() const;
};

void AdamUpdate(ModelParams& model, const ModelParams& grads, AdamState& state,
                const TrainConfig& cfg);

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;
  double learning_rate = 0.0;
};

struct TrainResult {
  ModelParams model;
  std::vector<EpochStats> history;
  int best_epoch = 0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

// Mean per-sequence MSE, evaluated in fixed shards.
double EvaluateLoss(const ModelParams& model, std::span<const dsp::Segment> segments,
                    std::size_t shard_size = 16);

TrainResult Train(std::span<const dsp::Segment> train,
                  std::span<const dsp::Segment> val, const TrainConfig& cfg,
                  const Architecture& arch = {}, const EpochCallback& on_epoch = {});

// Trains starting from the given parameters.
TrainResult Train(ModelParams init, std::span<const dsp::Segment> train,
                  std::span<const dsp::Segment> val, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

nlohmann::json ModelToJson(const ModelParams& model);
ModelParams ModelFromJson(const nlohmann::json& j);
void SaveModel(const ModelParams& model, const std::filesystem::path& path);
ModelParams LoadModel(const std::filesystem::path& path);

bool BitIdentical(const ModelParams& a, const ModelParams& b);

}  // namespace pulseguard::nnet

#endif  // PULSEGUARD_NNET_HPP_

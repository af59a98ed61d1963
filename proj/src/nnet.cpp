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

#include "pulseguard/nnet.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>

#include "pulseguard/error.hpp"
#include "pulseguard/io.hpp"

namespace pulseguard::nnet {

namespace {

// Accepts Eigen blocks by forwarding reference so temporaries such as
// m.topRows(n) can be written through.
template <class M>
void SigmoidInPlace(M&& m) {
  m = (1.0 + (-m.array()).exp()).inverse().matrix();
}

// tanh(x) = 1 - 2 / (e^{2x} + 1); vectorizes through exp.
template <class M>
void TanhInPlace(M&& m) {
  m = (1.0 - 2.0 / ((2.0 * m.array()).exp() + 1.0)).matrix();
}

// Activations for one LSTM layer over a batch; columns are ordered
// time-major (column t * B + b).
struct LayerCache {
  Matrix gates;   // 4H x TB, post-activation
  Matrix c;       // H x TB
  Matrix tanh_c;  // H x TB
  Matrix h;       // H x TB
};

int OutputTime(const Architecture& arch, int step) {
  return arch.reverse_output ? arch.seq_len - 1 - step : step;
}

struct ForwardCache {
  int steps = 0;
  int batch = 0;
  Matrix x;  // 1 x TB
  std::vector<LayerCache> enc;
  std::vector<LayerCache> dec;
  Matrix latent;  // H x B
  Matrix y;       // 1 x TB
};

// cache.gates must already hold W x_t + b for every step.
void LayerForward(const LstmLayerParams& p, int steps, int batch,
                  LayerCache& cache) {
  const int H = p.hidden_dim;
  const int cols = steps * batch;
  cache.c.resize(H, cols);
  cache.tanh_c.resize(H, cols);
  cache.h.resize(H, cols);
  for (int t = 0; t < steps; ++t) {
    const int at = t * batch;
    auto pre = cache.gates.middleCols(at, batch);
    if (t > 0) pre.noalias() += p.U * cache.h.middleCols(at - batch, batch);
    SigmoidInPlace(pre.topRows(2 * H));
    TanhInPlace(pre.middleRows(2 * H, H));
    SigmoidInPlace(pre.bottomRows(H));
    auto c = cache.c.middleCols(at, batch);
    const auto i = pre.topRows(H).array();
    const auto f = pre.middleRows(H, H).array();
    const auto g = pre.middleRows(2 * H, H).array();
    const auto o = pre.bottomRows(H).array();
    if (t > 0) {
      c = (f * cache.c.middleCols(at - batch, batch).array() + i * g).matrix();
    } else {
      c = (i * g).matrix();
    }
    auto tc = cache.tanh_c.middleCols(at, batch);
    tc = c;
    TanhInPlace(tc);
    cache.h.middleCols(at, batch) = (o * tc.array()).matrix();
  }
}

void ProjectInputs(const LstmLayerParams& p, const Matrix& inputs, LayerCache& cache) {
  cache.gates.noalias() = p.W * inputs;
  cache.gates.colwise() += p.b;
}

void Forward(const ModelParams& m, const Matrix& inputs, ForwardCache& fc) {
  const int steps = static_cast<int>(inputs.rows());
  const int batch = static_cast<int>(inputs.cols());
  Require(steps == m.arch.seq_len,
          "sequence length " + std::to_string(steps) + " does not match model seq_len " +
              std::to_string(m.arch.seq_len));
  Require(batch > 0, "empty batch");
  fc.steps = steps;
  fc.batch = batch;
  fc.x.resize(1, steps * batch);
  for (int t = 0; t < steps; ++t)
    for (int b = 0; b < batch; ++b) fc.x(0, t * batch + b) = inputs(t, b);

  fc.enc.resize(m.encoder.size());
  const Matrix* in = &fc.x;
  for (std::size_t l = 0; l < m.encoder.size(); ++l) {
    ProjectInputs(m.encoder[l], *in, fc.enc[l]);
    LayerForward(m.encoder[l], steps, batch, fc.enc[l]);
    in = &fc.enc[l].h;
  }
  fc.latent = fc.enc.back().h.rightCols(batch);

  // The latent is the decoder input at every step, so its projection is
  // computed once and tiled.
  fc.dec.resize(m.decoder.size());
  {
    const auto& p = m.decoder.front();
    Matrix once = p.W * fc.latent;
    once.colwise() += p.b;
    auto& cache = fc.dec.front();
    cache.gates.resize(4 * p.hidden_dim, steps * batch);
    for (int t = 0; t < steps; ++t) cache.gates.middleCols(t * batch, batch) = once;
    LayerForward(p, steps, batch, cache);
  }
  for (std::size_t l = 1; l < m.decoder.size(); ++l) {
    ProjectInputs(m.decoder[l], fc.dec[l - 1].h, fc.dec[l]);
    LayerForward(m.decoder[l], steps, batch, fc.dec[l]);
  }
  fc.y.noalias() = m.out_w * fc.dec.back().h;
  fc.y.array() += m.out_b;
}

// Backpropagates through one layer. dh_seq carries gradients arriving at
// every step's h from above; dh_final only at the last step. On return
// dpre holds gradients w.r.t. the gate pre-activations and g.U, g.b are
// accumulated. Input-side gradients are left to the caller.
void LayerBackward(const LstmLayerParams& p, const LayerCache& cache, int steps,
                   int batch, const Matrix* dh_seq, const Matrix* dh_final,
                   Matrix& dpre, LstmLayerParams& g) {
  const int H = p.hidden_dim;
  dpre.resize(4 * H, steps * batch);
  Matrix dh_next = Matrix::Zero(H, batch);
  Matrix dc_next = Matrix::Zero(H, batch);
  Matrix dh(H, batch);
  Eigen::ArrayXXd dc(H, batch);
  for (int t = steps - 1; t >= 0; --t) {
    const int at = t * batch;
    dh = dh_next;
    if (dh_seq) dh += dh_seq->middleCols(at, batch);
    if (dh_final && t == steps - 1) dh += *dh_final;

    const auto gates = cache.gates.middleCols(at, batch);
    const auto i = gates.topRows(H).array();
    const auto f = gates.middleRows(H, H).array();
    const auto gc = gates.middleRows(2 * H, H).array();
    const auto o = gates.bottomRows(H).array();
    const auto tc = cache.tanh_c.middleCols(at, batch).array();
    auto d = dpre.middleCols(at, batch);

    d.bottomRows(H) = (dh.array() * tc * o * (1.0 - o)).matrix();
    dc = dh.array() * o * (1.0 - tc * tc) + dc_next.array();
    d.topRows(H) = (dc * gc * i * (1.0 - i)).matrix();
    d.middleRows(2 * H, H) = (dc * i * (1.0 - gc * gc)).matrix();
    if (t > 0) {
      d.middleRows(H, H) =
          (dc * cache.c.middleCols(at - batch, batch).array() * f * (1.0 - f)).matrix();
    } else {
      d.middleRows(H, H).setZero();
    }
    dc_next = (dc * f).matrix();
    dh_next.noalias() = p.U.transpose() * d;
  }
  if (steps > 1) {
    const int tail = (steps - 1) * batch;
    g.U.noalias() += dpre.rightCols(tail) * cache.h.leftCols(tail).transpose();
  }
  g.b += dpre.rowwise().sum();
}

template <class Fn>
void ForEachLayerPair(ModelParams& a, const ModelParams& b, Fn&& fn) {
  for (std::size_t l = 0; l < a.encoder.size(); ++l) fn(a.encoder[l], b.encoder[l]);
  for (std::size_t l = 0; l < a.decoder.size(); ++l) fn(a.decoder[l], b.decoder[l]);
}

void SetZero(ModelParams& m) {
  for (auto& t : Tensors(m)) std::fill(t.data.begin(), t.data.end(), 0.0);
}

void AddInPlace(ModelParams& acc, const ModelParams& x) {
  ForEachLayerPair(acc, x, [](LstmLayerParams& a, const LstmLayerParams& b) {
    a.W += b.W;
    a.U += b.U;
    a.b += b.b;
  });
  acc.out_w += x.out_w;
  acc.out_b += x.out_b;
}

Matrix BatchMatrix(std::span<const dsp::Segment> segs, std::span<const std::size_t> idx,
                   int steps) {
  Matrix x(steps, static_cast<int>(idx.size()));
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto& s = segs[idx[b]].samples;
    Require(static_cast<int>(s.size()) == steps, "segment length does not match model seq_len",
            ErrorCode::kData);
    for (int t = 0; t < steps; ++t) x(t, static_cast<int>(b)) = s[static_cast<std::size_t>(t)];
  }
  return x;
}

Matrix GateBlockFromJson(const nlohmann::json& rows, int expect_rows, int expect_cols,
                         const std::string& name) {
  const auto data = rows.get<std::vector<std::vector<double>>>();
  Require(static_cast<int>(data.size()) == expect_rows,
          name + ": expected " + std::to_string(expect_rows) + " rows, found " +
              std::to_string(data.size()),
          ErrorCode::kModelDimension);
  Matrix m(expect_rows, expect_cols);
  for (int r = 0; r < expect_rows; ++r) {
    Require(static_cast<int>(data[static_cast<std::size_t>(r)].size()) == expect_cols,
            name + ": row " + std::to_string(r) + " has " +
                std::to_string(data[static_cast<std::size_t>(r)].size()) + " columns, expected " +
                std::to_string(expect_cols),
            ErrorCode::kModelDimension);
    for (int c = 0; c < expect_cols; ++c) m(r, c) = data[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  }
  return m;
}

nlohmann::json MatrixToJson(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

constexpr const char* kGateSuffix[4] = {"i", "f", "g", "o"};

nlohmann::json LayerToJson(const LstmLayerParams& p) {
  nlohmann::json j = {{"input_dim", p.input_dim}, {"hidden_dim", p.hidden_dim}};
  for (int gi = 0; gi < 4; ++gi) {
    const auto gate = static_cast<Gate>(gi);
    const std::string s = kGateSuffix[gi];
    j["W_" + s] = MatrixToJson(p.W_gate(gate));
    j["U_" + s] = MatrixToJson(p.U_gate(gate));
    const Vector bias = p.b_gate(gate);
    j["b_" + s] = std::vector<double>(bias.data(), bias.data() + bias.size());
  }
  return j;
}

LstmLayerParams LayerFromJson(const nlohmann::json& j, const std::string& name) {
  const int in = j.at("input_dim").get<int>();
  const int H = j.at("hidden_dim").get<int>();
  Require(in > 0 && H > 0, name + ": non-positive dimension", ErrorCode::kModelDimension);
  auto p = LstmLayerParams::Zeros(in, H);
  for (int gi = 0; gi < 4; ++gi) {
    const auto gate = static_cast<Gate>(gi);
    const std::string s = kGateSuffix[gi];
    p.W_gate(gate) = GateBlockFromJson(j.at("W_" + s), H, in, name + ".W_" + s);
    p.U_gate(gate) = GateBlockFromJson(j.at("U_" + s), H, H, name + ".U_" + s);
    const auto bias = j.at("b_" + s).get<std::vector<double>>();
    Require(static_cast<int>(bias.size()) == H,
            name + ".b_" + s + ": expected " + std::to_string(H) + " values",
            ErrorCode::kModelDimension);
    p.b_gate(gate) = Eigen::Map<const Vector>(bias.data(), H);
  }
  return p;
}

}  // namespace

LstmLayerParams LstmLayerParams::Zeros(int input_dim, int hidden_dim) {
  LstmLayerParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.W = Matrix::Zero(4 * hidden_dim, input_dim);
  p.U = Matrix::Zero(4 * hidden_dim, hidden_dim);
  p.b = Vector::Zero(4 * hidden_dim);
  return p;
}

void LstmLayerParams::Validate() const {
  Require(input_dim > 0 && hidden_dim > 0, "LSTM layer dimensions must be positive",
          ErrorCode::kModelDimension);
  Require(W.rows() == 4 * hidden_dim && W.cols() == input_dim &&
              U.rows() == 4 * hidden_dim && U.cols() == hidden_dim &&
              b.size() == 4 * hidden_dim,
          "LSTM layer matrices do not match declared dimensions",
          ErrorCode::kModelDimension);
  Require(W.allFinite() && U.allFinite() && b.allFinite(),
          "LSTM layer holds non-finite values", ErrorCode::kModelFormat);
}

LstmState LstmStep(const LstmLayerParams& layer, const Vector& x,
                   const Vector& h_prev, const Vector& c_prev) {
  layer.Validate();
  const int H = layer.hidden_dim;
  Require(x.size() == layer.input_dim && h_prev.size() == H && c_prev.size() == H,
          "lstm_step input dimensions do not match the layer",
          ErrorCode::kModelDimension);
  Matrix pre = layer.W * x + layer.U * h_prev + layer.b;
  SigmoidInPlace(pre.topRows(2 * H));
  TanhInPlace(pre.middleRows(2 * H, H));
  SigmoidInPlace(pre.bottomRows(H));
  LstmState s;
  s.c = (pre.middleRows(H, H).array() * c_prev.array() +
         pre.topRows(H).array() * pre.middleRows(2 * H, H).array())
            .matrix();
  Matrix tc = s.c;
  TanhInPlace(tc);
  s.h = (pre.bottomRows(H).array() * tc.array()).matrix();
  return s;
}

bool Architecture::IsDefault() const {
  const Architecture d;
  return input_dim == d.input_dim && encoder_hidden == d.encoder_hidden &&
         decoder_hidden == d.decoder_hidden && seq_len == d.seq_len &&
         reverse_output == d.reverse_output;
}

void Architecture::Validate() const {
  Require(input_dim == 1, "model.input_dim must be 1", ErrorCode::kConfig);
  Require(!encoder_hidden.empty() && !decoder_hidden.empty(),
          "model needs at least one encoder and one decoder layer", ErrorCode::kConfig);
  for (int h : encoder_hidden) Require(h > 0, "model.encoder_hidden sizes must be positive", ErrorCode::kConfig);
  for (int h : decoder_hidden) Require(h > 0, "model.decoder_hidden sizes must be positive", ErrorCode::kConfig);
  Require(seq_len >= 2, "model.seq_len must be at least 2", ErrorCode::kConfig);
}

ModelParams ModelParams::Zeros(const Architecture& arch) {
  arch.Validate();
  ModelParams m;
  m.arch = arch;
  int in = arch.input_dim;
  for (int h : arch.encoder_hidden) {
    m.encoder.push_back(LstmLayerParams::Zeros(in, h));
    in = h;
  }
  for (int h : arch.decoder_hidden) {
    m.decoder.push_back(LstmLayerParams::Zeros(in, h));
    in = h;
  }
  m.out_w = Matrix::Zero(1, in);
  m.out_b = 0.0;
  return m;
}

void ModelParams::Validate() const {
  Require(encoder.size() == arch.encoder_hidden.size() &&
              decoder.size() == arch.decoder_hidden.size(),
          "layer count does not match architecture", ErrorCode::kModelDimension);
  int in = arch.input_dim;
  auto check_chain = [&](const LstmLayerParams& p, int hidden, const char* where) {
    p.Validate();
    Require(p.input_dim == in && p.hidden_dim == hidden,
            std::string(where) + " layer dimensions do not chain with the architecture",
            ErrorCode::kModelDimension);
    in = hidden;
  };
  for (std::size_t l = 0; l < encoder.size(); ++l) check_chain(encoder[l], arch.encoder_hidden[l], "encoder");
  for (std::size_t l = 0; l < decoder.size(); ++l) check_chain(decoder[l], arch.decoder_hidden[l], "decoder");
  Require(out_w.rows() == 1 && out_w.cols() == in, "output projection has the wrong shape",
          ErrorCode::kModelDimension);
  Require(out_w.allFinite() && std::isfinite(out_b), "output projection holds non-finite values",
          ErrorCode::kModelFormat);
}

std::size_t ModelParams::ParameterCount() const {
  std::size_t n = 0;
  for (const auto& t : Tensors(*this)) n += t.data.size();
  return n;
}

std::vector<TensorView> Tensors(ModelParams& m) {
  std::vector<TensorView> out;
  auto add_layer = [&](LstmLayerParams& p, const std::string& prefix) {
    out.push_back({prefix + ".W", {p.W.data(), static_cast<std::size_t>(p.W.size())}});
    out.push_back({prefix + ".U", {p.U.data(), static_cast<std::size_t>(p.U.size())}});
    out.push_back({prefix + ".b", {p.b.data(), static_cast<std::size_t>(p.b.size())}});
  };
  for (std::size_t l = 0; l < m.encoder.size(); ++l) add_layer(m.encoder[l], "encoder." + std::to_string(l));
  for (std::size_t l = 0; l < m.decoder.size(); ++l) add_layer(m.decoder[l], "decoder." + std::to_string(l));
  out.push_back({"output.W", {m.out_w.data(), static_cast<std::size_t>(m.out_w.size())}});
  out.push_back({"output.b", {&m.out_b, 1}});
  return out;
}

std::vector<ConstTensorView> Tensors(const ModelParams& m) {
  std::vector<ConstTensorView> out;
  for (auto& t : Tensors(const_cast<ModelParams&>(m))) out.push_back({t.name, t.data});
  return out;
}

ModelParams InitModel(const Architecture& arch, std::uint64_t seed) {
  ModelParams m = ModelParams::Zeros(arch);
  std::mt19937_64 rng(seed);
  auto xavier = [&rng](auto&& block, int fan_in, int fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index c = 0; c < block.cols(); ++c)
      for (Eigen::Index r = 0; r < block.rows(); ++r) block(r, c) = u(rng);
  };
  auto init_layer = [&](LstmLayerParams& p) {
    for (int gi = 0; gi < 4; ++gi) {
      const auto gate = static_cast<Gate>(gi);
      xavier(p.W_gate(gate), p.input_dim, p.hidden_dim);
      xavier(p.U_gate(gate), p.hidden_dim, p.hidden_dim);
    }
    p.b.setZero();
    p.b_gate(Gate::kForget).setOnes();
  };
  for (auto& p : m.encoder) init_layer(p);
  for (auto& p : m.decoder) init_layer(p);
  xavier(m.out_w, static_cast<int>(m.out_w.cols()), 1);
  m.out_b = 0.0;
  return m;
}

double LossMse(std::span<const double> recon, std::span<const double> target) {
  Require(recon.size() == target.size(), "loss_mse needs equal lengths");
  Require(!recon.empty(), "loss_mse needs non-empty inputs");
  double sum = 0.0;
  for (std::size_t i = 0; i < recon.size(); ++i) {
    const double d = recon[i] - target[i];
    sum += d * d;
  }
  return sum / static_cast<double>(recon.size());
}

Matrix ReconstructBatch(const ModelParams& model, const Matrix& inputs) {
  ForwardCache fc;
  Forward(model, inputs, fc);
  Matrix out(fc.steps, fc.batch);
  for (int k = 0; k < fc.steps; ++k) {
    const int t = OutputTime(model.arch, k);
    for (int b = 0; b < fc.batch; ++b) out(t, b) = fc.y(0, k * fc.batch + b);
  }
  return out;
}

std::vector<double> Reconstruct(const ModelParams& model, std::span<const double> samples) {
  Require(static_cast<int>(samples.size()) == model.arch.seq_len,
          "reconstruct: segment has " + std::to_string(samples.size()) +
              " samples, model expects " + std::to_string(model.arch.seq_len));
  const Matrix x = Eigen::Map<const Vector>(samples.data(), static_cast<Eigen::Index>(samples.size()));
  const Matrix y = ReconstructBatch(model, x);
  return std::vector<double>(y.data(), y.data() + y.size());
}

std::vector<double> Reconstruct(const ModelParams& model, const dsp::Segment& seg) {
  Require(seg.normalized, "reconstruct needs a normalized segment");
  return Reconstruct(model, std::span<const double>(seg.samples));
}

double AccumulateGradients(const ModelParams& model, const Matrix& inputs,
                           double weight, ModelParams& grads) {
  ForwardCache fc;
  Forward(model, inputs, fc);
  const int steps = fc.steps;
  const int batch = fc.batch;
  Matrix diff(1, steps * batch);
  for (int k = 0; k < steps; ++k) {
    const int t = OutputTime(model.arch, k);
    diff.middleCols(k * batch, batch) =
        fc.y.middleCols(k * batch, batch) - fc.x.middleCols(t * batch, batch);
  }
  const double loss_sum = diff.squaredNorm() / steps;

  const Matrix dy = (2.0 * weight / steps) * diff;
  grads.out_w.noalias() += dy * fc.dec.back().h.transpose();
  grads.out_b += dy.sum();
  Matrix dh = model.out_w.transpose() * dy;

  Matrix dpre;
  Matrix dlatent;
  for (std::size_t l = model.decoder.size(); l-- > 0;) {
    const auto& p = model.decoder[l];
    auto& g = grads.decoder[l];
    LayerBackward(p, fc.dec[l], steps, batch, &dh, nullptr, dpre, g);
    if (l > 0) {
      g.W.noalias() += dpre * fc.dec[l - 1].h.transpose();
      dh.noalias() = p.W.transpose() * dpre;
    } else {
      // Fan-in of the repeated latent: sum the per-step gradients.
      Matrix summed = Matrix::Zero(4 * p.hidden_dim, batch);
      for (int t = 0; t < steps; ++t) summed += dpre.middleCols(t * batch, batch);
      g.W.noalias() += summed * fc.latent.transpose();
      dlatent.noalias() = p.W.transpose() * summed;
    }
  }

  for (std::size_t l = model.encoder.size(); l-- > 0;) {
    const auto& p = model.encoder[l];
    auto& g = grads.encoder[l];
    if (l + 1 == model.encoder.size()) {
      LayerBackward(p, fc.enc[l], steps, batch, nullptr, &dlatent, dpre, g);
    } else {
      LayerBackward(p, fc.enc[l], steps, batch, &dh, nullptr, dpre, g);
    }
    const Matrix& in = l > 0 ? fc.enc[l - 1].h : fc.x;
    g.W.noalias() += dpre * in.transpose();
    if (l > 0) dh.noalias() = p.W.transpose() * dpre;
  }
  return loss_sum;
}

BackwardResult Backward(const ModelParams& model, std::span<const double> samples) {
  Require(static_cast<int>(samples.size()) == model.arch.seq_len,
          "backward: segment length does not match model seq_len");
  BackwardResult r;
  r.grads = ModelParams::Zeros(model.arch);
  const Matrix x = Eigen::Map<const Vector>(samples.data(), static_cast<Eigen::Index>(samples.size()));
  r.loss = AccumulateGradients(model, x, 1.0, r.grads);
  return r;
}

double GlobalNorm(const ModelParams& grads) {
  double ss = 0.0;
  for (const auto& t : Tensors(grads))
    for (double v : t.data) ss += v * v;
  return std::sqrt(ss);
}

double ClipGlobalNorm(ModelParams& grads, double max_norm) {
  const double norm = GlobalNorm(grads);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (auto& t : Tensors(grads))
      for (double& v : t.data) v *= scale;
  }
  return norm;
}

void TrainConfig::Validate() const {
  Require(learning_rate >= 0.0 && std::isfinite(learning_rate),
          "train.learning_rate must be non-negative", ErrorCode::kConfig);
  Require(batch_size > 0, "train.batch_size must be positive", ErrorCode::kConfig);
  Require(max_epochs > 0, "train.max_epochs must be positive", ErrorCode::kConfig);
  Require(patience > 0, "train.patience must be positive", ErrorCode::kConfig);
  Require(clip_norm > 0.0, "train.clip_norm must be positive", ErrorCode::kConfig);
  Require(shard_size > 0, "train.shard_size must be positive", ErrorCode::kConfig);
  Require(lr_decay > 0.0 && lr_decay <= 1.0, "train.lr_decay must lie in (0, 1]",
          ErrorCode::kConfig);
  Require(lr_patience > 0, "train.lr_patience must be positive", ErrorCode::kConfig);
  Require(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1 && adam_eps > 0,
          "train Adam coefficients out of range", ErrorCode::kConfig);
}

void AdamUpdate(ModelParams& model, const ModelParams& grads, AdamState& state,
                const TrainConfig& cfg) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.step));
  auto params = Tensors(model);
  const auto g = Tensors(grads);
  auto m = Tensors(state.m);
  auto v = Tensors(state.v);
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t i = 0; i < params[k].data.size(); ++i) {
      const double gi = g[k].data[i];
      double& mi = m[k].data[i];
      double& vi = v[k].data[i];
      mi = cfg.adam_beta1 * mi + (1.0 - cfg.adam_beta1) * gi;
      vi = cfg.adam_beta2 * vi + (1.0 - cfg.adam_beta2) * gi * gi;
      params[k].data[i] -= cfg.learning_rate * (mi / bc1) / (std::sqrt(vi / bc2) + cfg.adam_eps);
    }
  }
}

double EvaluateLoss(const ModelParams& model, std::span<const dsp::Segment> segments,
                    std::size_t shard_size) {
  Require(!segments.empty(), "cannot evaluate loss on zero segments", ErrorCode::kData);
  const std::size_t shards = (segments.size() + shard_size - 1) / shard_size;
  std::vector<double> sums(shards, 0.0);
  std::vector<std::size_t> order(segments.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  io::ParallelFor(shards, [&](std::size_t s) {
    const std::size_t begin = s * shard_size;
    const std::size_t end = std::min(segments.size(), begin + shard_size);
    const Matrix x = BatchMatrix(segments, std::span(order).subspan(begin, end - begin),
                                 model.arch.seq_len);
    const Matrix y = ReconstructBatch(model, x);
    sums[s] = (y - x).squaredNorm() / model.arch.seq_len;
  });
  double total = 0.0;
  for (double v : sums) total += v;
  return total / static_cast<double>(segments.size());
}

TrainResult Train(std::span<const dsp::Segment> train, std::span<const dsp::Segment> val,
                  const TrainConfig& cfg, const Architecture& arch,
                  const EpochCallback& on_epoch) {
  return Train(InitModel(arch, cfg.seed), train, val, cfg, on_epoch);
}

TrainResult Train(ModelParams init, std::span<const dsp::Segment> train,
                  std::span<const dsp::Segment> val, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.Validate();
  init.Validate();
  Require(!train.empty(), "training split is empty", ErrorCode::kInsufficientData);
  Require(!val.empty(), "validation split is empty", ErrorCode::kInsufficientData);

  TrainResult result;
  ModelParams model = std::move(init);
  AdamState adam{ModelParams::Zeros(model.arch), ModelParams::Zeros(model.arch), 0};
  ModelParams grads = ModelParams::Zeros(model.arch);
  const std::size_t max_shards = (cfg.batch_size + cfg.shard_size - 1) / cfg.shard_size;
  std::vector<ModelParams> shard_grads(max_shards, ModelParams::Zeros(model.arch));
  std::vector<double> shard_loss(max_shards, 0.0);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0xbb67ae8584caa73bULL);

  TrainConfig step_cfg = cfg;
  double best_val = std::numeric_limits<double>::infinity();
  int stale = 0;
  result.model = model;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const std::size_t n = end - begin;
      const std::size_t shards = (n + cfg.shard_size - 1) / cfg.shard_size;
      io::ParallelFor(shards, [&](std::size_t s) {
        const std::size_t s_begin = begin + s * cfg.shard_size;
        const std::size_t s_end = std::min(end, s_begin + cfg.shard_size);
        const Matrix x = BatchMatrix(train, std::span(order).subspan(s_begin, s_end - s_begin),
                                     model.arch.seq_len);
        SetZero(shard_grads[s]);
        shard_loss[s] = AccumulateGradients(model, x, 1.0 / static_cast<double>(n), shard_grads[s]);
      });
      SetZero(grads);
      double batch_loss = 0.0;
      for (std::size_t s = 0; s < shards; ++s) {
        AddInPlace(grads, shard_grads[s]);
        batch_loss += shard_loss[s];
      }
      Require(std::isfinite(batch_loss),
              "non-finite training loss at epoch " + std::to_string(epoch) + ", batch starting " +
                  std::to_string(begin),
              ErrorCode::kNonFinite);
      epoch_loss += batch_loss;
      ClipGlobalNorm(grads, cfg.clip_norm);
      AdamUpdate(model, grads, adam, step_cfg);
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_loss / static_cast<double>(train.size());
    stats.val_loss = EvaluateLoss(model, val, cfg.shard_size);
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    stats.learning_rate = step_cfg.learning_rate;
    Require(std::isfinite(stats.val_loss),
            "non-finite validation loss at epoch " + std::to_string(epoch),
            ErrorCode::kNonFinite);
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
    if (stats.val_loss < best_val) {
      best_val = stats.val_loss;
      result.model = model;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    } else if (stale % cfg.lr_patience == 0) {
      step_cfg.learning_rate *= cfg.lr_decay;
    }
  }
  return result;
}

nlohmann::json ModelToJson(const ModelParams& model) {
  model.Validate();
  nlohmann::json enc = nlohmann::json::array();
  for (const auto& p : model.encoder) enc.push_back(LayerToJson(p));
  nlohmann::json dec = nlohmann::json::array();
  for (const auto& p : model.decoder) dec.push_back(LayerToJson(p));
  const Vector w = model.out_w.row(0).transpose();
  return {
      {"version", model.version},
      {"architecture",
       {{"input_dim", model.arch.input_dim},
        {"encoder_hidden", model.arch.encoder_hidden},
        {"decoder_hidden", model.arch.decoder_hidden},
        {"seq_len", model.arch.seq_len},
        {"latent", "repeat-vector"},
        {"output_order", model.arch.reverse_output ? "reversed" : "forward"},
        {"overrides_default", !model.arch.IsDefault()}}},
      {"normalization",
       {{"pipeline_rate_hz", model.pipeline_rate_hz},
        {"segment_len_s", model.segment_len_s},
        {"scheme", "zscore-population"}}},
      {"parameters",
       {{"encoder", enc},
        {"decoder", dec},
        {"output", {{"W", MatrixToJson(model.out_w)}, {"b", model.out_b}}}}}};
}

ModelParams ModelFromJson(const nlohmann::json& j) {
  try {
    Require(j.is_object(), "model file is not a JSON object", ErrorCode::kModelFormat);
    const auto version = j.at("version").get<std::string>();
    Require(version == kModelVersion,
            "model version '" + version + "' is not supported (expected '" + kModelVersion + "')",
            ErrorCode::kModelVersion);
    ModelParams m;
    const auto& a = j.at("architecture");
    m.arch.input_dim = a.at("input_dim").get<int>();
    m.arch.encoder_hidden = a.at("encoder_hidden").get<std::vector<int>>();
    m.arch.decoder_hidden = a.at("decoder_hidden").get<std::vector<int>>();
    m.arch.seq_len = a.at("seq_len").get<int>();
    const auto order = a.at("output_order").get<std::string>();
    Require(order == "reversed" || order == "forward",
            "model output_order must be 'reversed' or 'forward'", ErrorCode::kModelFormat);
    m.arch.reverse_output = order == "reversed";
    try {
      m.arch.Validate();
    } catch (const Error& e) {
      Fail(ErrorCode::kModelDimension, e.what());
    }
    const auto& n = j.at("normalization");
    m.pipeline_rate_hz = n.at("pipeline_rate_hz").get<double>();
    m.segment_len_s = n.at("segment_len_s").get<double>();
    const auto& params = j.at("parameters");
    const auto& enc = params.at("encoder");
    const auto& dec = params.at("decoder");
    Require(enc.size() == m.arch.encoder_hidden.size() && dec.size() == m.arch.decoder_hidden.size(),
            "model layer count disagrees with architecture", ErrorCode::kModelDimension);
    for (std::size_t l = 0; l < enc.size(); ++l)
      m.encoder.push_back(LayerFromJson(enc[l], "encoder." + std::to_string(l)));
    for (std::size_t l = 0; l < dec.size(); ++l)
      m.decoder.push_back(LayerFromJson(dec[l], "decoder." + std::to_string(l)));
    const int last = m.arch.decoder_hidden.back();
    m.out_w = GateBlockFromJson(params.at("output").at("W"), 1, last, "output.W");
    m.out_b = params.at("output").at("b").get<double>();
    m.version = version;
    m.Validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kModelFormat, std::string("malformed model file: ") + e.what());
  }
}

void SaveModel(const ModelParams& model, const std::filesystem::path& path) {
  io::WriteText(path, ModelToJson(model).dump() + "\n");
}

ModelParams LoadModel(const std::filesystem::path& path) {
  return ModelFromJson(io::ReadJson(path, ErrorCode::kModelFormat));
}

bool BitIdentical(const ModelParams& a, const ModelParams& b) {
  if (a.arch.encoder_hidden != b.arch.encoder_hidden ||
      a.arch.decoder_hidden != b.arch.decoder_hidden || a.arch.seq_len != b.arch.seq_len ||
      a.arch.input_dim != b.arch.input_dim || a.arch.reverse_output != b.arch.reverse_output)
    return false;
  const auto ta = Tensors(a);
  const auto tb = Tensors(b);
  if (ta.size() != tb.size()) return false;
  for (std::size_t k = 0; k < ta.size(); ++k) {
    if (ta[k].data.size() != tb[k].data.size()) return false;
    if (std::memcmp(ta[k].data.data(), tb[k].data.data(), ta[k].data.size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

}  // namespace pulseguard::nnet

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

#include "pulseguard/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pulseguard/error.hpp"

namespace pulseguard::dsp {

namespace {

// Converts a duration to a whole number of samples, rejecting fractional
// results.
std::size_t WholeSamples(double seconds, double rate_hz, const char* what) {
  const double exact = seconds * rate_hz;
  const double rounded = std::round(exact);
  Require(rounded >= 1.0 && std::abs(exact - rounded) < 1e-9,
          std::string(what) + " must be a positive whole number of samples");
  return static_cast<std::size_t>(rounded);
}

Biquad Normalized(double b0, double b1, double b2, double a0, double a1,
                  double a2) {
  return Biquad{b0 / a0, b1 / a0, b2 / a0, a1 / a0, a2 / a0};
}

}  // namespace

void Waveform::Validate() const {
  Require(sample_rate_hz > 0.0, "waveform sample rate must be positive");
  Require(!samples.empty(), "waveform must hold at least one sample");
  Require(quality_mask.size() == samples.size(),
          "quality mask length must match sample count");
}

Waveform MakeWaveform(double sample_rate_hz, std::vector<double> samples) {
  Waveform w;
  w.sample_rate_hz = sample_rate_hz;
  w.quality_mask.assign(samples.size(), 1);
  w.samples = std::move(samples);
  w.Validate();
  return w;
}

// Bilinear transform of the analog 2nd-order Butterworth prototype with
// frequency prewarping, i.e. Q = 1/sqrt(2).
Biquad Biquad::ButterworthLowpass(double cutoff_hz, double rate_hz) {
  const double w0 = 2.0 * std::numbers::pi * cutoff_hz / rate_hz;
  const double cw = std::cos(w0);
  const double alpha = std::sin(w0) / std::numbers::sqrt2;
  return Normalized((1.0 - cw) / 2.0, 1.0 - cw, (1.0 - cw) / 2.0, 1.0 + alpha,
                    -2.0 * cw, 1.0 - alpha);
}

Biquad Biquad::ButterworthHighpass(double cutoff_hz, double rate_hz) {
  const double w0 = 2.0 * std::numbers::pi * cutoff_hz / rate_hz;
  const double cw = std::cos(w0);
  const double alpha = std::sin(w0) / std::numbers::sqrt2;
  return Normalized((1.0 + cw) / 2.0, -(1.0 + cw), (1.0 + cw) / 2.0,
                    1.0 + alpha, -2.0 * cw, 1.0 - alpha);
}

double Biquad::Magnitude(double freq_hz, double rate_hz) const {
  const double w = 2.0 * std::numbers::pi * freq_hz / rate_hz;
  const std::complex<double> z1 = std::polar(1.0, -w);
  const std::complex<double> z2 = z1 * z1;
  return std::abs((b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2));
}

std::vector<double> FilterDf2t(const Biquad& q, std::span<const double> x) {
  std::vector<double> y(x.size());
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double out = q.b0 * x[n] + s1;
    s1 = q.b1 * x[n] - q.a1 * out + s2;
    s2 = q.b2 * x[n] - q.a2 * out;
    y[n] = out;
  }
  return y;
}

Waveform Bandpass(const Waveform& w, double low_hz, double high_hz) {
  w.Validate();
  Require(low_hz > 0.0 && low_hz < high_hz && high_hz < w.sample_rate_hz / 2,
          "bandpass requires 0 < low < high < rate/2");
  const auto hp = Biquad::ButterworthHighpass(low_hz, w.sample_rate_hz);
  const auto lp = Biquad::ButterworthLowpass(high_hz, w.sample_rate_hz);
  Waveform out;
  out.sample_rate_hz = w.sample_rate_hz;
  out.samples = FilterDf2t(lp, FilterDf2t(hp, w.samples));
  out.quality_mask = w.quality_mask;
  return out;
}

Waveform Downsample(const Waveform& w, double target_hz) {
  w.Validate();
  Require(target_hz > 0.0, "downsample target rate must be positive");
  const double ratio = w.sample_rate_hz / target_hz;
  const double k_rounded = std::round(ratio);
  Require(k_rounded >= 1.0 && std::abs(ratio - k_rounded) < 1e-9,
          "downsample ratio must be a positive integer");
  const auto k = static_cast<std::size_t>(k_rounded);
  const std::size_t n_out = w.size() / k;
  Require(n_out > 0, "waveform shorter than one downsample group");
  Waveform out;
  out.sample_rate_hz = target_hz;
  out.samples.resize(n_out);
  out.quality_mask.resize(n_out);
  for (std::size_t i = 0; i < n_out; ++i) {
    out.samples[i] = w.samples[i * k];
    std::uint8_t ok = 1;
    for (std::size_t j = 0; j < k; ++j) ok &= w.quality_mask[i * k + j];
    out.quality_mask[i] = ok;
  }
  return out;
}

Segment Normalize(const Segment& seg) {
  Segment out = seg;
  const std::size_t n = seg.samples.size();
  if (n == 0) {
    out.normalized = true;
    out.flat = true;
    return out;
  }
  double mean = 0.0;
  for (double v : seg.samples) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : seg.samples) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n));
  out.normalized = true;
  if (sd < 1e-8) {
    std::fill(out.samples.begin(), out.samples.end(), 0.0);
    out.flat = true;
    out.mean = mean;
    out.sd = 0.0;
    return out;
  }
  for (double& v : out.samples) v = (v - mean) / sd;
  out.flat = false;
  // Compose with any earlier normalization so Denormalize stays exact.
  out.mean = seg.normalized ? seg.mean + seg.sd * mean : mean;
  out.sd = seg.normalized ? seg.sd * sd : sd;
  return out;
}

std::vector<Segment> Segmentize(const Waveform& w, const std::string& record_id,
                                double len_s, double stride_s) {
  w.Validate();
  const std::size_t len = WholeSamples(len_s, w.sample_rate_hz, "segment length");
  const std::size_t stride =
      WholeSamples(stride_s, w.sample_rate_hz, "segment stride");
  std::vector<Segment> out;
  for (std::size_t start = 0; start + len <= w.size(); start += stride) {
    const auto mask_begin = w.quality_mask.begin() + static_cast<long>(start);
    if (!std::all_of(mask_begin, mask_begin + static_cast<long>(len),
                     [](std::uint8_t m) { return m != 0; }))
      continue;
    Segment seg;
    seg.source_record_id = record_id;
    seg.start_s = static_cast<double>(start) / w.sample_rate_hz;
    seg.duration_s = static_cast<double>(len) / w.sample_rate_hz;
    seg.sample_rate_hz = w.sample_rate_hz;
    seg.samples.assign(w.samples.begin() + static_cast<long>(start),
                       w.samples.begin() + static_cast<long>(start + len));
    out.push_back(std::move(seg));
  }
  return out;
}

void Validate(const PreprocessConfig& cfg) {
  Require(cfg.band_low_hz > 0.0 && cfg.band_low_hz < cfg.band_high_hz,
          "dsp.band_low_hz must be positive and below dsp.band_high_hz",
          ErrorCode::kConfig);
  Require(cfg.band_high_hz < cfg.pipeline_rate_hz / 2,
          "dsp.band_high_hz must be below half of dsp.pipeline_rate_hz",
          ErrorCode::kConfig);
  Require(cfg.settle_s >= 0.0, "dsp.settle_s must be non-negative",
          ErrorCode::kConfig);
  const double n = cfg.segment_len_s * cfg.pipeline_rate_hz;
  Require(n >= 1.0 && std::abs(n - std::round(n)) < 1e-9,
          "dsp.segment_len_s * dsp.pipeline_rate_hz must be integral",
          ErrorCode::kConfig);
}

Waveform Preprocess(const Waveform& raw, const PreprocessConfig& cfg) {
  Waveform filtered = Bandpass(raw, cfg.band_low_hz, cfg.band_high_hz);
  const auto settle = std::min<std::size_t>(
      filtered.size(),
      static_cast<std::size_t>(std::ceil(cfg.settle_s * raw.sample_rate_hz)));
  std::fill_n(filtered.quality_mask.begin(), settle, std::uint8_t{0});
  return Downsample(filtered, cfg.pipeline_rate_hz);
}

bool IsPowerOfTwo(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void FftInPlace(std::vector<std::complex<double>>& data) {
  const std::size_t n = data.size();
  Require(IsPowerOfTwo(n), "FFT length must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::size_t half = len / 2;
    for (std::size_t k = 0; k < half; ++k) {
      // Twiddles evaluated directly rather than by recurrence to keep the
      // error at machine precision for long transforms.
      const std::complex<double> tw =
          std::polar(1.0, angle * static_cast<double>(k));
      for (std::size_t i = k; i < n; i += len) {
        const std::complex<double> u = data[i];
        const std::complex<double> v = data[i + half] * tw;
        data[i] = u + v;
        data[i + half] = u - v;
      }
    }
  }
}

std::vector<std::complex<double>> Fft(std::span<const double> samples) {
  std::vector<std::complex<double>> data(samples.begin(), samples.end());
  FftInPlace(data);
  return data;
}

std::vector<double> FftMagnitude(std::span<const double> samples) {
  Require(samples.size() >= 8 && IsPowerOfTwo(samples.size()),
          "fft_magnitude needs a power-of-two length >= 8");
  const auto spectrum = Fft(samples);
  std::vector<double> mag(samples.size() / 2 + 1);
  for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::abs(spectrum[k]);
  return mag;
}

}  // namespace pulseguard::dsp

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

#ifndef PULSEGUARD_DSP_HPP_
#define PULSEGUARD_DSP_HPP_

#include <complex>
#include <filesystem>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pulseguard::dsp {

// Uniformly sampled signal. quality_mask[i] == 1 marks a usable sample.
struct Waveform {
  double sample_rate_hz = 0.0;
  std::vector<double> samples;
  std::vector<std::uint8_t> quality_mask;

  std::size_t size() const { return samples.size(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
  // Throws kInvalidArgument when the invariants do not hold.
  void Validate() const;
};

Waveform MakeWaveform(double sample_rate_hz, std::vector<double> samples);

// Fixed-length window of a waveform; the autoencoder's unit of work.
struct Segment {
  std::string source_record_id;
  double start_s = 0.0;
  double duration_s = 8.0;
  double sample_rate_hz = 32.0;
  std::vector<double> samples;
  bool normalized = false;
  bool flat = false;
  // Offset and scale removed by Normalize().
  double mean = 0.0;
  double sd = 1.0;
};

// Second-order section, direct form II transposed.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;

  static Biquad ButterworthLowpass(double cutoff_hz, double rate_hz);
  static Biquad ButterworthHighpass(double cutoff_hz, double rate_hz);

  // |H(e^{j w})| at the given frequency.
  double Magnitude(double freq_hz, double rate_hz) const;
};

// Runs the section causally over x starting from zero state.
std::vector<double> FilterDf2t(const Biquad& q, std::span<const double> x);

Waveform Bandpass(const Waveform& w, double low_hz, double high_hz);
Waveform Downsample(const Waveform& w, double target_hz);

Segment Normalize(const Segment& seg);

std::vector<Segment> Segmentize(const Waveform& w, const std::string& record_id,
                                double len_s = 8.0, double stride_s = 8.0);

struct PreprocessConfig {
  double band_low_hz = 0.4;
  double band_high_hz = 8.0;
  double pipeline_rate_hz = 32.0;
  // Leading filter transient marked unusable.
  double settle_s = 5.0;
  double segment_len_s = 8.0;
};

void Validate(const PreprocessConfig& cfg);

// Bandpass, settling exclusion, downsampling.
Waveform Preprocess(const Waveform& raw, const PreprocessConfig& cfg);

bool IsPowerOfTwo(std::size_t n);

// In-place iterative radix-2 decimation-in-time FFT. Length must be a power
// of two.
void FftInPlace(std::vector<std::complex<double>>& data);

std::vector<std::complex<double>> Fft(std::span<const double> samples);

// |X_k| for k = 0..N/2. N must be a power of two >= 8.
std::vector<double> FftMagnitude(std::span<const double> samples);

// Segment corpus file: one JSON object per line,
// {"record_id", "start_s", "samples": [...]}. Samples are stored normalized.
std::string SegmentsJsonl(std::span<const Segment> segments);
std::vector<Segment> ParseSegmentsJsonl(const std::string& text,
                                        double sample_rate_hz);

}  // namespace pulseguard::dsp

#endif  // PULSEGUARD_DSP_HPP_

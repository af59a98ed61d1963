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

#ifndef PULSEGUARD_SCREEN_HPP_
#define PULSEGUARD_SCREEN_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pulseguard/dsp.hpp"
#include "pulseguard/synth.hpp"

namespace pulseguard::screen {

struct SpectralFeatures {
  double dominant_freq_hz = 0.0;
  // (peak bin +-1 power) / total non-DC power.
  double dominant_power_fraction = 0.0;
  // Power around twice the dominant frequency over power at the dominant.
  double harmonic_ratio = 0.0;
  // Normalized Shannon entropy of the non-DC power distribution, in [0, 1].
  double spectral_entropy = 0.0;
};

struct Thresholds {
  double pulse_low_hz = 0.583;
  double pulse_high_hz = 3.0;
  double min_power_fraction = 0.38;
  double max_entropy = 0.51;
};

// Segment must be normalized, non-flat, power-of-two length.
SpectralFeatures ComputeSpectralFeatures(const dsp::Segment& seg,
                                         const Thresholds& thresholds = {});

bool IsClean(const SpectralFeatures& f, const Thresholds& thresholds = {});
bool IsClean(const dsp::Segment& seg, const Thresholds& thresholds = {});

struct CorpusConfig {
  Thresholds thresholds;
  dsp::PreprocessConfig preprocess;
  double val_fraction = 0.1;
  std::size_t min_segments = 1000;
  std::uint64_t seed = 1;

  void Validate() const;
};

struct CorpusManifest {
  Thresholds thresholds;
  std::size_t n_candidates = 0;
  std::size_t n_rejected = 0;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::uint64_t seed = 0;
  double pipeline_rate_hz = 32.0;
  double segment_len_s = 8.0;
  std::string config_hash;
};

struct Corpus {
  std::vector<dsp::Segment> train;
  std::vector<dsp::Segment> val;
  CorpusManifest manifest;
};

// Preprocessed, normalized, non-flat segments of one record, in time order.
std::vector<dsp::Segment> CandidateSegments(const synth::LabeledRecord& record,
                                            const dsp::PreprocessConfig& pre);

// Labels in the records are never consulted.
Corpus BuildTrainingCorpus(std::span<const synth::LabeledRecord> records,
                           const CorpusConfig& cfg);

void WriteCorpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus ReadCorpus(const std::filesystem::path& dir);

}  // namespace pulseguard::screen

#endif  // PULSEGUARD_SCREEN_HPP_

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

#ifndef PULSEGUARD_SYNTH_HPP_
#define PULSEGUARD_SYNTH_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pulseguard/dsp.hpp"

namespace pulseguard::synth {

// Physiological clamp on every inter-beat interval, in seconds.
inline constexpr double kMinIbiS = 60.0 / 220.0;
inline constexpr double kMaxIbiS = 60.0 / 20.0;

enum class BeatKind { kSinus, kPvc, kAf };

const char* ToString(BeatKind kind);
BeatKind BeatKindFromString(const std::string& s);

struct BeatSchedule {
  std::vector<double> onsets;
  std::vector<BeatKind> kinds;
  std::vector<double> amplitudes;
  // intervals[k] is the time from onsets[k] to the next onset, including
  // one that falls past the end of the record.
  std::vector<double> intervals;

  std::size_t size() const { return onsets.size(); }
  void Validate() const;
};

struct SynthConfig {
  double duration_s = 300.0;
  double base_hr_bpm = 75.0;
  double hrv_sigma = 0.02;
  double resp_rate_hz = 0.25;
  double resp_mod_depth = 0.1;
  double noise_sigma = 0.01;
  double pvc_rate_per_min = 0.0;
  double af_episode_rate_per_hour = 0.0;
  double af_episode_len_s = 30.0;
  double native_rate_hz = 128.0;
  std::uint64_t seed = 1;

  // Throws ErrorCode::kConfig naming the offending field.
  void Validate() const;
};

// Extra controls used by tests to place events deterministically.
struct ScheduleOverrides {
  // Indices of sinus beats after which a PVC is inserted, in addition to
  // the Poisson events.
  std::vector<std::size_t> pvc_after_beats;
};

BeatSchedule BuildBeatSchedule(const SynthConfig& cfg, std::uint64_t rng_seed,
                               const ScheduleOverrides& overrides = {});

// Peak of the two-bump template before scaling; rendered beats are divided
// by it so a beat's maximum equals its amplitude scale.
double BeatTemplatePeak();

// Unscaled template value at beat-local time u (seconds) for interval ibi.
double BeatTemplate(double u, double ibi);

dsp::Waveform RenderWaveform(const BeatSchedule& schedule,
                             const SynthConfig& cfg);

struct AnomalyInterval {
  double start_s = 0.0;
  double end_s = 0.0;
  BeatKind kind = BeatKind::kPvc;
};

struct GsMinute {
  std::int64_t minute_index = 0;
  int pvc_count = 0;
};

struct LabeledRecord {
  std::string record_id;
  std::string population;
  SynthConfig config;
  BeatSchedule schedule;
  dsp::Waveform waveform;
  std::vector<AnomalyInterval> anomaly_intervals;
  std::vector<GsMinute> gs_minutes;
};

LabeledRecord SynthesizeRecord(const SynthConfig& cfg,
                               const std::string& record_id = "record",
                               const ScheduleOverrides& overrides = {});

std::vector<AnomalyInterval> AnomalyIntervalsFor(const BeatSchedule& schedule,
                                                 double duration_s);
std::vector<GsMinute> GsMinutesFor(const BeatSchedule& schedule,
                                   double duration_s);

// record.json + waveform.csv under dir.
void WriteRecord(const LabeledRecord& record, const std::filesystem::path& dir);
LabeledRecord ReadRecord(const std::filesystem::path& dir);

std::string WaveformCsv(const dsp::Waveform& w);

}  // namespace pulseguard::synth

#endif  // PULSEGUARD_SYNTH_HPP_

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

#ifndef PULSEGUARD_DETECTOR_HPP_
#define PULSEGUARD_DETECTOR_HPP_

#include <span>
#include <string>
#include <vector>

#include "pulseguard/dsp.hpp"
#include "pulseguard/nnet.hpp"

namespace pulseguard::detector {

struct DetectorConfig {
  double window_len_s = 0.5;
  double stride_s = 0.25;
  double threshold = 0.6;

  void Validate() const;
};

struct TracePoint {
  double start_s = 0.0;
  double value = 0.0;
};

// Windowed statistic between a segment and its reconstruction. For the
// correlation trace each value is Pearson's r.
struct Trace {
  double window_len_s = 0.5;
  double stride_s = 0.25;
  std::vector<TracePoint> points;
};

struct AnomalyRegion {
  double start_s = 0.0;
  double end_s = 0.0;
  double min_r = 1.0;
  std::string source_record_id;
};

// Pearson's r. Both standard deviations below 1e-8 gives 1.0; exactly one
// gives 0.0.
double PearsonR(std::span<const double> x, std::span<const double> y);

Trace CorrelationTrace(std::span<const double> seg, std::span<const double> recon,
                       double sample_rate_hz, double window_len_s = 0.5,
                       double stride_s = 0.25);

// Windowed mean absolute error. Reported for comparison only.
Trace AbsErrorTrace(std::span<const double> seg, std::span<const double> recon,
                    double sample_rate_hz, double window_len_s = 0.5,
                    double stride_s = 0.25);

// Windows with r < threshold, merged when the gap between them is at most
// one stride. Times are relative to the trace.
std::vector<AnomalyRegion> FlagRegions(const Trace& trace, double threshold = 0.6,
                                       const std::string& record_id = {});

// Merges sorted regions whose gap is at most max_gap_s.
std::vector<AnomalyRegion> MergeRegions(std::vector<AnomalyRegion> regions,
                                        double max_gap_s);

struct SegmentResult {
  double start_s = 0.0;
  double duration_s = 0.0;
  bool flagged = false;
  double min_r = 1.0;
};

struct Detection {
  std::string record_id;
  std::vector<AnomalyRegion> regions;
  // Usable (covered) segments in time order.
  std::vector<SegmentResult> segments;
  bool no_coverage = true;

  double CoveredSeconds() const;
  double AnomalousSeconds() const;
};

// Per-segment detail kept for plotting.
struct SegmentDetail {
  dsp::Segment segment;
  std::vector<double> reconstruction;
  Trace trace;
  std::vector<AnomalyRegion> regions;
};

// Segments are reconstructed in chunks of this many, in time order.
inline constexpr std::size_t kDetectChunk = 16;

// waveform must already be preprocessed to the model's pipeline rate.
Detection Detect(const nnet::ModelParams& model, const dsp::Waveform& waveform,
                 const DetectorConfig& cfg, const std::string& record_id,
                 std::vector<SegmentDetail>* details = nullptr);

std::string RegionsJsonl(const Detection& d);
std::vector<AnomalyRegion> ParseRegionsJsonl(const std::string& text);

// Input and reconstruction on top, r-trace below, flagged regions shaded.
std::string SegmentSvg(const SegmentDetail& detail, double threshold);

}  // namespace pulseguard::detector

#endif  // PULSEGUARD_DETECTOR_HPP_

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

#ifndef PULSEGUARD_EVAL_HPP_
#define PULSEGUARD_EVAL_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pulseguard/detector.hpp"
#include "pulseguard/synth.hpp"

namespace pulseguard::eval {

struct Interval {
  double start_s = 0.0;
  double end_s = 0.0;
};

std::vector<Interval> CoverageOf(const detector::Detection& d);

struct MinuteObservation {
  std::string record_id;
  std::int64_t minute_index = 0;
  int pvc_count = 0;
  double covered_s = 0.0;
  double anomalous_s = 0.0;
  bool anomaly_flag = false;
};

struct AlignConfig {
  double min_coverage_s = 30.0;
  double min_anomaly_s = 0.5;

  void Validate() const;
};

// Minutes with less than min_coverage_s of coverage are left out. Regions
// straddling a minute boundary contribute their duration to each side.
std::vector<MinuteObservation> MinuteAlign(const std::string& record_id,
                                           std::span<const detector::AnomalyRegion> regions,
                                           std::span<const Interval> coverage,
                                           std::span<const synth::GsMinute> gs,
                                           const AlignConfig& cfg = {});

struct ConfusionMatrix {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;

  std::int64_t total() const { return tp + fp + fn + tn; }
  // Undefined (nullopt) when the corresponding GS class is empty.
  std::optional<double> tpr() const;
  std::optional<double> fnr() const;
  std::optional<double> fpr() const;
  std::optional<double> tnr() const;
};

ConfusionMatrix Confusion(std::span<const MinuteObservation> obs, int min_pvc = 1);

struct Prevalence {
  std::int64_t n_minutes = 0;
  std::int64_t n_zero = 0;
  // (k, minutes with >= k PVCs)
  std::vector<std::pair<int, std::int64_t>> at_least;
};

struct SweepReport {
  std::vector<std::pair<int, ConfusionMatrix>> per_min_pvc;
  Prevalence prevalence;
};

SweepReport ConfusionSweep(std::span<const MinuteObservation> obs,
                           std::span<const int> min_pvc_values);

struct PopulationStats {
  std::string label;
  std::vector<std::string> record_ids;
  std::vector<double> fractions;
  double avg = 0.0;
  double sd = 0.0;
  double max = 0.0;
};

// Fraction of usable 8 s segments containing at least one region.
double AnomalyFraction(const detector::Detection& d);

PopulationStats ComputePopulationStats(const std::string& label,
                                       std::span<const std::string> record_ids,
                                       std::span<const double> fractions);

// "1,891"
std::string GroupThousands(std::int64_t n);
// One decimal place, e.g. "59.7%". Undefined rates render as "n/a".
std::string Percent1(std::optional<double> rate);

std::string ConfusionTable(const ConfusionMatrix& cm, int min_pvc);
std::string PrevalenceLines(const Prevalence& p);
// "avg (±sd) | max" rows, e.g. "5.10% (±5.0%) | 17.4%".
std::string PopulationTable(std::span<const PopulationStats> stats);

nlohmann::json ConfusionJson(const ConfusionMatrix& cm);
nlohmann::json SweepJson(const SweepReport& report);
nlohmann::json PopulationJson(std::span<const PopulationStats> stats);

// GS CSV with header record_id,minute_index,pvc_count.
struct GsRow {
  std::string record_id;
  std::int64_t minute_index = 0;
  int pvc_count = 0;
};
std::string GsCsv(std::span<const GsRow> rows);
std::vector<GsRow> ParseGsCsv(const std::string& text);

}  // namespace pulseguard::eval

#endif  // PULSEGUARD_EVAL_HPP_

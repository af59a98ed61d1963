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

#ifndef PULSEGUARD_PIPELINE_HPP_
#define PULSEGUARD_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "pulseguard/detector.hpp"
#include "pulseguard/dsp.hpp"
#include "pulseguard/eval.hpp"
#include "pulseguard/nnet.hpp"
#include "pulseguard/screen.hpp"
#include "pulseguard/synth.hpp"

namespace pulseguard::pipeline {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

// A group of synthetic records sharing parameter ranges. Each record draws
// its parameters uniformly from the ranges.
struct PopulationSpec {
  std::string label = "default";
  std::size_t n_records = 10;
  double duration_s = 300.0;
  Range base_hr_bpm{55.0, 95.0};
  Range hrv_sigma{0.01, 0.03};
  Range resp_rate_hz{0.2, 0.33};
  Range resp_mod_depth{0.05, 0.15};
  Range noise_sigma{0.005, 0.015};
  Range pvc_rate_per_min{0.0, 0.0};
  double af_episode_rate_per_hour = 0.0;
  double af_episode_len_s = 30.0;
  double native_rate_hz = 128.0;
};

struct PipelineConfig {
  std::uint64_t seed = 20180819;
  std::vector<PopulationSpec> populations{PopulationSpec{}};
  // Populations whose records feed build-corpus; empty means all.
  std::vector<std::string> corpus_populations;
  // Populations processed by detect; empty means all.
  std::vector<std::string> detect_populations;
  dsp::PreprocessConfig dsp;
  screen::Thresholds screen;
  double val_fraction = 0.1;
  std::size_t min_segments = 1000;
  nnet::Architecture model;
  nnet::TrainConfig train;
  detector::DetectorConfig detector;
  eval::AlignConfig eval;
  std::vector<int> min_pvc{1, 2};

  void Validate() const;
};

PipelineConfig ConfigFromJson(const nlohmann::json& j);
nlohmann::json ConfigToJson(const PipelineConfig& cfg);
PipelineConfig LoadConfig(const std::filesystem::path& path);
std::string ConfigHash(const PipelineConfig& cfg);

struct RecordPlan {
  std::string record_id;
  std::string population;
  synth::SynthConfig config;
};

// Deterministic per-record parameters derived from the global seed.
std::vector<RecordPlan> PlanRecords(const PipelineConfig& cfg);

synth::LabeledRecord GenerateRecord(const RecordPlan& plan);

struct SynthSummary {
  std::size_t n_records = 0;
  std::size_t n_pvc = 0;
  std::size_t n_af_episodes = 0;
};

// Writes <out>/<record_id>/{record.json,waveform.csv}, <out>/manifest.json and
// <out>/gs.csv.
SynthSummary RunSynth(const PipelineConfig& cfg, const std::filesystem::path& out_dir);

struct RecordEntry {
  std::string record_id;
  std::string population;
};
std::vector<RecordEntry> ListRecords(const std::filesystem::path& records_dir);

screen::Corpus RunBuildCorpus(const PipelineConfig& cfg, const std::filesystem::path& records_dir,
                              const std::filesystem::path& out_dir);

nnet::TrainResult RunTrain(const PipelineConfig& cfg, const std::filesystem::path& corpus_dir,
                           const std::filesystem::path& model_out,
                           const std::filesystem::path& history_out);

std::string HistoryCsv(const std::vector<nnet::EpochStats>& history);

struct RecordDetection {
  std::string population;
  detector::Detection detection;
};

// Runs the detector over a preprocessed record.
detector::Detection DetectRecord(const PipelineConfig& cfg, const nnet::ModelParams& model,
                                 const synth::LabeledRecord& record,
                                 std::vector<detector::SegmentDetail>* details = nullptr);

struct DetectSummary {
  std::size_t n_records = 0;
  std::size_t n_regions = 0;
  std::size_t n_no_coverage = 0;
};

// Writes <out>/<record_id>.regions.jsonl, <out>/detections.json and, with
// plot set, <out>/plots/*.svg for segments holding a region.
DetectSummary RunDetect(const PipelineConfig& cfg, const nnet::ModelParams& model,
                        const std::filesystem::path& records_dir,
                        const std::filesystem::path& out_dir, bool plot);

nlohmann::json DetectionsJson(const std::string& config_hash,
                              const std::vector<RecordDetection>& dets);
std::vector<RecordDetection> ReadDetections(const std::filesystem::path& detections_dir);

struct EvalResult {
  eval::SweepReport sweep;
  std::vector<eval::PopulationStats> populations;
  std::size_t n_excluded_minutes = 0;
  nlohmann::json json;
  std::string text;
};

EvalResult Evaluate(const PipelineConfig& cfg, const std::vector<RecordDetection>& dets,
                    std::span<const eval::GsRow> gs);

// Writes <out>/report.json and <out>/report.txt.
EvalResult RunEval(const PipelineConfig& cfg, const std::filesystem::path& detections_dir,
                   const std::filesystem::path& gs_csv, const std::filesystem::path& out_dir);

struct ReportResult {
  nlohmann::json json;
  std::string text;
  bool hash_conflict = false;
};

ReportResult MergeReports(const std::vector<std::filesystem::path>& eval_dirs);
ReportResult RunReport(const std::vector<std::filesystem::path>& eval_dirs,
                       const std::filesystem::path& out_dir);

}  // namespace pulseguard::pipeline

#endif  // PULSEGUARD_PIPELINE_HPP_

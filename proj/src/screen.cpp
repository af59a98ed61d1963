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

#include "pulseguard/screen.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "json.hpp"
#include "pulseguard/error.hpp"
#include "pulseguard/io.hpp"

namespace pulseguard::screen {

namespace {

double BinPower(const std::vector<double>& power, long k) {
  if (k < 1 || k >= static_cast<long>(power.size())) return 0.0;
  return power[static_cast<std::size_t>(k)];
}

}  // namespace

SpectralFeatures ComputeSpectralFeatures(const dsp::Segment& seg,
                                         const Thresholds& thresholds) {
  Require(seg.normalized, "spectral features need a normalized segment");
  Require(!seg.flat, "flat segments cannot be screened", ErrorCode::kData);
  const auto mag = dsp::FftMagnitude(seg.samples);
  const std::size_t n = seg.samples.size();
  const double bin_hz = seg.sample_rate_hz / static_cast<double>(n);

  std::vector<double> power(mag.size());
  double total = 0.0;
  for (std::size_t k = 1; k < mag.size(); ++k) {
    power[k] = mag[k] * mag[k];
    total += power[k];
  }
  Require(total > 0.0, "segment has no non-DC power", ErrorCode::kData);

  // Local maxima in the pulse band, ranked by peak-bin +-1 power.
  auto near = [&](long k) {
    return BinPower(power, k - 1) + BinPower(power, k) + BinPower(power, k + 1);
  };
  long dominant = -1;
  long fallback = -1;
  for (std::size_t k = 1; k < mag.size(); ++k) {
    const double f = static_cast<double>(k) * bin_hz;
    if (f < thresholds.pulse_low_hz || f > thresholds.pulse_high_hz) continue;
    const auto kk = static_cast<long>(k);
    if (fallback < 0 || power[k] > power[static_cast<std::size_t>(fallback)]) fallback = kk;
    const bool local = power[k] >= BinPower(power, kk - 1) && power[k] >= BinPower(power, kk + 1);
    if (local && (dominant < 0 || near(kk) > near(dominant))) dominant = kk;
  }
  if (dominant < 0) dominant = fallback;
  Require(dominant > 0, "pulse band holds no FFT bin");

  SpectralFeatures f;
  f.dominant_freq_hz = static_cast<double>(dominant) * bin_hz;
  const double peak = near(dominant);
  f.dominant_power_fraction = std::min(1.0, peak / total);
  const long h = 2 * dominant;
  const double harmonic =
      BinPower(power, h - 1) + BinPower(power, h) + BinPower(power, h + 1);
  f.harmonic_ratio = peak > 0.0 ? harmonic / peak : 0.0;

  double entropy = 0.0;
  for (std::size_t k = 1; k < power.size(); ++k) {
    const double p = power[k] / total;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  f.spectral_entropy =
      std::clamp(entropy / std::log(static_cast<double>(power.size() - 1)), 0.0, 1.0);
  return f;
}

bool IsClean(const SpectralFeatures& f, const Thresholds& t) {
  return f.dominant_freq_hz >= t.pulse_low_hz &&
         f.dominant_freq_hz <= t.pulse_high_hz &&
         f.dominant_power_fraction >= t.min_power_fraction &&
         f.spectral_entropy <= t.max_entropy;
}

bool IsClean(const dsp::Segment& seg, const Thresholds& t) {
  return IsClean(ComputeSpectralFeatures(seg, t), t);
}

void CorpusConfig::Validate() const {
  dsp::Validate(preprocess);
  Require(thresholds.pulse_low_hz > 0 && thresholds.pulse_low_hz < thresholds.pulse_high_hz,
          "screen pulse band must satisfy 0 < low < high", ErrorCode::kConfig);
  Require(thresholds.min_power_fraction >= 0 && thresholds.min_power_fraction <= 1,
          "screen.min_power_fraction must lie in [0, 1]", ErrorCode::kConfig);
  Require(thresholds.max_entropy >= 0 && thresholds.max_entropy <= 1,
          "screen.max_entropy must lie in [0, 1]", ErrorCode::kConfig);
  Require(val_fraction > 0 && val_fraction < 1,
          "screen.val_fraction must lie in (0, 1)", ErrorCode::kConfig);
}

std::vector<dsp::Segment> CandidateSegments(const synth::LabeledRecord& record,
                                            const dsp::PreprocessConfig& pre) {
  const auto w = dsp::Preprocess(record.waveform, pre);
  std::vector<dsp::Segment> out;
  for (auto& seg : dsp::Segmentize(w, record.record_id, pre.segment_len_s,
                                   pre.segment_len_s)) {
    auto norm = dsp::Normalize(seg);
    if (!norm.flat) out.push_back(std::move(norm));
  }
  return out;
}

Corpus BuildTrainingCorpus(std::span<const synth::LabeledRecord> records,
                           const CorpusConfig& cfg) {
  cfg.Validate();
  Require(!records.empty(),
          "training corpus has no records; screen.min_segments requires " +
              std::to_string(cfg.min_segments),
          ErrorCode::kInsufficientData);

  std::vector<std::vector<dsp::Segment>> per_record(records.size());
  std::vector<std::size_t> candidates(records.size(), 0);
  io::ParallelFor(records.size(), [&](std::size_t r) {
    auto segs = CandidateSegments(records[r], cfg.preprocess);
    candidates[r] = segs.size();
    for (auto& seg : segs)
      if (IsClean(seg, cfg.thresholds)) per_record[r].push_back(std::move(seg));
  });

  std::vector<dsp::Segment> clean;
  std::size_t n_candidates = 0;
  for (std::size_t r = 0; r < records.size(); ++r) {
    n_candidates += candidates[r];
    for (auto& seg : per_record[r]) clean.push_back(std::move(seg));
  }
  Require(clean.size() >= cfg.min_segments,
          "only " + std::to_string(clean.size()) +
              " clean segments; screen.min_segments requires " +
              std::to_string(cfg.min_segments),
          ErrorCode::kInsufficientData);

  std::mt19937_64 rng(cfg.seed);
  std::shuffle(clean.begin(), clean.end(), rng);

  const auto n_val = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(cfg.val_fraction * static_cast<double>(clean.size()))));
  Require(n_val < clean.size(), "corpus too small to split",
          ErrorCode::kInsufficientData);

  Corpus corpus;
  corpus.val.assign(std::make_move_iterator(clean.end() - static_cast<long>(n_val)),
                    std::make_move_iterator(clean.end()));
  clean.resize(clean.size() - n_val);
  corpus.train = std::move(clean);
  corpus.manifest = {cfg.thresholds,
                     n_candidates,
                     n_candidates - corpus.train.size() - corpus.val.size(),
                     corpus.train.size(),
                     corpus.val.size(),
                     cfg.seed,
                     cfg.preprocess.pipeline_rate_hz,
                     cfg.preprocess.segment_len_s,
                     {}};
  return corpus;
}

void WriteCorpus(const Corpus& corpus, const std::filesystem::path& dir) {
  const auto& m = corpus.manifest;
  const nlohmann::json manifest = {
      {"thresholds",
       {{"pulse_low_hz", m.thresholds.pulse_low_hz},
        {"pulse_high_hz", m.thresholds.pulse_high_hz},
        {"min_power_fraction", m.thresholds.min_power_fraction},
        {"max_entropy", m.thresholds.max_entropy}}},
      {"n_train", m.n_train},
      {"n_val", m.n_val},
      {"n_candidates", m.n_candidates},
      {"n_rejected", m.n_rejected},
      {"seed", m.seed},
      {"pipeline_rate_hz", m.pipeline_rate_hz},
      {"segment_len_s", m.segment_len_s},
      {"config_hash", m.config_hash}};
  io::WriteText(dir / "manifest.json", manifest.dump(2) + "\n");
  io::WriteText(dir / "train.jsonl", dsp::SegmentsJsonl(corpus.train));
  io::WriteText(dir / "val.jsonl", dsp::SegmentsJsonl(corpus.val));
}

Corpus ReadCorpus(const std::filesystem::path& dir) {
  const auto j = io::ReadJson(dir / "manifest.json", ErrorCode::kData);
  Corpus c;
  try {
    const auto& t = j.at("thresholds");
    c.manifest.thresholds = {t.at("pulse_low_hz").get<double>(), t.at("pulse_high_hz").get<double>(),
                             t.at("min_power_fraction").get<double>(), t.at("max_entropy").get<double>()};
    c.manifest.n_train = j.at("n_train").get<std::size_t>();
    c.manifest.n_val = j.at("n_val").get<std::size_t>();
    c.manifest.n_candidates = j.value("n_candidates", std::size_t{0});
    c.manifest.n_rejected = j.value("n_rejected", std::size_t{0});
    c.manifest.seed = j.at("seed").get<std::uint64_t>();
    c.manifest.pipeline_rate_hz = j.at("pipeline_rate_hz").get<double>();
    c.manifest.segment_len_s = j.at("segment_len_s").get<double>();
    c.manifest.config_hash = j.value("config_hash", std::string{});
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kData, (dir / "manifest.json").string() + ": " + e.what());
  }
  c.train = dsp::ParseSegmentsJsonl(io::ReadText(dir / "train.jsonl"), c.manifest.pipeline_rate_hz);
  c.val = dsp::ParseSegmentsJsonl(io::ReadText(dir / "val.jsonl"), c.manifest.pipeline_rate_hz);
  Require(c.train.size() == c.manifest.n_train && c.val.size() == c.manifest.n_val,
          "corpus segment counts disagree with manifest", ErrorCode::kData);
  return c;
}

}  // namespace pulseguard::screen

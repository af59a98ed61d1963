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

#include "pulseguard/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "pulseguard/error.hpp"
#include "pulseguard/io.hpp"

namespace pulseguard::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Reads fields from a JSON object, falling back to defaults, and rejects
// keys nobody asked for.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    Require(j_.is_object(), path_ + " must be a JSON object", ErrorCode::kConfig);
  }

  template <class T>
  void Get(const char* key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      Fail(ErrorCode::kConfig, Name(key) + " has the wrong type");
    }
  }

  void GetRange(const char* key, Range& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    if (v.is_number()) {
      out.lo = out.hi = v.get<double>();
    } else if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
      out.lo = v[0].get<double>();
      out.hi = v[1].get<double>();
    } else {
      Fail(ErrorCode::kConfig, Name(key) + " must be a number or a [lo, hi] pair");
    }
  }

  const json* Child(const char* key) {
    used_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string Name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void RejectUnknown() const {
    for (const auto& [key, value] : j_.items()) {
      Require(used_.count(key) > 0, "unknown config key " + Name(key.c_str()), ErrorCode::kConfig);
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

json RangeJson(const Range& r) { return json::array({r.lo, r.hi}); }

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool Selected(const std::vector<std::string>& wanted, const std::string& population) {
  return wanted.empty() || std::find(wanted.begin(), wanted.end(), population) != wanted.end();
}

void EnsureDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  Require(!ec && fs::is_directory(dir), "cannot create directory " + dir.string(), ErrorCode::kIo);
}

std::string SafeFileName(const std::string& id) {
  std::string s = id;
  for (char& c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  return s;
}

}  // namespace

void PipelineConfig::Validate() const {
  Require(!populations.empty(), "populations must list at least one population", ErrorCode::kConfig);
  std::set<std::string> labels;
  for (std::size_t i = 0; i < populations.size(); ++i) {
    const auto& p = populations[i];
    const std::string where = "populations[" + std::to_string(i) + "] ('" + p.label + "')";
    Require(!p.label.empty(), where + ".label must be non-empty", ErrorCode::kConfig);
    Require(labels.insert(p.label).second, where + ".label is duplicated", ErrorCode::kConfig);
    Require(p.n_records > 0, where + ".n_records must be positive", ErrorCode::kConfig);
    for (const auto& [name, r] : {std::pair{"base_hr_bpm", p.base_hr_bpm}, {"hrv_sigma", p.hrv_sigma},
                                  {"resp_rate_hz", p.resp_rate_hz}, {"resp_mod_depth", p.resp_mod_depth},
                                  {"noise_sigma", p.noise_sigma}, {"pvc_rate_per_min", p.pvc_rate_per_min}}) {
      Require(r.lo <= r.hi, where + "." + name + " range has lo > hi", ErrorCode::kConfig);
    }
    for (bool high : {false, true}) {
      auto pick = [high](const Range& r) { return high ? r.hi : r.lo; };
      synth::SynthConfig sc;
      sc.duration_s = p.duration_s;
      sc.base_hr_bpm = pick(p.base_hr_bpm);
      sc.hrv_sigma = pick(p.hrv_sigma);
      sc.resp_rate_hz = pick(p.resp_rate_hz);
      sc.resp_mod_depth = pick(p.resp_mod_depth);
      sc.noise_sigma = pick(p.noise_sigma);
      sc.pvc_rate_per_min = pick(p.pvc_rate_per_min);
      sc.af_episode_rate_per_hour = p.af_episode_rate_per_hour;
      sc.af_episode_len_s = p.af_episode_len_s;
      sc.native_rate_hz = p.native_rate_hz;
      try {
        sc.Validate();
      } catch (const Error& e) {
        Fail(ErrorCode::kConfig, where + ": " + e.what());
      }
    }
  }
  dsp::Validate(dsp);
  screen::CorpusConfig cc{screen, dsp, val_fraction, min_segments, seed};
  cc.Validate();
  model.Validate();
  Require(std::abs(dsp.segment_len_s * dsp.pipeline_rate_hz - model.seq_len) < 1e-9,
          "model.seq_len must equal dsp.segment_len_s * dsp.pipeline_rate_hz", ErrorCode::kConfig);
  train.Validate();
  detector.Validate();
  Require(detector.window_len_s <= dsp.segment_len_s,
          "detector.window_len_s must not exceed dsp.segment_len_s", ErrorCode::kConfig);
  eval.Validate();
  Require(!min_pvc.empty(), "eval.min_pvc must list at least one value", ErrorCode::kConfig);
  for (int k : min_pvc) Require(k >= 1, "eval.min_pvc values must be >= 1", ErrorCode::kConfig);
}

PipelineConfig ConfigFromJson(const json& j) {
  PipelineConfig c;
  Fields top(j, "");
  top.Get("seed", c.seed);
  if (const json* pops = top.Child("populations")) {
    Require(pops->is_array(), "populations must be an array", ErrorCode::kConfig);
    c.populations.clear();
    for (std::size_t i = 0; i < pops->size(); ++i) {
      PopulationSpec p;
      Fields f((*pops)[i], "populations[" + std::to_string(i) + "]");
      f.Get("label", p.label);
      f.Get("n_records", p.n_records);
      f.Get("duration_s", p.duration_s);
      f.GetRange("base_hr_bpm", p.base_hr_bpm);
      f.GetRange("hrv_sigma", p.hrv_sigma);
      f.GetRange("resp_rate_hz", p.resp_rate_hz);
      f.GetRange("resp_mod_depth", p.resp_mod_depth);
      f.GetRange("noise_sigma", p.noise_sigma);
      f.GetRange("pvc_rate_per_min", p.pvc_rate_per_min);
      f.Get("af_episode_rate_per_hour", p.af_episode_rate_per_hour);
      f.Get("af_episode_len_s", p.af_episode_len_s);
      f.Get("native_rate_hz", p.native_rate_hz);
      f.RejectUnknown();
      c.populations.push_back(std::move(p));
    }
  }
  top.Get("corpus_populations", c.corpus_populations);
  top.Get("detect_populations", c.detect_populations);
  if (const json* d = top.Child("dsp")) {
    Fields f(*d, "dsp");
    f.Get("band_low_hz", c.dsp.band_low_hz);
    f.Get("band_high_hz", c.dsp.band_high_hz);
    f.Get("pipeline_rate_hz", c.dsp.pipeline_rate_hz);
    f.Get("settle_s", c.dsp.settle_s);
    f.Get("segment_len_s", c.dsp.segment_len_s);
    f.RejectUnknown();
  }
  if (const json* s = top.Child("screen")) {
    Fields f(*s, "screen");
    f.Get("pulse_low_hz", c.screen.pulse_low_hz);
    f.Get("pulse_high_hz", c.screen.pulse_high_hz);
    f.Get("min_power_fraction", c.screen.min_power_fraction);
    f.Get("max_entropy", c.screen.max_entropy);
    f.Get("val_fraction", c.val_fraction);
    f.Get("min_segments", c.min_segments);
    f.RejectUnknown();
  }
  if (const json* m = top.Child("model")) {
    Fields f(*m, "model");
    f.Get("encoder_hidden", c.model.encoder_hidden);
    f.Get("decoder_hidden", c.model.decoder_hidden);
    f.Get("seq_len", c.model.seq_len);
    f.Get("reverse_output", c.model.reverse_output);
    f.RejectUnknown();
  }
  if (const json* t = top.Child("train")) {
    Fields f(*t, "train");
    f.Get("learning_rate", c.train.learning_rate);
    f.Get("batch_size", c.train.batch_size);
    f.Get("max_epochs", c.train.max_epochs);
    f.Get("patience", c.train.patience);
    f.Get("clip_norm", c.train.clip_norm);
    f.Get("seed", c.train.seed);
    f.Get("shard_size", c.train.shard_size);
    f.Get("lr_decay", c.train.lr_decay);
    f.Get("lr_patience", c.train.lr_patience);
    f.RejectUnknown();
  }
  if (const json* d = top.Child("detector")) {
    Fields f(*d, "detector");
    f.Get("window_len_s", c.detector.window_len_s);
    f.Get("stride_s", c.detector.stride_s);
    f.Get("threshold", c.detector.threshold);
    f.RejectUnknown();
  }
  if (const json* e = top.Child("eval")) {
    Fields f(*e, "eval");
    f.Get("min_coverage_s", c.eval.min_coverage_s);
    f.Get("min_anomaly_s", c.eval.min_anomaly_s);
    f.Get("min_pvc", c.min_pvc);
    f.RejectUnknown();
  }
  top.RejectUnknown();
  c.Validate();
  return c;
}

json ConfigToJson(const PipelineConfig& c) {
  json pops = json::array();
  for (const auto& p : c.populations) {
    pops.push_back({{"label", p.label},
                    {"n_records", p.n_records},
                    {"duration_s", p.duration_s},
                    {"base_hr_bpm", RangeJson(p.base_hr_bpm)},
                    {"hrv_sigma", RangeJson(p.hrv_sigma)},
                    {"resp_rate_hz", RangeJson(p.resp_rate_hz)},
                    {"resp_mod_depth", RangeJson(p.resp_mod_depth)},
                    {"noise_sigma", RangeJson(p.noise_sigma)},
                    {"pvc_rate_per_min", RangeJson(p.pvc_rate_per_min)},
                    {"af_episode_rate_per_hour", p.af_episode_rate_per_hour},
                    {"af_episode_len_s", p.af_episode_len_s},
                    {"native_rate_hz", p.native_rate_hz}});
  }
  return {{"seed", c.seed},
          {"populations", pops},
          {"corpus_populations", c.corpus_populations},
          {"detect_populations", c.detect_populations},
          {"dsp",
           {{"band_low_hz", c.dsp.band_low_hz},
            {"band_high_hz", c.dsp.band_high_hz},
            {"pipeline_rate_hz", c.dsp.pipeline_rate_hz},
            {"settle_s", c.dsp.settle_s},
            {"segment_len_s", c.dsp.segment_len_s}}},
          {"screen",
           {{"pulse_low_hz", c.screen.pulse_low_hz},
            {"pulse_high_hz", c.screen.pulse_high_hz},
            {"min_power_fraction", c.screen.min_power_fraction},
            {"max_entropy", c.screen.max_entropy},
            {"val_fraction", c.val_fraction},
            {"min_segments", c.min_segments}}},
          {"model",
           {{"encoder_hidden", c.model.encoder_hidden},
            {"decoder_hidden", c.model.decoder_hidden},
            {"seq_len", c.model.seq_len},
            {"reverse_output", c.model.reverse_output}}},
          {"train",
           {{"learning_rate", c.train.learning_rate},
            {"batch_size", c.train.batch_size},
            {"max_epochs", c.train.max_epochs},
            {"patience", c.train.patience},
            {"clip_norm", c.train.clip_norm},
            {"seed", c.train.seed},
            {"shard_size", c.train.shard_size},
            {"lr_decay", c.train.lr_decay},
            {"lr_patience", c.train.lr_patience}}},
          {"detector",
           {{"window_len_s", c.detector.window_len_s},
            {"stride_s", c.detector.stride_s},
            {"threshold", c.detector.threshold}}},
          {"eval",
           {{"min_coverage_s", c.eval.min_coverage_s},
            {"min_anomaly_s", c.eval.min_anomaly_s},
            {"min_pvc", c.min_pvc}}}};
}

PipelineConfig LoadConfig(const fs::path& path) {
  return ConfigFromJson(io::ReadJson(path, ErrorCode::kConfig));
}

std::string ConfigHash(const PipelineConfig& cfg) { return io::HashHex(ConfigToJson(cfg).dump()); }

std::vector<RecordPlan> PlanRecords(const PipelineConfig& cfg) {
  std::vector<RecordPlan> plans;
  for (std::size_t pi = 0; pi < cfg.populations.size(); ++pi) {
    const auto& p = cfg.populations[pi];
    for (std::size_t r = 0; r < p.n_records; ++r) {
      std::mt19937_64 rng(SplitMix64(cfg.seed ^ SplitMix64((pi << 32) ^ r)));
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      auto draw = [&](const Range& range) { return range.lo + (range.hi - range.lo) * unit(rng); };
      RecordPlan plan;
      char id[64];
      std::snprintf(id, sizeof(id), "%s-%04zu", p.label.c_str(), r);
      plan.record_id = id;
      plan.population = p.label;
      auto& sc = plan.config;
      sc.duration_s = p.duration_s;
      sc.base_hr_bpm = draw(p.base_hr_bpm);
      sc.hrv_sigma = draw(p.hrv_sigma);
      sc.resp_rate_hz = draw(p.resp_rate_hz);
      sc.resp_mod_depth = draw(p.resp_mod_depth);
      sc.noise_sigma = draw(p.noise_sigma);
      sc.pvc_rate_per_min = draw(p.pvc_rate_per_min);
      sc.af_episode_rate_per_hour = p.af_episode_rate_per_hour;
      sc.af_episode_len_s = p.af_episode_len_s;
      sc.native_rate_hz = p.native_rate_hz;
      sc.seed = rng();
      plans.push_back(std::move(plan));
    }
  }
  return plans;
}

synth::LabeledRecord GenerateRecord(const RecordPlan& plan) {
  auto rec = synth::SynthesizeRecord(plan.config, plan.record_id);
  rec.population = plan.population;
  return rec;
}

SynthSummary RunSynth(const PipelineConfig& cfg, const fs::path& out_dir) {
  cfg.Validate();
  EnsureDir(out_dir);
  const auto plans = PlanRecords(cfg);
  std::vector<std::size_t> n_pvc(plans.size(), 0), n_af(plans.size(), 0);
  std::vector<std::vector<synth::GsMinute>> gs(plans.size());
  io::ParallelFor(plans.size(), [&](std::size_t i) {
    const auto rec = GenerateRecord(plans[i]);
    synth::WriteRecord(rec, out_dir / plans[i].record_id);
    for (auto k : rec.schedule.kinds) n_pvc[i] += k == synth::BeatKind::kPvc ? 1 : 0;
    for (const auto& a : rec.anomaly_intervals) n_af[i] += a.kind == synth::BeatKind::kAf ? 1 : 0;
    gs[i] = rec.gs_minutes;
  });

  SynthSummary summary;
  json records = json::array();
  std::map<std::string, json> by_label;
  std::vector<eval::GsRow> gs_rows;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const auto& p = plans[i];
    records.push_back({{"record_id", p.record_id},
                       {"population", p.population},
                       {"seed", p.config.seed},
                       {"duration_s", p.config.duration_s},
                       {"base_hr_bpm", p.config.base_hr_bpm},
                       {"pvc_rate_per_min", p.config.pvc_rate_per_min},
                       {"n_pvc", n_pvc[i]},
                       {"n_af_episodes", n_af[i]}});
    auto& lab = by_label[p.population];
    if (lab.is_null()) lab = json::object();
    lab["n_records"] = lab.value("n_records", 0) + 1;
    lab["n_pvc"] = lab.value("n_pvc", std::size_t{0}) + n_pvc[i];
    lab["n_af_episodes"] = lab.value("n_af_episodes", std::size_t{0}) + n_af[i];
    lab["hours"] = lab.value("hours", 0.0) + p.config.duration_s / 3600.0;
    for (const auto& g : gs[i]) gs_rows.push_back({p.record_id, g.minute_index, g.pvc_count});
    summary.n_pvc += n_pvc[i];
    summary.n_af_episodes += n_af[i];
  }
  summary.n_records = plans.size();
  const json manifest = {{"config_hash", ConfigHash(cfg)},
                         {"seed", cfg.seed},
                         {"records", records},
                         {"populations", by_label}};
  io::WriteText(out_dir / "manifest.json", manifest.dump(1) + "\n");
  io::WriteText(out_dir / "gs.csv", eval::GsCsv(gs_rows));
  return summary;
}

std::vector<RecordEntry> ListRecords(const fs::path& records_dir) {
  const auto j = io::ReadJson(records_dir / "manifest.json", ErrorCode::kRecordFormat);
  std::vector<RecordEntry> out;
  try {
    for (const auto& r : j.at("records"))
      out.push_back({r.at("record_id").get<std::string>(), r.at("population").get<std::string>()});
  } catch (const json::exception& e) {
    Fail(ErrorCode::kRecordFormat, (records_dir / "manifest.json").string() + ": " + e.what());
  }
  return out;
}

screen::Corpus RunBuildCorpus(const PipelineConfig& cfg, const fs::path& records_dir,
                              const fs::path& out_dir) {
  cfg.Validate();
  std::vector<RecordEntry> entries;
  for (auto& e : ListRecords(records_dir))
    if (Selected(cfg.corpus_populations, e.population)) entries.push_back(std::move(e));
  std::vector<synth::LabeledRecord> records(entries.size());
  io::ParallelFor(entries.size(), [&](std::size_t i) {
    records[i] = synth::ReadRecord(records_dir / entries[i].record_id);
  });
  screen::CorpusConfig cc{cfg.screen, cfg.dsp, cfg.val_fraction, cfg.min_segments, cfg.seed};
  auto corpus = screen::BuildTrainingCorpus(records, cc);
  corpus.manifest.config_hash = ConfigHash(cfg);
  EnsureDir(out_dir);
  screen::WriteCorpus(corpus, out_dir);
  return corpus;
}

std::string HistoryCsv(const std::vector<nnet::EpochStats>& history) {
  std::string out = "epoch,train_loss,val_loss\n";
  for (const auto& e : history)
    out += std::to_string(e.epoch) + "," + io::FormatDouble(e.train_loss) + "," +
           io::FormatDouble(e.val_loss) + "\n";
  return out;
}

nnet::TrainResult RunTrain(const PipelineConfig& cfg, const fs::path& corpus_dir,
                           const fs::path& model_out, const fs::path& history_out) {
  cfg.Validate();
  const auto corpus = screen::ReadCorpus(corpus_dir);
  Require(std::abs(corpus.manifest.pipeline_rate_hz - cfg.dsp.pipeline_rate_hz) < 1e-9 &&
              std::abs(corpus.manifest.segment_len_s - cfg.dsp.segment_len_s) < 1e-9,
          "corpus was built with a different pipeline rate or segment length", ErrorCode::kData);
  Require(corpus.train.size() + corpus.val.size() >= cfg.min_segments,
          "corpus holds " + std::to_string(corpus.train.size() + corpus.val.size()) +
              " segments; screen.min_segments requires " + std::to_string(cfg.min_segments),
          ErrorCode::kInsufficientData);
  auto init = nnet::InitModel(cfg.model, cfg.train.seed);
  init.pipeline_rate_hz = cfg.dsp.pipeline_rate_hz;
  init.segment_len_s = cfg.dsp.segment_len_s;
  io::Log("training on " + std::to_string(corpus.train.size()) + " segments, validating on " +
          std::to_string(corpus.val.size()));
  auto result = nnet::Train(std::move(init), corpus.train, corpus.val, cfg.train,
                            [](const nnet::EpochStats& e) {
                              char buf[160];
                              std::snprintf(buf, sizeof(buf),
                                            "epoch %3d  train %.5f  val %.5f  lr %.2g  (%.1f s)",
                                            e.epoch, e.train_loss, e.val_loss, e.learning_rate,
                                            e.seconds);
                              io::Log(buf);
                            });
  json doc = nnet::ModelToJson(result.model);
  doc["provenance"] = {{"config_hash", ConfigHash(cfg)},
                       {"best_epoch", result.best_epoch},
                       {"n_train", corpus.train.size()},
                       {"n_val", corpus.val.size()}};
  io::WriteText(model_out, doc.dump() + "\n");
  io::WriteText(history_out, HistoryCsv(result.history));
  return result;
}

detector::Detection DetectRecord(const PipelineConfig& cfg, const nnet::ModelParams& model,
                                 const synth::LabeledRecord& record,
                                 std::vector<detector::SegmentDetail>* details) {
  const auto w = dsp::Preprocess(record.waveform, cfg.dsp);
  return detector::Detect(model, w, cfg.detector, record.record_id, details);
}

json DetectionsJson(const std::string& config_hash, const std::vector<RecordDetection>& dets) {
  json records = json::array();
  for (const auto& rd : dets) {
    json segs = json::array();
    for (const auto& s : rd.detection.segments)
      segs.push_back({s.start_s, s.duration_s, s.flagged, s.min_r});
    records.push_back({{"record_id", rd.detection.record_id},
                       {"population", rd.population},
                       {"no_coverage", rd.detection.no_coverage},
                       {"n_regions", rd.detection.regions.size()},
                       {"segments", segs}});
  }
  return {{"config_hash", config_hash}, {"records", records}};
}

DetectSummary RunDetect(const PipelineConfig& cfg, const nnet::ModelParams& model,
                        const fs::path& records_dir, const fs::path& out_dir, bool plot) {
  cfg.Validate();
  model.Validate();
  Require(model.arch.seq_len == cfg.model.seq_len &&
              std::abs(model.pipeline_rate_hz - cfg.dsp.pipeline_rate_hz) < 1e-9,
          "model does not match the configured pipeline rate and segment length",
          ErrorCode::kModelDimension);
  EnsureDir(out_dir);
  if (plot) EnsureDir(out_dir / "plots");
  DetectSummary summary;
  std::vector<RecordDetection> dets;
  for (const auto& e : ListRecords(records_dir)) {
    if (!Selected(cfg.detect_populations, e.population)) continue;
    const auto rec = synth::ReadRecord(records_dir / e.record_id);
    std::vector<detector::SegmentDetail> details;
    auto det = DetectRecord(cfg, model, rec, plot ? &details : nullptr);
    io::WriteText(out_dir / (SafeFileName(e.record_id) + ".regions.jsonl"), detector::RegionsJsonl(det));
    for (const auto& d : details) {
      if (d.regions.empty()) continue;
      char name[96];
      std::snprintf(name, sizeof(name), "_%07.2f.svg", d.segment.start_s);
      io::WriteText(out_dir / "plots" / (SafeFileName(e.record_id) + name),
                    detector::SegmentSvg(d, cfg.detector.threshold));
    }
    ++summary.n_records;
    summary.n_regions += det.regions.size();
    summary.n_no_coverage += det.no_coverage ? 1 : 0;
    if (det.no_coverage) io::Log("record " + e.record_id + ": no coverage");
    dets.push_back({e.population, std::move(det)});
  }
  io::WriteText(out_dir / "detections.json", DetectionsJson(ConfigHash(cfg), dets).dump(1) + "\n");
  return summary;
}

std::vector<RecordDetection> ReadDetections(const fs::path& dir) {
  const auto j = io::ReadJson(dir / "detections.json", ErrorCode::kData);
  std::vector<RecordDetection> out;
  try {
    for (const auto& r : j.at("records")) {
      RecordDetection rd;
      rd.population = r.at("population").get<std::string>();
      rd.detection.record_id = r.at("record_id").get<std::string>();
      rd.detection.no_coverage = r.at("no_coverage").get<bool>();
      for (const auto& s : r.at("segments"))
        rd.detection.segments.push_back({s.at(0).get<double>(), s.at(1).get<double>(),
                                         s.at(2).get<bool>(), s.at(3).get<double>()});
      rd.detection.regions = detector::ParseRegionsJsonl(
          io::ReadText(dir / (SafeFileName(rd.detection.record_id) + ".regions.jsonl")));
      out.push_back(std::move(rd));
    }
  } catch (const json::exception& e) {
    Fail(ErrorCode::kData, (dir / "detections.json").string() + ": " + e.what());
  }
  return out;
}

EvalResult Evaluate(const PipelineConfig& cfg, const std::vector<RecordDetection>& dets,
                    std::span<const eval::GsRow> gs) {
  std::map<std::string, std::vector<synth::GsMinute>> gs_by_record;
  for (const auto& row : gs) gs_by_record[row.record_id].push_back({row.minute_index, row.pvc_count});

  EvalResult res;
  std::vector<eval::MinuteObservation> obs;
  std::size_t n_gs_minutes = 0;
  std::map<std::string, std::pair<std::vector<std::string>, std::vector<double>>> groups;
  for (const auto& rd : dets) {
    const auto& d = rd.detection;
    const auto it = gs_by_record.find(d.record_id);
    if (it != gs_by_record.end()) {
      n_gs_minutes += it->second.size();
      const auto cov = eval::CoverageOf(d);
      auto o = eval::MinuteAlign(d.record_id, d.regions, cov, it->second, cfg.eval);
      obs.insert(obs.end(), o.begin(), o.end());
    }
    if (!d.segments.empty()) {
      auto& g = groups[rd.population];
      g.first.push_back(d.record_id);
      g.second.push_back(eval::AnomalyFraction(d));
    }
  }
  res.n_excluded_minutes = n_gs_minutes - obs.size();
  res.sweep = eval::ConfusionSweep(obs, cfg.min_pvc);
  for (const auto& [label, g] : groups)
    res.populations.push_back(eval::ComputePopulationStats(label, g.first, g.second));

  res.json = eval::SweepJson(res.sweep);
  res.json["population_stats"] = eval::PopulationJson(res.populations);
  res.json["config_hash"] = ConfigHash(cfg);
  res.json["n_excluded_minutes"] = res.n_excluded_minutes;
  res.json["settings"] = {{"window_len_s", cfg.detector.window_len_s},
                          {"stride_s", cfg.detector.stride_s},
                          {"threshold", cfg.detector.threshold},
                          {"min_coverage_s", cfg.eval.min_coverage_s},
                          {"min_anomaly_s", cfg.eval.min_anomaly_s}};

  std::string text = "Evaluation (config " + ConfigHash(cfg) + ")\n\n";
  text += eval::PrevalenceLines(res.sweep.prevalence);
  text += eval::GroupThousands(static_cast<std::int64_t>(res.n_excluded_minutes)) +
          " GS minutes excluded for coverage below " +
          io::FormatDouble(cfg.eval.min_coverage_s) + " s\n";
  for (const auto& [k, cm] : res.sweep.per_min_pvc) text += "\n" + eval::ConfusionTable(cm, k);
  text += "\nAnomalous 8 s samples per record\n" + eval::PopulationTable(res.populations);
  res.text = std::move(text);
  return res;
}

EvalResult RunEval(const PipelineConfig& cfg, const fs::path& detections_dir,
                   const fs::path& gs_csv, const fs::path& out_dir) {
  cfg.Validate();
  const auto dets = ReadDetections(detections_dir);
  const auto gs = eval::ParseGsCsv(io::ReadText(gs_csv));
  auto res = Evaluate(cfg, dets, gs);
  EnsureDir(out_dir);
  io::WriteText(out_dir / "report.json", res.json.dump(2) + "\n");
  io::WriteText(out_dir / "report.txt", res.text);
  return res;
}

ReportResult MergeReports(const std::vector<fs::path>& eval_dirs) {
  Require(!eval_dirs.empty(), "report needs at least one evaluation directory");
  ReportResult out;
  std::set<std::string> hashes;
  std::map<std::string, eval::ConfusionMatrix> combined;
  eval::Prevalence prevalence;
  std::map<std::string, std::int64_t> at_least;
  std::map<std::string, std::pair<std::vector<std::string>, std::vector<double>>> groups;
  json inputs = json::array();
  for (const auto& dir : eval_dirs) {
    const auto j = io::ReadJson(dir / "report.json", ErrorCode::kData);
    try {
      const auto hash = j.at("config_hash").get<std::string>();
      hashes.insert(hash);
      inputs.push_back({{"path", dir.string()}, {"config_hash", hash}});
      for (const auto& [k, v] : j.at("per_min_pvc").items()) {
        auto& cm = combined[k];
        cm.tp += v.at("counts").at("tp").get<std::int64_t>();
        cm.fp += v.at("counts").at("fp").get<std::int64_t>();
        cm.fn += v.at("counts").at("fn").get<std::int64_t>();
        cm.tn += v.at("counts").at("tn").get<std::int64_t>();
      }
      const auto& p = j.at("prevalence");
      prevalence.n_minutes += p.at("n_minutes").get<std::int64_t>();
      prevalence.n_zero += p.at("n_zero").get<std::int64_t>();
      for (const auto& [k, v] : p.at("at_least").items()) at_least[k] += v.get<std::int64_t>();
      for (const auto& [label, s] : j.at("population_stats").items()) {
        auto& g = groups[label];
        const auto ids = s.at("record_ids").get<std::vector<std::string>>();
        const auto fr = s.at("fractions").get<std::vector<double>>();
        g.first.insert(g.first.end(), ids.begin(), ids.end());
        g.second.insert(g.second.end(), fr.begin(), fr.end());
      }
    } catch (const json::exception& e) {
      Fail(ErrorCode::kData, (dir / "report.json").string() + ": " + e.what());
    }
  }
  out.hash_conflict = hashes.size() > 1;

  eval::SweepReport sweep;
  std::vector<std::pair<int, std::string>> keys;
  for (const auto& [k, cm] : combined) keys.emplace_back(std::stoi(k), k);
  std::sort(keys.begin(), keys.end());
  for (const auto& [k, key] : keys) sweep.per_min_pvc.emplace_back(k, combined[key]);
  for (const auto& [k, key] : keys) prevalence.at_least.emplace_back(k, at_least[key]);
  sweep.prevalence = prevalence;
  std::vector<eval::PopulationStats> pops;
  for (const auto& [label, g] : groups)
    pops.push_back(eval::ComputePopulationStats(label, g.first, g.second));

  out.json = eval::SweepJson(sweep);
  out.json["population_stats"] = eval::PopulationJson(pops);
  out.json["inputs"] = inputs;
  out.json["hash_conflict"] = out.hash_conflict;

  std::string text = "Combined report over " + std::to_string(eval_dirs.size()) + " evaluation(s)\n";
  if (out.hash_conflict) text += "warning: inputs were produced with different configurations\n";
  text += "\n" + eval::PrevalenceLines(sweep.prevalence);
  for (const auto& [k, cm] : sweep.per_min_pvc) text += "\n" + eval::ConfusionTable(cm, k);
  text += "\n% of PPG samples with anomalies, per record\n" + eval::PopulationTable(pops);
  out.text = std::move(text);
  return out;
}

ReportResult RunReport(const std::vector<fs::path>& eval_dirs, const fs::path& out_dir) {
  auto res = MergeReports(eval_dirs);
  if (res.hash_conflict) io::Log("warning: report inputs carry different config hashes");
  EnsureDir(out_dir);
  io::WriteText(out_dir / "report.json", res.json.dump(2) + "\n");
  io::WriteText(out_dir / "report.txt", res.text);
  return res;
}

}  // namespace pulseguard::pipeline

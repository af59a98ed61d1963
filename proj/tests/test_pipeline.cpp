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

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>

#include "pulseguard/error.hpp"
#include "pulseguard/io.hpp"
#include "pulseguard/pipeline.hpp"

namespace pulseguard::pipeline {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Small enough to run end to end in a few seconds.
json SmallConfigJson() {
  return json::parse(R"({
    "seed": 7,
    "populations": [
      {"label": "train", "n_records": 12, "duration_s": 120, "base_hr_bpm": [50, 120]},
      {"label": "pvc", "n_records": 3, "duration_s": 180, "base_hr_bpm": [60, 90],
       "pvc_rate_per_min": [1, 4]}
    ],
    "corpus_populations": ["train"],
    "detect_populations": ["pvc", "train"],
    "screen": {"min_segments": 100},
    "model": {"encoder_hidden": [6, 4], "decoder_hidden": [4, 6]},
    "train": {"max_epochs": 2, "batch_size": 16}
  })");
}

fs::path TempDir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("pulseguard_pipeline_" + name);
  fs::remove_all(p);
  return p;
}

ErrorCode CodeOf(const json& j) {
  try {
    ConfigFromJson(j);
  } catch (const Error& e) {
    return e.code();
  }
  return static_cast<ErrorCode>(0);
}

TEST(Config, DefaultsValidate) { EXPECT_NO_THROW(PipelineConfig{}.Validate()); }

TEST(Config, RoundTripAndHash) {
  const auto cfg = ConfigFromJson(SmallConfigJson());
  EXPECT_EQ(cfg.populations.size(), 2u);
  EXPECT_EQ(cfg.populations[1].pvc_rate_per_min.hi, 4.0);
  EXPECT_EQ(cfg.populations[0].pvc_rate_per_min.hi, 0.0);
  const auto again = ConfigFromJson(ConfigToJson(cfg));
  EXPECT_EQ(ConfigHash(cfg), ConfigHash(again));
  auto other = cfg;
  other.seed = 8;
  EXPECT_NE(ConfigHash(cfg), ConfigHash(other));
}

TEST(Config, Errors) {
  auto j = SmallConfigJson();
  j["populations"][0]["base_hr_bpm"] = 300;
  try {
    ConfigFromJson(j);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
    EXPECT_NE(std::string(e.what()).find("base_hr_bpm"), std::string::npos) << e.what();
  }
  j = SmallConfigJson();
  j["train"]["learning_rat"] = 1;
  EXPECT_EQ(CodeOf(j), ErrorCode::kConfig);
  j = SmallConfigJson();
  j["detector"] = {{"threshold", "high"}};
  EXPECT_EQ(CodeOf(j), ErrorCode::kConfig);
  j = SmallConfigJson();
  j["model"]["seq_len"] = 128;
  EXPECT_EQ(CodeOf(j), ErrorCode::kConfig);
  j = SmallConfigJson();
  j["eval"] = {{"min_pvc", {0}}};
  EXPECT_EQ(CodeOf(j), ErrorCode::kConfig);
  j = SmallConfigJson();
  j["populations"][1]["label"] = "train";
  EXPECT_EQ(CodeOf(j), ErrorCode::kConfig);
}

TEST(Plan, DeterministicAndWithinRanges) {
  const auto cfg = ConfigFromJson(SmallConfigJson());
  const auto a = PlanRecords(cfg), b = PlanRecords(cfg);
  ASSERT_EQ(a.size(), 15u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].record_id, b[i].record_id);
    EXPECT_EQ(a[i].config.seed, b[i].config.seed);
    EXPECT_EQ(a[i].config.base_hr_bpm, b[i].config.base_hr_bpm);
  }
  EXPECT_EQ(a[0].record_id, "train-0000");
  EXPECT_EQ(a[12].population, "pvc");
  EXPECT_GE(a[13].config.pvc_rate_per_min, 1.0);
  EXPECT_LE(a[13].config.pvc_rate_per_min, 4.0);
  EXPECT_NE(a[0].config.seed, a[1].config.seed);
}

std::vector<std::string> PrimaryOutputs(const fs::path& root) {
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), root).string());
  std::sort(files.begin(), files.end());
  return files;
}

fs::path RunAll(const PipelineConfig& cfg, const std::string& tag) {
  const auto root = TempDir(tag);
  RunSynth(cfg, root / "records");
  RunBuildCorpus(cfg, root / "records", root / "corpus");
  RunTrain(cfg, root / "corpus", root / "model" / "model.json", root / "model" / "history.csv");
  const auto model = nnet::LoadModel(root / "model" / "model.json");
  RunDetect(cfg, model, root / "records", root / "detect", true);
  RunEval(cfg, root / "detect", root / "records" / "gs.csv", root / "eval");
  return root;
}

TEST(EndToEnd, ByteIdenticalAcrossThreadCounts) {
  const auto cfg = ConfigFromJson(SmallConfigJson());
  setenv("PULSEGUARD_THREADS", "1", 1);
  const auto a = RunAll(cfg, "t1");
  setenv("PULSEGUARD_THREADS", "3", 1);
  const auto b = RunAll(cfg, "t3");
  unsetenv("PULSEGUARD_THREADS");
  const auto files = PrimaryOutputs(a);
  ASSERT_EQ(files, PrimaryOutputs(b));
  EXPECT_GT(files.size(), 40u);
  for (const auto& f : files) EXPECT_EQ(io::ReadText(a / f), io::ReadText(b / f)) << f;

  const auto report = io::ReadJson(a / "eval" / "report.json", ErrorCode::kData);
  EXPECT_EQ(report["config_hash"], ConfigHash(cfg));
  EXPECT_TRUE(report.contains("per_min_pvc"));
  EXPECT_TRUE(report.contains("prevalence"));
  EXPECT_TRUE(report.contains("population_stats"));
  const auto history = io::ReadText(a / "model" / "history.csv");
  EXPECT_EQ(history.rfind("epoch,train_loss,val_loss\n", 0), 0u);
  const auto manifest = io::ReadJson(a / "records" / "manifest.json", ErrorCode::kData);
  EXPECT_EQ(manifest["records"].size(), 15u);
  EXPECT_EQ(manifest["populations"]["pvc"]["n_records"], 3);
}

TEST(Report, PassthroughMergeAndConflict) {
  const auto cfg = ConfigFromJson(SmallConfigJson());
  const auto root = fs::temp_directory_path() / "pulseguard_pipeline_t1";
  if (!fs::exists(root / "eval" / "report.json")) RunAll(cfg, "t1");
  const auto single = MergeReports({root / "eval"});
  EXPECT_FALSE(single.hash_conflict);
  const auto orig = io::ReadJson(root / "eval" / "report.json", ErrorCode::kData);
  EXPECT_EQ(single.json["per_min_pvc"], orig["per_min_pvc"]);

  auto other = cfg;
  other.detector.threshold = 0.5;
  const auto dets = ReadDetections(root / "detect");
  const auto gs = eval::ParseGsCsv(io::ReadText(root / "records" / "gs.csv"));
  const auto alt = TempDir("alt_eval");
  fs::create_directories(alt);
  auto res = Evaluate(other, dets, gs);
  io::WriteText(alt / "report.json", res.json.dump());
  const auto merged = RunReport({root / "eval", alt}, TempDir("merged"));
  EXPECT_TRUE(merged.hash_conflict);
  EXPECT_NE(merged.text.find("warning"), std::string::npos);
  const auto a = orig["per_min_pvc"]["1"]["counts"];
  EXPECT_EQ(merged.json["per_min_pvc"]["1"]["counts"]["tn"].get<int>() +
                merged.json["per_min_pvc"]["1"]["counts"]["fp"].get<int>(),
            2 * (a["tn"].get<int>() + a["fp"].get<int>()));
}

TEST(Errors, CorpusTooSmallNamesThreshold) {
  auto j = SmallConfigJson();
  j["screen"]["min_segments"] = 100000;
  const auto cfg = ConfigFromJson(j);
  const auto root = TempDir("small");
  RunSynth(cfg, root / "records");
  try {
    RunBuildCorpus(cfg, root / "records", root / "corpus");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientData);
    EXPECT_NE(std::string(e.what()).find("min_segments"), std::string::npos);
  }
}

TEST(Errors, NoEligibleMinutes) {
  const auto cfg = ConfigFromJson(SmallConfigJson());
  std::vector<RecordDetection> dets(1);
  dets[0].population = "x";
  dets[0].detection.record_id = "x";
  const std::vector<eval::GsRow> gs{{"x", 0, 1}};
  try {
    Evaluate(cfg, dets, gs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoEligible);
  }
}

}  // namespace
}  // namespace pulseguard::pipeline

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

// Runs the pulseguard executable and checks exit codes and outputs.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string output;
};

Result Cli(const std::string& args) {
  const std::string cmd = std::string(PULSEGUARD_CLI) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof(buf), pipe)) r.output += buf;
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void Spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "pulseguard_cli";
    fs::remove_all(root_);
    fs::create_directories(root_);
    Spit(root_ / "c.json", R"({
      "seed": 11,
      "populations": [
        {"label": "train", "n_records": 10, "duration_s": 120, "base_hr_bpm": [55, 110]},
        {"label": "pvc", "n_records": 2, "duration_s": 180, "pvc_rate_per_min": 3},
        {"label": "short", "n_records": 1, "duration_s": 10}
      ],
      "corpus_populations": ["train"],
      "detect_populations": ["pvc", "short"],
      "screen": {"min_segments": 100},
      "model": {"encoder_hidden": [5, 3], "decoder_hidden": [3, 5]},
      "train": {"max_epochs": 1}
    })");
  }
  static std::string P(const std::string& rel) { return (root_ / rel).string(); }
  static std::string Config() { return "--config " + P("c.json"); }
  static void EnsureTrained() {
    if (fs::exists(root_ / "model" / "model.json")) return;
    ASSERT_EQ(Cli("synth " + Config() + " --out " + P("records")).code, 0);
    ASSERT_EQ(Cli("build-corpus " + Config() + " --records " + P("records") + " --out " + P("corpus")).code, 0);
    ASSERT_EQ(Cli("train -q " + Config() + " --corpus " + P("corpus") + " --out " + P("model")).code, 0);
  }

  static fs::path root_;
};

fs::path CliTest::root_;

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(Cli("").code, 1);
  EXPECT_EQ(Cli("frobnicate").code, 1);
  EXPECT_EQ(Cli("synth").code, 1);
  EXPECT_EQ(Cli("--help").code, 0);
}

TEST_F(CliTest, SynthDeterministic) {
  auto r = Cli("synth " + Config() + " --out " + P("s1"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("13 records"), std::string::npos);
  ASSERT_EQ(Cli("synth " + Config() + " --out " + P("s2")).code, 0);
  for (const auto& e : fs::recursive_directory_iterator(root_ / "s1")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root_ / "s1");
    EXPECT_EQ(Slurp(e.path()), Slurp(root_ / "s2" / rel)) << rel;
  }
  ASSERT_EQ(Cli("synth " + Config() + " --seed 12 --out " + P("s3")).code, 0);
  EXPECT_NE(Slurp(root_ / "s1" / "gs.csv"), "");
  EXPECT_NE(Slurp(root_ / "s1" / "manifest.json"), Slurp(root_ / "s3" / "manifest.json"));
}

TEST_F(CliTest, InvalidConfigExitsTwo) {
  Spit(root_ / "bad.json", R"({"populations": [{"label": "x", "base_hr_bpm": 300}]})");
  const auto r = Cli("synth --config " + P("bad.json") + " --out " + P("bad"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("base_hr_bpm"), std::string::npos) << r.output;
  Spit(root_ / "broken.json", "{");
  EXPECT_EQ(Cli("synth --config " + P("broken.json") + " --out " + P("bad")).code, 2);
}

TEST_F(CliTest, UnwritableOutputExitsThree) {
  Spit(root_ / "blocker", "x");
  const auto r = Cli("synth " + Config() + " --out " + P("blocker") + "/sub");
  EXPECT_EQ(r.code, 3) << r.output;
}

TEST_F(CliTest, CorpusTooSmallNamesThreshold) {
  ASSERT_EQ(Cli("synth " + Config() + " --out " + P("records")).code, 0);
  Spit(root_ / "big.json", Slurp(root_ / "c.json").replace(
                               Slurp(root_ / "c.json").find("\"min_segments\": 100"),
                               19, "\"min_segments\": 99999"));
  const auto r = Cli("build-corpus --config " + P("big.json") + " --records " + P("records") +
                     " --out " + P("corpus_big"));
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.output.find("min_segments"), std::string::npos) << r.output;
}

TEST_F(CliTest, TrainWritesModelAndHistory) {
  EnsureTrained();
  EXPECT_EQ(Slurp(root_ / "model" / "history.csv").rfind("epoch,train_loss,val_loss\n", 0), 0u);
  const auto before = Slurp(root_ / "model" / "model.json");
  ASSERT_EQ(Cli("train -q " + Config() + " --corpus " + P("corpus") + " --out " + P("model2")).code, 0);
  EXPECT_EQ(before, Slurp(root_ / "model2" / "model.json"));
  EXPECT_EQ(Cli("train " + Config() + " --corpus " + P("nope") + " --out " + P("m")).code, 3);
}

TEST_F(CliTest, DetectOutputsAndErrors) {
  EnsureTrained();
  const std::string base = "detect " + Config() + " --model " + P("model/model.json") +
                           " --records " + P("records");
  auto r = Cli(base + " --out " + P("det") + " --plot");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(fs::exists(root_ / "det" / "pvc-0000.regions.jsonl"));
  EXPECT_TRUE(fs::exists(root_ / "det" / "detections.json"));
  EXPECT_NE(r.output.find("short-0000: no coverage"), std::string::npos) << r.output;
  EXPECT_EQ(Slurp(root_ / "det" / "short-0000.regions.jsonl"), "");
  bool any_svg = false;
  if (fs::exists(root_ / "det" / "plots"))
    for (const auto& e : fs::directory_iterator(root_ / "det" / "plots"))
      any_svg |= e.path().extension() == ".svg";
  EXPECT_TRUE(any_svg);

  Spit(root_ / "trunc.json", Slurp(root_ / "model" / "model.json").substr(0, 200));
  EXPECT_EQ(Cli("detect " + Config() + " --model " + P("trunc.json") + " --records " +
                P("records") + " --out " + P("det_bad"))
                .code,
            5);
  EXPECT_EQ(Cli(base + " --out " + P("det_t") + " --threshold 1.5").code, 2);

  fs::copy(root_ / "records", root_ / "records_bad", fs::copy_options::recursive);
  Spit(root_ / "records_bad" / "pvc-0001" / "record.json", "[]");
  EXPECT_EQ(Cli("detect " + Config() + " --model " + P("model/model.json") + " --records " +
                P("records_bad") + " --out " + P("det_bad2"))
                .code,
            6);
}

TEST_F(CliTest, EvalAndReport) {
  EnsureTrained();
  if (!fs::exists(root_ / "det" / "detections.json"))
    ASSERT_EQ(Cli("detect " + Config() + " --model " + P("model/model.json") + " --records " +
                  P("records") + " --out " + P("det"))
                  .code,
              0);
  const std::string base = "eval " + Config() + " --detections " + P("det") + " --gs " +
                           P("records/gs.csv");
  ASSERT_EQ(Cli(base + " --out " + P("ev1")).code, 0);
  ASSERT_EQ(Cli(base + " --out " + P("ev2")).code, 0);
  EXPECT_EQ(Slurp(root_ / "ev1" / "report.json"), Slurp(root_ / "ev2" / "report.json"));
  EXPECT_EQ(Slurp(root_ / "ev1" / "report.txt"), Slurp(root_ / "ev2" / "report.txt"));
  EXPECT_NE(Slurp(root_ / "ev1" / "report.txt").find("true positive"), std::string::npos);

  ASSERT_EQ(Cli(base + " --min-pvc 1 2 3 --out " + P("ev3")).code, 0);
  EXPECT_NE(Slurp(root_ / "ev3" / "report.txt").find(">= 3 PVC/min"), std::string::npos);
  EXPECT_EQ(Cli(base + " --min-pvc 0 --out " + P("ev4")).code, 2);

  Spit(root_ / "empty_gs.csv", "record_id,minute_index,pvc_count\n");
  const auto none = Cli("eval " + Config() + " --detections " + P("det") + " --gs " +
                        P("empty_gs.csv") + " --out " + P("ev5"));
  EXPECT_EQ(none.code, 4);
  EXPECT_NE(none.output.find("eligible"), std::string::npos) << none.output;

  auto r = Cli("report --out " + P("rep1") + " " + P("ev1"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(r.output.find("warning"), std::string::npos);
  Spit(root_ / "c2.json", Slurp(root_ / "c.json").replace(Slurp(root_ / "c.json").find("\"seed\": 11"),
                                                          10, "\"seed\": 13"));
  ASSERT_EQ(Cli("eval --config " + P("c2.json") + " --detections " + P("det") + " --gs " +
                P("records/gs.csv") + " --out " + P("ev7"))
                .code,
            0);
  r = Cli("report --out " + P("rep2") + " " + P("ev1") + " " + P("ev7"));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.output.find("warning"), std::string::npos) << r.output;
  EXPECT_NE(Slurp(root_ / "rep2" / "report.txt").find("Avg (Stdev)"), std::string::npos);
}

}  // namespace

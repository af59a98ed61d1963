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

// pulseguard command-line tool.
//
//   pulseguard synth        --config c.json --out records/
//   pulseguard build-corpus --config c.json --records records/ --out corpus/
//   pulseguard train        --config c.json --corpus corpus/ --out model/
//   pulseguard detect       --config c.json --model model/model.json --records records/ --out det/
//   pulseguard eval         --config c.json --detections det/ --gs records/gs.csv --out eval/
//   pulseguard report       --out combined/ eval-a/ eval-b/

#include <cstdio>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pulseguard/pulseguard.h"

namespace {

enum Exit {
  kExitOk = 0,
  kExitUsage = 1,
  kExitConfig = 2,
  kExitIo = 3,
  kExitData = 4,
  kExitModel = 5,
  kExitRecord = 6,
  kExitInternal = 70,
};

int ExitCodeFor(pg_status s) {
  switch (s) {
    case PG_OK: return kExitOk;
    case PG_INVALID_ARGUMENT: return kExitUsage;
    case PG_CONFIG: return kExitConfig;
    case PG_IO: return kExitIo;
    case PG_DATA:
    case PG_INSUFFICIENT_DATA:
    case PG_NO_ELIGIBLE:
    case PG_NON_FINITE: return kExitData;
    case PG_MODEL_FORMAT:
    case PG_MODEL_VERSION:
    case PG_MODEL_DIMENSION: return kExitModel;
    case PG_RECORD_FORMAT: return kExitRecord;
    case PG_INTERNAL: return kExitInternal;
  }
  return kExitInternal;
}

struct CheckFailed {
  int code;
};

void Check(pg_status s) {
  if (s == PG_OK) return;
  std::fprintf(stderr, "pulseguard: %s: %s\n", pg_status_name(s), pg_last_error());
  throw CheckFailed{ExitCodeFor(s)};
}

struct ConfigDeleter {
  void operator()(pg_config* c) const { pg_config_free(c); }
};
struct ModelDeleter {
  void operator()(pg_model* m) const { pg_model_free(m); }
};
using ConfigPtr = std::unique_ptr<pg_config, ConfigDeleter>;
using ModelPtr = std::unique_ptr<pg_model, ModelDeleter>;

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> threshold;
  std::vector<int> min_pvc;
  bool plot = false;
  std::string records;
  std::string corpus;
  std::string model;
  std::string detections;
  std::string gs;
  std::vector<std::string> inputs;
};

ConfigPtr LoadConfig(const Options& o) {
  pg_config* raw = nullptr;
  Check(o.config.empty() ? pg_config_default(&raw) : pg_config_load(o.config.c_str(), &raw));
  ConfigPtr cfg(raw);
  if (o.seed) Check(pg_config_set_seed(cfg.get(), *o.seed));
  if (o.threshold) {
    const pg_status s = pg_config_set_threshold(cfg.get(), *o.threshold);
    // A bad --threshold is a configuration error, not a usage error.
    Check(s == PG_OK ? s : PG_CONFIG);
  }
  if (!o.min_pvc.empty()) {
    const pg_status s = pg_config_set_min_pvc(cfg.get(), o.min_pvc.data(), o.min_pvc.size());
    Check(s == PG_OK ? s : PG_CONFIG);
  }
  return cfg;
}

void LogToStderr(const char* line, void*) { std::fprintf(stderr, "%s\n", line); }

int Run(int argc, char** argv) {
  CLI::App app{"PPG anomaly detection with an LSTM autoencoder"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(pg_version()));
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress progress output");

  Options o;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Pipeline config (JSON); defaults apply when omitted")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Override the global seed");
  };

  auto* synth = app.add_subcommand("synth", "Generate labeled synthetic records");
  add_config(synth);
  synth->add_option("--out", o.out, "Output directory")->required();

  auto* corpus = app.add_subcommand("build-corpus", "Screen records into a training corpus");
  add_config(corpus);
  corpus->add_option("--records", o.records, "Records directory")->required();
  corpus->add_option("--out", o.out, "Corpus directory")->required();

  auto* train = app.add_subcommand("train", "Train the autoencoder");
  add_config(train);
  train->add_option("--corpus", o.corpus, "Corpus directory")->required();
  train->add_option("--out", o.out, "Output directory for model.json and history.csv")->required();

  auto* detect = app.add_subcommand("detect", "Flag low-correlation regions");
  add_config(detect);
  detect->add_option("--model", o.model, "Model file")->required();
  detect->add_option("--records", o.records, "Records directory")->required();
  detect->add_option("--out", o.out, "Output directory")->required();
  detect->add_option("--threshold", o.threshold, "Correlation threshold");
  detect->add_flag("--plot", o.plot, "Write SVG overlays for flagged segments");

  auto* ev = app.add_subcommand("eval", "Score detections against per-minute PVC counts");
  add_config(ev);
  ev->add_option("--detections", o.detections, "Detect output directory")->required();
  ev->add_option("--gs", o.gs, "Gold-standard CSV")->required();
  ev->add_option("--out", o.out, "Output directory")->required();
  ev->add_option("--min-pvc", o.min_pvc, "PVC count thresholds to sweep");

  auto* report = app.add_subcommand("report", "Merge evaluation outputs");
  report->add_option("--out", o.out, "Output directory")->required();
  report->add_option("inputs", o.inputs, "Evaluation directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }
  pg_set_log_callback(quiet ? nullptr : LogToStderr, nullptr);

  try {
    if (*synth) {
      auto cfg = LoadConfig(o);
      std::size_t n = 0;
      Check(pg_synth(cfg.get(), o.out.c_str(), &n));
      std::printf("wrote %zu records to %s\n", n, o.out.c_str());
    } else if (*corpus) {
      auto cfg = LoadConfig(o);
      std::size_t n_train = 0, n_val = 0;
      Check(pg_build_corpus(cfg.get(), o.records.c_str(), o.out.c_str(), &n_train, &n_val));
      std::printf("corpus: %zu train, %zu validation segments\n", n_train, n_val);
    } else if (*train) {
      auto cfg = LoadConfig(o);
      const std::string model = o.out + "/model.json";
      const std::string history = o.out + "/history.csv";
      double best = 0.0;
      Check(pg_train(cfg.get(), o.corpus.c_str(), model.c_str(), history.c_str(), &best));
      std::printf("best validation MSE %.6g; model written to %s\n", best, model.c_str());
    } else if (*detect) {
      auto cfg = LoadConfig(o);
      pg_model* raw = nullptr;
      Check(pg_model_load(o.model.c_str(), &raw));
      ModelPtr model(raw);
      std::size_t n = 0;
      Check(pg_detect(cfg.get(), model.get(), o.records.c_str(), o.out.c_str(), o.plot ? 1 : 0, &n));
      std::printf("%zu regions written to %s\n", n, o.out.c_str());
    } else if (*ev) {
      auto cfg = LoadConfig(o);
      Check(pg_eval(cfg.get(), o.detections.c_str(), o.gs.c_str(), o.out.c_str()));
      std::printf("report written to %s\n", o.out.c_str());
    } else if (*report) {
      std::vector<const char*> dirs;
      for (const auto& d : o.inputs) dirs.push_back(d.c_str());
      int conflict = 0;
      Check(pg_report(dirs.data(), dirs.size(), o.out.c_str(), &conflict));
      if (conflict) std::fprintf(stderr, "warning: inputs carry different config hashes\n");
      std::printf("combined report written to %s\n", o.out.c_str());
    }
  } catch (const CheckFailed& f) {
    return f.code;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) { return Run(argc, argv); }

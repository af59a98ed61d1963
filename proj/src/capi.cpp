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

#include "pulseguard/pulseguard.h"

#include <exception>
#include <mutex>
#include <new>
#include <string>

#include "pulseguard/detector.hpp"
#include "pulseguard/error.hpp"
#include "pulseguard/io.hpp"
#include "pulseguard/nnet.hpp"
#include "pulseguard/pipeline.hpp"

struct pg_config {
  pulseguard::pipeline::PipelineConfig cfg;
};

struct pg_model {
  pulseguard::nnet::ModelParams params;
};

namespace {

using pulseguard::Error;
using pulseguard::ErrorCode;
namespace pipeline = pulseguard::pipeline;

thread_local std::string g_last_error;

pg_status Ok() {
  g_last_error.clear();
  return PG_OK;
}

pg_status Fail(pg_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <class F>
pg_status Guard(F&& f) {
  try {
    f();
    return Ok();
  } catch (const Error& e) {
    return Fail(static_cast<pg_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return Fail(PG_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return Fail(PG_INTERNAL, e.what());
  }
}

#define PG_REQUIRE_ARG(cond, what) \
  if (!(cond)) return Fail(PG_INVALID_ARGUMENT, what)

}  // namespace

extern "C" {

const char* pg_version(void) { return "0.1.0"; }

const char* pg_status_name(pg_status status) {
  switch (status) {
    case PG_OK: return "ok";
    case PG_INVALID_ARGUMENT: return "invalid argument";
    case PG_CONFIG: return "config error";
    case PG_IO: return "I/O error";
    case PG_DATA: return "data error";
    case PG_MODEL_FORMAT: return "model format error";
    case PG_MODEL_VERSION: return "model version mismatch";
    case PG_MODEL_DIMENSION: return "model dimension mismatch";
    case PG_RECORD_FORMAT: return "record format error";
    case PG_INSUFFICIENT_DATA: return "insufficient data";
    case PG_NO_ELIGIBLE: return "no eligible minutes";
    case PG_NON_FINITE: return "non-finite value";
    case PG_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* pg_last_error(void) { return g_last_error.c_str(); }

void pg_set_log_callback(pg_log_fn fn, void* user) {
  if (fn == nullptr) {
    pulseguard::io::SetLogSink(nullptr);
    return;
  }
  pulseguard::io::SetLogSink([fn, user](std::string_view line) {
    const std::string s(line);
    fn(s.c_str(), user);
  });
}

pg_status pg_config_default(pg_config** out) {
  PG_REQUIRE_ARG(out, "out is null");
  return Guard([&] { *out = new pg_config{}; });
}

pg_status pg_config_load(const char* path, pg_config** out) {
  PG_REQUIRE_ARG(path && out, "path and out must be non-null");
  return Guard([&] { *out = new pg_config{pipeline::LoadConfig(path)}; });
}

pg_status pg_config_parse(const char* json_text, pg_config** out) {
  PG_REQUIRE_ARG(json_text && out, "json_text and out must be non-null");
  return Guard([&] {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
      pulseguard::Fail(ErrorCode::kConfig, std::string("config is not valid JSON: ") + e.what());
    }
    *out = new pg_config{pipeline::ConfigFromJson(j)};
  });
}

void pg_config_free(pg_config* cfg) { delete cfg; }

pg_status pg_config_set_seed(pg_config* cfg, uint64_t seed) {
  PG_REQUIRE_ARG(cfg, "cfg is null");
  cfg->cfg.seed = seed;
  return Ok();
}

pg_status pg_config_set_threshold(pg_config* cfg, double threshold) {
  PG_REQUIRE_ARG(cfg, "cfg is null");
  return Guard([&] {
    auto d = cfg->cfg.detector;
    d.threshold = threshold;
    d.Validate();
    cfg->cfg.detector = d;
  });
}

pg_status pg_config_set_min_pvc(pg_config* cfg, const int* values, size_t n) {
  PG_REQUIRE_ARG(cfg && values && n > 0, "min_pvc needs at least one value");
  for (size_t i = 0; i < n; ++i)
    PG_REQUIRE_ARG(values[i] >= 1, "min_pvc values must be >= 1");
  cfg->cfg.min_pvc.assign(values, values + n);
  return Ok();
}

pg_status pg_config_hash(const pg_config* cfg, char* buf, size_t buf_len) {
  PG_REQUIRE_ARG(cfg && buf, "cfg and buf must be non-null");
  return Guard([&] {
    const auto h = pipeline::ConfigHash(cfg->cfg);
    pulseguard::Require(buf_len > h.size(), "hash buffer too small");
    h.copy(buf, h.size());
    buf[h.size()] = '\0';
  });
}

pg_status pg_synth(const pg_config* cfg, const char* out_dir, size_t* n_records) {
  PG_REQUIRE_ARG(cfg && out_dir, "cfg and out_dir must be non-null");
  return Guard([&] {
    const auto s = pipeline::RunSynth(cfg->cfg, out_dir);
    if (n_records) *n_records = s.n_records;
  });
}

pg_status pg_build_corpus(const pg_config* cfg, const char* records_dir, const char* out_dir,
                          size_t* n_train, size_t* n_val) {
  PG_REQUIRE_ARG(cfg && records_dir && out_dir, "cfg, records_dir and out_dir must be non-null");
  return Guard([&] {
    const auto c = pipeline::RunBuildCorpus(cfg->cfg, records_dir, out_dir);
    if (n_train) *n_train = c.train.size();
    if (n_val) *n_val = c.val.size();
  });
}

pg_status pg_train(const pg_config* cfg, const char* corpus_dir, const char* model_out,
                   const char* history_out, double* best_val_loss) {
  PG_REQUIRE_ARG(cfg && corpus_dir && model_out && history_out,
                 "cfg, corpus_dir, model_out and history_out must be non-null");
  return Guard([&] {
    const auto r = pipeline::RunTrain(cfg->cfg, corpus_dir, model_out, history_out);
    if (best_val_loss) {
      *best_val_loss = 0.0;
      for (const auto& e : r.history)
        if (e.epoch == r.best_epoch) *best_val_loss = e.val_loss;
    }
  });
}

pg_status pg_model_load(const char* path, pg_model** out) {
  PG_REQUIRE_ARG(path && out, "path and out must be non-null");
  return Guard([&] { *out = new pg_model{pulseguard::nnet::LoadModel(path)}; });
}

void pg_model_free(pg_model* model) { delete model; }

size_t pg_model_seq_len(const pg_model* model) {
  return model ? static_cast<size_t>(model->params.arch.seq_len) : 0;
}

pg_status pg_model_reconstruct(const pg_model* model, const double* samples, size_t n,
                               double* out) {
  PG_REQUIRE_ARG(model && samples && out, "model, samples and out must be non-null");
  return Guard([&] {
    const auto r = pulseguard::nnet::Reconstruct(model->params, std::span<const double>(samples, n));
    std::copy(r.begin(), r.end(), out);
  });
}

pg_status pg_detect(const pg_config* cfg, const pg_model* model, const char* records_dir,
                    const char* out_dir, int plot, size_t* n_regions) {
  PG_REQUIRE_ARG(cfg && model && records_dir && out_dir,
                 "cfg, model, records_dir and out_dir must be non-null");
  return Guard([&] {
    const auto s = pipeline::RunDetect(cfg->cfg, model->params, records_dir, out_dir, plot != 0);
    if (n_regions) *n_regions = s.n_regions;
  });
}

pg_status pg_eval(const pg_config* cfg, const char* detections_dir, const char* gs_csv,
                  const char* out_dir) {
  PG_REQUIRE_ARG(cfg && detections_dir && gs_csv && out_dir,
                 "cfg, detections_dir, gs_csv and out_dir must be non-null");
  return Guard([&] { pipeline::RunEval(cfg->cfg, detections_dir, gs_csv, out_dir); });
}

pg_status pg_report(const char* const* dirs, size_t n, const char* out_dir, int* hash_conflict) {
  PG_REQUIRE_ARG(dirs && n > 0 && out_dir, "report needs at least one input and an out_dir");
  return Guard([&] {
    std::vector<std::filesystem::path> paths;
    for (size_t i = 0; i < n; ++i) {
      pulseguard::Require(dirs[i] != nullptr, "null input directory");
      paths.emplace_back(dirs[i]);
    }
    const auto r = pipeline::RunReport(paths, out_dir);
    if (hash_conflict) *hash_conflict = r.hash_conflict ? 1 : 0;
  });
}

pg_status pg_pearson_r(const double* x, const double* y, size_t n, double* r) {
  PG_REQUIRE_ARG(x && y && r && n >= 2, "pearson_r needs two series of at least 2 samples");
  return Guard([&] {
    *r = pulseguard::detector::PearsonR(std::span<const double>(x, n), std::span<const double>(y, n));
  });
}

}  // extern "C"

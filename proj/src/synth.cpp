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

#include "pulseguard/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>

#include "json.hpp"
#include "pulseguard/error.hpp"
#include "pulseguard/io.hpp"

namespace pulseguard::synth {

namespace {

constexpr double kArCoefficient = 0.9;
constexpr double kPvcCoupling = 0.6;

// Template geometry in units of the beat's own interval.
constexpr double kSystolicCenter = 0.15;
constexpr double kSystolicSd = 0.06;
constexpr double kDicroticHeight = 0.35;
constexpr double kDicroticCenter = 0.45;
constexpr double kDicroticSd = 0.10;

double ClampIbi(double ibi) {
  static const double lo = std::nextafter(kMinIbiS, kMaxIbiS);
  static const double hi = std::nextafter(kMaxIbiS, kMinIbiS);
  return std::clamp(ibi, lo, hi);
}

double Gauss(double u, double center, double sd) {
  const double z = (u - center) / sd;
  return std::exp(-0.5 * z * z);
}

struct Episode {
  double start = 0.0;
  double end = 0.0;
};

std::vector<double> PoissonTimes(std::mt19937_64& rng, double rate_per_s,
                                 double horizon) {
  std::vector<double> times;
  if (rate_per_s <= 0.0) return times;
  std::exponential_distribution<double> gap(rate_per_s);
  for (double t = gap(rng); t < horizon; t += gap(rng)) times.push_back(t);
  return times;
}

}  // namespace

const char* ToString(BeatKind kind) {
  switch (kind) {
    case BeatKind::kSinus:
      return "sinus";
    case BeatKind::kPvc:
      return "pvc";
    case BeatKind::kAf:
      return "af";
  }
  return "?";
}

BeatKind BeatKindFromString(const std::string& s) {
  if (s == "sinus") return BeatKind::kSinus;
  if (s == "pvc") return BeatKind::kPvc;
  if (s == "af") return BeatKind::kAf;
  Fail(ErrorCode::kRecordFormat, "unknown beat kind '" + s + "'");
}

void BeatSchedule::Validate() const {
  Require(kinds.size() == onsets.size() && amplitudes.size() == onsets.size() &&
              intervals.size() == onsets.size(),
          "beat schedule columns differ in length");
  for (std::size_t k = 0; k < onsets.size(); ++k) {
    Require(amplitudes[k] > 0.0, "beat amplitude must be positive");
    Require(intervals[k] > kMinIbiS && intervals[k] < kMaxIbiS,
            "inter-beat interval outside the physiological clamp");
    if (k + 1 < onsets.size()) {
      Require(onsets[k + 1] > onsets[k], "beat onsets must increase");
      Require(std::abs(onsets[k] + intervals[k] - onsets[k + 1]) < 1e-9,
              "interval does not match the next onset");
    }
  }
}

void SynthConfig::Validate() const {
  auto check = [](bool ok, const char* field, const std::string& why) {
    Require(ok, std::string("synth.") + field + " " + why, ErrorCode::kConfig);
  };
  check(duration_s > 0.0 && std::isfinite(duration_s), "duration_s",
        "must be positive");
  check(base_hr_bpm >= 35.0 && base_hr_bpm <= 180.0, "base_hr_bpm",
        "must lie in [35, 180] bpm");
  check(hrv_sigma >= 0.0 && hrv_sigma < 0.5, "hrv_sigma", "must lie in [0, 0.5)");
  check(resp_rate_hz >= 0.0, "resp_rate_hz", "must be non-negative");
  check(resp_mod_depth >= 0.0 && resp_mod_depth < 1.0, "resp_mod_depth",
        "must lie in [0, 1)");
  check(noise_sigma >= 0.0, "noise_sigma", "must be non-negative");
  check(pvc_rate_per_min >= 0.0, "pvc_rate_per_min", "must be non-negative");
  check(af_episode_rate_per_hour >= 0.0, "af_episode_rate_per_hour",
        "must be non-negative");
  check(af_episode_len_s > 0.0, "af_episode_len_s", "must be positive");
  check(native_rate_hz >= 4.0 / kMinIbiS, "native_rate_hz",
        "must be at least 4x the maximum pulse frequency");
}

BeatSchedule BuildBeatSchedule(const SynthConfig& cfg, std::uint64_t rng_seed,
                               const ScheduleOverrides& overrides) {
  cfg.Validate();
  const double base = 60.0 / cfg.base_hr_bpm;
  Require(cfg.duration_s >= base,
          "synth.duration_s is too short to hold one beat", ErrorCode::kConfig);

  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  // Episodes and PVC events are drawn up front so the beat loop below only
  // decides acceptance.
  std::vector<Episode> episodes;
  for (double start : PoissonTimes(rng, cfg.af_episode_rate_per_hour / 3600.0,
                                   cfg.duration_s)) {
    if (!episodes.empty() && start < episodes.back().end) continue;
    episodes.push_back({start, start + cfg.af_episode_len_s});
  }
  const std::vector<double> pvc_events =
      PoissonTimes(rng, cfg.pvc_rate_per_min / 60.0, cfg.duration_s);

  const double innovation = cfg.hrv_sigma *
                            std::sqrt(1.0 - kArCoefficient * kArCoefficient);
  double eps = cfg.hrv_sigma * normal(rng);
  std::optional<double> pending;
  auto next_sinus_ibi = [&] {
    if (pending) {
      const double v = *pending;
      pending.reset();
      return v;
    }
    const double v = ClampIbi(base * (1.0 + eps));
    eps = kArCoefficient * eps + innovation * normal(rng);
    return v;
  };
  auto in_episode = [&](double t) {
    return std::any_of(episodes.begin(), episodes.end(), [t](const Episode& e) {
      return t >= e.start && t < e.end;
    });
  };
  auto episode_starts_in = [&](double a, double b) {
    return std::any_of(episodes.begin(), episodes.end(),
                       [=](const Episode& e) { return e.start > a && e.start <= b; });
  };

  BeatSchedule s;
  auto push = [&s](double t, BeatKind kind, double amp, double ibi) {
    s.onsets.push_back(t);
    s.kinds.push_back(kind);
    s.amplitudes.push_back(amp);
    s.intervals.push_back(ibi);
  };

  std::size_t next_event = 0;
  double t = 0.0;
  while (t < cfg.duration_s) {
    if (in_episode(t)) {
      const double ibi = ClampIbi(uniform(0.6, 1.4) * base);
      push(t, BeatKind::kAf, uniform(0.7, 1.1), ibi);
      t += ibi;
      continue;
    }
    const double ibi_a = next_sinus_ibi();
    const std::size_t beat_index = s.size();
    push(t, BeatKind::kSinus, 1.0, ibi_a);

    bool want_pvc = std::find(overrides.pvc_after_beats.begin(),
                              overrides.pvc_after_beats.end(),
                              beat_index) != overrides.pvc_after_beats.end();
    // Events that fell inside an episode or a compensatory pause are dropped.
    for (; next_event < pvc_events.size() && pvc_events[next_event] < t + ibi_a;
         ++next_event) {
      if (pvc_events[next_event] >= t) want_pvc = true;
    }
    if (want_pvc) {
      const double ibi_b = next_sinus_ibi();
      const double coupling = ClampIbi(kPvcCoupling * ibi_a);
      const double pvc_onset = t + coupling;
      const double next_sinus = t + ibi_a + ibi_b;
      if (pvc_onset < cfg.duration_s && !episode_starts_in(t, next_sinus)) {
        s.intervals.back() = coupling;
        const double pause = ClampIbi(next_sinus - pvc_onset);
        push(pvc_onset, BeatKind::kPvc, uniform(0.4, 0.6), pause);
        t = pvc_onset + pause;
        continue;
      }
      pending = ibi_b;
    }
    t += ibi_a;
  }
  return s;
}

double BeatTemplate(double u, double ibi) {
  return Gauss(u, kSystolicCenter * ibi, kSystolicSd * ibi) +
         kDicroticHeight * Gauss(u, kDicroticCenter * ibi, kDicroticSd * ibi);
}

double BeatTemplatePeak() {
  static const double peak = [] {
    // Newton on the derivative of the unit-interval template, started at the
    // systolic center where the dicrotic tail only nudges the maximum.
    double u = kSystolicCenter;
    for (int it = 0; it < 50; ++it) {
      const double zs = (u - kSystolicCenter) / kSystolicSd;
      const double zd = (u - kDicroticCenter) / kDicroticSd;
      const double gs = std::exp(-0.5 * zs * zs);
      const double gd = kDicroticHeight * std::exp(-0.5 * zd * zd);
      const double d1 = -gs * zs / kSystolicSd - gd * zd / kDicroticSd;
      const double d2 = gs * (zs * zs - 1.0) / (kSystolicSd * kSystolicSd) +
                        gd * (zd * zd - 1.0) / (kDicroticSd * kDicroticSd);
      const double step = d1 / d2;
      u -= step;
      if (std::abs(step) < 1e-15) break;
    }
    return BeatTemplate(u, 1.0);
  }();
  return peak;
}

dsp::Waveform RenderWaveform(const BeatSchedule& schedule,
                             const SynthConfig& cfg) {
  cfg.Validate();
  schedule.Validate();
  const double rate = cfg.native_rate_hz;
  const auto n = static_cast<std::size_t>(std::floor(cfg.duration_s * rate + 1e-9));
  Require(n > 0, "synth.duration_s yields no samples", ErrorCode::kConfig);
  std::vector<double> x(n, 0.0);
  const double peak = BeatTemplatePeak();

  for (std::size_t k = 0; k < schedule.size(); ++k) {
    const double onset = schedule.onsets[k];
    const double ibi = schedule.intervals[k];
    const double scale = schedule.amplitudes[k] / peak;
    // Support of both bumps out to six standard deviations.
    const double lo = onset + (kSystolicCenter - 6.0 * kSystolicSd) * ibi;
    const double hi = onset + (kDicroticCenter + 6.0 * kDicroticSd) * ibi;
    const auto i0 = static_cast<std::size_t>(std::max(0.0, std::ceil(lo * rate)));
    const auto i1 = std::min(n, static_cast<std::size_t>(std::max(0.0, std::floor(hi * rate) + 1)));
    for (std::size_t i = i0; i < i1; ++i) {
      const double u = static_cast<double>(i) / rate - onset;
      x[i] += scale * BeatTemplate(u, ibi);
    }
  }

  std::mt19937_64 noise_rng(cfg.seed ^ 0x6a09e667f3bcc909ULL);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double w_resp = 2.0 * std::numbers::pi * cfg.resp_rate_hz;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    x[i] *= 1.0 + cfg.resp_mod_depth * std::sin(w_resp * t);
    if (cfg.noise_sigma > 0.0) x[i] += cfg.noise_sigma * noise(noise_rng);
  }
  return dsp::MakeWaveform(rate, std::move(x));
}

std::vector<AnomalyInterval> AnomalyIntervalsFor(const BeatSchedule& schedule,
                                                 double duration_s) {
  std::vector<AnomalyInterval> raw;
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    const BeatKind kind = schedule.kinds[k];
    if (kind == BeatKind::kSinus) continue;
    const double start = schedule.onsets[k];
    const double end = std::min(duration_s, start + schedule.intervals[k]);
    if (!raw.empty() && raw.back().kind == kind &&
        start <= raw.back().end_s + 1e-9) {
      raw.back().end_s = std::max(raw.back().end_s, end);
    } else {
      raw.push_back({start, end, kind});
    }
  }
  return raw;
}

std::vector<GsMinute> GsMinutesFor(const BeatSchedule& schedule,
                                   double duration_s) {
  const auto minutes = static_cast<std::int64_t>(std::ceil(duration_s / 60.0 - 1e-12));
  std::vector<GsMinute> gs;
  for (std::int64_t m = 0; m < minutes; ++m) gs.push_back({m, 0});
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    if (schedule.kinds[k] != BeatKind::kPvc) continue;
    const auto m = static_cast<std::int64_t>(std::floor(schedule.onsets[k] / 60.0));
    if (m >= 0 && m < minutes) ++gs[static_cast<std::size_t>(m)].pvc_count;
  }
  return gs;
}

LabeledRecord SynthesizeRecord(const SynthConfig& cfg,
                               const std::string& record_id,
                               const ScheduleOverrides& overrides) {
  LabeledRecord r;
  r.record_id = record_id;
  r.config = cfg;
  r.schedule = BuildBeatSchedule(cfg, cfg.seed, overrides);
  r.waveform = RenderWaveform(r.schedule, cfg);
  r.anomaly_intervals = AnomalyIntervalsFor(r.schedule, cfg.duration_s);
  r.gs_minutes = GsMinutesFor(r.schedule, cfg.duration_s);
  return r;
}

std::string WaveformCsv(const dsp::Waveform& w) {
  std::string out = "t_seconds,value\n";
  out.reserve(out.size() + w.size() * 32);
  for (std::size_t i = 0; i < w.size(); ++i) {
    out += io::FormatDouble(static_cast<double>(i) / w.sample_rate_hz);
    out += ',';
    out += io::FormatDouble(w.samples[i]);
    out += '\n';
  }
  return out;
}

namespace {

nlohmann::json ConfigJson(const SynthConfig& c) {
  return {{"duration_s", c.duration_s},
          {"base_hr_bpm", c.base_hr_bpm},
          {"hrv_sigma", c.hrv_sigma},
          {"resp_rate_hz", c.resp_rate_hz},
          {"resp_mod_depth", c.resp_mod_depth},
          {"noise_sigma", c.noise_sigma},
          {"pvc_rate_per_min", c.pvc_rate_per_min},
          {"af_episode_rate_per_hour", c.af_episode_rate_per_hour},
          {"af_episode_len_s", c.af_episode_len_s},
          {"native_rate_hz", c.native_rate_hz},
          {"seed", c.seed}};
}

SynthConfig ConfigFromJson(const nlohmann::json& j) {
  SynthConfig c;
  c.duration_s = j.at("duration_s").get<double>();
  c.base_hr_bpm = j.at("base_hr_bpm").get<double>();
  c.hrv_sigma = j.at("hrv_sigma").get<double>();
  c.resp_rate_hz = j.at("resp_rate_hz").get<double>();
  c.resp_mod_depth = j.at("resp_mod_depth").get<double>();
  c.noise_sigma = j.at("noise_sigma").get<double>();
  c.pvc_rate_per_min = j.at("pvc_rate_per_min").get<double>();
  c.af_episode_rate_per_hour = j.at("af_episode_rate_per_hour").get<double>();
  c.af_episode_len_s = j.at("af_episode_len_s").get<double>();
  c.native_rate_hz = j.at("native_rate_hz").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

void WriteRecord(const LabeledRecord& record, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json beats = nlohmann::json::array();
  for (std::size_t k = 0; k < record.schedule.size(); ++k) {
    beats.push_back({record.schedule.onsets[k], ToString(record.schedule.kinds[k]),
                     record.schedule.amplitudes[k], record.schedule.intervals[k]});
  }
  nlohmann::json intervals = nlohmann::json::array();
  for (const auto& a : record.anomaly_intervals)
    intervals.push_back({{"start_s", a.start_s}, {"end_s", a.end_s}, {"kind", ToString(a.kind)}});
  nlohmann::json gs = nlohmann::json::array();
  for (const auto& g : record.gs_minutes)
    gs.push_back({{"minute_index", g.minute_index}, {"pvc_count", g.pvc_count}});

  const nlohmann::json doc = {
      {"record_id", record.record_id},
      {"population", record.population},
      {"duration_s", record.config.duration_s},
      {"sample_rate_hz", record.waveform.sample_rate_hz},
      {"n_samples", record.waveform.size()},
      {"config", ConfigJson(record.config)},
      {"anomaly_intervals", intervals},
      {"gs_minutes", gs},
      {"beats", beats}};
  io::WriteText(dir / "record.json", doc.dump(1) + "\n");
  io::WriteText(dir / "waveform.csv", WaveformCsv(record.waveform));
}

LabeledRecord ReadRecord(const std::filesystem::path& dir) {
  LabeledRecord r;
  const nlohmann::json doc = io::ReadJson(dir / "record.json", ErrorCode::kRecordFormat);
  try {
    r.record_id = doc.at("record_id").get<std::string>();
    r.population = doc.value("population", std::string{});
    r.config = ConfigFromJson(doc.at("config"));
    for (const auto& b : doc.at("beats")) {
      r.schedule.onsets.push_back(b.at(0).get<double>());
      r.schedule.kinds.push_back(BeatKindFromString(b.at(1).get<std::string>()));
      r.schedule.amplitudes.push_back(b.at(2).get<double>());
      r.schedule.intervals.push_back(b.at(3).get<double>());
    }
    for (const auto& a : doc.at("anomaly_intervals"))
      r.anomaly_intervals.push_back({a.at("start_s").get<double>(), a.at("end_s").get<double>(),
                                     BeatKindFromString(a.at("kind").get<std::string>())});
    for (const auto& g : doc.at("gs_minutes"))
      r.gs_minutes.push_back({g.at("minute_index").get<std::int64_t>(), g.at("pvc_count").get<int>()});
    r.waveform.sample_rate_hz = doc.at("sample_rate_hz").get<double>();
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kRecordFormat, (dir / "record.json").string() + ": " + e.what());
  }

  const std::string csv = io::ReadText(dir / "waveform.csv");
  std::istringstream lines(csv);
  std::string line;
  Require(static_cast<bool>(std::getline(lines, line)) && line == "t_seconds,value",
          (dir / "waveform.csv").string() + ": missing header", ErrorCode::kRecordFormat);
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    double value = 0.0;
    const char* first = line.data() + comma + 1;
    const char* last = line.data() + line.size();
    const auto res = comma == std::string::npos ? std::from_chars_result{first, std::errc::invalid_argument}
                                                : std::from_chars(first, last, value);
    Require(res.ec == std::errc{} && res.ptr == last,
            (dir / "waveform.csv").string() + ": bad row '" + line + "'",
            ErrorCode::kRecordFormat);
    r.waveform.samples.push_back(value);
  }
  r.waveform.quality_mask.assign(r.waveform.samples.size(), 1);
  Require(!r.waveform.samples.empty(), (dir / "waveform.csv").string() + ": no samples",
          ErrorCode::kRecordFormat);
  return r;
}

}  // namespace pulseguard::synth

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

#include "pulseguard/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "pulseguard/error.hpp"

namespace pulseguard::eval {

namespace {

constexpr double kTimeEps = 1e-9;

double Overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

std::optional<double> Ratio(std::int64_t num, std::int64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::string Fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

std::string PadRight(std::string s, std::size_t width) {
  // Width counts code points so "±" lines up.
  std::size_t cps = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++cps;
  if (cps < width) s.append(width - cps, ' ');
  return s;
}

nlohmann::json OptionalJson(std::optional<double> v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

std::vector<Interval> CoverageOf(const detector::Detection& d) {
  std::vector<Interval> cov;
  for (const auto& s : d.segments) cov.push_back({s.start_s, s.start_s + s.duration_s});
  return cov;
}

void AlignConfig::Validate() const {
  Require(min_coverage_s >= 0.0 && min_coverage_s <= 60.0,
          "eval.min_coverage_s must lie in [0, 60]", ErrorCode::kConfig);
  Require(min_anomaly_s > 0.0, "eval.min_anomaly_s must be positive", ErrorCode::kConfig);
}

std::vector<MinuteObservation> MinuteAlign(const std::string& record_id,
                                           std::span<const detector::AnomalyRegion> regions,
                                           std::span<const Interval> coverage,
                                           std::span<const synth::GsMinute> gs,
                                           const AlignConfig& cfg) {
  cfg.Validate();
  // Anomalous time only counts where PPG was covered.
  std::vector<Interval> pieces;
  for (const auto& r : regions) {
    for (const auto& c : coverage) {
      const double a = std::max(r.start_s, c.start_s);
      const double b = std::min(r.end_s, c.end_s);
      if (b > a) pieces.push_back({a, b});
    }
  }
  std::vector<MinuteObservation> out;
  for (const auto& g : gs) {
    const double m0 = 60.0 * static_cast<double>(g.minute_index);
    const double m1 = m0 + 60.0;
    MinuteObservation o;
    o.record_id = record_id;
    o.minute_index = g.minute_index;
    o.pvc_count = g.pvc_count;
    for (const auto& c : coverage) o.covered_s += Overlap(c.start_s, c.end_s, m0, m1);
    o.covered_s = std::min(o.covered_s, 60.0);
    if (o.covered_s + kTimeEps < cfg.min_coverage_s) continue;
    for (const auto& p : pieces) o.anomalous_s += Overlap(p.start_s, p.end_s, m0, m1);
    o.anomaly_flag = o.anomalous_s + kTimeEps >= cfg.min_anomaly_s;
    out.push_back(std::move(o));
  }
  return out;
}

std::optional<double> ConfusionMatrix::tpr() const { return Ratio(tp, tp + fn); }
std::optional<double> ConfusionMatrix::fnr() const { return Ratio(fn, tp + fn); }
std::optional<double> ConfusionMatrix::fpr() const { return Ratio(fp, fp + tn); }
std::optional<double> ConfusionMatrix::tnr() const { return Ratio(tn, fp + tn); }

ConfusionMatrix Confusion(std::span<const MinuteObservation> obs, int min_pvc) {
  Require(min_pvc >= 1, "min_pvc must be at least 1; 0 would make every minute positive");
  Require(!obs.empty(), "no eligible GS minutes to evaluate", ErrorCode::kNoEligible);
  ConfusionMatrix cm;
  for (const auto& o : obs) {
    const bool positive = o.pvc_count >= min_pvc;
    if (positive && o.anomaly_flag) ++cm.tp;
    else if (positive) ++cm.fn;
    else if (o.anomaly_flag) ++cm.fp;
    else ++cm.tn;
  }
  return cm;
}

SweepReport ConfusionSweep(std::span<const MinuteObservation> obs,
                           std::span<const int> min_pvc_values) {
  Require(!min_pvc_values.empty(), "confusion sweep needs at least one min_pvc value");
  SweepReport report;
  for (int k : min_pvc_values) report.per_min_pvc.emplace_back(k, Confusion(obs, k));
  report.prevalence.n_minutes = static_cast<std::int64_t>(obs.size());
  for (const auto& o : obs) report.prevalence.n_zero += o.pvc_count == 0 ? 1 : 0;
  for (int k : min_pvc_values) {
    std::int64_t n = 0;
    for (const auto& o : obs) n += o.pvc_count >= k ? 1 : 0;
    report.prevalence.at_least.emplace_back(k, n);
  }
  return report;
}

double AnomalyFraction(const detector::Detection& d) {
  Require(!d.segments.empty(), "record " + d.record_id + " has no usable segments",
          ErrorCode::kNoEligible);
  std::size_t flagged = 0;
  for (const auto& s : d.segments) flagged += s.flagged ? 1 : 0;
  return static_cast<double>(flagged) / static_cast<double>(d.segments.size());
}

PopulationStats ComputePopulationStats(const std::string& label,
                                       std::span<const std::string> record_ids,
                                       std::span<const double> fractions) {
  Require(!fractions.empty(), "population '" + label + "' has no records",
          ErrorCode::kNoEligible);
  Require(record_ids.size() == fractions.size(), "record ids and fractions differ in length");
  PopulationStats s;
  s.label = label;
  s.record_ids.assign(record_ids.begin(), record_ids.end());
  s.fractions.assign(fractions.begin(), fractions.end());
  double sum = 0.0;
  for (double f : fractions) {
    Require(f >= 0.0 && f <= 1.0, "anomaly fraction outside [0, 1]");
    sum += f;
    s.max = std::max(s.max, f);
  }
  s.avg = sum / static_cast<double>(fractions.size());
  double ss = 0.0;
  for (double f : fractions) ss += (f - s.avg) * (f - s.avg);
  s.sd = std::sqrt(ss / static_cast<double>(fractions.size()));
  return s;
}

std::string GroupThousands(std::int64_t n) {
  std::string digits = std::to_string(n < 0 ? -n : n);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return n < 0 ? "-" + out : out;
}

std::string Percent1(std::optional<double> rate) {
  return rate ? Fixed(100.0 * *rate, 1) + "%" : "n/a";
}

std::string ConfusionTable(const ConfusionMatrix& cm, int min_pvc) {
  auto cell = [](std::int64_t n, std::optional<double> rate, const char* what) {
    return GroupThousands(n) + " (" + Percent1(rate) + " " + what + ")";
  };
  std::string out = "GS positive: >= " + std::to_string(min_pvc) + " PVC/min, " +
                    GroupThousands(cm.total()) + " eligible minutes\n";
  out += PadRight("", 18) + "| " + PadRight("Anomaly in PPG: yes", 30) + "| Anomaly in PPG: no\n";
  out += PadRight("PVC in ECG: yes", 18) + "| " + PadRight(cell(cm.tp, cm.tpr(), "true positive"), 30) +
         "| " + cell(cm.fn, cm.fnr(), "false negative") + "\n";
  out += PadRight("PVC in ECG: no", 18) + "| " + PadRight(cell(cm.fp, cm.fpr(), "false positive"), 30) +
         "| " + cell(cm.tn, cm.tnr(), "true negative") + "\n";
  return out;
}

std::string PrevalenceLines(const Prevalence& p) {
  auto share = [&](std::int64_t n) {
    return GroupThousands(n) + " (" + Percent1(Ratio(n, p.n_minutes)) + ")";
  };
  std::string out = GroupThousands(p.n_minutes) + " eligible GS minutes\n";
  out += share(p.n_zero) + " are 0 PVCs/min observations\n";
  for (const auto& [k, n] : p.at_least)
    out += share(n) + " are >= " + std::to_string(k) + " PVCs/min observations\n";
  return out;
}

std::string PopulationTable(std::span<const PopulationStats> stats) {
  std::string out = PadRight("Population", 14) + "| " + PadRight("Avg (Stdev)", 18) + "| Max\n";
  for (const auto& s : stats) {
    const std::string avg = Fixed(100.0 * s.avg, 2) + "% (±" + Fixed(100.0 * s.sd, 1) + "%)";
    out += PadRight(s.label, 14) + "| " + PadRight(avg, 18) + "| " + Fixed(100.0 * s.max, 1) + "%\n";
  }
  return out;
}

nlohmann::json ConfusionJson(const ConfusionMatrix& cm) {
  return {{"counts", {{"tp", cm.tp}, {"fp", cm.fp}, {"fn", cm.fn}, {"tn", cm.tn}}},
          {"rates",
           {{"tpr", OptionalJson(cm.tpr())},
            {"fpr", OptionalJson(cm.fpr())},
            {"tnr", OptionalJson(cm.tnr())},
            {"fnr", OptionalJson(cm.fnr())}}}};
}

nlohmann::json SweepJson(const SweepReport& report) {
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [k, cm] : report.per_min_pvc) per[std::to_string(k)] = ConfusionJson(cm);
  nlohmann::json at_least = nlohmann::json::object();
  for (const auto& [k, n] : report.prevalence.at_least) at_least[std::to_string(k)] = n;
  return {{"per_min_pvc", per},
          {"prevalence",
           {{"n_minutes", report.prevalence.n_minutes},
            {"n_zero", report.prevalence.n_zero},
            {"at_least", at_least}}}};
}

nlohmann::json PopulationJson(std::span<const PopulationStats> stats) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& s : stats) {
    out[s.label] = {{"avg", s.avg},
                    {"sd", s.sd},
                    {"max", s.max},
                    {"n_records", s.fractions.size()},
                    {"record_ids", s.record_ids},
                    {"fractions", s.fractions}};
  }
  return out;
}

std::string GsCsv(std::span<const GsRow> rows) {
  std::string out = "record_id,minute_index,pvc_count\n";
  for (const auto& r : rows)
    out += r.record_id + "," + std::to_string(r.minute_index) + "," + std::to_string(r.pvc_count) + "\n";
  return out;
}

std::vector<GsRow> ParseGsCsv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  Require(static_cast<bool>(std::getline(in, line)) &&
              line.rfind("record_id,minute_index,pvc_count", 0) == 0,
          "GS CSV must start with header record_id,minute_index,pvc_count", ErrorCode::kData);
  std::vector<GsRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    GsRow row;
    bool ok = c2 != std::string::npos && c1 > 0;
    if (ok) {
      row.record_id = line.substr(0, c1);
      const char* b = line.data();
      auto r1 = std::from_chars(b + c1 + 1, b + c2, row.minute_index);
      auto r2 = std::from_chars(b + c2 + 1, b + line.size(), row.pvc_count);
      ok = r1.ec == std::errc{} && r1.ptr == b + c2 && r2.ec == std::errc{} &&
           r2.ptr == b + line.size() && row.minute_index >= 0 && row.pvc_count >= 0;
    }
    Require(ok, "GS CSV line " + std::to_string(line_no) + " is malformed: '" + line + "'",
            ErrorCode::kData);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace pulseguard::eval

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

#include "pulseguard/detector.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "pulseguard/error.hpp"
#include "pulseguard/io.hpp"

namespace pulseguard::detector {

namespace {

constexpr double kFlatSd = 1e-8;
constexpr double kTimeEps = 1e-9;

std::size_t WindowSamples(double seconds, double rate, const char* what) {
  const double exact = seconds * rate;
  const double rounded = std::round(exact);
  Require(rounded >= 1.0 && std::abs(exact - rounded) < 1e-9,
          std::string(what) + " must be a whole number of samples");
  return static_cast<std::size_t>(rounded);
}

template <class Stat>
Trace WindowedTrace(std::span<const double> seg, std::span<const double> recon,
                    double rate, double window_len_s, double stride_s, Stat&& stat) {
  Require(seg.size() == recon.size(), "segment and reconstruction differ in length");
  Require(rate > 0.0, "sample rate must be positive");
  const std::size_t win = WindowSamples(window_len_s, rate, "window length");
  const std::size_t stride = WindowSamples(stride_s, rate, "window stride");
  Require(win <= seg.size(), "window longer than segment");
  Trace trace{window_len_s, stride_s, {}};
  for (std::size_t start = 0; start + win <= seg.size(); start += stride) {
    trace.points.push_back({static_cast<double>(start) / rate,
                            stat(seg.subspan(start, win), recon.subspan(start, win))});
  }
  return trace;
}

}  // namespace

void DetectorConfig::Validate() const {
  Require(window_len_s > 0.0, "detector.window_len_s must be positive", ErrorCode::kConfig);
  Require(stride_s > 0.0, "detector.stride_s must be positive", ErrorCode::kConfig);
  Require(threshold > -1.0 && threshold <= 1.0, "detector.threshold must lie in (-1, 1]",
          ErrorCode::kConfig);
}

double PearsonR(std::span<const double> x, std::span<const double> y) {
  Require(x.size() == y.size(), "pearson_r needs equal lengths");
  Require(x.size() >= 2, "pearson_r needs at least two points");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  const bool flat_x = std::sqrt(sxx / n) < kFlatSd;
  const bool flat_y = std::sqrt(syy / n) < kFlatSd;
  if (flat_x && flat_y) return 1.0;
  if (flat_x || flat_y) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

Trace CorrelationTrace(std::span<const double> seg, std::span<const double> recon,
                       double sample_rate_hz, double window_len_s, double stride_s) {
  return WindowedTrace(seg, recon, sample_rate_hz, window_len_s, stride_s, PearsonR);
}

Trace AbsErrorTrace(std::span<const double> seg, std::span<const double> recon,
                    double sample_rate_hz, double window_len_s, double stride_s) {
  return WindowedTrace(seg, recon, sample_rate_hz, window_len_s, stride_s,
                       [](std::span<const double> a, std::span<const double> b) {
                         double sum = 0.0;
                         for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
                         return sum / static_cast<double>(a.size());
                       });
}

std::vector<AnomalyRegion> MergeRegions(std::vector<AnomalyRegion> regions, double max_gap_s) {
  std::vector<AnomalyRegion> out;
  for (auto& r : regions) {
    if (!out.empty() && r.start_s - out.back().end_s <= max_gap_s + kTimeEps) {
      out.back().end_s = std::max(out.back().end_s, r.end_s);
      out.back().min_r = std::min(out.back().min_r, r.min_r);
    } else {
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<AnomalyRegion> FlagRegions(const Trace& trace, double threshold,
                                       const std::string& record_id) {
  std::vector<AnomalyRegion> windows;
  for (const auto& p : trace.points) {
    if (p.value < threshold)
      windows.push_back({p.start_s, p.start_s + trace.window_len_s, p.value, record_id});
  }
  return MergeRegions(std::move(windows), trace.stride_s);
}

double Detection::CoveredSeconds() const {
  double s = 0.0;
  for (const auto& seg : segments) s += seg.duration_s;
  return s;
}

double Detection::AnomalousSeconds() const {
  double s = 0.0;
  for (const auto& r : regions) s += r.end_s - r.start_s;
  return s;
}

Detection Detect(const nnet::ModelParams& model, const dsp::Waveform& waveform,
                 const DetectorConfig& cfg, const std::string& record_id,
                 std::vector<SegmentDetail>* details) {
  cfg.Validate();
  Require(std::abs(waveform.sample_rate_hz - model.pipeline_rate_hz) < 1e-9,
          "waveform rate does not match the model's pipeline rate", ErrorCode::kData);
  std::vector<dsp::Segment> segments;
  for (auto& seg : dsp::Segmentize(waveform, record_id, model.segment_len_s, model.segment_len_s)) {
    auto norm = dsp::Normalize(seg);
    if (!norm.flat) segments.push_back(std::move(norm));
  }

  Detection det;
  det.record_id = record_id;
  det.no_coverage = segments.empty();
  if (segments.empty()) return det;

  const int steps = model.arch.seq_len;
  const std::size_t chunks = (segments.size() + kDetectChunk - 1) / kDetectChunk;
  std::vector<std::vector<double>> recon(segments.size());
  io::ParallelFor(chunks, [&](std::size_t c) {
    const std::size_t begin = c * kDetectChunk;
    const std::size_t end = std::min(segments.size(), begin + kDetectChunk);
    nnet::Matrix x(steps, static_cast<int>(end - begin));
    for (std::size_t s = begin; s < end; ++s) {
      Require(static_cast<int>(segments[s].samples.size()) == steps,
              "segment length does not match model seq_len", ErrorCode::kData);
      for (int t = 0; t < steps; ++t)
        x(t, static_cast<int>(s - begin)) = segments[s].samples[static_cast<std::size_t>(t)];
    }
    const nnet::Matrix y = nnet::ReconstructBatch(model, x);
    for (std::size_t s = begin; s < end; ++s) {
      const auto col = y.col(static_cast<int>(s - begin));
      recon[s].assign(col.data(), col.data() + col.size());
    }
  });

  std::vector<AnomalyRegion> all;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto& seg = segments[s];
    auto trace = CorrelationTrace(seg.samples, recon[s], seg.sample_rate_hz, cfg.window_len_s,
                                  cfg.stride_s);
    auto regions = FlagRegions(trace, cfg.threshold, record_id);
    SegmentResult res{seg.start_s, seg.duration_s, !regions.empty(), 1.0};
    for (const auto& p : trace.points) res.min_r = std::min(res.min_r, p.value);
    det.segments.push_back(res);
    for (auto& r : regions) {
      r.start_s += seg.start_s;
      r.end_s += seg.start_s;
    }
    if (details) details->push_back({seg, recon[s], trace, regions});
    all.insert(all.end(), regions.begin(), regions.end());
  }
  det.regions = MergeRegions(std::move(all), cfg.stride_s);
  return det;
}

std::string RegionsJsonl(const Detection& d) {
  std::string out;
  for (const auto& r : d.regions) {
    const nlohmann::json j = {{"record_id", d.record_id},
                              {"start_s", r.start_s},
                              {"end_s", r.end_s},
                              {"min_r", r.min_r}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<AnomalyRegion> ParseRegionsJsonl(const std::string& text) {
  std::vector<AnomalyRegion> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("start_s").get<double>(), j.at("end_s").get<double>(),
                     j.at("min_r").get<double>(), j.at("record_id").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      Fail(ErrorCode::kData, "regions line " + std::to_string(line_no) + ": " + e.what());
    }
    Require(out.back().end_s > out.back().start_s,
            "regions line " + std::to_string(line_no) + ": end_s must exceed start_s",
            ErrorCode::kData);
  }
  return out;
}

std::string SegmentSvg(const SegmentDetail& d, double threshold) {
  constexpr double kWidth = 800, kTop = 240, kBottom = 120, kPad = 10;
  const auto& x = d.segment.samples;
  const auto& y = d.reconstruction;
  const double dur = d.segment.duration_s;
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    lo = std::min({lo, x[i], y[i]});
    hi = std::max({hi, x[i], y[i]});
  }
  if (hi - lo < 1e-12) hi = lo + 1.0;
  auto px = [&](double t) { return kPad + (kWidth - 2 * kPad) * t / dur; };
  auto py_sig = [&](double v) { return kPad + (kTop - 2 * kPad) * (hi - v) / (hi - lo); };
  auto py_r = [&](double r) { return kTop + kPad + (kBottom - 2 * kPad) * (1.0 - r) / 2.0; };
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };
  auto polyline = [&](const std::vector<double>& v, const char* color) {
    std::string pts;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double t = static_cast<double>(i) / d.segment.sample_rate_hz;
      pts += fmt(px(t)) + "," + fmt(py_sig(v[i])) + " ";
    }
    return std::string("<polyline fill=\"none\" stroke=\"") + color +
           "\" stroke-width=\"1.2\" points=\"" + pts + "\"/>\n";
  };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kWidth) +
                    "\" height=\"" + fmt(kTop + kBottom) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const auto& r : d.regions) {
    const double a = px(r.start_s - d.segment.start_s);
    const double b = px(r.end_s - d.segment.start_s);
    svg += "<rect x=\"" + fmt(a) + "\" y=\"0\" width=\"" + fmt(b - a) + "\" height=\"" +
           fmt(kTop + kBottom) + "\" fill=\"#f4a6a6\" fill-opacity=\"0.5\"/>\n";
  }
  svg += polyline(x, "#1f4e9c");
  svg += polyline(y, "#d9822b");
  std::string pts;
  for (const auto& p : d.trace.points) {
    const double mid = p.start_s + d.trace.window_len_s / 2;
    pts += fmt(px(mid)) + "," + fmt(py_r(p.value)) + " ";
  }
  svg += "<polyline fill=\"none\" stroke=\"#333333\" stroke-width=\"1.2\" points=\"" + pts + "\"/>\n";
  svg += "<line x1=\"" + fmt(px(0)) + "\" x2=\"" + fmt(px(dur)) + "\" y1=\"" + fmt(py_r(threshold)) +
         "\" y2=\"" + fmt(py_r(threshold)) + "\" stroke=\"#c00000\" stroke-dasharray=\"4 3\"/>\n";
  svg += "<text x=\"" + fmt(kPad) + "\" y=\"" + fmt(kTop + kBottom - 2) +
         "\" font-size=\"11\" font-family=\"sans-serif\">" + d.segment.source_record_id + " @ " +
         fmt(d.segment.start_s) + " s, r threshold " + fmt(threshold) + "</text>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace pulseguard::detector

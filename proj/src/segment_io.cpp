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

#include <sstream>

#include "json.hpp"
#include "pulseguard/dsp.hpp"
#include "pulseguard/error.hpp"

namespace pulseguard::dsp {

std::string SegmentsJsonl(std::span<const Segment> segments) {
  std::string out;
  for (const auto& seg : segments) {
    const nlohmann::json line = {{"record_id", seg.source_record_id},
                                 {"start_s", seg.start_s},
                                 {"samples", seg.samples}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::vector<Segment> ParseSegmentsJsonl(const std::string& text,
                                        double sample_rate_hz) {
  std::vector<Segment> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Segment seg;
      seg.source_record_id = j.at("record_id").get<std::string>();
      seg.start_s = j.at("start_s").get<double>();
      seg.samples = j.at("samples").get<std::vector<double>>();
      seg.sample_rate_hz = sample_rate_hz;
      seg.duration_s = static_cast<double>(seg.samples.size()) / sample_rate_hz;
      seg.normalized = true;
      out.push_back(std::move(seg));
    } catch (const nlohmann::json::exception& e) {
      Fail(ErrorCode::kData,
           "segment corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace pulseguard::dsp

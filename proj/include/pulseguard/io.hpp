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

#ifndef PULSEGUARD_IO_HPP_
#define PULSEGUARD_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "pulseguard/error.hpp"

namespace pulseguard::io {

// Shortest decimal form that round-trips to the same double.
std::string FormatDouble(double v);

std::string ReadText(const std::filesystem::path& path);
void WriteText(const std::filesystem::path& path, std::string_view text);

// Parses a JSON file; parse failures are reported with the given code.
nlohmann::json ReadJson(const std::filesystem::path& path, ErrorCode on_parse_error);

// FNV-1a 64, rendered as 16 hex digits.
std::string HashHex(std::string_view bytes);

// Worker count: PULSEGUARD_THREADS when set and positive, else hardware
// concurrency.
std::size_t ThreadCount();

// Runs fn(i) for i in [0, n) on up to ThreadCount() workers. Work items must
// write to disjoint outputs; the first exception is rethrown.
void ParallelFor(std::size_t n, const std::function<void(std::size_t)>& fn);

using LogSink = std::function<void(std::string_view)>;
void SetLogSink(LogSink sink);
void Log(std::string_view message);

}  // namespace pulseguard::io

#endif  // PULSEGUARD_IO_HPP_

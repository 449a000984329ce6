/*
 * Copyright 2026 The espsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "espsim/simulator.hpp"

namespace espsim::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;   // invalid configuration or sweep key
inline constexpr int kExitIo = 2;        // unreadable file, parse error, bad usage
inline constexpr int kExitDeadlock = 3;
inline constexpr int kExitMaxCycles = 4;

inline constexpr Cycle kDefaultMaxCycles = 10'000'000;

struct SweepAxis {
  std::string key;  // dotted path into the config document, e.g. dram.latency_cycles
  std::vector<nlohmann::json> values;
};

struct RunManifest {
  std::filesystem::path config;
  std::filesystem::path out_dir = "espsim-out";
  TraceLevel trace = TraceLevel::Summary;
  std::optional<std::uint64_t> seed;
  Cycle max_cycles = kDefaultMaxCycles;
  std::vector<SweepAxis> axes;
  unsigned jobs = 1;
};

/// Parses "key=v1,v2,...". Each value is read as JSON when it parses,
/// otherwise as a string. Throws std::invalid_argument on an empty axis.
SweepAxis parse_axis(const std::string& text);

/// Sets `value` at the dotted `key` of `doc`. Numeric segments index arrays.
/// Throws std::invalid_argument when the path cannot be followed.
void apply_override(nlohmann::json& doc, const std::string& key, const nlohmann::json& value);

/// Writes `content` to `path` through a temporary sibling and a rename.
void write_atomic(const std::filesystem::path& path, const std::string& content);

int cmd_validate(const std::filesystem::path& config, std::ostream& out, std::ostream& err);
int cmd_run(const RunManifest& m, std::ostream& out, std::ostream& err);
int cmd_sweep(const RunManifest& m, std::ostream& out, std::ostream& err);

}  // namespace espsim::cli

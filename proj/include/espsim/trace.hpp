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

#include <ostream>
#include <string>
#include <vector>

#include "espsim/common.hpp"

namespace espsim {

/// One trace line: columns cycle, entity, event, detail.
struct TraceRecord {
  Cycle cycle = 0;
  std::string entity;
  std::string event;
  std::string detail;

  bool operator==(const TraceRecord&) const = default;
};

/// Quotes a CSV field when it holds a comma, quote or newline.
std::string csv_field(const std::string& s);
std::string to_csv_line(const TraceRecord& r);

class TraceSink {
 public:
  virtual ~TraceSink() = default;
  virtual void record(const TraceRecord& r) = 0;
};

class MemoryTraceSink : public TraceSink {
 public:
  void record(const TraceRecord& r) override { records_.push_back(r); }
  const std::vector<TraceRecord>& records() const { return records_; }

 private:
  std::vector<TraceRecord> records_;
};

/// Streams one CSV line per record; the caller owns the stream.
class StreamTraceSink : public TraceSink {
 public:
  explicit StreamTraceSink(std::ostream& os, bool header = true);
  void record(const TraceRecord& r) override;

 private:
  std::ostream& os_;
};

/// Run-wide event log shared by the sockets: timeline events, driver
/// actions and warnings. Records are appended in simulation order.
class EventLog {
 public:
  void add(Cycle cycle, std::string entity, std::string event, std::string detail = {});
  void warn(Cycle cycle, std::string entity, std::string what, std::string detail = {});

  const std::vector<TraceRecord>& records() const { return records_; }
  std::uint64_t warnings() const { return warnings_; }
  /// Records whose event equals `event`.
  std::vector<TraceRecord> find(const std::string& event) const;

 private:
  std::vector<TraceRecord> records_;
  std::uint64_t warnings_ = 0;
};

}  // namespace espsim

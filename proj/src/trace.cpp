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

#include "espsim/trace.hpp"

namespace espsim {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string to_csv_line(const TraceRecord& r) {
  return std::to_string(r.cycle) + ',' + csv_field(r.entity) + ',' + csv_field(r.event) + ',' + csv_field(r.detail);
}

StreamTraceSink::StreamTraceSink(std::ostream& os, bool header) : os_(os) {
  if (header) os_ << "cycle,entity,event,detail\n";
}

void StreamTraceSink::record(const TraceRecord& r) { os_ << to_csv_line(r) << '\n'; }

void EventLog::add(Cycle cycle, std::string entity, std::string event, std::string detail) {
  records_.push_back({cycle, std::move(entity), std::move(event), std::move(detail)});
}

void EventLog::warn(Cycle cycle, std::string entity, std::string what, std::string detail) {
  ++warnings_;
  add(cycle, std::move(entity), "WARN_" + what, std::move(detail));
}

std::vector<TraceRecord> EventLog::find(const std::string& event) const {
  std::vector<TraceRecord> out;
  for (const auto& r : records_)
    if (r.event == event) out.push_back(r);
  return out;
}

}  // namespace espsim

// Copyright 2026 The mesim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "mesim/metrics.hpp"
#include "mesim/simulator.hpp"

// Persisted run output: events as JSON lines, per-implant trace CSV, and a
// bundle file carrying everything metrics() needs.
namespace mesim::io {

nlohmann::json to_json(const Event& e);
Event event_from_json(const nlohmann::json& j);

void write_events_jsonl(std::ostream& out, const std::vector<Event>& events);
void write_trace_csv(std::ostream& out, const std::vector<TraceSample>& samples);
std::vector<TraceSample> read_trace_csv(std::istream& in);

// Bundle without the sampled traces (those live in the CSV files).
nlohmann::json bundle_to_json(const TraceBundle& b);
TraceBundle bundle_from_json(const nlohmann::json& j);

std::string trace_file_name(const std::string& implant);

// Writes events.jsonl, trace_<implant>.csv, bundle.json and metrics.json.
void write_run(const std::filesystem::path& dir, const TraceBundle& b, const MetricsReport& m);
TraceBundle read_run(const std::filesystem::path& dir);

}  // namespace mesim::io

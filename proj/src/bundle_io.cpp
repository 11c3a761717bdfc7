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

#include "mesim/bundle_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mesim::io {

using nlohmann::json;

namespace {

constexpr const char* kTraceHeader = "t,v_me,v_rect,v_store,v_dd_h,v_dd_l,v_load,i_load,phase";

void put(std::string& line, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  line += buf;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

json ledger_json(const LedgerSummary& l) {
  return {{"energy_in", l.energy_in},   {"energy_out", l.energy_out}, {"energy_lost", l.energy_lost},
          {"stored_initial", l.stored_initial}, {"stored_final", l.stored_final},
          {"quiescent", l.quiescent},   {"idle_time", l.idle_time},   {"residual", l.residual()}};
}

LedgerSummary ledger_from_json(const json& j) {
  LedgerSummary l;
  l.energy_in = j.at("energy_in").get<double>();
  l.energy_out = j.at("energy_out").get<double>();
  l.energy_lost = j.at("energy_lost").get<double>();
  l.stored_initial = j.at("stored_initial").get<double>();
  l.stored_final = j.at("stored_final").get<double>();
  l.quiescent = j.at("quiescent").get<double>();
  l.idle_time = j.at("idle_time").get<double>();
  return l;
}

}  // namespace

json to_json(const Event& e) {
  return {{"t", e.t}, {"cycle", e.cycle}, {"tx_cycle", e.tx_cycle}, {"source", e.source}, {"type", e.type},
          {"data", e.data}};
}

Event event_from_json(const json& j) {
  return {j.at("t").get<double>(),       j.at("cycle").get<Cycle>(),      j.at("tx_cycle").get<int>(),
          j.at("source").get<std::string>(), j.at("type").get<std::string>(), j.at("data")};
}

void write_events_jsonl(std::ostream& out, const std::vector<Event>& events) {
  for (const auto& e : events) out << to_json(e).dump() << '\n';
}

void write_trace_csv(std::ostream& out, const std::vector<TraceSample>& samples) {
  out << kTraceHeader << '\n';
  std::string line;
  for (const auto& s : samples) {
    line.clear();
    for (double v : {s.t, s.v_me, s.v_rect, s.v_store, s.v_dd_h, s.v_dd_l, s.v_load, s.i_load}) {
      put(line, v);
      line += ',';
    }
    line += std::to_string(s.phase);
    out << line << '\n';
  }
}

std::vector<TraceSample> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) throw std::runtime_error("unexpected trace header");
  std::vector<TraceSample> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    TraceSample s;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%d", &s.t, &s.v_me, &s.v_rect, &s.v_store,
                    &s.v_dd_h, &s.v_dd_l, &s.v_load, &s.i_load, &s.phase) != 9)
      throw std::runtime_error("malformed trace row: " + line);
    out.push_back(s);
  }
  return out;
}

json bundle_to_json(const TraceBundle& b) {
  json implants = json::array();
  for (const auto& im : b.implants) {
    implants.push_back({{"name", im.name},
                        {"seed", im.seed},
                        {"id", im.id ? json(identity::format_id(*im.id)) : json(nullptr)},
                        {"phase_offset", im.phase_offset},
                        {"ledger", ledger_json(im.ledger)},
                        {"max_v_rect", im.max_v_rect},
                        {"max_v_store", im.max_v_store},
                        {"trace", trace_file_name(im.name)}});
  }
  json events = json::array();
  for (const auto& e : b.events) events.push_back(to_json(e));
  return {{"schema_version", b.schema_version},
          {"scenario", b.scenario},
          {"seed", b.seed},
          {"carrier_hz", b.carrier_hz},
          {"cycles", b.cycles},
          {"decimation", b.decimation},
          {"invariants_checked", b.invariants_checked},
          {"implants", implants},
          {"events", events}};
}

TraceBundle bundle_from_json(const json& j) {
  TraceBundle b;
  b.schema_version = j.at("schema_version").get<int>();
  b.scenario = j.at("scenario").get<std::string>();
  b.seed = j.at("seed").get<std::uint64_t>();
  b.carrier_hz = j.at("carrier_hz").get<double>();
  b.cycles = j.at("cycles").get<Cycle>();
  b.decimation = j.at("decimation").get<int>();
  b.invariants_checked = j.at("invariants_checked").get<std::vector<std::string>>();
  for (const auto& o : j.at("implants")) {
    ImplantTrace im;
    im.name = o.at("name").get<std::string>();
    im.seed = o.at("seed").get<std::uint64_t>();
    if (!o.at("id").is_null()) im.id = identity::parse_id(o.at("id").get<std::string>());
    im.phase_offset = o.at("phase_offset").get<double>();
    im.ledger = ledger_from_json(o.at("ledger"));
    im.max_v_rect = o.at("max_v_rect").get<double>();
    im.max_v_store = o.at("max_v_store").get<double>();
    b.implants.push_back(std::move(im));
  }
  for (const auto& e : j.at("events")) b.events.push_back(event_from_json(e));
  return b;
}

std::string trace_file_name(const std::string& implant) { return "trace_" + implant + ".csv"; }

void write_run(const std::filesystem::path& dir, const TraceBundle& b, const MetricsReport& m) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_out(dir / "events.jsonl");
    write_events_jsonl(out, b.events);
  }
  for (const auto& im : b.implants) {
    auto out = open_out(dir / trace_file_name(im.name));
    write_trace_csv(out, im.samples);
  }
  open_out(dir / "bundle.json") << bundle_to_json(b).dump(1) << '\n';
  open_out(dir / "metrics.json") << mesim::to_json(m).dump(2) << '\n';
}

TraceBundle read_run(const std::filesystem::path& dir) {
  std::ifstream in(dir / "bundle.json");
  if (!in) throw std::runtime_error("cannot read " + (dir / "bundle.json").string());
  TraceBundle b = bundle_from_json(json::parse(in));
  for (auto& im : b.implants) {
    std::ifstream t(dir / trace_file_name(im.name));
    if (t) im.samples = read_trace_csv(t);
  }
  return b;
}

}  // namespace mesim::io

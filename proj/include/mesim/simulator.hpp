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

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mesim/scenario.hpp"

namespace mesim {

// A run stopped because a model invariant failed. The message names it.
class InvariantViolation : public std::runtime_error {
 public:
  InvariantViolation(std::string invariant, const std::string& detail)
      : std::runtime_error(invariant + ": " + detail), invariant_(std::move(invariant)) {}
  const std::string& invariant() const { return invariant_; }

 private:
  std::string invariant_;
};

struct Event {
  double t = 0.0;    // s, includes the implant's clock phase offset
  Cycle cycle = 0;
  int tx_cycle = -1;  // operating cycle of the TX plan the event falls in
  std::string source;  // "tx" or an implant name
  std::string type;
  nlohmann::json data = nlohmann::json::object();

  bool operator==(const Event&) const = default;
};

struct TraceSample {
  double t = 0.0;
  double v_me = 0.0;
  double v_rect = 0.0;
  double v_store = 0.0;
  double v_dd_h = 0.0;
  double v_dd_l = 0.0;
  double v_load = 0.0;
  double i_load = 0.0;
  int phase = 0;

  bool operator==(const TraceSample&) const = default;
};

struct LedgerSummary {
  double energy_in = 0.0;
  double energy_out = 0.0;
  double energy_lost = 0.0;
  double stored_initial = 0.0;
  double stored_final = 0.0;
  double quiescent = 0.0;  // part of energy_out drawn by the idle SoC
  double idle_time = 0.0;  // s the SoC was powered and not stimulating

  double residual() const { return energy_in - energy_out - energy_lost - (stored_final - stored_initial); }
  bool operator==(const LedgerSummary&) const = default;
};

struct ImplantTrace {
  std::string name;
  std::uint64_t seed = 0;
  std::optional<std::uint8_t> id;  // last loaded ID
  double phase_offset = 0.0;
  LedgerSummary ledger;
  double max_v_rect = 0.0;
  double max_v_store = 0.0;
  std::vector<TraceSample> samples;

  bool operator==(const ImplantTrace&) const = default;
};

struct TraceBundle {
  int schema_version = 1;
  std::string scenario;
  std::uint64_t seed = 0;
  double carrier_hz = kCarrierHz;
  Cycle cycles = 0;
  int decimation = 10;
  std::vector<Event> events;
  std::vector<ImplantTrace> implants;
  std::vector<std::string> invariants_checked;

  bool operator==(const TraceBundle&) const = default;
};

struct RunOptions {
  std::optional<int> trace_decimation;
  bool record_trace = true;
};

// Fixed-step kernel: one carrier cycle per step for every implant, with
// implants synchronised at cycle boundaries.
TraceBundle run(const Scenario& scenario, const RunOptions& options = {});

}  // namespace mesim

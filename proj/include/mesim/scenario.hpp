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
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mesim/channel.hpp"
#include "mesim/downlink.hpp"
#include "mesim/identity.hpp"
#include "mesim/powerpath.hpp"
#include "mesim/stimengine.hpp"

namespace mesim {

inline constexpr int kScenarioSchemaVersion = 1;

// Raised with every problem found in a scenario, not just the first.
class ScenarioError : public std::runtime_error {
 public:
  explicit ScenarioError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct ImplantSpec {
  std::string name;
  channel::Pose pose;
  std::uint64_t seed = 0;
  std::optional<std::uint8_t> fixed_id;
  stim::LoadModel load;
  double ref_error = 0.0;  // fractional process error of the voltage reference
};

// One operating cycle of the TX plan. A cycle without packets must be flagged
// trigger_only; it re-triggers the stimulus programmed earlier.
struct CyclePlan {
  std::vector<downlink::Packet> packets;
  bool trigger_only = false;
  Cycle charge_cycles = 0;
  Cycle guard_cycles = 64;
  Cycle stim_cycles = 0;
  std::optional<Cycle> period_cycles;  // if set, charge time fills the period
  int repeat = 1;
};

struct SchedulePlan {
  double ask_depth = 0.5;
  std::vector<CyclePlan> cycles;
  Cycle tail_cycles = 0;  // carrier left on after the last cycle
};

// A packet on air, for matching against what implants received.
struct TxPacket {
  Cycle start = 0;
  Cycle end = 0;
  int cycle_index = 0;
  downlink::Packet packet;
};

struct Scenario {
  int schema_version = kScenarioSchemaVersion;
  std::string name = "scenario";
  std::uint64_t seed = 1;
  channel::Scene scene;
  std::vector<ImplantSpec> implants;
  std::optional<SchedulePlan> plan;  // if absent, scene.schedule was given directly
  std::vector<TxPacket> tx_packets;
  int packets_per_cycle = 1;  // expected by the implants' data phase
  Cycle duration_cycles = 0;
  int steps_per_cycle = 1;
  bool allow_collisions = false;
  power::PowerParams power;
  stim::StimParams stim;
  identity::PufParams puf;
  power::CarrierDetector::Params detector;
  double lock_amplitude = 0.09;  // V
  int trace_decimation = 10;

  // ID each implant loads at its first POR (fixed or PUF-generated).
  std::uint8_t expected_id(std::size_t implant) const;
  double duration() const { return cycles_to_seconds(duration_cycles, scene.coil.carrier_freq); }
};

Scenario parse_scenario(const nlohmann::json& j);
Scenario load_scenario(const std::filesystem::path& path);

// Rebuilds the scene schedule and packet list from the plan.
void build_schedule(Scenario& s);

// Index of the operating cycle containing carrier cycle `k` (-1 before the
// first notch). Cycles begin at every odd-numbered notch.
class CycleIndex {
 public:
  CycleIndex() = default;
  explicit CycleIndex(const FieldSchedule& schedule);
  int at(Cycle k) const;
  std::size_t size() const { return starts_.size(); }

 private:
  std::vector<Cycle> starts_;
};

nlohmann::json schedule_to_json(const FieldSchedule& s);
FieldSchedule schedule_from_json(const nlohmann::json& j);

}  // namespace mesim

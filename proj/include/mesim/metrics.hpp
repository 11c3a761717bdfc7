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

#include <string>
#include <vector>

#include "json.hpp"
#include "mesim/simulator.hpp"

namespace mesim {

struct ImplantMetrics {
  std::string name;
  std::string id;
  double phase_offset = 0.0;
  int por_count = 0;
  int brown_outs = 0;
  int protocol_violations = 0;
  int bits_received = 0;
  int bit_errors = 0;
  int packets_received = 0;
  int packet_errors = 0;
  int packets_accepted = 0;
  int packets_rejected = 0;
  int stimuli = 0;
  int stimuli_skipped = 0;
  int stimuli_truncated = 0;
  double amplitude_min = 0.0;  // smallest driven |v_load| over all stimuli
  double amplitude_max = 0.0;
  double max_droop = 0.0;      // largest v_store drop across one stimulus
  double stim_efficiency = 0.0;  // delivered over drawn, all stimuli
  double ledger_residual = 0.0;
  double ledger_relative_residual = 0.0;
  double quiescent_power = 0.0;  // W while powered and idle

  bool operator==(const ImplantMetrics&) const = default;
};

struct SceneMetrics {
  double max_skew = 0.0;           // spread of clock phase offsets
  double transition_spread = 0.0;  // worst disagreement on a notch-driven transition
  double onset_spread = 0.0;       // worst stimulus onset spread within one cycle
  int stimulus_groups = 0;

  bool operator==(const SceneMetrics&) const = default;
};

struct MetricsReport {
  std::string scenario;
  std::vector<ImplantMetrics> implants;
  SceneMetrics scene;

  bool operator==(const MetricsReport&) const = default;
  const ImplantMetrics& implant(const std::string& name) const;
};

// Computed from the bundle alone so a persisted bundle replays to the same
// report.
MetricsReport metrics(const TraceBundle& bundle);

nlohmann::json to_json(const MetricsReport& r);

}  // namespace mesim

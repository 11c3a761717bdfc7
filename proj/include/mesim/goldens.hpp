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
#include <string>
#include <vector>

#include "mesim/metrics.hpp"
#include "mesim/simulator.hpp"

// Golden scenarios reproducing the reference measurements, each reduced to
// pass/fail checks with explicit tolerances.
namespace mesim::goldens {

struct Check {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  std::string note;
};

struct GoldenResult {
  std::string name;
  std::vector<Check> checks;
  double runtime = 0.0;  // s of wall clock for the simulation

  bool passed() const;
};

// Semantic view of a run used for exact event-log comparison: one line per
// accepted/rejected packet and per stimulus, grouped by operating cycle.
std::vector<std::string> semantic_events(const TraceBundle& b);
std::vector<std::string> addressing_expected_events();

GoldenResult regulation_droop(const std::filesystem::path& scenario_dir);
GoldenResult source_sweep(const std::filesystem::path& scenario_dir);
GoldenResult addressing(const std::filesystem::path& scenario_dir);
GoldenResult misalignment_map();
GoldenResult sync_offset(const std::filesystem::path& scenario_dir);

std::vector<GoldenResult> run_all(const std::filesystem::path& scenario_dir);

// Checks shared by every simulated golden: ledger closure and no brown-outs.
void ledger_checks(const TraceBundle& b, const MetricsReport& m, std::vector<Check>& out);

}  // namespace mesim::goldens

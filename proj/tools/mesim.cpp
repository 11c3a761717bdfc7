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

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mesim/bundle_io.hpp"
#include "mesim/goldens.hpp"
#include "mesim/linkbudget.hpp"
#include "mesim/metrics.hpp"
#include "mesim/scenario.hpp"
#include "mesim/simulator.hpp"
#include "mesim/stimengine.hpp"

#ifndef MESIM_SCENARIO_DIR
#define MESIM_SCENARIO_DIR "scenarios"
#endif

namespace {

enum Exit { kOk = 0, kInvariant = 1, kBadInput = 2 };

// "a:b:step" or "a,b,c" or a single value.
std::vector<double> parse_axis(const std::string& spec) {
  std::vector<double> out;
  if (spec.find(':') != std::string::npos) {
    double a = 0, b = 0, step = 0;
    if (std::sscanf(spec.c_str(), "%lf:%lf:%lf", &a, &b, &step) != 3 || step <= 0 || b < a)
      throw std::invalid_argument("bad range '" + spec + "', expected start:stop:step");
    for (int i = 0; a + i * step <= b + 1e-9 * step; ++i) out.push_back(a + i * step);
    return out;
  }
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  if (out.empty()) throw std::invalid_argument("empty axis '" + spec + "'");
  return out;
}

int cmd_run(const std::string& path, const std::string& out_dir, std::optional<std::uint64_t> seed,
            std::optional<int> decimation) {
  mesim::Scenario s;
  try {
    std::ifstream in(path);
    if (!in) throw mesim::ScenarioError({path + ": cannot open"});
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw mesim::ScenarioError({path + ": not valid JSON"});
    if (seed) j["seed"] = *seed;
    s = mesim::parse_scenario(j);
  } catch (const mesim::ScenarioError& e) {
    std::cerr << e.what() << '\n';
    return kBadInput;
  }
  try {
    const auto bundle = mesim::run(s, {.trace_decimation = decimation, .record_trace = true});
    const auto report = mesim::metrics(bundle);
    const std::filesystem::path dir = out_dir.empty() ? std::filesystem::path("out") / s.name : std::filesystem::path(out_dir);
    mesim::io::write_run(dir, bundle, report);
    std::printf("%s: %zu events, %lld cycles -> %s\n", s.name.c_str(), bundle.events.size(),
                static_cast<long long>(bundle.cycles), dir.string().c_str());
    for (const auto& m : report.implants)
      std::printf("  %-8s id %s  packets %d/%d ok  stimuli %d  droop %.3f V  ledger %.2e\n", m.name.c_str(),
                  m.id.c_str(), m.packets_received - m.packet_errors, m.packets_received, m.stimuli, m.max_droop,
                  m.ledger_relative_residual);
    std::printf("  all %zu invariants held\n", bundle.invariants_checked.size());
    return kOk;
  } catch (const mesim::InvariantViolation& e) {
    std::cerr << "invariant violated: " << e.what() << '\n';
    return kInvariant;
  }
}

int cmd_sweep(const std::string& scenario, const std::string& axial, const std::string& lateral,
              const std::string& xz, const std::string& yz, const std::string& tissue, double threshold,
              const std::string& out) {
  mesim::channel::Scene scene;
  if (!scenario.empty()) {
    try {
      scene = mesim::load_scenario(scenario).scene;
    } catch (const mesim::ScenarioError& e) {
      std::cerr << e.what() << '\n';
      return kBadInput;
    }
  } else {
    scene.coil.drive_current_peak =
        mesim::channel::calibrate_for_amplitude(scene.coil, scene.film, 1.0, 40e-3, 1.5);
    scene.poses = {mesim::channel::Pose{}};
  }
  std::ofstream file;
  if (!out.empty()) file.open(out);
  std::ostream& os = out.empty() ? std::cout : file;
  os << "tissue,axial_mm,lateral_mm,theta_xz_deg,theta_yz_deg,amplitude_v,pass\n";
  auto mm = [](std::vector<double> v) {
    for (auto& x : v) x *= 1e-3;
    return v;
  };
  const auto grid = mesim::linkbudget::make_grid(mm(parse_axis(axial)), mm(parse_axis(lateral)), parse_axis(xz),
                                                 parse_axis(yz));
  for (double t : parse_axis(tissue)) {
    scene.tissue_attenuation = t;
    for (const auto& p : mesim::linkbudget::operating_region(scene, grid, threshold)) {
      char line[160];
      std::snprintf(line, sizeof line, "%g,%g,%g,%g,%g,%.6f,%d\n", t, p.point.axial * 1e3, p.point.lateral * 1e3,
                    p.point.theta_xz, p.point.theta_yz, p.amplitude, p.pass ? 1 : 0);
      os << line;
    }
  }
  return kOk;
}

int cmd_goldens(const std::string& dir) {
  bool all = true;
  std::printf("%-17s %-44s %-6s %14s %14s %10s  %s\n", "golden", "check", "result", "value", "expected", "tol",
              "note");
  try {
    for (const auto& g : mesim::goldens::run_all(dir)) {
      for (const auto& c : g.checks) {
        std::printf("%-17s %-44s %-6s %14.6g %14.6g %10.3g  %s\n", g.name.c_str(), c.name.c_str(),
                    c.passed ? "PASS" : "FAIL", c.value, c.expected, c.tolerance, c.note.c_str());
      }
      std::printf("%-17s %-44s %-6s\n", g.name.c_str(), "== overall", g.passed() ? "PASS" : "FAIL");
      all = all && g.passed();
    }
  } catch (const mesim::ScenarioError& e) {
    std::cerr << e.what() << '\n';
    return kBadInput;
  } catch (const mesim::InvariantViolation& e) {
    std::cerr << "invariant violated: " << e.what() << '\n';
    return kInvariant;
  }
  return all ? kOk : kInvariant;
}

int cmd_derive(const mesim::stim::DroopAnchor& a, const mesim::power::PowerParams& p) {
  const auto d = mesim::stim::derive_cstore(a);
  const double v_target = std::max(p.driver_min_supply, p.supply_margin * a.amplitude);
  std::printf("regulated v_store      %.4f V (target %.4f V)\n", a.v_regulated, v_target);
  std::printf("after one stimulus     %.4f V\n", a.v_after);
  std::printf("stimulus               %.3f V, %.3f ms %s, %s, %.0f ohm\n", a.amplitude, a.pulse_width * 1e3,
              a.pw_is_total ? "total" : "per phase",
              a.mode == mesim::stim::Mode::Biphasic ? "biphasic" : "monophasic", a.resistance);
  std::printf("energy into load       %.6g J\n", d.load_energy);
  std::printf("driver efficiency      %.6f\n", d.efficiency);
  std::printf("energy from C_store    %.6g J\n", d.drawn_energy);
  std::printf("C_store = 2 E / (v1^2 - v2^2) = %.6g F (%.4f uF)\n", d.c_store, d.c_store * 1e6);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mesim: magnetoelectric implant network simulator"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Simulate a scenario and write traces, events and metrics");
  std::string scenario, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> decimation;
  run->add_option("scenario", scenario, "Scenario JSON file")->required();
  run->add_option("--out", out_dir, "Output directory (default out/<name>)");
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--trace-decimation", decimation, "Keep every K-th cycle in the trace CSV")
      ->check(CLI::PositiveNumber);

  auto* sweep = app.add_subcommand("sweep", "Pass/fail map over pose and source parameters (shmoo CSV)");
  std::string sweep_scenario, axial = "10:60:5", lateral = "0", xz = "0", yz = "0", tissue = "1", sweep_out;
  double threshold = mesim::linkbudget::kOperatingThreshold;
  sweep->add_option("--scenario", sweep_scenario, "Use this scenario's coil, film and gains (implant 0)");
  sweep->add_option("--axial-mm", axial, "Axial distances, start:stop:step or list")->capture_default_str();
  sweep->add_option("--lateral-mm", lateral, "Lateral offsets")->capture_default_str();
  sweep->add_option("--theta-xz", xz, "XZ rotations in degrees")->capture_default_str();
  sweep->add_option("--theta-yz", yz, "YZ rotations in degrees")->capture_default_str();
  sweep->add_option("--tissue", tissue, "Tissue attenuation factors")->capture_default_str();
  sweep->add_option("--threshold", threshold, "Operating threshold in volts")->capture_default_str();
  sweep->add_option("--out", sweep_out, "CSV file (default stdout)");

  auto* goldens = app.add_subcommand("goldens", "Run the golden scenario suite and print a pass/fail table");
  std::string golden_dir = MESIM_SCENARIO_DIR;
  goldens->add_option("--scenarios", golden_dir, "Directory holding the golden scenarios")->capture_default_str();

  auto* derive = app.add_subcommand("derive-cstore", "Storage capacitance from the regulation droop anchor");
  mesim::stim::DroopAnchor anchor;
  double pw_ms = anchor.pulse_width * 1e3;
  bool mono = false;
  derive->add_option("--v-regulated", anchor.v_regulated, "Supply before the pulse (V)")->capture_default_str();
  derive->add_option("--v-after", anchor.v_after, "Supply after the pulse (V)")->capture_default_str();
  derive->add_option("--amplitude", anchor.amplitude, "Stimulus amplitude (V)")->capture_default_str();
  derive->add_option("--pw-ms", pw_ms, "Pulse width (ms)")->capture_default_str();
  derive->add_option("--load", anchor.resistance, "Load resistance (ohm)")->capture_default_str();
  derive->add_flag("--monophasic", mono, "Single phase instead of biphasic");
  derive->add_flag("--pw-total", anchor.pw_is_total, "Pulse width spans both phases");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(scenario, out_dir, seed, decimation);
    if (*sweep) return cmd_sweep(sweep_scenario, axial, lateral, xz, yz, tissue, threshold, sweep_out);
    if (*goldens) return cmd_goldens(golden_dir);
    if (*derive) {
      anchor.pulse_width = pw_ms * 1e-3;
      anchor.mode = mono ? mesim::stim::Mode::Monophasic : mesim::stim::Mode::Biphasic;
      return cmd_derive(anchor, {});
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  }
  return kBadInput;
}

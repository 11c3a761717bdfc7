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


// Runs the acceptance criteria and prints one line per criterion.
// Exit status is nonzero if any criterion fails.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mesim/channel.hpp"
#include "mesim/downlink.hpp"
#include "mesim/goldens.hpp"
#include "mesim/identity.hpp"
#include "mesim/linkbudget.hpp"
#include "mesim/metrics.hpp"
#include "mesim/rng.hpp"
#include "mesim/scenario.hpp"
#include "mesim/simulator.hpp"
#include "mesim/stimengine.hpp"

using namespace mesim;

namespace {

const std::filesystem::path kScenarios = MESIM_SCENARIO_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome from_golden(const goldens::GoldenResult& g) {
  Outcome o{g.passed(), ""};
  for (const auto& c : g.checks) {
    if (c.passed) continue;
    if (!o.detail.empty()) o.detail += "; ";
    o.detail += c.name + " = " + fmt("%g", c.value) + (c.note.empty() ? "" : " (" + c.note + ")");
  }
  if (o.pass) o.detail = std::to_string(g.checks.size()) + " checks";
  return o;
}

Outcome addressability() { return from_golden(goldens::addressing(kScenarios)); }

Outcome droop() { return from_golden(goldens::regulation_droop(kScenarios)); }

Outcome source_variation() { return from_golden(goldens::source_sweep(kScenarios)); }

Outcome timing() {
  const double bit = kCyclesPerBit * kCarrierPeriod;
  bool ok = std::abs(bit - 193.94e-6) <= 0.005e-6;
  ok &= std::abs(1.0 / bit - 5156.25) <= 1e-6 && std::abs(1.0 / bit / 1e3 - 5.156) < 5e-4;
  ok &= kCarrierHz / kDataClockDivider == 10312.5 && kCarrierHz / kStimClockDivider == 82500.0;

  // The transmitted schedule honours the same bit length.
  const auto s = load_scenario(kScenarios / "addressing.json");
  for (const auto& seg : s.scene.schedule.segments())
    if (seg.kind == SegmentKind::Bit) ok &= seg.cycles == kCyclesPerBit;
  for (const auto& p : s.tx_packets) ok &= (p.end - p.start) == downlink::kPacketBits * kCyclesPerBit;
  return {ok, fmt("bit %.2f us", bit * 1e6) + fmt(", %.3f kbps", 1.0 / bit / 1e3) +
                  fmt(", clocks %.4f kHz", kDataClockHz / 1e3) + fmt(" / %.1f kHz", kStimClockHz / 1e3)};
}

Outcome synchronization() {
  const auto s = load_scenario(kScenarios / "sync4.json");
  double zmin = 1.0, zmax = 0.0, amax = 0.0;
  for (const auto& im : s.implants) {
    zmin = std::min(zmin, im.pose.axial_distance);
    zmax = std::max(zmax, im.pose.axial_distance);
    amax = std::max(amax, im.pose.theta_xz);
  }
  const bool scene_ok = s.implants.size() == 4 && zmin <= 15e-3 + 1e-12 && zmax >= 40e-3 - 1e-12 && amax >= 50.0;
  const auto m = metrics(run(s, {.trace_decimation = std::nullopt, .record_trace = false}));
  const bool ok = scene_ok && m.scene.stimulus_groups > 0 && m.scene.transition_spread <= kMaxClockSkew &&
                  m.scene.onset_spread <= kMaxClockSkew + kStimClockPeriod;
  return {ok, fmt("transition spread %.3g s", m.scene.transition_spread) +
                  fmt(", onset spread %.3g s", m.scene.onset_spread) +
                  " over " + std::to_string(m.scene.stimulus_groups) + " groups"};
}

Outcome misalignment() { return from_golden(goldens::misalignment_map()); }

Outcome efficiency() {
  bool ok = true;
  double worst = 1.0;
  for (int code = 0; code <= 14; ++code) {
    const double a = 0.25 * code;
    if (a < 1.5) continue;
    worst = std::min(worst, stim::driver_efficiency(a));
  }
  ok &= worst >= 0.90;
  const double at_full = stim::driver_efficiency(3.5);
  ok &= std::abs(at_full - 0.909) <= 1e-3;
  const double sys = stim::system_stim_efficiency(3.5, 1.2e-3, 20.0, stim::Mode::Biphasic);
  ok &= std::abs(sys - 0.90) <= 0.02;

  // Same figure from a simulated 20 Hz train: load energy over everything
  // drawn by the driver plus the idle SoC over the train.
  const auto s = load_scenario(kScenarios / "eff20hz.json");
  const auto b = run(s, {.trace_decimation = std::nullopt, .record_trace = false});
  const auto m = metrics(b);
  const auto& im = m.implants.at(0);
  ok &= std::abs(im.stim_efficiency - at_full) <= 1e-3;
  const double p_stim = 2.0 * 3.5 * 3.5 / 1000.0 * 1.2e-3 * 20.0;
  const double sim_sys = p_stim / (p_stim / im.stim_efficiency + im.quiescent_power);
  ok &= std::abs(sim_sys - 0.90) <= 0.02 && im.stimuli >= 20;
  return {ok, fmt("min %.4f", worst) + fmt(", 3.5 V %.4f", at_full) + fmt(", system %.4f", sys) +
                  fmt(" (simulated %.4f)", sim_sys)};
}

Outcome puf() {
  int ones = 0;
  const int cells = 5000;
  for (int i = 0; i < cells; ++i)
    ones += identity::make_cell(static_cast<std::uint64_t>(i) * 7919u, i % 8, 0.05).mismatch > 0.0;
  const double bias = static_cast<double>(ones) / cells;

  // Closed form from the binomial tail, checked against a vote simulation.
  const double p_tmv = identity::tmv_error_probability(0.2);
  const identity::PufCell cell{0.8416212335729143 * 0.05, 0.05};
  Rng noise(12);
  const int trials = 200000;
  int wrong = 0;
  for (int i = 0; i < trials; ++i) wrong += !identity::tmv(cell, noise);
  const double sim = static_cast<double>(wrong) / trials;
  const double sigma = std::sqrt(0.0042 * (1.0 - 0.0042) / trials);

  bool det = true;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) det &= identity::generate_id(seed, 0) == identity::generate_id(seed, 0);
  det &= identity::generate_id(475, 0).str() == "11010111" && identity::generate_id(4502, 0).str() == "01111000";

  const bool ok = std::abs(bias - 0.5) <= 0.02 && std::abs(sim - 0.0042) <= 3.0 * sigma &&
                  std::abs(p_tmv - 0.0042) <= 3.0 * sigma && det;
  return {ok, fmt("bias %.4f", bias) + fmt(", TMV closed form %.5f", p_tmv) + fmt(", simulated %.5f", sim) +
                  (det ? ", IDs deterministic" : ", IDs NOT deterministic")};
}

Outcome protocol() {
  Rng rng(2026);
  auto payload = [&] {
    downlink::PayloadLayout p;
    p.amp_code = rng.next_u64() & 0xF;
    p.pw_code = rng.next_u64() & 0xF;
    p.delay_code = rng.next_u64() & 0x1F;
    p.mode = rng.next_u64() & 1;
    p.ref_trim = rng.next_u64() & 0x1F;
    return p;
  };
  int codec_fail = 0;
  for (int id = 0; id < 256; ++id)
    for (int i = 0; i < 1000; ++i) {
      const downlink::Packet p{static_cast<std::uint8_t>(id), payload()};
      if (downlink::decode_packet(downlink::encode_packet(p)) != p) ++codec_fail;
    }

  // Every pose on the grid that receives at least 1.5 V must decode cleanly.
  channel::Scene scene;
  scene.coil.drive_current_peak = channel::calibrate_for_amplitude(scene.coil, scene.film, 1.0, 40e-3, 1.5);
  const double decay = std::exp(-kCarrierPeriod / scene.film.time_constant());
  long bits = 0, errors = 0;
  int poses = 0;
  for (double z = 5e-3; z <= 45e-3; z += 5e-3)
    for (double lat : {0.0, 5e-3, 10e-3, 15e-3})
      for (double xz : {0.0, 30.0, 50.0})
        for (double yz : {0.0, 40.0}) {
          scene.poses = {channel::Pose{z, lat, xz, yz}};
          const double unit = channel::steady_amplitude(scene, 0);
          if (unit < 1.5) continue;
          ++poses;
          for (int trial = 0; trial < 4; ++trial) {
            const std::vector<downlink::Packet> pk{{static_cast<std::uint8_t>(rng.next_u64()), payload()}};
            const auto sched = downlink::modulate(pk, 0.5, {300, 64, 100});
            std::vector<double> env;
            double e = 0.0;
            for (Cycle k = 0; k < sched.total_cycles(); ++k) {
              e = channel::envelope_step(e, unit * sched.level_at(k), decay);
              env.push_back(e);
            }
            downlink::RecoveredClock clk;
            clk.locked = true;
            const auto r = downlink::receive_packet(
                std::span(env).subspan(300 + kNotchCycles, downlink::kPacketBits * kCyclesPerBit), clk);
            const auto sent = downlink::encode_packet(pk[0]);
            bits += static_cast<long>(sent.size());
            if (r.bits.size() != sent.size()) {
              errors += static_cast<long>(sent.size());
              continue;
            }
            for (std::size_t i = 0; i < sent.size(); ++i) errors += sent[i] != r.bits[i];
          }
        }
  const bool ok = codec_fail == 0 && errors == 0 && poses > 0;
  return {ok, std::to_string(256 * 1000) + " round trips, " + std::to_string(codec_fail) + " failures; " +
                  std::to_string(errors) + " bit errors in " + std::to_string(bits) + " bits over " +
                  std::to_string(poses) + " poses"};
}

Outcome ledger() {
  bool ok = true;
  double worst = 0.0;
  for (const char* name : {"regulation_droop", "source_sweep", "addressing", "sync_offset", "sync4", "eff20hz", "idle"}) {
    const auto b = run(load_scenario(kScenarios / (std::string(name) + ".json")),
                       {.trace_decimation = std::nullopt, .record_trace = false});
    for (const auto& im : metrics(b).implants) worst = std::max(worst, im.ledger_relative_residual);
  }
  ok &= worst <= 1e-3;
  const auto idle = metrics(run(load_scenario(kScenarios / "idle.json"),
                                {.trace_decimation = std::nullopt, .record_trace = false}));
  const double q = idle.implants.at(0).quiescent_power;
  ok &= power::PowerParams{}.quiescent_power == 9e-6 && std::abs(q - 9e-6) <= 1e-12 * 9e-6;
  return {ok, fmt("worst relative residual %.3g", worst) + fmt(", idle drain %.12g W", q)};
}

Outcome link_budget() {
  channel::Scene scene;
  scene.poses = {channel::Pose{}};
  const double p = linkbudget::pte(scene, 0);
  const double safe = linkbudget::max_safe_power(30e-3).value;
  const double fom = linkbudget::figure_of_merit(40e-3, 6.2e-9);
  const bool ok = p == 0.0103 && safe == 3.8e-3 && std::abs(fom - 6.45) <= 0.01;
  return {ok, fmt("pte %.4f", p) + fmt(", safe power %.4g W", safe) + fmt(", FoM %.3f", fom)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"addressability", addressability},
      {"regulation droop", droop},
      {"source variation", source_variation},
      {"timing", timing},
      {"synchronization", synchronization},
      {"misalignment map", misalignment},
      {"efficiency", efficiency},
      {"PUF properties", puf},
      {"protocol properties", protocol},
      {"energy ledger", ledger},
      {"link-budget anchors", link_budget},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%2zu %-20s %s  %s\n", i + 1, criteria[i].first, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

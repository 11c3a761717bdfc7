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

#include "mesim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <tuple>

namespace mesim {

using nlohmann::json;

namespace {

struct Spread {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  int n = 0;
  void add(double t) {
    lo = std::min(lo, t);
    hi = std::max(hi, t);
    ++n;
  }
  double width() const { return n > 1 ? hi - lo : 0.0; }
};

}  // namespace

const ImplantMetrics& MetricsReport::implant(const std::string& name) const {
  for (const auto& m : implants)
    if (m.name == name) return m;
  throw std::out_of_range("no implant named " + name);
}

MetricsReport metrics(const TraceBundle& b) {
  MetricsReport r;
  r.scenario = b.scenario;
  std::map<std::string, std::size_t> slot;
  double off_lo = std::numeric_limits<double>::infinity(), off_hi = -off_lo;
  for (const auto& im : b.implants) {
    slot[im.name] = r.implants.size();
    ImplantMetrics m;
    m.name = im.name;
    m.id = im.id ? identity::format_id(*im.id) : "";
    m.phase_offset = im.phase_offset;
    m.ledger_residual = im.ledger.residual();
    m.ledger_relative_residual =
        std::abs(m.ledger_residual) / std::max({im.ledger.energy_in, im.ledger.stored_initial, 1e-30});
    m.quiescent_power = im.ledger.idle_time > 0.0 ? im.ledger.quiescent / im.ledger.idle_time : 0.0;
    m.amplitude_min = std::numeric_limits<double>::infinity();
    off_lo = std::min(off_lo, im.phase_offset);
    off_hi = std::max(off_hi, im.phase_offset);
    r.implants.push_back(m);
  }
  r.scene.max_skew = b.implants.empty() ? 0.0 : off_hi - off_lo;

  std::vector<const Event*> tx;
  for (const auto& e : b.events)
    if (e.type == "tx_packet") tx.push_back(&e);

  std::map<int, Spread> onsets;
  std::map<std::tuple<int, int, std::string>, Spread> transitions;
  std::map<std::pair<std::string, int>, int> ordinal;
  std::vector<double> drawn(r.implants.size()), delivered(r.implants.size());

  for (const auto& e : b.events) {
    const auto it = slot.find(e.source);
    if (it == slot.end()) continue;
    auto& m = r.implants[it->second];
    if (e.type == "por") ++m.por_count;
    else if (e.type == "brown_out") ++m.brown_outs;
    else if (e.type == "protocol_violation") ++m.protocol_violations;
    else if (e.type == "phase") {
      // Completion depends on each implant's own pulse; only broadcast-driven
      // transitions are expected to line up.
      if (e.data.at("cause").get<std::string>() == "stimulation_complete") continue;
      const int n = ordinal[{e.source, e.tx_cycle}]++;
      transitions[{e.tx_cycle, n, e.data.at("to").get<std::string>()}].add(e.t);
    } else if (e.type == "packet_rx") {
      ++m.packets_received;
      const auto bits = e.data.at("bits").get<std::string>();
      const bool ok = e.data.at("status").get<std::string>() == "ok";
      bool mismatch = false;
      const Cycle ws = e.data.at("window_start").get<Cycle>();
      for (const auto* t : tx) {
        if (ws < t->data.at("start").get<Cycle>() || ws >= t->data.at("end").get<Cycle>()) continue;
        const auto sent = t->data.at("bits").get<std::string>();
        m.bits_received += static_cast<int>(sent.size());
        for (std::size_t i = 0; i < sent.size(); ++i)
          if (i >= bits.size() || bits[i] != sent[i]) {
            ++m.bit_errors;
            mismatch = true;
          }
        break;
      }
      if (!ok || mismatch) ++m.packet_errors;
      (e.data.at("accepted").get<bool>() ? m.packets_accepted : m.packets_rejected)++;
    } else if (e.type == "stim_onset") {
      onsets[e.tx_cycle].add(e.t);
    } else if (e.type == "stim_skipped") {
      ++m.stimuli_skipped;
    } else if (e.type == "stim_end") {
      ++m.stimuli;
      if (e.data.at("truncated").get<bool>()) ++m.stimuli_truncated;
      m.amplitude_min = std::min(m.amplitude_min, e.data.at("v_load_min").get<double>());
      m.amplitude_max = std::max(m.amplitude_max, e.data.at("v_load_max").get<double>());
      m.max_droop = std::max(m.max_droop, e.data.at("v_store_start").get<double>() -
                                              e.data.at("v_store_min").get<double>());
      drawn[it->second] += e.data.at("energy_drawn").get<double>();
      delivered[it->second] += e.data.at("energy_load").get<double>();
    }
  }
  for (std::size_t i = 0; i < r.implants.size(); ++i) {
    auto& m = r.implants[i];
    if (m.stimuli == 0) m.amplitude_min = 0.0;
    m.stim_efficiency = drawn[i] > 0.0 ? delivered[i] / drawn[i] : 0.0;
  }
  for (const auto& [_, s] : transitions) r.scene.transition_spread = std::max(r.scene.transition_spread, s.width());
  for (const auto& [_, s] : onsets) {
    r.scene.onset_spread = std::max(r.scene.onset_spread, s.width());
    ++r.scene.stimulus_groups;
  }
  return r;
}

json to_json(const MetricsReport& r) {
  json implants = json::array();
  for (const auto& m : r.implants) {
    implants.push_back({{"name", m.name},
                        {"id", m.id},
                        {"phase_offset", m.phase_offset},
                        {"por_count", m.por_count},
                        {"brown_outs", m.brown_outs},
                        {"protocol_violations", m.protocol_violations},
                        {"bits_received", m.bits_received},
                        {"bit_errors", m.bit_errors},
                        {"packets_received", m.packets_received},
                        {"packet_errors", m.packet_errors},
                        {"packets_accepted", m.packets_accepted},
                        {"packets_rejected", m.packets_rejected},
                        {"stimuli", m.stimuli},
                        {"stimuli_skipped", m.stimuli_skipped},
                        {"stimuli_truncated", m.stimuli_truncated},
                        {"amplitude_min", m.amplitude_min},
                        {"amplitude_max", m.amplitude_max},
                        {"max_droop", m.max_droop},
                        {"stim_efficiency", m.stim_efficiency},
                        {"ledger_residual", m.ledger_residual},
                        {"ledger_relative_residual", m.ledger_relative_residual},
                        {"quiescent_power", m.quiescent_power}});
  }
  return {{"schema_version", 1},
          {"scenario", r.scenario},
          {"implants", implants},
          {"scene",
           {{"max_skew", r.scene.max_skew},
            {"transition_spread", r.scene.transition_spread},
            {"onset_spread", r.scene.onset_spread},
            {"stimulus_groups", r.scene.stimulus_groups}}}};
}

}  // namespace mesim

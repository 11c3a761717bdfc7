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

#include "mesim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "mesim/linkbudget.hpp"

namespace mesim {

using nlohmann::json;

namespace {

constexpr double kLedgerTolerance = 1e-3;
constexpr Cycle kLedgerCheckEvery = 4096;
constexpr double kEps = 1e-9;

const std::vector<std::string> kInvariants = {
    "energy ledger closes within 0.1%",
    "voltages finite and non-negative",
    "selector output equals max(v_rect, v_store)",
    "v_store within supply target after charging",
    "v_store within 4x peak v_rect",
    "biphasic charge balance on resistive loads",
    "at most one implant accepts a packet",
    "clock phase offset within 0.75 us",
    "every powered implant detects each notch once",
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

json payload_json(const downlink::PayloadLayout& p) {
  return {{"amp_code", p.amp_code}, {"pw_code", p.pw_code}, {"delay_code", p.delay_code},
          {"mode", p.mode ? "biphasic" : "monophasic"}, {"ref_trim", p.ref_trim}};
}

std::string_view status_name(downlink::Reception::Status s) {
  switch (s) {
    case downlink::Reception::Status::Ok: return "ok";
    case downlink::Reception::Status::CalibrationFailure: return "calibration_failure";
    case downlink::Reception::Status::FrameError: return "frame_error";
  }
  return "ok";
}

struct Implant {
  const ImplantSpec* spec = nullptr;
  std::size_t index = 0;
  double unit = 0.0;  // settled amplitude at full drive, coupling included
  double env = 0.0;
  double v_rect = 0.0;
  power::PowerState ps;
  power::CarrierDetector detector;
  power::Watchdog watchdog;
  power::PorDetector por;
  downlink::PhaseController pc;
  identity::IdentityUnit idu;
  identity::RegisterFile regs;
  power::RegulationTarget target;
  double phase_offset = 0.0;
  bool locked = false;
  std::vector<double> data;
  int received = 0;
  std::optional<stim::StimulusGenerator> gen;
  double pulse_v_min = 0.0;
  double pulse_v_max = 0.0;
  double v_load = 0.0;
  double i_load = 0.0;
  Cycle idle_cycles = 0;
  double idle_shortfall = 0.0;  // J of quiescent demand storage could not cover
  ImplantTrace trace;

  Implant(const Scenario& s, std::size_t i)
      : spec(&s.implants[i]),
        index(i),
        detector(s.detector),
        por(s.power),
        pc(s.packets_per_cycle * downlink::kPacketBits),
        idu(s.implants[i].seed, s.puf) {}
};

class Kernel {
 public:
  Kernel(const Scenario& s, const RunOptions& opt) : s_(s), index_(s.scene.schedule) {
    bundle_.scenario = s.name;
    bundle_.seed = s.seed;
    bundle_.carrier_hz = s.scene.coil.carrier_freq;
    bundle_.cycles = s.duration_cycles;
    bundle_.decimation = opt.trace_decimation.value_or(s.trace_decimation);
    bundle_.invariants_checked = kInvariants;
    record_ = opt.record_trace;
    if (bundle_.decimation < 1) throw std::invalid_argument("trace decimation must be at least 1");

    period_ = 1.0 / s.scene.coil.carrier_freq;
    decay_ = std::exp(-period_ / s.scene.film.time_constant());
    c_store_ = s.power.storage_capacitance();
    const auto coupling = channel::coupling_perturbation(s.scene.poses);
    implants_.reserve(s.implants.size());
    for (std::size_t i = 0; i < s.implants.size(); ++i) {
      Implant im(s, i);
      im.unit = channel::steady_amplitude(s.scene, i, 1.0, 1.0, coupling[i]);
      im.ps = power::PowerState::cold(c_store_);
      im.target = power::make_target(0.0, s.power);
      im.phase_offset = downlink::sample_phase_offset(mix_seed(im.spec->seed, s.seed), period_);
      im.trace.name = im.spec->name;
      im.trace.seed = im.spec->seed;
      im.trace.phase_offset = im.phase_offset;
      if (im.phase_offset > kMaxClockSkew + 1e-15)
        throw InvariantViolation(kInvariants[7], im.spec->name + " offset " + fmt(im.phase_offset));
      implants_.push_back(std::move(im));
    }
  }

  TraceBundle run() {
    emit_tx_events();
    for (Cycle k = 0; k < s_.duration_cycles; ++k) {
      const double t = static_cast<double>(k) * period_;
      const double level = s_.scene.schedule.level_at(k) * s_.scene.drive_profile(t);
      for (auto& im : implants_) step(im, k, level);
      if (k % kLedgerCheckEvery == 0) check_ledgers(k);
    }
    check_ledgers(s_.duration_cycles);
    finish();
    return std::move(bundle_);
  }

 private:
  void event(Cycle k, double t, std::string source, std::string type, json data = json::object()) {
    bundle_.events.push_back({t, k, index_.at(k), std::move(source), std::move(type), std::move(data)});
  }

  void event(const Implant& im, Cycle k, std::string type, json data = json::object()) {
    event(k, static_cast<double>(k) * period_ + im.phase_offset, im.spec->name, std::move(type), std::move(data));
  }

  void emit_tx_events() {
    const auto& sched = s_.scene.schedule;
    for (std::size_t i = 0; i < sched.segments().size(); ++i) {
      if (sched.segments()[i].kind != SegmentKind::Notch) continue;
      const Cycle start = sched.start_of(i);
      event(start, static_cast<double>(start) * period_, "tx", "tx_notch",
            {{"start", start}, {"end", start + sched.segments()[i].cycles}});
    }
    for (const auto& p : s_.tx_packets) {
      event(p.start, static_cast<double>(p.start) * period_, "tx", "tx_packet",
            {{"id", identity::format_id(p.packet.device_id)},
             {"dump", downlink::packet_dump(p.packet)},
             {"bits", downlink::bits_to_string(downlink::encode_packet(p.packet))},
             {"start", p.start},
             {"end", p.end},
             {"payload", payload_json(p.packet.payload)}});
    }
  }

  double programmed_amplitude(const Implant& im, bool* clamped = nullptr) const {
    const auto d = stim::decode_settings(im.regs, s_.stim);
    if (clamped) *clamped = d.amp_code_clamped;
    const double scale = stim::reference_scale(im.regs.ref_trim, im.spec->ref_error, s_.stim);
    return std::min(s_.stim.max_amplitude, d.settings.amplitude * scale);
  }

  void set_registers(Implant& im, const identity::RegisterFile& rf) {
    im.regs = rf;
    im.target = power::make_target(programmed_amplitude(im), s_.power);
  }

  void transition(Implant& im, Cycle k, const downlink::PhaseTransition& tr) {
    event(im, k, "phase",
          {{"from", std::string(to_string(tr.from))}, {"to", std::string(to_string(tr.to))},
           {"cause", std::string(tr.cause)}});
    if (tr.cause == "protocol_violation") {
      event(im, k, "protocol_violation", {{"detail", "notch during stimulation"}});
      im.gen.reset();
    }
    if (tr.to == downlink::OperatingPhase::DataTransmission) {
      im.data.clear();
      im.received = 0;
    }
    if (tr.to == downlink::OperatingPhase::Stimulation) start_stimulus(im, k);
  }

  void start_stimulus(Implant& im, Cycle k) {
    bool clamped = false;
    auto settings = stim::decode_settings(im.regs, s_.stim).settings;
    settings.amplitude = programmed_amplitude(im, &clamped);
    if (clamped) event(im, k, "amp_code_clamped", {{"code", im.regs.amp_code}});
    im.gen.emplace(settings, im.spec->load, s_.power, s_.stim, s_.scene.coil.carrier_freq);
    im.pulse_v_min = std::numeric_limits<double>::infinity();
    im.pulse_v_max = 0.0;
  }

  void receive(Implant& im, Cycle k) {
    const std::size_t len = downlink::kPacketBits * kCyclesPerBit;
    const std::span<const double> slice(im.data.data() + im.received * len, len);
    downlink::RecoveredClock clk{period_, im.phase_offset, im.locked, 0};
    const auto r = downlink::receive_packet(slice, clk);
    const Cycle window_start = k + 1 - static_cast<Cycle>(len);
    json d = {{"status", std::string(status_name(r.status))},
              {"window_start", window_start},
              {"threshold", r.calibration.threshold},
              {"bits", downlink::bits_to_string(r.bits)}};
    bool accepted = false;
    if (r.packet) {
      d["id"] = identity::format_id(r.packet->device_id);
      d["dump"] = downlink::packet_dump(*r.packet);
      const auto out = identity::update_registers(im.regs, *r.packet, im.idu.id());
      accepted = out.accepted;
      if (accepted) {
        set_registers(im, out.registers);
        d["payload"] = payload_json(r.packet->payload);
      }
    }
    d["accepted"] = accepted;
    event(im, k, "packet_rx", std::move(d));
    ++im.received;
  }

  void brown_out(Implant& im, Cycle k) {
    event(im, k, "brown_out", {{"v_dd_l", im.ps.v_dd_l}});
    im.pc.reset();
    im.gen.reset();
    im.idu.clear();
    im.locked = false;
    im.data.clear();
    im.ps.por_fired = false;
    set_registers(im, {});
  }

  void step(Implant& im, Cycle k, double level) {
    const auto& P = s_.power;
    im.env = channel::envelope_step(im.env, im.unit * level, decay_);
    const bool present = im.detector.feed(im.env);
    const auto notch = im.watchdog.feed(k, present);

    const double v_target = power::rectify(im.env, P);
    im.v_rect = power::rectifier_hold(im.v_rect, v_target, period_, P.rect_hold_tau);
    im.ps.v_rect = im.v_rect;
    const double eta_r = im.env > 0.0 && v_target > 0.0 ? v_target / im.env : 0.0;
    const double p_in =
        eta_r > 0.0 ? linkbudget::available_power(im.env, s_.scene.film.source_resistance) * eta_r : 0.0;
    im.trace.max_v_rect = std::max(im.trace.max_v_rect, im.v_rect);

    const bool logic = im.por.fired();
    if (logic && !im.locked && im.env >= s_.lock_amplitude) {
      im.locked = true;
      event(im, k, "clock_lock", {{"phase_offset", im.phase_offset}, {"amplitude", im.env}});
    }

    if (logic && im.locked) {
      if (notch) {
        event(im, k, "notch", {{"start", notch->start}, {"end", notch->end}});
        if (auto tr = im.pc.on_notch(k)) transition(im, k, *tr);
      } else if (auto tr = im.pc.on_cycle(k)) {
        transition(im, k, *tr);
      }
      if (im.pc.phase() == downlink::OperatingPhase::DataTransmission) {
        im.data.push_back(im.env);
        const std::size_t len = downlink::kPacketBits * kCyclesPerBit;
        if (im.data.size() == (static_cast<std::size_t>(im.received) + 1) * len) receive(im, k);
      }
    }

    bool pulse = false;
    if (im.gen) {
      const auto st = im.gen->step(im.ps);
      pulse = st.driving || im.gen->stage() == stim::StimulusGenerator::Stage::Gap;
      if (st.driving) {
        im.pulse_v_min = std::min(im.pulse_v_min, std::abs(st.v_load));
        im.pulse_v_max = std::max(im.pulse_v_max, std::abs(st.v_load));
      }
      im.v_load = st.v_load;
      im.i_load = st.i_load;
      const auto& set = im.gen->summary();
      if (st.skipped) {
        event(im, k, "stim_skipped",
              {{"v_store", im.ps.v_store},
               {"required", std::max(P.driver_min_supply, P.supply_margin * set.amplitude) - P.hysteresis}});
      } else if (st.onset && set.amplitude > 0.0) {
        const auto& tm = im.gen->timing();
        event(im, k, "stim_onset",
              {{"amplitude", set.amplitude},
               {"phase_cycles", tm.phase},
               {"delay_cycles", tm.delay},
               {"phases", tm.phases},
               {"v_store", im.ps.v_store}});
      }
      if (st.truncated) event(im, k, "stim_truncated", {{"v_store", im.ps.v_store}});
      if (st.finished) {
        const auto& sm = im.gen->summary();
        if (!sm.skipped && sm.amplitude > 0.0) {
          const auto balance = sm.charge_phase1 + sm.charge_phase2;
          event(im, k, "stim_end",
                {{"amplitude", sm.amplitude},
                 {"v_load_min", im.pulse_v_min},
                 {"v_load_max", im.pulse_v_max},
                 {"charge_phase1", sm.charge_phase1},
                 {"charge_phase2", sm.charge_phase2},
                 {"energy_load", sm.energy_load},
                 {"energy_drawn", sm.energy_drawn},
                 {"efficiency", sm.efficiency},
                 {"v_store_start", sm.v_store_start},
                 {"v_store_min", sm.v_store_min},
                 {"residual_before_short", sm.residual_before_short},
                 {"truncated", sm.truncated}});
          if (im.gen->timing().phases == 2 && !sm.truncated && !im.spec->load.series_capacitance &&
              std::abs(balance) > 1e-9 * std::abs(sm.charge_phase1))
            throw InvariantViolation(kInvariants[5], im.spec->name + " net charge " + fmt(balance));
        }
        transition(im, k, im.pc.stimulation_complete(k));
        im.gen.reset();
      }
    } else {
      im.v_load = im.i_load = 0.0;
    }

    double used_input = 0.0;
    if (im.ps.por_fired && !pulse) {
      const auto r = power::quiescent_drain(im.ps, period_, false, P, p_in);
      const double demand = P.quiescent_power * period_;
      if (r.starved) im.idle_shortfall += demand - (r.state.energy_out - im.ps.energy_out);
      im.ps = r.state;
      used_input += r.from_input;
      // Counted in whole cycles so the idle drain reports the model constant
      // without summation drift.
      ++im.idle_cycles;
      const double n = static_cast<double>(im.idle_cycles);
      im.trace.ledger.quiescent = n * demand - im.idle_shortfall;
      im.trace.ledger.idle_time = n * period_;
    }
    if (!pulse) {
      const double before = im.ps.energy_in;
      const double left = std::max(0.0, p_in - used_input / period_);
      im.ps = power::scpc_step(im.ps, period_, im.target, left, P);
      const double added = im.ps.energy_in - before;
      used_input += added;
      if (added > 0.0 && im.ps.v_store > im.target.v_supply_target() + kEps)
        throw InvariantViolation(kInvariants[3], im.spec->name + " v_store " + fmt(im.ps.v_store));
    }
    if (used_input > 0.0 && eta_r > 0.0) {
      const double loss = used_input * (1.0 / eta_r - 1.0);
      im.ps.energy_in += loss;
      im.ps.energy_lost += loss;
    }

    im.ps.v_dd_h = power::supply_select(im.v_rect, im.ps.v_store);
    im.ps.v_dd_l = power::ldo_output(im.ps.v_dd_h, P);
    switch (power::por_check(im.por, im.ps)) {
      case power::PorEvent::Fired: {
        im.ps.por_fired = true;
        const auto& id = im.idu.on_por(true, im.spec->fixed_id);
        im.trace.id = id.bits;
        set_registers(im, {});
        event(im, k, "por", {{"id", id.str()}, {"stable", id.stable}, {"count", im.idu.por_count()}});
        break;
      }
      case power::PorEvent::BrownOut: brown_out(im, k); break;
      case power::PorEvent::None: break;
    }
    im.trace.max_v_store = std::max(im.trace.max_v_store, im.ps.v_store);

    check_state(im);
    if (record_ && k % bundle_.decimation == 0)
      im.trace.samples.push_back({static_cast<double>(k) * period_ + im.phase_offset, im.env, im.v_rect,
                                  im.ps.v_store, im.ps.v_dd_h, im.ps.v_dd_l, im.v_load, im.i_load,
                                  static_cast<int>(im.pc.phase())});
  }

  void check_state(const Implant& im) const {
    const auto& ps = im.ps;
    for (double v : {ps.v_rect, ps.v_store, ps.v_dd_h, ps.v_dd_l})
      if (!std::isfinite(v) || v < 0.0) throw InvariantViolation(kInvariants[1], im.spec->name);
    if (ps.v_dd_h != std::max(ps.v_rect, ps.v_store)) throw InvariantViolation(kInvariants[2], im.spec->name);
    if (ps.v_store > s_.power.pump_gain * im.trace.max_v_rect + kEps)
      throw InvariantViolation(kInvariants[4], im.spec->name + " v_store " + fmt(ps.v_store));
  }

  void check_ledgers(Cycle k) const {
    for (const auto& im : implants_) {
      const double scale = std::max({im.ps.energy_in, im.ps.stored_initial, 1e-15});
      if (std::abs(im.ps.ledger_residual()) > kLedgerTolerance * scale)
        throw InvariantViolation(kInvariants[0], im.spec->name + " at cycle " + std::to_string(k) + " residual " +
                                                     fmt(im.ps.ledger_residual()));
    }
  }

  void check_acceptance() const {
    std::map<Cycle, int> accepted;
    for (const auto& e : bundle_.events)
      if (e.type == "packet_rx" && e.data.value("accepted", false)) ++accepted[e.data.at("window_start").get<Cycle>()];
    if (s_.allow_collisions) return;
    for (const auto& [start, n] : accepted)
      if (n > 1) throw InvariantViolation(kInvariants[6], std::to_string(n) + " implants at cycle " + std::to_string(start));
  }

  // Each TX notch must be seen exactly once by every implant whose logic was
  // up and locked across it.
  void check_notches() const {
    for (const auto& im : implants_) {
      std::vector<Cycle> seen;
      for (const auto& e : bundle_.events) {
        if (e.source != im.spec->name) continue;
        if (e.type == "notch") seen.push_back(e.data.at("end").get<Cycle>());
      }
      for (const auto& e : bundle_.events) {
        if (e.type != "tx_notch") continue;
        const Cycle start = e.data.at("start").get<Cycle>(), end = e.data.at("end").get<Cycle>();
        if (!powered_across(im, start, end + kNotchCycles)) continue;
        const auto n = std::count_if(seen.begin(), seen.end(), [&](Cycle c) { return c >= end && c <= end + kNotchCycles; });
        if (n != 1)
          throw InvariantViolation(kInvariants[8], im.spec->name + " saw " + std::to_string(n) + " at cycle " +
                                                       std::to_string(start));
      }
    }
  }

  bool powered_across(const Implant& im, Cycle a, Cycle b) const {
    // Logic up (locked) before `a` and no brown-out until `b`.
    bool up = false;
    for (const auto& e : bundle_.events) {
      if (e.source != im.spec->name) continue;
      if (e.cycle < a) {
        if (e.type == "clock_lock") up = true;
        if (e.type == "brown_out") up = false;
      } else if (e.cycle <= b && e.type == "brown_out") {
        return false;
      }
    }
    return up && b < s_.duration_cycles;
  }

  void finish() {
    std::stable_sort(bundle_.events.begin(), bundle_.events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
    for (auto& im : implants_) {
      auto& l = im.trace.ledger;
      l.energy_in = im.ps.energy_in;
      l.energy_out = im.ps.energy_out;
      l.energy_lost = im.ps.energy_lost;
      l.stored_initial = im.ps.stored_initial;
      l.stored_final = im.ps.stored_energy();
      bundle_.implants.push_back(std::move(im.trace));
    }
    check_acceptance();
    check_notches();
  }

  const Scenario& s_;
  CycleIndex index_;
  TraceBundle bundle_;
  std::vector<Implant> implants_;
  double period_ = kCarrierPeriod;
  double decay_ = 0.0;
  double c_store_ = 0.0;
  bool record_ = true;
};

}  // namespace

TraceBundle run(const Scenario& scenario, const RunOptions& options) {
  Kernel kernel(scenario, options);
  return kernel.run();
}

}  // namespace mesim

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

#include "mesim/powerpath.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mesim/stimengine.hpp"

namespace mesim::power {

void PowerParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::domain_error(what);
  };
  require(rect_efficiency > 0.0 && rect_efficiency <= 1.0, "rectifier efficiency must lie in (0, 1]");
  require(rect_drop >= 0.0, "rectifier drop must be non-negative");
  require(rect_hold_tau > 0.0, "rectifier hold time constant must be positive");
  require(converter_efficiency > 0.0 && converter_efficiency <= 1.0, "converter efficiency must lie in (0, 1]");
  require(pump_gain >= 1.0, "pump gain must be at least 1");
  require(hysteresis >= 0.0, "hysteresis must be non-negative");
  require(quiescent_power >= 0.0, "quiescent power must be non-negative");
  require(driver_min_supply > 0.0 && supply_margin >= 1.0, "invalid driver supply rule");
  require(c_store >= 0.0, "storage capacitance must be non-negative");
  require(por_stable_cycles > 0, "POR stability window must be positive");
}

double PowerParams::storage_capacitance() const {
  return c_store > 0.0 ? c_store : stim::derive_cstore().c_store;
}

double RegulationTarget::v_supply_target() const { return std::max(driver_min_supply, margin * v_amp_ref); }

RegulationTarget make_target(double v_amp_ref, const PowerParams& params) {
  return {v_amp_ref, params.driver_min_supply, params.supply_margin};
}

PowerState PowerState::cold(double c_store) {
  PowerState s;
  s.c_store = c_store;
  return s;
}

double PowerState::ledger_residual() const {
  return energy_in - energy_out - energy_lost - (stored_energy() - stored_initial);
}

double PowerState::ledger_relative_residual() const {
  const double scale = std::max({energy_in, stored_initial, 1e-30});
  return std::abs(ledger_residual()) / scale;
}

double rectify(double v_me_amplitude, const PowerParams& params) {
  if (v_me_amplitude < 0.0) throw std::domain_error("ME amplitude must be non-negative");
  return std::max(0.0, params.rect_efficiency * v_me_amplitude - params.rect_drop);
}

double rectifier_hold(double v_rect, double target, double dt, double tau) {
  if (target >= v_rect) return target;
  return target + (v_rect - target) * std::exp(-dt / tau);
}

double supply_select(double v_rect, double v_store) { return std::max(v_rect, v_store); }

double ldo_output(double v_dd_h, const PowerParams& params) {
  return std::clamp(v_dd_h - params.ldo_dropout, 0.0, params.ldo_output);
}

PowerState scpc_step(PowerState s, double dt, const RegulationTarget& target, double available_power,
                     const PowerParams& params) {
  if (available_power < 0.0) throw std::domain_error("available power must be non-negative");
  if (!(dt > 0.0)) throw std::domain_error("time step must be positive");

  const double v_target = target.v_supply_target();
  if (s.scpc_connected && s.v_store >= v_target) s.scpc_connected = false;
  if (!s.scpc_connected && s.v_store < v_target - params.hysteresis) s.scpc_connected = true;

  s.v_dd_h = supply_select(s.v_rect, s.v_store);
  if (!s.scpc_connected || s.v_dd_h < params.scpc_min_supply || available_power == 0.0) return s;

  const double ceiling = std::min(v_target, params.pump_gain * s.v_rect);
  if (s.v_store >= ceiling) return s;

  const double e_now = s.stored_energy();
  const double e_room = 0.5 * s.c_store * ceiling * ceiling - e_now;
  const double e_offer = params.converter_efficiency * available_power * dt;
  const double delta = std::min(e_offer, e_room);
  const double used = delta / params.converter_efficiency;

  s.v_store = delta == e_room ? ceiling : std::sqrt(2.0 * (e_now + delta) / s.c_store);
  s.energy_in += used;
  s.energy_lost += used - delta;
  // Any rounding between sqrt and the stored-energy form is pushed into
  // the loss term so the ledger stays exact.
  s.energy_lost += (e_now + delta) - s.stored_energy();
  if (s.v_store >= v_target) s.scpc_connected = false;
  s.v_dd_h = supply_select(s.v_rect, s.v_store);
  return s;
}

bool draw_from_storage(PowerState& s, double energy) {
  const double e_now = s.stored_energy();
  if (energy > e_now) {
    s.v_store = 0.0;
    return false;
  }
  s.v_store = std::sqrt(std::max(0.0, 2.0 * (e_now - energy) / s.c_store));
  return true;
}

DrainResult quiescent_drain(PowerState s, double dt, bool stimulating, const PowerParams& params,
                            double input_power) {
  DrainResult r{s, 0.0, false};
  if (stimulating || dt <= 0.0) return r;
  const double demand = params.quiescent_power * dt;

  double from_input = 0.0;
  if (s.v_rect >= s.v_store && input_power > 0.0) from_input = std::min(demand, input_power * dt);
  const double from_store = demand - from_input;

  const double e_before = s.stored_energy();
  double supplied_store = from_store;
  if (from_store > 0.0 && !draw_from_storage(s, from_store)) {
    supplied_store = e_before;
    r.starved = true;
  }
  s.energy_in += from_input;
  s.energy_out += from_input + supplied_store;
  // Keep the ledger exact across the sqrt round trip.
  s.energy_lost += (e_before - supplied_store) - s.stored_energy();
  s.v_dd_h = supply_select(s.v_rect, s.v_store);
  r.state = s;
  r.from_input = from_input;
  return r;
}

std::optional<NotchEvent> Watchdog::feed(Cycle k, bool present) {
  if (!present) {
    ++absent_;
    return std::nullopt;
  }
  std::optional<NotchEvent> ev;
  if (absent_ >= detect_cycles_) ev = NotchEvent{k - absent_, k};
  absent_ = 0;
  return ev;
}

std::vector<NotchEvent> watchdog(std::span<const bool> present, int detect_cycles) {
  Watchdog wd(detect_cycles);
  std::vector<NotchEvent> out;
  for (std::size_t k = 0; k < present.size(); ++k)
    if (auto ev = wd.feed(static_cast<Cycle>(k), present[k])) out.push_back(*ev);
  return out;
}

CarrierDetector::CarrierDetector(Params p) : p_(p), decay_(std::exp(-1.0 / p.ref_decay_cycles)) {}

bool CarrierDetector::feed(double env) {
  ref_ = std::max(env, ref_ * decay_);
  return env >= p_.floor && env >= p_.fraction * ref_;
}

PorEvent PorDetector::step(double v_dd_l) {
  const double lo = params_.ldo_output * (1.0 - params_.por_tolerance);
  const double hi = params_.ldo_output * (1.0 + params_.por_tolerance);
  if (fired_) {
    if (v_dd_l < lo) {
      fired_ = false;
      stable_ = 0;
      return PorEvent::BrownOut;
    }
    return PorEvent::None;
  }
  if (v_dd_l >= lo && v_dd_l <= hi) {
    if (++stable_ >= params_.por_stable_cycles) {
      fired_ = true;
      return PorEvent::Fired;
    }
  } else {
    stable_ = 0;
  }
  return PorEvent::None;
}

PorEvent por_check(PorDetector& detector, const PowerState& state) { return detector.step(state.v_dd_l); }

}  // namespace mesim::power

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

#include <optional>
#include <span>
#include <vector>

#include "mesim/units.hpp"

// Behavioural implant power chain: active rectifier, 4X switched-capacitor
// converter charging C_store with disconnect regulation, the always-on
// supply selector, LDO/POR and the per-implant energy ledger.
namespace mesim::power {

struct PowerParams {
  double rect_efficiency = 0.95;
  double rect_drop = 0.1;         // V
  double rect_hold_tau = 10e-6;   // s, rectifier output RC when the source falls
  double converter_efficiency = 0.8;
  double pump_gain = 4.0;
  double hysteresis = 0.05;       // V below target before the converter reconnects
  double scpc_min_supply = 0.4;   // V on V_DD_H for the pump oscillator to run
  double ldo_output = 1.0;
  double ldo_dropout = 0.2;
  double por_tolerance = 0.05;    // fraction of ldo_output
  int por_stable_cycles = 10;
  double quiescent_power = 9e-6;  // W without stimulation
  double driver_min_supply = 1.5;
  double supply_margin = 1.1;
  double c_store = 0.0;           // F; 0 selects the derived default

  void validate() const;
  double storage_capacitance() const;
};

// Supply target follows the programmed amplitude with 10% headroom, floored
// at the stimulation driver minimum.
struct RegulationTarget {
  double v_amp_ref = 0.0;
  double driver_min_supply = 1.5;
  double margin = 1.1;

  double v_supply_target() const;
};

RegulationTarget make_target(double v_amp_ref, const PowerParams& params = {});

struct PowerState {
  double v_rect = 0.0;
  double v_store = 0.0;
  double v_dd_h = 0.0;
  double v_dd_l = 0.0;
  bool por_fired = false;
  bool scpc_connected = true;
  double c_store = 0.0;
  double energy_in = 0.0;
  double energy_out = 0.0;
  double energy_lost = 0.0;
  double stored_initial = 0.0;

  static PowerState cold(double c_store);

  double stored_energy() const { return 0.5 * c_store * v_store * v_store; }
  // in - out - lost - delta(stored); zero when the ledger closes.
  double ledger_residual() const;
  // Residual relative to the larger of energy_in and the initial store.
  double ledger_relative_residual() const;
};

double rectify(double v_me_amplitude, const PowerParams& params = {});
// Rectifier output after one step: follows a rising target immediately and
// discharges through the load otherwise.
double rectifier_hold(double v_rect, double target, double dt, double tau);

double supply_select(double v_rect, double v_store);
double ldo_output(double v_dd_h, const PowerParams& params = {});

// Advances the converter by `dt` with `available_power` watts at its input.
PowerState scpc_step(PowerState state, double dt, const RegulationTarget& target, double available_power,
                     const PowerParams& params = {});

struct DrainResult {
  PowerState state;
  double from_input = 0.0;  // J taken from the rectifier side
  bool starved = false;     // neither source could cover the demand
};

// Quiescent SoC draw. Supplied from the rectifier when the selector sits on
// V_rect and input power exists, otherwise from C_store.
DrainResult quiescent_drain(PowerState state, double dt, bool stimulating, const PowerParams& params = {},
                            double input_power = 0.0);

// Removes `energy` joules from C_store. Returns false (and empties the store)
// if not enough is held.
bool draw_from_storage(PowerState& state, double energy);

// Watchdog: a notch is an absence of the carrier for at least
// `detect_cycles` consecutive cycles, reported when the carrier returns.
struct NotchEvent {
  Cycle start = 0;   // first absent cycle
  Cycle end = 0;     // first present cycle after the gap
  Cycle length() const { return end - start; }
};

class Watchdog {
 public:
  explicit Watchdog(int detect_cycles = kNotchDetectCycles) : detect_cycles_(detect_cycles) {}

  std::optional<NotchEvent> feed(Cycle k, bool carrier_present);
  void reset() { absent_ = 0; }
  int detect_cycles() const { return detect_cycles_; }

 private:
  int detect_cycles_;
  Cycle absent_ = 0;
};

std::vector<NotchEvent> watchdog(std::span<const bool> carrier_present_per_cycle,
                                 int detect_cycles = kNotchDetectCycles);

// Carrier presence as seen by the rectifier comparators: the envelope must
// stay above a fraction of its recent peak and above an absolute floor.
class CarrierDetector {
 public:
  struct Params {
    double fraction = 0.2;
    double ref_decay_cycles = 256.0;
    double floor = 0.09;  // V
  };

  CarrierDetector() : CarrierDetector(Params{}) {}
  explicit CarrierDetector(Params p);

  bool feed(double envelope);
  double reference() const { return ref_; }

 private:
  Params p_;
  double decay_;
  double ref_ = 0.0;
};

enum class PorEvent { None, Fired, BrownOut };

// Fires once V_DD_L has sat inside the tolerance band for the required number
// of cycles; a later drop below the band is a brown-out and re-arms it.
class PorDetector {
 public:
  explicit PorDetector(const PowerParams& params = {}) : params_(params) {}

  PorEvent step(double v_dd_l);
  bool fired() const { return fired_; }

 private:
  PowerParams params_;
  int stable_ = 0;
  bool fired_ = false;
};

PorEvent por_check(PorDetector& detector, const PowerState& state);

}  // namespace mesim::power

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
#include <string_view>
#include <utility>
#include <vector>

#include "mesim/downlink.hpp"
#include "mesim/identity.hpp"
#include "mesim/powerpath.hpp"
#include "mesim/units.hpp"

// Voltage-mode stimulus generation from the register file, drawing on C_store
// through an LDO-style driver, with electrode shorting after each stimulus.
namespace mesim::stim {

enum class Mode { Monophasic, Biphasic };

struct StimParams {
  double amp_lsb = 0.25;           // V per amplitude code
  int max_amp_code = 14;           // code 15 is reserved
  double max_amplitude = 3.5;
  double pw_base = 0.15e-3;        // s at code 0
  double pw_step = 0.07e-3;        // s per code
  int delay_ticks_per_code = 2;    // stim-clock periods
  bool pw_is_total = false;        // true: pulse width spans both phases
  double min_pulse = 50e-6;        // s, lower clamp for free-form widths
  double interphase_gap = 0.0;     // s
  double short_window_max = 1e-3;  // s
  int trim_center = 16;
  double trim_step = 0.01;         // fractional reference change per trim code
};

struct StimSettings {
  double amplitude = 0.0;    // V
  double pulse_width = 0.15e-3;  // s per phase (see StimParams::pw_is_total)
  double delay = 0.0;        // s
  Mode mode = Mode::Biphasic;

  void validate(const StimParams& params = {}) const;
};

struct DecodedSettings {
  StimSettings settings;
  bool amp_code_clamped = false;
};

DecodedSettings decode_settings(const identity::RegisterFile& rf, const StimParams& params = {});

// Scale applied to the shared voltage reference by the trim code and the
// device's process error.
double reference_scale(int ref_trim, double process_error, const StimParams& params = {});

// Driver efficiency: amplitude over the regulated supply.
double driver_efficiency(double amplitude, const power::PowerParams& params = {});

struct LoadModel {
  double resistance = 1000.0;
  std::optional<double> series_capacitance;
  double residual_charge = 0.0;  // C held on the series capacitance

  void validate() const;
  double time_constant() const { return series_capacitance ? resistance * *series_capacitance : 0.0; }
  double shorting_window(const StimParams& params = {}) const;
};

// Electrode shorting after a stimulus leaves no residual charge.
LoadModel short_electrodes(LoadModel load);

struct StimSample {
  double t = 0.0;
  double v_load = 0.0;
  double i_load = 0.0;
  double v_store = 0.0;
};

struct PulseSummary {
  double amplitude = 0.0;
  double charge_phase1 = 0.0;
  double charge_phase2 = 0.0;
  double energy_load = 0.0;
  double energy_drawn = 0.0;
  double efficiency = 0.0;
  double v_store_start = 0.0;
  double v_store_min = 0.0;
  double residual_before_short = 0.0;
  Cycle onset_cycle = -1;  // relative to the generator start
  bool skipped = false;
  bool truncated = false;
  bool width_clamped = false;
};

struct StimWaveform {
  std::vector<StimSample> samples;
  PulseSummary summary;
};

// Timing of one stimulus in whole carrier cycles (stim-clock quantised).
struct StimTiming {
  Cycle delay = 0;
  Cycle phase = 0;
  Cycle gap = 0;
  Cycle phases = 2;
  Cycle short_window = 0;
  bool width_clamped = false;
};

StimTiming quantise(const StimSettings& s, const LoadModel& load, const StimParams& params = {},
                    double carrier_hz = kCarrierHz);

// Cycle-stepped stimulus state machine. One call to step() advances one
// carrier period.
class StimulusGenerator {
 public:
  enum class Stage { Delay, Phase1, Gap, Phase2, Short, Done };

  StimulusGenerator(const StimSettings& settings, LoadModel load, const power::PowerParams& power_params = {},
                    const StimParams& params = {}, double carrier_hz = kCarrierHz);

  struct Step {
    double v_load = 0.0;
    double i_load = 0.0;
    bool driving = false;    // a phase drew from storage this cycle
    bool onset = false;      // first cycle of phase 1
    bool skipped = false;    // undervoltage at onset
    bool truncated = false;  // supply collapsed mid-pulse
    bool finished = false;
  };

  Step step(power::PowerState& ps);

  Stage stage() const { return stage_; }
  bool active_pulse() const { return stage_ == Stage::Phase1 || stage_ == Stage::Gap || stage_ == Stage::Phase2; }
  bool done() const { return stage_ == Stage::Done; }
  const PulseSummary& summary() const { return summary_; }
  const LoadModel& load() const { return load_; }
  const StimTiming& timing() const { return timing_; }

 private:
  void enter(Stage s);
  void advance_if_elapsed();

  StimSettings settings_;
  LoadModel load_;
  power::PowerParams power_params_;
  StimParams params_;
  double dt_;
  StimTiming timing_;
  Stage stage_ = Stage::Delay;
  Cycle remaining_ = 0;
  Cycle elapsed_ = 0;
  double efficiency_ = 1.0;
  double v_cap_ = 0.0;  // series capacitance voltage
  PulseSummary summary_;
};

std::pair<StimWaveform, power::PowerState> run_stimulus(const StimSettings& settings, power::PowerState power,
                                                         LoadModel load, const downlink::RecoveredClock& clock,
                                                         const power::PowerParams& power_params = {},
                                                         const StimParams& params = {});

// C_store from the regulated-then-drooped supply around one stimulus.
struct DroopAnchor {
  double v_regulated = 2.75;
  double v_after = 2.15;
  double amplitude = 2.5;
  double pulse_width = 1.2e-3;
  double resistance = 1000.0;
  Mode mode = Mode::Biphasic;
  bool pw_is_total = false;
};

struct CstoreDerivation {
  DroopAnchor anchor;
  double efficiency = 0.0;
  double load_energy = 0.0;
  double drawn_energy = 0.0;
  double c_store = 0.0;
};

CstoreDerivation derive_cstore(const DroopAnchor& anchor = {});

// Stimulation-path efficiency of the whole implant at a repetition rate,
// counting quiescent draw against delivered stimulus energy.
double system_stim_efficiency(double amplitude, double pulse_width, double frequency, Mode mode,
                              double resistance = 1000.0, const power::PowerParams& params = {});

}  // namespace mesim::stim

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

#include "mesim/stimengine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mesim::stim {

void StimSettings::validate(const StimParams& params) const {
  if (!(amplitude >= 0.0 && amplitude <= params.max_amplitude + 1e-12))
    throw std::domain_error("stimulation amplitude outside [0, 3.5] V");
  if (!(pulse_width > 0.0)) throw std::domain_error("pulse width must be positive");
  if (!(delay >= 0.0 && delay <= 0.8e-3 + 1e-12)) throw std::domain_error("delay outside [0, 0.8] ms");
}

DecodedSettings decode_settings(const identity::RegisterFile& rf, const StimParams& params) {
  DecodedSettings d;
  int amp_code = rf.amp_code;
  if (amp_code > params.max_amp_code) {
    amp_code = params.max_amp_code;
    d.amp_code_clamped = true;
  }
  d.settings.amplitude = params.amp_lsb * amp_code;
  d.settings.pulse_width = params.pw_base + rf.pw_code * params.pw_step;
  d.settings.delay = rf.delay_code * params.delay_ticks_per_code * kStimClockPeriod;
  d.settings.mode = rf.mode ? Mode::Biphasic : Mode::Monophasic;
  return d;
}

double reference_scale(int ref_trim, double process_error, const StimParams& params) {
  return (1.0 + process_error) * (1.0 + (ref_trim - params.trim_center) * params.trim_step);
}

double driver_efficiency(double amplitude, const power::PowerParams& params) {
  if (!(amplitude > 0.0 && amplitude <= 3.5 + 1e-12)) throw std::domain_error("amplitude outside (0, 3.5] V");
  return amplitude / std::max(params.driver_min_supply, params.supply_margin * amplitude);
}

void LoadModel::validate() const {
  if (!(resistance > 0.0)) throw std::domain_error("load resistance must be positive");
  if (series_capacitance && !(*series_capacitance > 0.0))
    throw std::domain_error("series capacitance must be positive");
}

double LoadModel::shorting_window(const StimParams& params) const {
  return std::min(4.0 * time_constant(), params.short_window_max);
}

LoadModel short_electrodes(LoadModel load) {
  load.residual_charge = 0.0;
  return load;
}

StimTiming quantise(const StimSettings& s, const LoadModel& load, const StimParams& params, double carrier_hz) {
  const double tick = kStimClockDivider / carrier_hz;
  auto ticks = [&](double seconds) { return static_cast<Cycle>(std::llround(seconds / tick)); };

  StimTiming t;
  t.phases = s.mode == Mode::Biphasic ? 2 : 1;
  double width = s.pulse_width;
  if (params.pw_is_total && t.phases == 2) width /= 2.0;
  Cycle w = ticks(width);
  if (width < params.min_pulse) {
    t.width_clamped = true;
    w = static_cast<Cycle>(std::ceil(params.min_pulse / tick - 1e-9));
  }
  t.phase = std::max<Cycle>(w, 1) * kStimClockDivider;
  t.delay = ticks(s.delay) * kStimClockDivider;
  t.gap = t.phases == 2 ? ticks(params.interphase_gap) * kStimClockDivider : 0;
  t.short_window = static_cast<Cycle>(std::ceil(load.shorting_window(params) * carrier_hz - 1e-9));
  return t;
}

StimulusGenerator::StimulusGenerator(const StimSettings& settings, LoadModel load,
                                     const power::PowerParams& power_params, const StimParams& params,
                                     double carrier_hz)
    : settings_(settings), load_(load), power_params_(power_params), params_(params), dt_(1.0 / carrier_hz) {
  settings_.validate(params_);
  load_.validate();
  timing_ = quantise(settings_, load_, params_, carrier_hz);
  efficiency_ = settings_.amplitude > 0.0 ? driver_efficiency(settings_.amplitude, power_params_) : 1.0;
  if (load_.series_capacitance) v_cap_ = load_.residual_charge / *load_.series_capacitance;
  summary_.amplitude = settings_.amplitude;
  summary_.width_clamped = timing_.width_clamped;
  enter(Stage::Delay);
}

void StimulusGenerator::enter(Stage s) {
  stage_ = s;
  switch (s) {
    case Stage::Delay: remaining_ = timing_.delay; break;
    case Stage::Phase1: remaining_ = timing_.phase; break;
    case Stage::Gap: remaining_ = timing_.gap; break;
    case Stage::Phase2: remaining_ = timing_.phase; break;
    case Stage::Short:
      remaining_ = timing_.short_window;
      summary_.residual_before_short = load_.series_capacitance ? *load_.series_capacitance * v_cap_ : 0.0;
      load_.residual_charge = summary_.residual_before_short;
      break;
    case Stage::Done:
      remaining_ = 0;
      load_ = short_electrodes(load_);
      v_cap_ = 0.0;
      break;
  }
}

void StimulusGenerator::advance_if_elapsed() {
  while (remaining_ == 0 && stage_ != Stage::Done) {
    switch (stage_) {
      case Stage::Delay: enter(Stage::Phase1); break;
      case Stage::Phase1: enter(timing_.phases == 2 ? Stage::Gap : Stage::Short); break;
      case Stage::Gap: enter(Stage::Phase2); break;
      case Stage::Phase2: enter(Stage::Short); break;
      case Stage::Short: enter(Stage::Done); break;
      case Stage::Done: break;
    }
  }
}

StimulusGenerator::Step StimulusGenerator::step(power::PowerState& ps) {
  Step out;
  advance_if_elapsed();
  if (stage_ == Stage::Done) {
    out.finished = true;
    return out;
  }

  const double amp = settings_.amplitude;
  if (stage_ == Stage::Phase1 && remaining_ == timing_.phase) {
    out.onset = true;
    summary_.onset_cycle = elapsed_;
    summary_.v_store_start = ps.v_store;
    summary_.v_store_min = ps.v_store;
    const double required = std::max(power_params_.driver_min_supply, power_params_.supply_margin * amp);
    if (amp > 0.0 && ps.v_store < required - power_params_.hysteresis) {
      summary_.skipped = true;
      out.skipped = true;
      enter(Stage::Done);
      out.finished = true;
      ++elapsed_;
      return out;
    }
  }

  switch (stage_) {
    case Stage::Delay:
    case Stage::Gap:
      break;
    case Stage::Phase1:
    case Stage::Phase2: {
      const double hold = std::min(power_params_.driver_min_supply, power_params_.supply_margin * amp);
      if (amp > 0.0 && ps.v_store < hold) {
        summary_.truncated = true;
        out.truncated = true;
        enter(Stage::Short);
        break;
      }
      const double v = stage_ == Stage::Phase1 ? amp : -amp;
      double q = 0.0;
      if (load_.series_capacitance) {
        const double c = *load_.series_capacitance;
        const double v_next = v + (v_cap_ - v) * std::exp(-dt_ / load_.time_constant());
        q = c * (v_next - v_cap_);
        v_cap_ = v_next;
      } else {
        q = v / load_.resistance * dt_;
      }
      double e_load = v * q;
      double drawn = e_load / efficiency_;
      const double e_before = ps.stored_energy();
      if (!power::draw_from_storage(ps, drawn)) {
        drawn = e_before;
        e_load = drawn * efficiency_;
        summary_.truncated = true;
        out.truncated = true;
      }
      ps.energy_out += e_load;
      ps.energy_lost += drawn - e_load;
      ps.energy_lost += (e_before - drawn) - ps.stored_energy();
      ps.v_dd_h = power::supply_select(ps.v_rect, ps.v_store);

      (stage_ == Stage::Phase1 ? summary_.charge_phase1 : summary_.charge_phase2) += q;
      summary_.energy_load += e_load;
      summary_.energy_drawn += drawn;
      summary_.v_store_min = std::min(summary_.v_store_min, ps.v_store);
      out.v_load = v;
      out.i_load = q / dt_;
      out.driving = true;
      if (out.truncated) enter(Stage::Short);
      break;
    }
    case Stage::Short:
      if (load_.series_capacitance) {
        const double c = *load_.series_capacitance;
        const double v_next = v_cap_ * std::exp(-dt_ / load_.time_constant());
        out.i_load = c * (v_next - v_cap_) / dt_;
        out.v_load = 0.0;
        v_cap_ = v_next;
        load_.residual_charge = c * v_cap_;
      }
      break;
    case Stage::Done:
      break;
  }

  if (!out.truncated && remaining_ > 0) --remaining_;
  ++elapsed_;
  advance_if_elapsed();
  if (stage_ == Stage::Done) {
    out.finished = true;
    summary_.efficiency = summary_.energy_drawn > 0.0 ? summary_.energy_load / summary_.energy_drawn : 0.0;
  }
  return out;
}

std::pair<StimWaveform, power::PowerState> run_stimulus(const StimSettings& settings, power::PowerState power,
                                                         LoadModel load, const downlink::RecoveredClock& clock,
                                                         const power::PowerParams& power_params,
                                                         const StimParams& params) {
  const double carrier_hz = 1.0 / clock.period;
  StimulusGenerator gen(settings, load, power_params, params, carrier_hz);
  StimWaveform wf;
  Cycle k = 0;
  while (!gen.done()) {
    const auto s = gen.step(power);
    ++k;
    wf.samples.push_back({static_cast<double>(k) * clock.period + clock.phase_offset, s.v_load, s.i_load,
                          power.v_store});
    if (s.finished) break;
  }
  wf.summary = gen.summary();
  return {std::move(wf), power};
}

CstoreDerivation derive_cstore(const DroopAnchor& a) {
  CstoreDerivation d;
  d.anchor = a;
  const double phases = a.mode == Mode::Biphasic ? 2.0 : 1.0;
  const double width = a.pw_is_total ? a.pulse_width / phases : a.pulse_width;
  d.efficiency = driver_efficiency(a.amplitude);
  d.load_energy = phases * a.amplitude * a.amplitude / a.resistance * width;
  d.drawn_energy = d.load_energy / d.efficiency;
  d.c_store = 2.0 * d.drawn_energy / (a.v_regulated * a.v_regulated - a.v_after * a.v_after);
  return d;
}

double system_stim_efficiency(double amplitude, double pulse_width, double frequency, Mode mode,
                              double resistance, const power::PowerParams& params) {
  const double phases = mode == Mode::Biphasic ? 2.0 : 1.0;
  const double p_stim = amplitude * amplitude / resistance * pulse_width * phases * frequency;
  const double p_drawn = p_stim / driver_efficiency(amplitude, params);
  return p_stim / (p_drawn + params.quiescent_power);
}

}  // namespace mesim::stim

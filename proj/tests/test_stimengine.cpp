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


#include "doctest.h"

#include <cmath>

#include "mesim/powerpath.hpp"
#include "mesim/stimengine.hpp"

using namespace mesim;
using namespace mesim::stim;

namespace {

power::PowerState charged(double c, double v) {
  auto s = power::PowerState::cold(c);
  s.v_store = v;
  s.stored_initial = s.stored_energy();
  return s;
}

}  // namespace

TEST_CASE("register decode maps") {
  identity::RegisterFile rf;
  auto d = decode_settings(rf);
  CHECK(d.settings.amplitude == 0.0);
  CHECK(d.settings.pulse_width == doctest::Approx(0.15e-3));
  CHECK(d.settings.delay == 0.0);
  CHECK(d.settings.mode == Mode::Monophasic);

  rf = {10, 15, 16, 1, 0};
  d = decode_settings(rf);
  CHECK(d.settings.amplitude == doctest::Approx(2.5));
  CHECK(d.settings.pulse_width == doctest::Approx(1.2e-3));
  CHECK(d.settings.delay == doctest::Approx(32.0 / 82500.0));
  CHECK(d.settings.mode == Mode::Biphasic);
  CHECK_FALSE(d.amp_code_clamped);

  rf.delay_code = 31;
  CHECK(decode_settings(rf).settings.delay == doctest::Approx(62.0 / 82500.0));
  CHECK(decode_settings(rf).settings.delay <= 0.8e-3);
}

TEST_CASE("reserved amplitude code clamps to full scale") {
  identity::RegisterFile rf{15, 0, 0, 1, 0};
  const auto d = decode_settings(rf);
  CHECK(d.amp_code_clamped);
  CHECK(d.settings.amplitude == doctest::Approx(3.5));
  rf.amp_code = 14;
  CHECK_FALSE(decode_settings(rf).amp_code_clamped);
}

TEST_CASE("reference trim scales around the centre code") {
  CHECK(reference_scale(16, 0.0) == 1.0);
  CHECK(reference_scale(18, 0.0) == doctest::Approx(1.02));
  CHECK(reference_scale(16, -0.02) * reference_scale(18, 0.0) == doctest::Approx(0.98 * 1.02));
}

TEST_CASE("driver efficiency is amplitude over regulated supply") {
  CHECK(driver_efficiency(3.5) == doctest::Approx(0.909).epsilon(1e-3 / 0.909));
  CHECK(driver_efficiency(3.5) == doctest::Approx(1.0 / 1.1));
  for (int code = 6; code <= 14; ++code) CHECK(driver_efficiency(0.25 * code) >= 0.90);
  CHECK(driver_efficiency(1.0) == doctest::Approx(1.0 / 1.5));
  CHECK_THROWS(driver_efficiency(0.0));
  CHECK_THROWS(driver_efficiency(3.6));
}

TEST_CASE("storage capacitance from the droop anchor") {
  // Two 1.2 ms phases of 2.5 V into 1 kOhm, drawn through a 2.5/2.75 driver,
  // take the store from 2.75 V to 2.15 V.
  const double e_load = 2.0 * 2.5 * 2.5 / 1000.0 * 1.2e-3;
  const double e_drawn = e_load * 2.75 / 2.5;
  const double c = 2.0 * e_drawn / (2.75 * 2.75 - 2.15 * 2.15);
  const auto d = derive_cstore();
  CHECK(d.c_store == doctest::Approx(c).epsilon(1e-12));
  CHECK(d.c_store == doctest::Approx(11.2245e-6).epsilon(1e-5));
  CHECK(power::PowerParams{}.storage_capacitance() == d.c_store);
}

TEST_CASE("one biphasic pulse droops the store to the anchor") {
  const double c = derive_cstore().c_store;
  StimSettings s{2.5, 1.2e-3, 0.0, Mode::Biphasic};
  auto [wf, ps] = run_stimulus(s, charged(c, 2.75), {}, {});
  CHECK(ps.v_store == doctest::Approx(2.15).epsilon(0.05 / 2.15));
  CHECK(wf.summary.charge_phase1 == doctest::Approx(-wf.summary.charge_phase2));
  CHECK(wf.summary.efficiency == doctest::Approx(2.5 / 2.75));
  CHECK(ps.ledger_relative_residual() < 1e-9);
  CHECK_FALSE(wf.summary.skipped);
  CHECK_FALSE(wf.summary.truncated);
}

TEST_CASE("quantisation to stimulation clock ticks") {
  const LoadModel r;
  auto t = quantise({1.0, 0.15e-3, 0.0, Mode::Biphasic}, r);
  CHECK(t.phase == std::llround(0.15e-3 * 82500.0) * 4);
  CHECK(t.phases == 2);
  CHECK(t.short_window == 0);

  StimParams p;
  p.pw_is_total = true;
  t = quantise({1.0, 1.2e-3, 0.0, Mode::Biphasic}, r, p);
  CHECK(t.phase == std::llround(0.6e-3 * 82500.0) * 4);

  t = quantise({1.0, 10e-6, 0.0, Mode::Monophasic}, r);
  CHECK(t.width_clamped);
  CHECK(t.phase * kCarrierPeriod >= 50e-6);
  CHECK(t.phases == 1);

  LoadModel rc;
  rc.series_capacitance = 1e-6;
  CHECK(quantise({1.0, 0.15e-3, 0.0, Mode::Biphasic}, rc).short_window == 330);
  rc.series_capacitance = 1e-7;
  CHECK(quantise({1.0, 0.15e-3, 0.0, Mode::Biphasic}, rc).short_window == 132);
}

TEST_CASE("series capacitance is shorted back to zero after the pulse") {
  const double c = derive_cstore().c_store;
  LoadModel load;
  load.series_capacitance = 0.5e-6;
  load.residual_charge = 0.1e-6;
  StimSettings s{2.0, 0.5e-3, 0.0, Mode::Monophasic};
  StimulusGenerator gen(s, load, {}, {});
  auto ps = charged(c, 2.75);
  while (!gen.step(ps).finished) {}
  CHECK(gen.summary().residual_before_short != 0.0);
  CHECK(gen.load().residual_charge == 0.0);
  CHECK(ps.ledger_relative_residual() < 1e-9);

  // Exact RC charging from the starting residual.
  const double tau = 1000.0 * 0.5e-6;
  const double v0 = 0.1e-6 / 0.5e-6;
  const double width = gen.timing().phase * kCarrierPeriod;
  const double v_end = 2.0 + (v0 - 2.0) * std::exp(-width / tau);
  CHECK(gen.summary().charge_phase1 == doctest::Approx(0.5e-6 * (v_end - v0)).epsilon(1e-9));
}

TEST_CASE("biphasic pulse into series capacitance nets zero after shorting") {
  const double c = derive_cstore().c_store;
  LoadModel load;
  load.series_capacitance = 1e-6;
  StimulusGenerator gen({1.5, 0.3e-3, 0.0, Mode::Biphasic}, load, {}, {});
  auto ps = charged(c, 2.75);
  while (!gen.step(ps).finished) {}
  const auto& sm = gen.summary();
  CHECK(sm.residual_before_short == doctest::Approx(sm.charge_phase1 + sm.charge_phase2).epsilon(1e-9));
  CHECK(gen.load().residual_charge == 0.0);
}

TEST_CASE("undervoltage at onset skips the stimulus") {
  const double c = derive_cstore().c_store;
  StimulusGenerator gen({3.5, 0.5e-3, 0.0, Mode::Biphasic}, {}, {}, {});
  auto ps = charged(c, 3.0);
  StimulusGenerator::Step st;
  do st = gen.step(ps);
  while (!st.finished);
  CHECK(gen.summary().skipped);
  CHECK(ps.v_store == 3.0);
}

TEST_CASE("collapsing supply truncates the pulse") {
  StimulusGenerator gen({2.0, 1.2e-3, 0.0, Mode::Biphasic}, LoadModel{100.0}, {}, {});
  auto ps = charged(1e-6, 2.2);
  while (!gen.step(ps).finished) {}
  CHECK(gen.summary().truncated);
  CHECK(ps.v_store < 1.5);
  CHECK(ps.ledger_relative_residual() < 1e-9);
}

TEST_CASE("delay shifts the onset by whole stimulation ticks") {
  const double c = derive_cstore().c_store;
  StimulusGenerator gen({1.0, 0.15e-3, 16 * 2 / 82500.0, Mode::Biphasic}, {}, {}, {});
  auto ps = charged(c, 2.0);
  while (!gen.step(ps).finished) {}
  CHECK(gen.summary().onset_cycle == 16 * 2 * 4);
}

TEST_CASE("settings validation") {
  CHECK_THROWS(StimSettings{3.6, 1e-4, 0.0}.validate());
  CHECK_THROWS(StimSettings{1.0, 0.0, 0.0}.validate());
  CHECK_THROWS(StimSettings{1.0, 1e-4, 0.9e-3}.validate());
  LoadModel bad{0.0};
  CHECK_THROWS(bad.validate());
}

TEST_CASE("system efficiency at 20 Hz, 3.5 V, 1.2 ms") {
  const double p_stim = 2.0 * 3.5 * 3.5 / 1000.0 * 1.2e-3 * 20.0;
  const double expect = p_stim / (p_stim * 1.1 + 9e-6);
  const double eta = system_stim_efficiency(3.5, 1.2e-3, 20.0, Mode::Biphasic);
  CHECK(eta == doctest::Approx(expect).epsilon(1e-12));
  CHECK(std::abs(eta - 0.90) <= 0.02);
}

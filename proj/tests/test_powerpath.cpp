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

#include <array>
#include <cmath>

#include "mesim/powerpath.hpp"
#include "mesim/stimengine.hpp"

using namespace mesim;
using namespace mesim::power;

namespace {

PowerState charge_to(PowerState s, double v_rect, const RegulationTarget& target, double p_avail, int cycles) {
  s.v_rect = v_rect;
  for (int i = 0; i < cycles; ++i) s = scpc_step(s, kCarrierPeriod, target, p_avail);
  return s;
}

}  // namespace

TEST_CASE("rectifier applies efficiency then drop") {
  CHECK(rectify(3.5) == doctest::Approx(3.225));
  CHECK(rectify(0.05) == 0.0);
  CHECK_THROWS(rectify(-0.1));
  PowerParams p;
  p.rect_efficiency = 1.0;
  p.rect_drop = 0.0;
  CHECK(rectify(2.0, p) == 2.0);
}

TEST_CASE("rectifier output holds up with its own time constant") {
  CHECK(rectifier_hold(1.0, 2.0, 1e-6, 10e-6) == 2.0);
  CHECK(rectifier_hold(2.0, 0.0, 10e-6, 10e-6) == doctest::Approx(2.0 * std::exp(-1.0)));
}

TEST_CASE("supply selector takes the larger rail") {
  CHECK(supply_select(1.0, 2.0) == 2.0);
  CHECK(supply_select(3.0, 2.0) == 3.0);
  CHECK(ldo_output(0.5) == doctest::Approx(0.3));
  CHECK(ldo_output(3.0) == 1.0);
}

TEST_CASE("regulation target is max of driver floor and margin over amplitude") {
  CHECK(make_target(2.5).v_supply_target() == doctest::Approx(2.75));
  CHECK(make_target(1.0).v_supply_target() == doctest::Approx(1.5));
  CHECK(make_target(3.5).v_supply_target() == doctest::Approx(3.85));
}

TEST_CASE("converter regulates to the target and never exceeds four times the rectified input") {
  const double c = stim::derive_cstore().c_store;
  auto s = charge_to(PowerState::cold(c), 2.0, make_target(2.5), 1e-3, 50000);
  CHECK(s.v_store == doctest::Approx(2.75).epsilon(1e-12));
  CHECK_FALSE(s.scpc_connected);

  auto low = charge_to(PowerState::cold(c), 0.5, make_target(2.5), 1e-3, 50000);
  CHECK(low.v_store == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(low.v_store <= 4.0 * low.v_rect + 1e-12);

  // No pump below the oscillator minimum.
  auto dead = charge_to(PowerState::cold(c), 0.3, make_target(2.5), 1e-3, 1000);
  CHECK(dead.v_store == 0.0);
}

TEST_CASE("converter reconnects only after falling through the hysteresis band") {
  const double c = stim::derive_cstore().c_store;
  const auto target = make_target(2.5);
  auto s = charge_to(PowerState::cold(c), 2.0, target, 1e-3, 50000);
  REQUIRE_FALSE(s.scpc_connected);
  draw_from_storage(s, s.stored_energy() - 0.5 * c * 2.72 * 2.72);
  s = scpc_step(s, kCarrierPeriod, target, 1e-3);
  CHECK_FALSE(s.scpc_connected);
  CHECK(s.v_store == doctest::Approx(2.72));
  draw_from_storage(s, s.stored_energy() - 0.5 * c * 2.69 * 2.69);
  s = scpc_step(s, kCarrierPeriod, target, 1e-3);
  CHECK(s.v_store > 2.69);
}

TEST_CASE("charging ledger closes with converter losses") {
  const double c = stim::derive_cstore().c_store;
  auto s = charge_to(PowerState::cold(c), 2.0, make_target(2.5), 2e-4, 20000);
  CHECK(s.ledger_relative_residual() < 1e-12);
  CHECK(s.energy_lost == doctest::Approx(0.25 * s.stored_energy()).epsilon(1e-9));
  CHECK_THROWS(scpc_step(s, kCarrierPeriod, make_target(2.5), -1.0));
}

TEST_CASE("quiescent drain is 9 uJ over one idle second") {
  const double c = stim::derive_cstore().c_store;
  PowerState s = PowerState::cold(c);
  s.v_store = 2.75;
  s.stored_initial = s.stored_energy();
  const int n = static_cast<int>(kCarrierHz);
  for (int i = 0; i < n; ++i) s = quiescent_drain(s, kCarrierPeriod, false).state;
  CHECK(s.energy_out == doctest::Approx(9e-6).epsilon(1e-9));
  CHECK(s.ledger_relative_residual() < 1e-9);

  // Stimulating cycles are not charged to the idle budget.
  auto r = quiescent_drain(s, kCarrierPeriod, true);
  CHECK(r.state.energy_out == s.energy_out);
}

TEST_CASE("quiescent drain prefers live input power") {
  PowerState s = PowerState::cold(10e-6);
  s.v_rect = 2.0;
  s.v_store = 1.0;
  s.stored_initial = s.stored_energy();
  auto r = quiescent_drain(s, 1e-3, false, {}, 1e-3);
  CHECK(r.from_input == doctest::Approx(9e-9));
  CHECK(r.state.v_store == 1.0);
  CHECK(r.state.ledger_residual() == doctest::Approx(0.0).scale(1e-12));
}

TEST_CASE("an empty store starves the drain") {
  PowerState s = PowerState::cold(10e-6);
  auto r = quiescent_drain(s, 1e-3, false);
  CHECK(r.starved);
  CHECK(r.state.v_store == 0.0);
}

TEST_CASE("watchdog ignores short dropouts and reports a notch at the return edge") {
  std::array<bool, 200> present;
  present.fill(true);
  for (int k = 20; k < 30; ++k) present[k] = false;
  for (int k = 100; k < 133; ++k) present[k] = false;
  const auto ev = watchdog(present);
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].start == 100);
  CHECK(ev[0].end == 133);
  CHECK(ev[0].length() == 33);
}

TEST_CASE("watchdog threshold is sixteen absent cycles") {
  Watchdog wd;
  for (int k = 0; k < 15; ++k) CHECK_FALSE(wd.feed(k, false));
  CHECK_FALSE(wd.feed(15, true));
  for (int k = 16; k < 32; ++k) wd.feed(k, false);
  CHECK(wd.feed(32, true).has_value());
}

TEST_CASE("carrier detector tracks a relative threshold above the floor") {
  CarrierDetector d;
  CHECK(d.feed(2.0));
  CHECK_FALSE(d.feed(0.3));  // below 20 percent of 2 V
  CHECK(d.feed(0.5));
  CarrierDetector weak;
  CHECK_FALSE(weak.feed(0.05));
}

TEST_CASE("power-on reset needs a stable rail and drops out on brown-out") {
  PorDetector por;
  for (int i = 0; i < 9; ++i) CHECK(por.step(1.0) == PorEvent::None);
  CHECK(por.step(1.0) == PorEvent::Fired);
  CHECK(por.fired());
  CHECK(por.step(0.97) == PorEvent::None);
  CHECK(por.step(0.9) == PorEvent::BrownOut);
  CHECK_FALSE(por.fired());

  PorDetector noisy;
  for (int i = 0; i < 5; ++i) noisy.step(1.0);
  noisy.step(0.5);
  for (int i = 0; i < 9; ++i) CHECK(noisy.step(1.0) == PorEvent::None);
  CHECK(noisy.step(1.0) == PorEvent::Fired);
}

TEST_CASE("parameter validation") {
  PowerParams p;
  CHECK_NOTHROW(p.validate());
  p.rect_efficiency = 1.5;
  CHECK_THROWS(p.validate());
  p = {};
  p.por_stable_cycles = 0;
  CHECK_THROWS(p.validate());
}

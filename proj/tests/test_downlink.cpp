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
#include <vector>

#include "mesim/channel.hpp"
#include "mesim/downlink.hpp"
#include "mesim/rng.hpp"

using namespace mesim;
using namespace mesim::downlink;

namespace {

PayloadLayout random_payload(Rng& rng) {
  PayloadLayout p;
  p.amp_code = rng.next_u64() & 0xF;
  p.pw_code = rng.next_u64() & 0xF;
  p.delay_code = rng.next_u64() & 0x1F;
  p.mode = rng.next_u64() & 1;
  p.ref_trim = rng.next_u64() & 0x1F;
  return p;
}

// Per-cycle envelope of a single implant, stepped the way the film rings.
std::vector<double> envelope(const channel::Scene& s, std::size_t implant) {
  const double unit = channel::steady_amplitude(s, implant);
  const double decay = std::exp(-kCarrierPeriod / s.film.time_constant());
  std::vector<double> out;
  double env = 0.0;
  for (Cycle k = 0; k < s.schedule.total_cycles(); ++k) {
    env = channel::envelope_step(env, unit * s.schedule.level_at(k), decay);
    out.push_back(env);
  }
  return out;
}

}  // namespace

TEST_CASE("timing constants") {
  CHECK(kBitDuration == doctest::Approx(193.939e-6).epsilon(1e-5));
  CHECK(kDataRate == doctest::Approx(5156.25));
  CHECK(kDataClockHz == 10312.5);
  CHECK(kStimClockHz == 82500.0);
  CHECK(kNotchCycles * kCarrierPeriod == doctest::Approx(100e-6));
}

TEST_CASE("packet layout is preamble, ID, then 19 payload bits") {
  Packet p{0b11010111, {10, 15, 3, 1, 16}};
  const Bits b = encode_packet(p);
  REQUIRE(b.size() == 35);
  CHECK(bits_to_string(std::span(b).first(8)) == "10101010");
  CHECK(bits_to_string(std::span(b).subspan(8, 8)) == "11010111");
  // amp 1010, pw 1111, delay 00011, mode 1, trim 10000
  CHECK(bits_to_string(std::span(b).subspan(16)) == "1010111100011110000");
  CHECK(packet_dump(p) == "10101010|11010111|1010111100011110000");
}

TEST_CASE("decode inverts encode for every ID over random payloads") {
  Rng rng(2026);
  int failures = 0;
  for (int id = 0; id < 256; ++id) {
    for (int i = 0; i < 1000; ++i) {
      const Packet p{static_cast<std::uint8_t>(id), random_payload(rng)};
      if (decode_packet(encode_packet(p)) != p) ++failures;
    }
  }
  CHECK(failures == 0);
}

TEST_CASE("framing errors") {
  Bits b = encode_packet({});
  CHECK_THROWS_AS(decode_packet(std::span(b).first(34)), FrameError);
  b[0] = 0;
  CHECK_THROWS_AS(decode_packet(b), FrameError);
  PayloadLayout bad;
  bad.delay_code = 32;
  CHECK_THROWS(bad.pack());
  CHECK_THROWS(PayloadLayout::unpack(1u << 19));
  CHECK_THROWS(bits_from_string("01x"));
}

TEST_CASE("modulated schedule has two notches around the packet bits") {
  const std::vector<Packet> pk{{0x55, {}}};
  CycleTiming t{1000, 64, 500};
  const auto s = modulate(pk, 0.5, t);
  CHECK(s.notch_count() == 2);
  Cycle bit_cycles = 0;
  for (const auto& seg : s.segments())
    if (seg.kind == SegmentKind::Bit) bit_cycles += seg.cycles;
  CHECK(bit_cycles == 35 * 64);
  CHECK(cycles_to_seconds(bit_cycles) == doctest::Approx(6.788e-3).epsilon(1e-4));
  CHECK(s.total_cycles() == 1000 + 33 + 35 * 64 + 64 + 33 + 500);
  CHECK(s.level_at(1000 + 33) == 1.0);          // first preamble bit is a one
  CHECK(s.level_at(1000 + 33 + 64) == 0.5);     // then a zero at the ASK low level
  CHECK_THROWS(modulate(pk, 1.0, t));
  CHECK_THROWS(modulate(pk, 0.5, CycleTiming{0, 64, 0}));
}

TEST_CASE("threshold sits midway between the preamble plateaus") {
  std::vector<double> env;
  for (int i = 0; i < 8; ++i) env.insert(env.end(), 64, (i % 2 == 0) ? 2.0 : 1.0);
  const auto c = calibrate_threshold(env);
  CHECK(c.ok);
  CHECK(c.high == 2.0);
  CHECK(c.low == 1.0);
  CHECK(c.threshold == 1.5);

  std::vector<double> flat(8 * 64, 1.0);
  CHECK_FALSE(calibrate_threshold(flat).ok);
}

TEST_CASE("modulate, ring through the film and demodulate") {
  channel::Scene s;
  s.poses = {{0.02, 0.0}};
  s.coil.drive_current_peak = channel::calibrate_for_amplitude(s.coil, s.film, 1.0, 0.02, 1.5);
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<Packet> pk{{static_cast<std::uint8_t>(rng.next_u64()), random_payload(rng)}};
    s.schedule = modulate(pk, 0.5, {200, 64, 100});
    const auto env = envelope(s, 0);
    const std::size_t start = 200 + kNotchCycles;
    RecoveredClock clk;
    clk.locked = true;
    const auto r = receive_packet(std::span(env).subspan(start, 35 * 64), clk);
    REQUIRE(r.status == Reception::Status::Ok);
    CHECK(*r.packet == pk[0]);
  }
}

TEST_CASE("demodulation needs a locked clock") {
  std::vector<double> env(64, 1.0);
  CHECK_THROWS(demodulate(env, RecoveredClock{}, 0.5));
}

TEST_CASE("clock recovery locks at the first usable cycle with a bounded phase offset") {
  std::vector<double> env{0.0, 0.05, 0.08, 0.1, 0.5};
  const auto clk = recover_clock(env, 0.09, 42);
  CHECK(clk.locked);
  CHECK(clk.lock_cycle == 3);
  CHECK(clk.data_clock_hz() == doctest::Approx(10312.5));
  CHECK(clk.stim_clock_hz() == doctest::Approx(82500.0));
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const double off = sample_phase_offset(seed);
    CHECK(off >= 0.0);
    CHECK(off <= kMaxClockSkew);
  }
  CHECK(sample_phase_offset(5) == sample_phase_offset(5));
  CHECK_FALSE(recover_clock(std::vector<double>(10, 0.01), 0.09, 1).locked);
}

TEST_CASE("phase controller walks charge, data, charge, stimulation") {
  PhaseController pc(35);
  auto t1 = pc.on_notch(100);
  REQUIRE(t1);
  CHECK(t1->to == OperatingPhase::DataTransmission);
  CHECK_FALSE(pc.on_cycle(100 + 35 * 64 - 1));
  auto t2 = pc.on_cycle(100 + 35 * 64);
  REQUIRE(t2);
  CHECK(t2->to == OperatingPhase::Charging);
  CHECK(t2->cause == "data_complete");
  auto t3 = pc.on_notch(3000);
  REQUIRE(t3);
  CHECK(t3->to == OperatingPhase::Stimulation);
  CHECK(pc.notch_count() == 2);
  auto t4 = pc.stimulation_complete(3500);
  CHECK(t4.to == OperatingPhase::Charging);
  CHECK(pc.notch_count() == 0);
}

TEST_CASE("a notch during data or stimulation is handled") {
  PhaseController pc(35);
  pc.on_notch(10);
  auto early = pc.on_notch(500);
  REQUIRE(early);
  CHECK(early->to == OperatingPhase::Stimulation);
  CHECK(early->cause == "notch_override");
  auto bad = pc.on_notch(600);
  REQUIRE(bad);
  CHECK(bad->cause == "protocol_violation");
  CHECK(pc.violations() == 1);
  CHECK(pc.phase() == OperatingPhase::Charging);
}

TEST_CASE("batch phase controller matches the streaming one") {
  const std::vector<power::NotchEvent> notches{{67, 100}, {2407, 2440}};
  const auto tr = phase_controller(notches, 35, 300);
  REQUIRE(tr.size() == 4);
  CHECK(tr[0].cycle == 100);
  CHECK(tr[1].cycle == 100 + 35 * 64);
  CHECK(tr[2].cycle == 2440);
  CHECK(tr[3].cycle == 2740);
  CHECK(tr[3].cause == "stimulation_complete");
}

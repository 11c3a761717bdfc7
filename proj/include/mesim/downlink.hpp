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

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mesim/field_schedule.hpp"
#include "mesim/powerpath.hpp"
#include "mesim/units.hpp"

namespace mesim::downlink {

inline constexpr int kPreambleBits = 8;
inline constexpr int kIdBits = 8;
inline constexpr int kPayloadBits = 19;
inline constexpr int kBodyBits = kIdBits + kPayloadBits;
inline constexpr int kPacketBits = kPreambleBits + kBodyBits;
inline constexpr std::uint8_t kPreamblePattern = 0b10101010;

using Bits = std::vector<std::uint8_t>;

class FrameError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 19-bit payload packed MSB first as amp(4) pw(4) delay(5) mode(1) ref_trim(5).
struct PayloadLayout {
  std::uint8_t amp_code = 0;    // 4 bits
  std::uint8_t pw_code = 0;     // 4 bits
  std::uint8_t delay_code = 0;  // 5 bits
  std::uint8_t mode = 0;        // 1 bit, 1 = biphasic
  std::uint8_t ref_trim = 0;    // 5 bits

  static constexpr int kAmpBits = 4, kPwBits = 4, kDelayBits = 5, kModeBits = 1, kTrimBits = 5;
  static_assert(kAmpBits + kPwBits + kDelayBits + kModeBits + kTrimBits == kPayloadBits);

  void validate() const;
  std::uint32_t pack() const;
  static PayloadLayout unpack(std::uint32_t word);

  bool operator==(const PayloadLayout&) const = default;
};

struct Packet {
  std::uint8_t device_id = 0;
  PayloadLayout payload;

  bool operator==(const Packet&) const = default;
};

Bits encode_packet(const Packet& p);
// Expects exactly kPacketBits bits beginning with the preamble.
Packet decode_packet(std::span<const std::uint8_t> bits);

std::string bits_to_string(std::span<const std::uint8_t> bits);
Bits bits_from_string(std::string_view s);
Bits uint_to_bits(std::uint32_t value, int width);
std::uint32_t bits_to_uint(std::span<const std::uint8_t> bits);
// `<preamble>|<id:8b>|<payload:19b>` as binary digits.
std::string packet_dump(const Packet& p);

// Lengths of the non-data parts of one operating cycle, in carrier cycles.
struct CycleTiming {
  Cycle charge_cycles = 0;   // carrier on before the first notch
  Cycle guard_cycles = 64;   // carrier on between the data and the second notch
  Cycle stim_cycles = 0;     // carrier on after the second notch
  Cycle notch_cycles = kNotchCycles;
};

// One operating cycle: charge, notch, ASK bits, guard, notch, stimulation
// window. An empty packet list produces a trigger-only cycle.
FieldSchedule modulate(std::span<const Packet> packets, double ask_depth, const CycleTiming& timing);

struct RecoveredClock {
  double period = kCarrierPeriod;
  double phase_offset = 0.0;  // s, sub-cycle lag of this implant's clock edges
  bool locked = false;
  Cycle lock_cycle = -1;

  double data_clock_hz() const { return 1.0 / (period * kDataClockDivider); }
  double stim_clock_hz() const { return 1.0 / (period * kStimClockDivider); }
};

// Uniform in [0, min(period/4, 0.75 us)] from the implant seed.
double sample_phase_offset(std::uint64_t implant_seed, double period = kCarrierPeriod);

RecoveredClock recover_clock(std::span<const double> envelope_per_cycle, double min_amplitude,
                             std::uint64_t implant_seed, double period = kCarrierPeriod);

enum class OperatingPhase { Charging, DataTransmission, Stimulation };
std::string_view to_string(OperatingPhase phase);

struct PhaseTransition {
  Cycle cycle = 0;
  OperatingPhase from = OperatingPhase::Charging;
  OperatingPhase to = OperatingPhase::Charging;
  std::string_view cause;

  bool operator==(const PhaseTransition&) const = default;
};

// Notch-driven operating phase state machine. Odd notches in a cycle open the
// data phase (data-clock divider reset), even notches start stimulation
// (stim-clock divider reset). A data phase ends after the expected number of
// bit windows, or early if the second notch arrives first.
class PhaseController {
 public:
  explicit PhaseController(int data_bits) : data_bits_(data_bits) {}

  std::optional<PhaseTransition> on_notch(Cycle k);
  std::optional<PhaseTransition> on_cycle(Cycle k);
  PhaseTransition stimulation_complete(Cycle k);
  void reset();

  OperatingPhase phase() const { return phase_; }
  Cycle phase_start() const { return phase_start_; }
  int notch_count() const { return notch_count_; }
  int violations() const { return violations_; }
  int data_bits() const { return data_bits_; }

 private:
  PhaseTransition go(Cycle k, OperatingPhase to, std::string_view cause);

  int data_bits_;
  OperatingPhase phase_ = OperatingPhase::Charging;
  Cycle phase_start_ = 0;
  int notch_count_ = 0;
  int violations_ = 0;
};

// Batch form: the phase timeline for a notch sequence, with each stimulation
// lasting `stim_cycles` cycles.
std::vector<PhaseTransition> phase_controller(std::span<const power::NotchEvent> notches, int packet_len_bits,
                                              Cycle stim_cycles);

struct ThresholdCalibration {
  bool ok = false;
  double threshold = 0.0;
  double high = 0.0;
  double low = 0.0;
};

// Mean of the central half of bit window `index` in per-cycle samples.
double window_mean(std::span<const double> samples, std::size_t index, int cycles_per_bit = kCyclesPerBit);

// Midpoint of the filtered high and low plateaus of the alternating preamble.
ThresholdCalibration calibrate_threshold(std::span<const double> preamble_envelope,
                                         int cycles_per_bit = kCyclesPerBit);

// One bit per window: central-half mean above threshold.
Bits demodulate(std::span<const double> envelope, const RecoveredClock& clock, double threshold,
                int cycles_per_bit = kCyclesPerBit);

// Result of receiving one packet-length slice of the data phase.
struct Reception {
  enum class Status { Ok, CalibrationFailure, FrameError } status = Status::Ok;
  ThresholdCalibration calibration;
  Bits bits;
  std::optional<Packet> packet;
};

Reception receive_packet(std::span<const double> envelope, const RecoveredClock& clock,
                         int cycles_per_bit = kCyclesPerBit);

}  // namespace mesim::downlink

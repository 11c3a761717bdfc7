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

#include "mesim/downlink.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mesim/rng.hpp"

namespace mesim::downlink {

void PayloadLayout::validate() const {
  if (amp_code >= (1u << kAmpBits) || pw_code >= (1u << kPwBits) || delay_code >= (1u << kDelayBits) ||
      mode >= (1u << kModeBits) || ref_trim >= (1u << kTrimBits))
    throw std::invalid_argument("payload field exceeds its bit width");
}

std::uint32_t PayloadLayout::pack() const {
  validate();
  std::uint32_t w = amp_code;
  w = (w << kPwBits) | pw_code;
  w = (w << kDelayBits) | delay_code;
  w = (w << kModeBits) | mode;
  w = (w << kTrimBits) | ref_trim;
  return w;
}

PayloadLayout PayloadLayout::unpack(std::uint32_t w) {
  if (w >= (1u << kPayloadBits)) throw std::invalid_argument("payload word wider than 19 bits");
  PayloadLayout p;
  p.ref_trim = w & ((1u << kTrimBits) - 1);
  w >>= kTrimBits;
  p.mode = w & ((1u << kModeBits) - 1);
  w >>= kModeBits;
  p.delay_code = w & ((1u << kDelayBits) - 1);
  w >>= kDelayBits;
  p.pw_code = w & ((1u << kPwBits) - 1);
  w >>= kPwBits;
  p.amp_code = w & ((1u << kAmpBits) - 1);
  return p;
}

Bits uint_to_bits(std::uint32_t value, int width) {
  Bits out(static_cast<std::size_t>(width));
  for (int i = 0; i < width; ++i) out[static_cast<std::size_t>(i)] = (value >> (width - 1 - i)) & 1u;
  return out;
}

std::uint32_t bits_to_uint(std::span<const std::uint8_t> bits) {
  std::uint32_t v = 0;
  for (auto b : bits) v = (v << 1) | (b & 1u);
  return v;
}

Bits encode_packet(const Packet& p) {
  Bits out = uint_to_bits(kPreamblePattern, kPreambleBits);
  const Bits id = uint_to_bits(p.device_id, kIdBits);
  const Bits payload = uint_to_bits(p.payload.pack(), kPayloadBits);
  out.insert(out.end(), id.begin(), id.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Packet decode_packet(std::span<const std::uint8_t> bits) {
  if (bits.size() != static_cast<std::size_t>(kPacketBits))
    throw FrameError("packet must be exactly " + std::to_string(kPacketBits) + " bits, got " +
                     std::to_string(bits.size()));
  if (bits_to_uint(bits.first(kPreambleBits)) != kPreamblePattern) throw FrameError("preamble mismatch");
  Packet p;
  p.device_id = static_cast<std::uint8_t>(bits_to_uint(bits.subspan(kPreambleBits, kIdBits)));
  p.payload = PayloadLayout::unpack(bits_to_uint(bits.subspan(kPreambleBits + kIdBits, kPayloadBits)));
  return p;
}

std::string bits_to_string(std::span<const std::uint8_t> bits) {
  std::string s;
  s.reserve(bits.size());
  for (auto b : bits) s.push_back(b ? '1' : '0');
  return s;
}

Bits bits_from_string(std::string_view s) {
  Bits out;
  for (char c : s) {
    if (c != '0' && c != '1') throw std::invalid_argument("bit string may only contain '0' and '1'");
    out.push_back(c == '1');
  }
  return out;
}

std::string packet_dump(const Packet& p) {
  const Bits b = encode_packet(p);
  const std::span<const std::uint8_t> all(b);
  return bits_to_string(all.first(kPreambleBits)) + "|" + bits_to_string(all.subspan(kPreambleBits, kIdBits)) +
         "|" + bits_to_string(all.subspan(kPreambleBits + kIdBits));
}

FieldSchedule modulate(std::span<const Packet> packets, double ask_depth, const CycleTiming& timing) {
  if (!(ask_depth > 0.0 && ask_depth < 1.0)) throw std::invalid_argument("ASK depth must lie in (0, 1)");
  if (timing.stim_cycles <= 0 || timing.guard_cycles <= 0 || timing.notch_cycles <= 0)
    throw std::invalid_argument("invalid schedule: both notches need carrier on either side");
  if (timing.charge_cycles < 0) throw std::invalid_argument("invalid schedule: negative charge time");

  FieldSchedule s;
  if (timing.charge_cycles > 0) s.append({SegmentKind::Charge, timing.charge_cycles, 1.0});
  s.append({SegmentKind::Notch, timing.notch_cycles, 0.0});
  const double low = 1.0 - ask_depth;
  for (const auto& p : packets)
    for (auto bit : encode_packet(p)) s.append({SegmentKind::Bit, kCyclesPerBit, bit ? 1.0 : low});
  s.append({SegmentKind::Guard, timing.guard_cycles, 1.0});
  s.append({SegmentKind::Notch, timing.notch_cycles, 0.0});
  s.append({SegmentKind::Stim, timing.stim_cycles, 1.0});
  return s;
}

double sample_phase_offset(std::uint64_t implant_seed, double period) {
  Rng rng(mix_seed(implant_seed, 0xC10C));
  return rng.uniform() * std::min(period / 4.0, kMaxClockSkew);
}

RecoveredClock recover_clock(std::span<const double> envelope, double min_amplitude, std::uint64_t implant_seed,
                             double period) {
  RecoveredClock clk;
  clk.period = period;
  clk.phase_offset = sample_phase_offset(implant_seed, period);
  for (std::size_t k = 0; k < envelope.size(); ++k) {
    if (envelope[k] >= min_amplitude) {
      clk.locked = true;
      clk.lock_cycle = static_cast<Cycle>(k);
      break;
    }
  }
  return clk;
}

std::string_view to_string(OperatingPhase phase) {
  switch (phase) {
    case OperatingPhase::Charging: return "charging";
    case OperatingPhase::DataTransmission: return "data";
    case OperatingPhase::Stimulation: return "stimulation";
  }
  return "charging";
}

PhaseTransition PhaseController::go(Cycle k, OperatingPhase to, std::string_view cause) {
  PhaseTransition t{k, phase_, to, cause};
  phase_ = to;
  phase_start_ = k;
  return t;
}

std::optional<PhaseTransition> PhaseController::on_notch(Cycle k) {
  switch (phase_) {
    case OperatingPhase::Stimulation:
      ++violations_;
      notch_count_ = 0;
      return go(k, OperatingPhase::Charging, "protocol_violation");
    case OperatingPhase::DataTransmission:
      notch_count_ = 2;
      return go(k, OperatingPhase::Stimulation, "notch_override");
    case OperatingPhase::Charging:
      if (notch_count_ == 0) {
        notch_count_ = 1;
        return go(k, OperatingPhase::DataTransmission, "notch");
      }
      notch_count_ = 2;
      return go(k, OperatingPhase::Stimulation, "notch");
  }
  return std::nullopt;
}

std::optional<PhaseTransition> PhaseController::on_cycle(Cycle k) {
  if (phase_ == OperatingPhase::DataTransmission &&
      k - phase_start_ >= static_cast<Cycle>(data_bits_) * kCyclesPerBit)
    return go(k, OperatingPhase::Charging, "data_complete");
  return std::nullopt;
}

PhaseTransition PhaseController::stimulation_complete(Cycle k) {
  notch_count_ = 0;
  return go(k, OperatingPhase::Charging, "stimulation_complete");
}

void PhaseController::reset() {
  phase_ = OperatingPhase::Charging;
  phase_start_ = 0;
  notch_count_ = 0;
}

std::vector<PhaseTransition> phase_controller(std::span<const power::NotchEvent> notches, int packet_len_bits,
                                              Cycle stim_cycles) {
  PhaseController pc(packet_len_bits);
  std::vector<PhaseTransition> out;
  Cycle stim_end = -1;
  auto advance_to = [&](Cycle k) {
    // Close out anything that finishes before cycle k.
    if (pc.phase() == OperatingPhase::DataTransmission) {
      const Cycle done = pc.phase_start() + static_cast<Cycle>(packet_len_bits) * kCyclesPerBit;
      if (done <= k) out.push_back(*pc.on_cycle(done));
    }
    if (pc.phase() == OperatingPhase::Stimulation && stim_end <= k) out.push_back(pc.stimulation_complete(stim_end));
  };
  for (const auto& n : notches) {
    advance_to(n.end);
    if (auto t = pc.on_notch(n.end)) {
      out.push_back(*t);
      if (t->to == OperatingPhase::Stimulation) stim_end = n.end + stim_cycles;
    }
  }
  advance_to(std::numeric_limits<Cycle>::max());
  return out;
}

double window_mean(std::span<const double> samples, std::size_t index, int cycles_per_bit) {
  const std::size_t n = static_cast<std::size_t>(cycles_per_bit);
  const std::size_t begin = index * n + n / 4;
  const std::size_t end = index * n + 3 * n / 4;
  if (end > samples.size()) throw std::out_of_range("bit window beyond the sampled envelope");
  return std::accumulate(samples.begin() + static_cast<long>(begin), samples.begin() + static_cast<long>(end),
                         0.0) /
         static_cast<double>(end - begin);
}

ThresholdCalibration calibrate_threshold(std::span<const double> preamble, int cycles_per_bit) {
  ThresholdCalibration c;
  double hi = 0.0, lo = 0.0;
  int nh = 0, nl = 0;
  for (int i = 0; i < kPreambleBits; ++i) {
    const double m = window_mean(preamble, static_cast<std::size_t>(i), cycles_per_bit);
    const bool one = (kPreamblePattern >> (kPreambleBits - 1 - i)) & 1u;
    (one ? hi : lo) += m;
    ++(one ? nh : nl);
  }
  c.high = hi / nh;
  c.low = lo / nl;
  c.threshold = 0.5 * (c.high + c.low);
  // A usable preamble needs a clear step between the two plateaus.
  const double contrast = c.high - c.low;
  c.ok = contrast > std::max(0.02, 0.05 * c.high);
  return c;
}

Bits demodulate(std::span<const double> envelope, const RecoveredClock& clock, double threshold,
                int cycles_per_bit) {
  if (!clock.locked) throw std::logic_error("demodulate: clock not locked");
  const std::size_t nbits = envelope.size() / static_cast<std::size_t>(cycles_per_bit);
  Bits out(nbits);
  for (std::size_t i = 0; i < nbits; ++i) out[i] = window_mean(envelope, i, cycles_per_bit) > threshold;
  return out;
}

Reception receive_packet(std::span<const double> envelope, const RecoveredClock& clock, int cycles_per_bit) {
  Reception r;
  const std::size_t preamble_len = static_cast<std::size_t>(kPreambleBits * cycles_per_bit);
  r.calibration = calibrate_threshold(envelope.first(preamble_len), cycles_per_bit);
  if (!r.calibration.ok) {
    r.status = Reception::Status::CalibrationFailure;
    return r;
  }
  r.bits = demodulate(envelope, clock, r.calibration.threshold, cycles_per_bit);
  try {
    r.packet = decode_packet(r.bits);
  } catch (const FrameError&) {
    r.status = Reception::Status::FrameError;
  }
  return r;
}

}  // namespace mesim::downlink

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

namespace mesim {

// Carrier and protocol timing. All kernel time is counted in whole carrier
// cycles; seconds are derived from the cycle index.
inline constexpr double kCarrierHz = 330e3;
inline constexpr double kCarrierPeriod = 1.0 / kCarrierHz;

inline constexpr int kCyclesPerBit = 64;
inline constexpr int kDataClockDivider = 32;  // 10.3125 kHz
inline constexpr int kStimClockDivider = 4;   // 82.5 kHz
inline constexpr int kNotchCycles = 33;       // 100 us field gap
inline constexpr int kNotchDetectCycles = 16;

inline constexpr double kDataClockHz = kCarrierHz / kDataClockDivider;
inline constexpr double kStimClockHz = kCarrierHz / kStimClockDivider;
inline constexpr double kStimClockPeriod = 1.0 / kStimClockHz;
inline constexpr double kBitDuration = kCyclesPerBit * kCarrierPeriod;
inline constexpr double kDataRate = kCarrierHz / kCyclesPerBit;

// Upper bound on recovered-clock phase offset between implants.
inline constexpr double kMaxClockSkew = 0.75e-6;

inline constexpr double kMu0 = 1.25663706212e-6;
inline constexpr double kTeslaPerOersted = 1e-4;  // in air, B = mu0 * H

using Cycle = std::int64_t;

constexpr double cycles_to_seconds(Cycle n, double carrier_hz = kCarrierHz) {
  return static_cast<double>(n) / carrier_hz;
}

}  // namespace mesim

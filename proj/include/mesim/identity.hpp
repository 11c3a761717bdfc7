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
#include <string>
#include <string_view>

#include "mesim/downlink.hpp"
#include "mesim/rng.hpp"

// PUF-derived device identity and the ID-gated register file.
namespace mesim::identity {

inline constexpr int kIdCells = 8;
inline constexpr int kDefaultVotes = 15;

// One PUF cell: a fixed per-device mismatch plus fresh thermal noise on every
// evaluation. The output is the sign of their sum.
struct PufCell {
  double mismatch = 0.0;
  double noise_sigma = 0.05;
};

PufCell make_cell(std::uint64_t device_seed, int index, double noise_sigma);

bool puf_cell_eval(const PufCell& cell, Rng& noise);
bool puf_cell_eval(const PufCell& cell, std::uint64_t eval_seed);

// Per-evaluation probability of disagreeing with the noiseless output.
double flip_probability(const PufCell& cell);

// Temporal majority vote over `votes` evaluations (odd).
bool tmv(const PufCell& cell, Rng& noise, int votes = kDefaultVotes);
// Probability that the majority of `votes` evaluations is wrong when each is
// wrong independently with probability p.
double tmv_error_probability(double p, int votes = kDefaultVotes);

struct DeviceId {
  std::uint8_t bits = 0;
  bool stable = false;

  std::string str() const;
  bool operator==(const DeviceId&) const = default;
};

std::uint8_t parse_id(std::string_view bits);
std::string format_id(std::uint8_t id);

struct PufParams {
  double noise_sigma = 0.05;
  int votes = kDefaultVotes;
};

// ID loaded at the `por_index`-th power-on reset of this device.
DeviceId generate_id(std::uint64_t device_seed, std::uint32_t por_index, const PufParams& params = {});

// ID registers: loaded once per POR and held until the next one.
class IdentityUnit {
 public:
  IdentityUnit(std::uint64_t device_seed, PufParams params) : seed_(device_seed), params_(params) {}

  // Requires a POR; an override replaces the PUF output (for fixed-ID scenarios).
  const DeviceId& on_por(bool por_fired, std::optional<std::uint8_t> fixed = std::nullopt);
  void clear() { loaded_ = false; }

  bool loaded() const { return loaded_; }
  const DeviceId& id() const;
  std::uint32_t por_count() const { return por_count_; }

 private:
  std::uint64_t seed_;
  PufParams params_;
  DeviceId id_;
  bool loaded_ = false;
  std::uint32_t por_count_ = 0;
};

struct RegisterFile {
  std::uint8_t amp_code = 0;
  std::uint8_t pw_code = 0;
  std::uint8_t delay_code = 0;
  std::uint8_t mode = 0;
  std::uint8_t ref_trim = 0;

  static RegisterFile from_payload(const downlink::PayloadLayout& p);
  bool operator==(const RegisterFile&) const = default;
};

struct UpdateOutcome {
  RegisterFile registers;
  bool accepted = false;
};

UpdateOutcome update_registers(const RegisterFile& rf, const downlink::Packet& pkt, const DeviceId& id);

}  // namespace mesim::identity

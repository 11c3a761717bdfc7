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

#include "mesim/identity.hpp"

#include <boost/math/distributions/binomial.hpp>
#include <cmath>
#include <stdexcept>

namespace mesim::identity {

PufCell make_cell(std::uint64_t device_seed, int index, double noise_sigma) {
  Rng rng(mix_seed(device_seed, 0x9F00u + static_cast<std::uint64_t>(index)));
  return {rng.normal(), noise_sigma};
}

bool puf_cell_eval(const PufCell& cell, Rng& noise) {
  return cell.mismatch + cell.noise_sigma * noise.normal() > 0.0;
}

bool puf_cell_eval(const PufCell& cell, std::uint64_t eval_seed) {
  Rng rng(eval_seed);
  return puf_cell_eval(cell, rng);
}

double flip_probability(const PufCell& cell) {
  if (cell.noise_sigma <= 0.0) return cell.mismatch == 0.0 ? 0.5 : 0.0;
  return 0.5 * std::erfc(std::abs(cell.mismatch) / (cell.noise_sigma * std::sqrt(2.0)));
}

bool tmv(const PufCell& cell, Rng& noise, int votes) {
  if (votes <= 0 || votes % 2 == 0) throw std::domain_error("TMV needs an odd, positive vote count");
  int ones = 0;
  for (int i = 0; i < votes; ++i) ones += puf_cell_eval(cell, noise);
  return 2 * ones > votes;
}

double tmv_error_probability(double p, int votes) {
  if (votes <= 0 || votes % 2 == 0) throw std::domain_error("TMV needs an odd, positive vote count");
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("flip probability must lie in [0, 1]");
  if (p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;
  // P(X > votes/2) for X ~ Binomial(votes, p).
  const boost::math::binomial_distribution<double> dist(votes, p);
  return boost::math::cdf(boost::math::complement(dist, static_cast<double>(votes / 2)));
}

std::string DeviceId::str() const { return format_id(bits); }

std::uint8_t parse_id(std::string_view s) {
  if (s.size() != 8) throw std::invalid_argument("device ID must be 8 binary digits");
  return static_cast<std::uint8_t>(downlink::bits_to_uint(downlink::bits_from_string(s)));
}

std::string format_id(std::uint8_t id) { return downlink::bits_to_string(downlink::uint_to_bits(id, 8)); }

DeviceId generate_id(std::uint64_t device_seed, std::uint32_t por_index, const PufParams& params) {
  if (params.votes <= 0 || params.votes % 2 == 0) throw std::domain_error("TMV needs an odd vote count");
  Rng noise(mix_seed(device_seed, 0xE7A1'0000ull + por_index));
  DeviceId id;
  id.stable = true;
  for (int i = 0; i < kIdCells; ++i) {
    const PufCell cell = make_cell(device_seed, i, params.noise_sigma);
    int ones = 0;
    for (int v = 0; v < params.votes; ++v) ones += puf_cell_eval(cell, noise);
    const bool bit = 2 * ones > params.votes;
    // A narrow majority marks a cell that could resolve differently next POR.
    if (std::abs(2 * ones - params.votes) * 3 < params.votes) id.stable = false;
    id.bits = static_cast<std::uint8_t>((id.bits << 1) | bit);
  }
  return id;
}

const DeviceId& IdentityUnit::on_por(bool por_fired, std::optional<std::uint8_t> fixed) {
  if (!por_fired) throw std::logic_error("ID generation requires a power-on reset");
  id_ = fixed ? DeviceId{*fixed, true} : generate_id(seed_, por_count_, params_);
  ++por_count_;
  loaded_ = true;
  return id_;
}

const DeviceId& IdentityUnit::id() const {
  if (!loaded_) throw std::logic_error("device ID read before POR");
  return id_;
}

RegisterFile RegisterFile::from_payload(const downlink::PayloadLayout& p) {
  return {p.amp_code, p.pw_code, p.delay_code, p.mode, p.ref_trim};
}

UpdateOutcome update_registers(const RegisterFile& rf, const downlink::Packet& pkt, const DeviceId& id) {
  if (pkt.device_id == id.bits) return {RegisterFile::from_payload(pkt.payload), true};
  return {rf, false};
}

}  // namespace mesim::identity

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

#include "mesim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace mesim {

using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += "\n  " + s;
  return out;
}

// Field reader that records problems instead of stopping at the first one.
class Reader {
 public:
  explicit Reader(std::vector<std::string>& problems) : problems_(problems) {}

  void fail(const std::string& path, const std::string& what) { problems_.push_back(path + ": " + what); }

  void only(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
    if (!obj.is_object()) {
      fail(path, "expected an object");
      return;
    }
    for (const auto& [key, _] : obj.items())
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) fail(path + "." + key, "unknown field");
  }

  double number(const json& obj, const std::string& path, const char* key, double def) {
    if (!obj.is_object() || !obj.contains(key)) return def;
    const auto& v = obj.at(key);
    if (!v.is_number()) {
      fail(path + "." + key, "expected a number");
      return def;
    }
    return v.get<double>();
  }

  std::int64_t integer(const json& obj, const std::string& path, const char* key, std::int64_t def) {
    if (!obj.is_object() || !obj.contains(key)) return def;
    const auto& v = obj.at(key);
    if (!v.is_number_integer()) {
      fail(path + "." + key, "expected an integer");
      return def;
    }
    return v.get<std::int64_t>();
  }

  bool boolean(const json& obj, const std::string& path, const char* key, bool def) {
    if (!obj.is_object() || !obj.contains(key)) return def;
    const auto& v = obj.at(key);
    if (!v.is_boolean()) {
      fail(path + "." + key, "expected true or false");
      return def;
    }
    return v.get<bool>();
  }

  std::string string(const json& obj, const std::string& path, const char* key, std::string def) {
    if (!obj.is_object() || !obj.contains(key)) return def;
    const auto& v = obj.at(key);
    if (!v.is_string()) {
      fail(path + "." + key, "expected a string");
      return def;
    }
    return v.get<std::string>();
  }

  std::vector<std::pair<double, double>> pairs(const json& v, const std::string& path) {
    std::vector<std::pair<double, double>> out;
    if (!v.is_array()) {
      fail(path, "expected an array of [x, y] pairs");
      return out;
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto& p = v[i];
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
        fail(path + "[" + std::to_string(i) + "]", "expected [x, y]");
        continue;
      }
      out.emplace_back(p[0].get<double>(), p[1].get<double>());
    }
    return out;
  }

  // Runs a validate() style check and records its message.
  template <class F>
  void check(const std::string& path, F&& f) {
    try {
      f();
    } catch (const std::exception& e) {
      fail(path, e.what());
    }
  }

 private:
  std::vector<std::string>& problems_;
};

Cycle to_cycles(double ms, double hz) { return static_cast<Cycle>(std::llround(ms * 1e-3 * hz)); }

std::optional<std::uint8_t> parse_id_field(Reader& r, const json& obj, const std::string& path) {
  if (!obj.contains("id")) return std::nullopt;
  const auto& v = obj.at("id");
  if (!v.is_string()) {
    r.fail(path + ".id", "expected an 8-digit binary string");
    return std::nullopt;
  }
  try {
    return identity::parse_id(v.get<std::string>());
  } catch (const std::exception& e) {
    r.fail(path + ".id", e.what());
    return std::nullopt;
  }
}

void parse_coil(Reader& r, const json& j, Scenario& s, std::optional<std::pair<double, double>>& calibrate) {
  const std::string path = "coil";
  r.only(j, path, {"radius_mm", "turns", "drive_current_a", "carrier_hz", "calibrate"});
  auto& c = s.scene.coil;
  c.radius = r.number(j, path, "radius_mm", c.radius * 1e3) * 1e-3;
  c.turns = static_cast<int>(r.integer(j, path, "turns", c.turns));
  c.carrier_freq = r.number(j, path, "carrier_hz", c.carrier_freq);
  if (j.contains("drive_current_a") && j.contains("calibrate"))
    r.fail(path, "give either drive_current_a or calibrate, not both");
  if (j.contains("drive_current_a")) {
    c.drive_current_peak = r.number(j, path, "drive_current_a", c.drive_current_peak);
    calibrate.reset();
  } else if (j.contains("calibrate")) {
    const auto& cal = j.at("calibrate");
    r.only(cal, path + ".calibrate", {"distance_mm", "amplitude_v"});
    calibrate = {r.number(cal, path + ".calibrate", "distance_mm", 40.0) * 1e-3,
                 r.number(cal, path + ".calibrate", "amplitude_v", 1.5)};
  }
  r.check(path, [&] { c.validate(); });
  if (c.carrier_freq != kCarrierHz) r.fail(path + ".carrier_hz", "the kernel's protocol timing assumes 330 kHz");
}

void parse_film(Reader& r, const json& j, Scenario& s) {
  const std::string path = "film";
  r.only(j, path, {"length_mm", "width_mm", "resonant_hz", "source_resistance", "voltage_coefficient",
                   "ringup_cycles"});
  auto& f = s.scene.film;
  f.length = r.number(j, path, "length_mm", f.length * 1e3) * 1e-3;
  f.width = r.number(j, path, "width_mm", f.width * 1e3) * 1e-3;
  f.resonant_freq = r.number(j, path, "resonant_hz", f.resonant_freq);
  f.source_resistance = r.number(j, path, "source_resistance", f.source_resistance);
  f.voltage_coefficient = r.number(j, path, "voltage_coefficient", f.voltage_coefficient);
  f.ringup_cycles = r.number(j, path, "ringup_cycles", f.ringup_cycles);
  r.check(path, [&] { f.validate(); });
}

void parse_gains(Reader& r, const json& j, Scenario& s) {
  const std::string path = "gain_tables";
  r.only(j, path, {"angular", "angular_xz", "angular_yz", "lateral_mm"});
  auto table = [&](const char* key, channel::GainTable& dst, double scale) {
    if (!j.contains(key)) return;
    auto knots = r.pairs(j.at(key), path + "." + key);
    for (auto& k : knots) k.first *= scale;
    r.check(path + "." + key, [&] { dst = channel::GainTable(knots); });
  };
  table("angular", s.scene.angular_xz, 1.0);
  table("angular", s.scene.angular_yz, 1.0);
  table("angular_xz", s.scene.angular_xz, 1.0);
  table("angular_yz", s.scene.angular_yz, 1.0);
  table("lateral_mm", s.scene.lateral, 1e-3);
}

void parse_power(Reader& r, const json& j, Scenario& s) {
  const std::string path = "power";
  r.only(j, path, {"c_store_uf", "rect_efficiency", "rect_drop", "rect_hold_us", "converter_efficiency",
                   "hysteresis", "quiescent_uw", "por_stable_cycles"});
  auto& p = s.power;
  p.c_store = r.number(j, path, "c_store_uf", p.c_store * 1e6) * 1e-6;
  p.rect_efficiency = r.number(j, path, "rect_efficiency", p.rect_efficiency);
  p.rect_drop = r.number(j, path, "rect_drop", p.rect_drop);
  p.rect_hold_tau = r.number(j, path, "rect_hold_us", p.rect_hold_tau * 1e6) * 1e-6;
  p.converter_efficiency = r.number(j, path, "converter_efficiency", p.converter_efficiency);
  p.hysteresis = r.number(j, path, "hysteresis", p.hysteresis);
  p.quiescent_power = r.number(j, path, "quiescent_uw", p.quiescent_power * 1e6) * 1e-6;
  p.por_stable_cycles = static_cast<int>(r.integer(j, path, "por_stable_cycles", p.por_stable_cycles));
}

void parse_stim(Reader& r, const json& j, Scenario& s) {
  const std::string path = "stim";
  r.only(j, path, {"pw_is_total", "interphase_gap_us", "min_pulse_us"});
  s.stim.pw_is_total = r.boolean(j, path, "pw_is_total", s.stim.pw_is_total);
  s.stim.interphase_gap = r.number(j, path, "interphase_gap_us", s.stim.interphase_gap * 1e6) * 1e-6;
  s.stim.min_pulse = r.number(j, path, "min_pulse_us", s.stim.min_pulse * 1e6) * 1e-6;
  if (s.stim.interphase_gap < 0.0) r.fail(path + ".interphase_gap_us", "must be non-negative");
}

void parse_implants(Reader& r, const json& j, Scenario& s) {
  if (!j.is_array() || j.empty()) {
    r.fail("implants", "expected a non-empty array");
    return;
  }
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string path = "implants[" + std::to_string(i) + "]";
    const auto& o = j[i];
    r.only(o, path, {"name", "axial_mm", "lateral_mm", "azimuth_deg", "theta_xz_deg", "theta_yz_deg",
                     "theta_z_deg", "seed", "id", "load", "ref_error"});
    ImplantSpec im;
    im.name = r.string(o, path, "name", "implant" + std::to_string(i));
    im.pose.axial_distance = r.number(o, path, "axial_mm", 0.0) * 1e-3;
    im.pose.lateral_offset = r.number(o, path, "lateral_mm", 0.0) * 1e-3;
    im.pose.azimuth = r.number(o, path, "azimuth_deg", 0.0);
    im.pose.theta_xz = r.number(o, path, "theta_xz_deg", 0.0);
    im.pose.theta_yz = r.number(o, path, "theta_yz_deg", 0.0);
    im.pose.theta_z = r.number(o, path, "theta_z_deg", 0.0);
    if (!o.contains("axial_mm")) r.fail(path + ".axial_mm", "required");
    if (im.pose.axial_distance < 0.0) r.fail(path + ".axial_mm", "must be non-negative");
    if (im.pose.lateral_offset < 0.0) r.fail(path + ".lateral_mm", "must be non-negative");
    for (const auto& [key, v] : {std::pair{"theta_xz_deg", im.pose.theta_xz}, std::pair{"theta_yz_deg", im.pose.theta_yz},
                                 std::pair{"theta_z_deg", im.pose.theta_z}})
      if (!(v >= 0.0 && v <= 90.0)) r.fail(path + "." + key, "must lie in [0, 90] degrees");
    if (o.contains("seed") && !o.at("seed").is_number_unsigned()) r.fail(path + ".seed", "expected an unsigned integer");
    im.seed = o.contains("seed") && o.at("seed").is_number_unsigned() ? o.at("seed").get<std::uint64_t>()
                                                                       : mix_seed(s.seed, i + 1);
    im.fixed_id = parse_id_field(r, o, path);
    im.ref_error = r.number(o, path, "ref_error", 0.0);
    if (std::abs(im.ref_error) > 0.2) r.fail(path + ".ref_error", "process error beyond +-20%");
    if (o.contains("load")) {
      const auto& l = o.at("load");
      r.only(l, path + ".load", {"resistance", "series_capacitance_uf", "residual_charge_uc"});
      im.load.resistance = r.number(l, path + ".load", "resistance", im.load.resistance);
      if (l.contains("series_capacitance_uf"))
        im.load.series_capacitance = r.number(l, path + ".load", "series_capacitance_uf", 0.0) * 1e-6;
      im.load.residual_charge = r.number(l, path + ".load", "residual_charge_uc", 0.0) * 1e-6;
      r.check(path + ".load", [&] { im.load.validate(); });
    }
    s.implants.push_back(im);
    s.scene.poses.push_back(im.pose);
  }
}

std::optional<downlink::Packet> parse_packet(Reader& r, const json& o, const std::string& path, const Scenario& s) {
  r.only(o, path, {"to", "id", "amp_code", "pw_code", "delay_code", "mode", "ref_trim"});
  downlink::Packet p;
  if (o.contains("to") == o.contains("id")) {
    r.fail(path, "give exactly one of 'to' (implant name) or 'id' (binary string)");
    return std::nullopt;
  }
  if (o.contains("id")) {
    const auto id = parse_id_field(r, o, path);
    if (!id) return std::nullopt;
    p.device_id = *id;
  } else {
    const auto to = r.string(o, path, "to", "");
    const auto it = std::find_if(s.implants.begin(), s.implants.end(), [&](const auto& im) { return im.name == to; });
    if (it == s.implants.end()) {
      r.fail(path + ".to", "no implant named '" + to + "'");
      return std::nullopt;
    }
    p.device_id = s.expected_id(static_cast<std::size_t>(it - s.implants.begin()));
  }
  auto& pl = p.payload;
  pl.amp_code = static_cast<std::uint8_t>(r.integer(o, path, "amp_code", 0));
  pl.pw_code = static_cast<std::uint8_t>(r.integer(o, path, "pw_code", 0));
  pl.delay_code = static_cast<std::uint8_t>(r.integer(o, path, "delay_code", 0));
  pl.ref_trim = static_cast<std::uint8_t>(r.integer(o, path, "ref_trim", s.stim.trim_center));
  const auto mode = r.string(o, path, "mode", "biphasic");
  if (mode != "biphasic" && mode != "monophasic") r.fail(path + ".mode", "expected biphasic or monophasic");
  pl.mode = mode == "biphasic" ? 1 : 0;
  for (const char* key : {"amp_code", "pw_code", "delay_code", "ref_trim"}) {
    const auto v = r.integer(o, path, key, 0);
    if (v < 0 || v > 255) r.fail(path + "." + key, "out of range");
  }
  bool ok = true;
  r.check(path, [&] {
    try {
      pl.validate();
    } catch (...) {
      ok = false;
      throw;
    }
  });
  return ok ? std::optional(p) : std::nullopt;
}

void parse_plan(Reader& r, const json& j, Scenario& s) {
  const std::string path = "plan";
  r.only(j, path, {"ask_depth", "packets_per_cycle", "tail_ms", "cycles"});
  SchedulePlan plan;
  const double hz = s.scene.coil.carrier_freq;
  plan.ask_depth = r.number(j, path, "ask_depth", plan.ask_depth);
  if (!(plan.ask_depth > 0.0 && plan.ask_depth < 0.8))
    r.fail(path + ".ask_depth", "must lie in (0, 0.8) so the low level never reads as a notch");
  plan.tail_cycles = to_cycles(r.number(j, path, "tail_ms", 0.0), hz);
  if (plan.tail_cycles < 0) r.fail(path + ".tail_ms", "must be non-negative");
  if (!j.contains("cycles") || !j.at("cycles").is_array() || j.at("cycles").empty()) {
    r.fail(path + ".cycles", "expected a non-empty array");
  } else {
    const auto& cs = j.at("cycles");
    for (std::size_t i = 0; i < cs.size(); ++i) {
      const std::string cp = path + ".cycles[" + std::to_string(i) + "]";
      const auto& o = cs[i];
      r.only(o, cp, {"packets", "trigger_only", "charge_ms", "guard_cycles", "guard_ms", "stim_ms", "period_ms",
                     "repeat"});
      CyclePlan c;
      c.trigger_only = r.boolean(o, cp, "trigger_only", false);
      if (o.contains("packets")) {
        if (!o.at("packets").is_array()) r.fail(cp + ".packets", "expected an array");
        else
          for (std::size_t k = 0; k < o.at("packets").size(); ++k)
            if (auto p = parse_packet(r, o.at("packets")[k], cp + ".packets[" + std::to_string(k) + "]", s))
              c.packets.push_back(*p);
      }
      if (c.packets.empty() && !c.trigger_only && !(o.contains("packets") && !o.at("packets").empty()))
        r.fail(cp, "a cycle without packets must set trigger_only");
      if (!c.packets.empty() && c.trigger_only) r.fail(cp, "trigger_only cycles carry no packets");
      c.charge_cycles = to_cycles(r.number(o, cp, "charge_ms", 0.0), hz);
      if (o.contains("guard_ms")) c.guard_cycles = to_cycles(r.number(o, cp, "guard_ms", 0.0), hz);
      c.guard_cycles = r.integer(o, cp, "guard_cycles", c.guard_cycles);
      c.stim_cycles = to_cycles(r.number(o, cp, "stim_ms", 0.0), hz);
      if (o.contains("period_ms")) c.period_cycles = to_cycles(r.number(o, cp, "period_ms", 0.0), hz);
      c.repeat = static_cast<int>(r.integer(o, cp, "repeat", 1));
      if (c.charge_cycles < 0) r.fail(cp + ".charge_ms", "must be non-negative");
      if (c.guard_cycles <= 0) r.fail(cp + ".guard_cycles", "must be positive");
      if (c.stim_cycles <= 0) r.fail(cp + ".stim_ms", "stimulation window must be positive");
      if (c.repeat < 1) r.fail(cp + ".repeat", "must be at least 1");
      plan.cycles.push_back(std::move(c));
    }
  }
  int most = 0;
  for (const auto& c : plan.cycles) most = std::max(most, static_cast<int>(c.packets.size()));
  s.packets_per_cycle = static_cast<int>(r.integer(j, path, "packets_per_cycle", std::max(most, 1)));
  if (s.packets_per_cycle < most) r.fail(path + ".packets_per_cycle", "smaller than the largest cycle");
  s.plan = std::move(plan);
}

}  // namespace

ScenarioError::ScenarioError(std::vector<std::string> problems)
    : std::runtime_error("invalid scenario:" + join(problems)), problems_(std::move(problems)) {}

std::uint8_t Scenario::expected_id(std::size_t implant) const {
  const auto& im = implants.at(implant);
  return im.fixed_id ? *im.fixed_id : identity::generate_id(im.seed, 0, puf).bits;
}

CycleIndex::CycleIndex(const FieldSchedule& schedule) {
  std::size_t notches = 0;
  const auto& segs = schedule.segments();
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (segs[i].kind != SegmentKind::Notch) continue;
    if (notches++ % 2 == 0) starts_.push_back(schedule.start_of(i));
  }
}

int CycleIndex::at(Cycle k) const {
  const auto it = std::upper_bound(starts_.begin(), starts_.end(), k);
  return static_cast<int>(it - starts_.begin()) - 1;
}

json schedule_to_json(const FieldSchedule& s) {
  json out = json::array();
  for (const auto& seg : s.segments())
    out.push_back({{"kind", std::string(to_string(seg.kind))}, {"cycles", seg.cycles}, {"level", seg.level}});
  return out;
}

FieldSchedule schedule_from_json(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("field schedule must be an array");
  FieldSchedule s;
  for (const auto& o : j) {
    FieldSegment seg;
    seg.kind = segment_kind_from_string(o.at("kind").get<std::string>());
    seg.cycles = o.at("cycles").get<Cycle>();
    seg.level = o.value("level", seg.kind == SegmentKind::Notch ? 0.0 : 1.0);
    s.append(seg);
  }
  return s;
}

void build_schedule(Scenario& s) {
  if (!s.plan) return;
  FieldSchedule out;
  s.tx_packets.clear();
  int cycle_index = 0;
  for (const auto& c : s.plan->cycles) {
    for (int rep = 0; rep < c.repeat; ++rep, ++cycle_index) {
      downlink::CycleTiming t;
      t.guard_cycles = c.guard_cycles;
      t.stim_cycles = c.stim_cycles;
      const Cycle data = static_cast<Cycle>(c.packets.size()) * downlink::kPacketBits * kCyclesPerBit;
      const Cycle fixed = 2 * t.notch_cycles + data + t.guard_cycles + t.stim_cycles;
      t.charge_cycles = c.period_cycles ? *c.period_cycles - fixed : c.charge_cycles;
      if (t.charge_cycles <= 0)
        throw ScenarioError({"plan: cycle " + std::to_string(cycle_index) + " period too short for its contents"});
      const Cycle base = out.total_cycles();
      Cycle start = base + t.charge_cycles + t.notch_cycles;
      for (const auto& p : c.packets) {
        const Cycle len = downlink::kPacketBits * kCyclesPerBit;
        s.tx_packets.push_back({start, start + len, cycle_index, p});
        start += len;
      }
      out.append(downlink::modulate(c.packets, s.plan->ask_depth, t));
    }
  }
  if (s.plan->tail_cycles > 0) out.append({SegmentKind::Charge, s.plan->tail_cycles, 1.0});
  s.scene.schedule = out;
}

Scenario parse_scenario(const json& j) {
  std::vector<std::string> problems;
  Reader r(problems);
  Scenario s;
  r.only(j, "scenario",
         {"schema_version", "name", "description", "seed", "duration_ms", "steps_per_cycle", "allow_collisions",
          "trace_decimation", "coil", "film", "tissue_attenuation", "gain_tables", "power", "stim", "puf", "implants",
          "plan", "field_schedule", "drive_profile", "source_profile"});
  if (!problems.empty() && !j.is_object()) throw ScenarioError(problems);

  s.schema_version = static_cast<int>(r.integer(j, "scenario", "schema_version", -1));
  if (s.schema_version != kScenarioSchemaVersion)
    r.fail("schema_version", "expected " + std::to_string(kScenarioSchemaVersion));
  s.name = r.string(j, "scenario", "name", s.name);
  if (j.contains("seed") && !j.at("seed").is_number_unsigned()) r.fail("seed", "expected an unsigned integer");
  else if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  s.steps_per_cycle = static_cast<int>(r.integer(j, "scenario", "steps_per_cycle", 1));
  if (s.steps_per_cycle != 1)
    r.fail("steps_per_cycle", "the kernel advances one carrier cycle per step; only 1 is supported");
  s.allow_collisions = r.boolean(j, "scenario", "allow_collisions", false);
  s.trace_decimation = static_cast<int>(r.integer(j, "scenario", "trace_decimation", s.trace_decimation));
  if (s.trace_decimation < 1) r.fail("trace_decimation", "must be at least 1");
  s.scene.tissue_attenuation = r.number(j, "scenario", "tissue_attenuation", 1.0);

  std::optional<std::pair<double, double>> calibrate = std::pair{40e-3, 1.5};
  parse_coil(r, j.value("coil", json::object()), s, calibrate);
  parse_film(r, j.value("film", json::object()), s);
  if (j.contains("gain_tables")) parse_gains(r, j.at("gain_tables"), s);
  if (j.contains("power")) parse_power(r, j.at("power"), s);
  r.check("power", [&] { s.power.validate(); });
  if (j.contains("stim")) parse_stim(r, j.at("stim"), s);
  if (j.contains("puf")) {
    const auto& o = j.at("puf");
    r.only(o, "puf", {"noise_sigma", "votes"});
    s.puf.noise_sigma = r.number(o, "puf", "noise_sigma", s.puf.noise_sigma);
    s.puf.votes = static_cast<int>(r.integer(o, "puf", "votes", s.puf.votes));
    if (s.puf.votes <= 0 || s.puf.votes % 2 == 0) r.fail("puf.votes", "must be odd and positive");
    if (s.puf.noise_sigma < 0.0) r.fail("puf.noise_sigma", "must be non-negative");
  }
  if (s.scene.tissue_attenuation <= 0.0 || s.scene.tissue_attenuation > 1.0)
    r.fail("tissue_attenuation", "must lie in (0, 1]");
  if (calibrate && problems.empty())
    s.scene.coil.drive_current_peak = channel::calibrate_for_amplitude(
        s.scene.coil, s.scene.film, s.scene.tissue_attenuation, calibrate->first, calibrate->second);

  parse_implants(r, j.value("implants", json()), s);

  // Names, poses and IDs must be distinct.
  std::set<std::string> names;
  for (const auto& im : s.implants)
    if (!names.insert(im.name).second) r.fail("implants", "duplicate implant name '" + im.name + "'");
  const bool implants_ok = problems.empty();
  if (implants_ok) r.check("implants", [&] { channel::coupling_perturbation(s.scene.poses); });
  if (implants_ok) {
    std::map<std::uint8_t, std::string> ids;
    for (std::size_t i = 0; i < s.implants.size(); ++i) {
      const auto id = s.expected_id(i);
      const auto [it, fresh] = ids.emplace(id, s.implants[i].name);
      if (!fresh && !s.allow_collisions)
        r.fail("implants", "implants '" + it->second + "' and '" + s.implants[i].name + "' share ID " +
                               identity::format_id(id) + " (set allow_collisions to permit)");
    }
  }

  if (j.contains("plan") == j.contains("field_schedule"))
    r.fail("scenario", "give exactly one of 'plan' or 'field_schedule'");
  if (j.contains("plan")) parse_plan(r, j.at("plan"), s);
  if (j.contains("field_schedule")) {
    r.check("field_schedule", [&] { s.scene.schedule = schedule_from_json(j.at("field_schedule")); });
    s.packets_per_cycle = 1;
  }

  if (j.contains("drive_profile") && j.contains("source_profile"))
    r.fail("scenario", "give at most one of drive_profile and source_profile");
  if (j.contains("drive_profile")) {
    auto pts = r.pairs(j.at("drive_profile"), "drive_profile");
    for (auto& p : pts) p.first *= 1e-3;
    r.check("drive_profile", [&] { s.scene.drive_profile = channel::DriveProfile(pts); });
  }
  if (j.contains("source_profile") && problems.empty()) {
    // Source amplitude seen by one implant, converted to a drive multiplier.
    const auto& o = j.at("source_profile");
    r.only(o, "source_profile", {"implant", "points"});
    const auto who = r.string(o, "source_profile", "implant", s.implants.front().name);
    const auto it = std::find_if(s.implants.begin(), s.implants.end(), [&](const auto& im) { return im.name == who; });
    if (it == s.implants.end()) {
      r.fail("source_profile.implant", "no implant named '" + who + "'");
    } else {
      const double unit = channel::steady_amplitude(s.scene, static_cast<std::size_t>(it - s.implants.begin()));
      auto pts = r.pairs(o.value("points", json()), "source_profile.points");
      for (auto& p : pts) {
        p.first *= 1e-3;
        p.second /= unit;
      }
      r.check("source_profile", [&] { s.scene.drive_profile = channel::DriveProfile(pts); });
    }
  }

  if (problems.empty()) r.check("plan", [&] { build_schedule(s); });
  if (problems.empty() && s.scene.schedule.notch_count() % 2 != 0)
    r.fail("schedule", "notch count is odd; every cycle needs its second notch");
  s.duration_cycles = s.scene.schedule.total_cycles();
  if (j.contains("duration_ms")) {
    s.duration_cycles = to_cycles(r.number(j, "scenario", "duration_ms", 0.0), s.scene.coil.carrier_freq);
    if (s.duration_cycles <= 0) r.fail("duration_ms", "must be positive");
  }
  if (problems.empty() && s.duration_cycles <= 0) r.fail("scenario", "empty schedule");
  if (problems.empty()) r.check("scene", [&] { s.scene.validate(); });
  if (!problems.empty()) throw ScenarioError(problems);
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError({path.string() + ": cannot open"});
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ScenarioError({path.string() + ": " + e.what()});
  }
  return parse_scenario(j);
}

}  // namespace mesim

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

#include "mesim/channel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace mesim::channel {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

void require(bool ok, const char* what) {
  if (!ok) throw std::domain_error(what);
}

void check_angle(double deg, const char* name) {
  if (!(deg >= 0.0 && deg <= 90.0))
    throw std::domain_error(std::string(name) + " must lie in [0, 90] degrees");
}

// Coupling ramps linearly from 1 at this spacing down to kCouplingFloor at 0.
constexpr double kCouplingSpacing = 8e-3;
constexpr double kCouplingFloor = 0.97;

}  // namespace

void CoilSpec::validate() const {
  require(radius > 0.0, "coil radius must be positive");
  require(turns > 0, "coil turns must be positive");
  require(carrier_freq > 0.0, "carrier frequency must be positive");
  require(drive_current_peak >= 0.0, "drive current must be non-negative");
}

void MEFilmSpec::validate() const {
  require(length > 0.0 && width > 0.0, "film dimensions must be positive");
  require(resonant_freq > 0.0, "film resonant frequency must be positive");
  require(source_resistance > 0.0, "film source resistance must be positive");
  require(ringup_cycles > 0.0, "film ring-up cycle count must be positive");
  require(voltage_coefficient > 0.0, "film voltage coefficient must be positive");
  // >7 Vpp at 5 Oe.
  require(voltage_coefficient * 5.0 >= 3.5, "film voltage coefficient gives less than 3.5 V amplitude at 5 Oe");
}

void Pose::validate() const {
  require(axial_distance >= 0.0, "axial distance must be non-negative");
  require(lateral_offset >= 0.0, "lateral offset must be non-negative");
  check_angle(theta_xz, "theta_xz");
  check_angle(theta_yz, "theta_yz");
  check_angle(theta_z, "theta_z");
}

std::array<double, 3> Pose::position() const {
  return {lateral_offset * std::cos(azimuth * kDeg), lateral_offset * std::sin(azimuth * kDeg), axial_distance};
}

GainTable::GainTable(std::vector<std::pair<double, double>> knots) : knots_(std::move(knots)) {
  if (knots_.size() < 2) throw std::invalid_argument("gain table needs at least two knots");
  if (knots_.front().first != 0.0 || knots_.front().second != 1.0)
    throw std::invalid_argument("gain table must start at (0, 1.0)");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < knots_.size(); ++i) {
    const auto [a, g] = knots_[i];
    if (g < 0.0 || g > 1.0) throw std::invalid_argument("gain table values must lie in [0, 1]");
    if (i > 0 && !(a > knots_[i - 1].first)) throw std::invalid_argument("gain table arguments must increase");
    if (i > 0 && g > knots_[i - 1].second) throw std::invalid_argument("gain table must be nonincreasing");
    x.push_back(a);
    y.push_back(g);
  }
  // Gains are symmetric about zero misalignment, so the curve leaves the
  // first knot flat.
  curve_ = MonotoneCubic(std::move(x), std::move(y), true);
}

GainLookup GainTable::lookup(double arg) const {
  const bool clamped = arg > curve_.back_x();
  return {std::clamp(curve_(arg), 0.0, 1.0), clamped};
}

GainTable GainTable::default_angular() {
  return GainTable({{0.0, 1.0}, {30.0, 0.95}, {60.0, 0.80}, {90.0, 0.35}});
}

GainTable GainTable::default_lateral() {
  return GainTable({{0.0, 1.0}, {0.005, 0.98}, {0.010, 0.92}, {0.015, 0.80}, {0.020, 0.60}, {0.030, 0.30}});
}

DriveProfile::DriveProfile(std::vector<std::pair<double, double>> points) : points_(std::move(points)) {
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (points_[i].second < 0.0) throw std::invalid_argument("drive profile scale must be non-negative");
    if (i > 0 && !(points_[i].first > points_[i - 1].first))
      throw std::invalid_argument("drive profile times must increase");
  }
}

double DriveProfile::operator()(double t) const {
  if (points_.empty()) return 1.0;
  if (t <= points_.front().first) return points_.front().second;
  if (t >= points_.back().first) return points_.back().second;
  const auto it = std::upper_bound(points_.begin(), points_.end(), t,
                                   [](double v, const auto& p) { return v < p.first; });
  const auto& [t1, s1] = *it;
  const auto& [t0, s0] = *(it - 1);
  return s0 + (s1 - s0) * (t - t0) / (t1 - t0);
}

double coil_field_on_axis(const CoilSpec& coil, double z, double current) {
  require(z >= 0.0, "axial distance must be non-negative");
  const double r2 = coil.radius * coil.radius;
  const double b = kMu0 * coil.turns * current * r2 / (2.0 * std::pow(r2 + z * z, 1.5));
  return b / kTeslaPerOersted;
}

double coil_field(const CoilSpec& coil, const Pose& pose, double current) {
  return coil_field_on_axis(coil, pose.axial_distance, current);
}

double calibrate_drive_current(const CoilSpec& coil, double z, double field_oe) {
  const double unit = coil_field_on_axis(coil, z, 1.0);
  return field_oe / unit;
}

double angular_gain(const GainTable& table, double theta_xz, double theta_yz) {
  return angular_gain(table, table, theta_xz, theta_yz);
}

double angular_gain(const GainTable& xz_table, const GainTable& yz_table, double theta_xz, double theta_yz) {
  check_angle(theta_xz, "theta_xz");
  check_angle(theta_yz, "theta_yz");
  return xz_table(theta_xz) * yz_table(theta_yz);
}

GainLookup lateral_gain(const GainTable& table, double offset) {
  require(offset >= 0.0, "lateral offset must be non-negative");
  return table.lookup(offset);
}

double ringup_envelope(double t_since_edge, const MEFilmSpec& film, bool rising) {
  require(t_since_edge >= 0.0, "time since edge must be non-negative");
  const double decay = std::exp(-t_since_edge / film.time_constant());
  return rising ? 1.0 - decay : decay;
}

double coupling_factor_for_spacing(double spacing) {
  if (!(spacing > 0.0)) throw std::domain_error("coincident implant poses");
  if (spacing >= kCouplingSpacing) return 1.0;
  return kCouplingFloor + (1.0 - kCouplingFloor) * spacing / kCouplingSpacing;
}

std::vector<double> coupling_perturbation(std::span<const Pose> poses) {
  require(!poses.empty(), "coupling needs at least one pose");
  std::vector<double> out(poses.size(), 1.0);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const auto a = poses[i].position();
    for (std::size_t j = i + 1; j < poses.size(); ++j) {
      const auto b = poses[j].position();
      const double d = std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
      const double f = coupling_factor_for_spacing(d);
      out[i] = std::min(out[i], f);
      out[j] = std::min(out[j], f);
    }
  }
  return out;
}

void Scene::validate() const {
  coil.validate();
  film.validate();
  require(tissue_attenuation >= 0.0 && tissue_attenuation <= 1.0, "tissue attenuation must lie in [0, 1]");
  for (const auto& p : poses) p.validate();
}

double steady_amplitude(const Scene& scene, std::size_t implant, double level, double drive_scale) {
  if (implant >= scene.poses.size()) throw std::out_of_range("unknown implant index");
  return steady_amplitude(scene, implant, level, drive_scale, coupling_perturbation(scene.poses)[implant]);
}

double steady_amplitude(const Scene& scene, std::size_t implant, double level, double drive_scale,
                        double coupling) {
  if (implant >= scene.poses.size()) throw std::out_of_range("unknown implant index");
  const Pose& pose = scene.poses[implant];
  const double field = coil_field(scene.coil, pose, scene.coil.drive_current_peak * drive_scale * level) *
                       scene.tissue_attenuation;
  const double gain = angular_gain(scene.angular_xz, scene.angular_yz, pose.theta_xz, pose.theta_yz) *
                      lateral_gain(scene.lateral, pose.lateral_offset).value;
  return scene.film.voltage_coefficient * field * gain * coupling;
}

double received_voltage(const Scene& scene, std::size_t implant, double t) {
  if (implant >= scene.poses.size()) throw std::out_of_range("unknown implant index");
  const double period = scene.carrier_period();
  const double end = cycles_to_seconds(scene.schedule.total_cycles(), scene.coil.carrier_freq);
  if (t < 0.0 || t > end * (1.0 + 1e-12)) throw std::out_of_range("time outside the field schedule");

  const double tau = scene.film.time_constant();
  const double coupling = coupling_perturbation(scene.poses)[implant];
  const double unit = steady_amplitude(scene, implant, 1.0, 1.0, coupling);
  const double decay = std::exp(-period / tau);

  double env = 0.0;
  const auto& segs = scene.schedule.segments();
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const Cycle start = scene.schedule.start_of(i);
    const double t0 = cycles_to_seconds(start, scene.coil.carrier_freq);
    const double t1 = cycles_to_seconds(start + segs[i].cycles, scene.coil.carrier_freq);
    if (scene.drive_profile.empty()) {
      const double target = unit * segs[i].level;
      if (t <= t1) return target + (env - target) * std::exp(-(t - t0) / tau);
      env = target + (env - target) * std::exp(-(t1 - t0) / tau);
      continue;
    }
    // Drive sampled once per carrier cycle, as the kernel does.
    for (Cycle k = start; k < start + segs[i].cycles; ++k) {
      const double tk = cycles_to_seconds(k, scene.coil.carrier_freq);
      const double target = unit * segs[i].level * scene.drive_profile(tk);
      if (t <= tk + period) return target + (env - target) * std::exp(-(t - tk) / tau);
      env = envelope_step(env, target, decay);
    }
  }
  return env;
}

double calibrate_for_amplitude(const CoilSpec& coil, const MEFilmSpec& film, double tissue, double z,
                               double amplitude) {
  require(tissue > 0.0, "tissue attenuation must be positive to calibrate");
  const double field_needed = amplitude / (film.voltage_coefficient * tissue);
  return calibrate_drive_current(coil, z, field_needed);
}

}  // namespace mesim::channel

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

#include <array>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "mesim/field_schedule.hpp"
#include "mesim/interp.hpp"
#include "mesim/units.hpp"

// Channel: TX coil field, ME film transduction and misalignment gains. The
// off-axis field is factored as the on-axis loop field times a measured
// lateral gain curve; no field solver is involved.
namespace mesim::channel {

struct CoilSpec {
  double radius = 0.03;  // m
  int turns = 8;
  double drive_current_peak = 1.0;  // A
  double carrier_freq = kCarrierHz;

  void validate() const;
};

struct MEFilmSpec {
  double length = 3e-3;
  double width = 2e-3;
  double resonant_freq = kCarrierHz;
  double source_resistance = 800.0;  // ohm, purely resistive
  double voltage_coefficient = 0.7;  // V amplitude per Oe along the long axis
  double ringup_cycles = 15.0;

  void validate() const;
  // First-order ring-up time constant; three of them make the settle count.
  double time_constant() const { return ringup_cycles / 3.0 / resonant_freq; }
};

struct Pose {
  double axial_distance = 0.0;  // m along the coil axis
  double lateral_offset = 0.0;  // m, radial displacement from the axis
  double theta_xz = 0.0;        // deg
  double theta_yz = 0.0;        // deg
  double theta_z = 0.0;         // deg, rotation about the film long axis
  double azimuth = 0.0;         // deg, direction of the lateral offset (placement only)

  void validate() const;
  std::array<double, 3> position() const;
};

// Result of a gain-table lookup. `clamped` is set when the argument lies past
// the last knot and the end value was used.
struct GainLookup {
  double value = 1.0;
  bool clamped = false;
};

// Monotone nonincreasing gain curve over an angle (deg) or offset (m).
class GainTable {
 public:
  GainTable() : GainTable(default_angular().knots()) {}
  explicit GainTable(std::vector<std::pair<double, double>> knots);

  GainLookup lookup(double arg) const;
  double operator()(double arg) const { return lookup(arg).value; }

  const std::vector<std::pair<double, double>>& knots() const { return knots_; }

  static GainTable default_angular();
  static GainTable default_lateral();

 private:
  std::vector<std::pair<double, double>> knots_;
  MonotoneCubic curve_;
};

// Piecewise-linear multiplier on the TX drive over time (held at the end
// values outside the listed points). Empty means constant 1.
class DriveProfile {
 public:
  DriveProfile() = default;
  explicit DriveProfile(std::vector<std::pair<double, double>> points);

  double operator()(double t) const;
  bool empty() const { return points_.empty(); }
  const std::vector<std::pair<double, double>>& points() const { return points_; }

 private:
  std::vector<std::pair<double, double>> points_;
};

// On-axis flux density of a circular N-turn loop, returned in oersted.
double coil_field_on_axis(const CoilSpec& coil, double z, double current);
double coil_field(const CoilSpec& coil, const Pose& pose, double current);

// Drive current that produces `field_oe` on axis at distance `z`.
double calibrate_drive_current(const CoilSpec& coil, double z, double field_oe);

double angular_gain(const GainTable& table, double theta_xz, double theta_yz);
double angular_gain(const GainTable& xz_table, const GainTable& yz_table, double theta_xz, double theta_yz);

GainLookup lateral_gain(const GainTable& table, double offset);

double ringup_envelope(double t_since_edge, const MEFilmSpec& film, bool rising);

// Inter-film coupling factor per film, from the closest neighbour spacing.
std::vector<double> coupling_perturbation(std::span<const Pose> poses);
double coupling_factor_for_spacing(double spacing);

// One carrier-period update of the first-order ring-up filter.
inline double envelope_step(double env, double target, double decay) {
  return target + (env - target) * decay;
}

struct Scene {
  CoilSpec coil;
  MEFilmSpec film;
  GainTable angular_xz = GainTable::default_angular();
  GainTable angular_yz = GainTable::default_angular();
  GainTable lateral = GainTable::default_lateral();
  double tissue_attenuation = 1.0;  // scalar multiplier on field strength
  std::vector<Pose> poses;
  FieldSchedule schedule;
  DriveProfile drive_profile;

  void validate() const;
  double carrier_period() const { return 1.0 / coil.carrier_freq; }
};

// Settled open-circuit amplitude for a given relative drive. `coupling` lets
// callers reuse a factor computed once for the scene.
double steady_amplitude(const Scene& scene, std::size_t implant, double level = 1.0, double drive_scale = 1.0);
double steady_amplitude(const Scene& scene, std::size_t implant, double level, double drive_scale,
                        double coupling);

// Open-circuit ME voltage amplitude of implant `implant` at time `t`,
// including ring-up/decay after every schedule edge.
double received_voltage(const Scene& scene, std::size_t implant, double t);

// Drive current giving `amplitude` volts at an aligned pose `z` metres away.
double calibrate_for_amplitude(const CoilSpec& coil, const MEFilmSpec& film, double tissue, double z,
                               double amplitude);

}  // namespace mesim::channel

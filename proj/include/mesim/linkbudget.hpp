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

#include <cstddef>
#include <utility>
#include <vector>

#include "mesim/channel.hpp"

// Static link analysis over scenes: power transfer efficiency, safe power,
// pass/fail maps and the distance-per-volume figure of merit.
namespace mesim::linkbudget {

// Reference points the static models are scaled to. Simulated (pte_vs_depth)
// and bench (peak_pte) values are kept apart and never interpolated together.
struct AnchorDataset {
  std::vector<std::pair<double, double>> pte_vs_depth = {{10e-3, 0.0167}, {30e-3, 0.0028}};
  double peak_pte = 0.0103;
  std::pair<double, double> safe_power = {30e-3, 3.8e-3};           // (m, W)
  std::pair<double, double> inductive_reference = {30e-3, 0.4e-3};  // (m, W)
  std::pair<double, double> field_limit = {60e-3, 0.1e-3};          // (m, T)

  void validate() const;
};

struct Estimate {
  double value = 0.0;
  bool clamped = false;  // argument was outside the anchored range
};

// Received over TX power for implant `implant`, scaled so an aligned film at
// the coil centre sees the peak anchor. `drive_level` 0 means the field is off.
double pte(const channel::Scene& scene, std::size_t implant, double drive_level = 1.0,
           const AnchorDataset& anchors = {});

// Matched-load bound on the power the film can deliver: V^2 / (8 R).
double available_power(double v_amplitude, double source_resistance);

// Safety-limited received power vs depth, following the field falloff from
// the safe-power anchor. Depths past the field-limit anchor are clamped.
Estimate max_safe_power(double depth, const channel::CoilSpec& coil = {}, const AnchorDataset& anchors = {});

// Simulated PTE vs depth (log-linear between anchors, clamped outside).
Estimate table_pte(double depth, const AnchorDataset& anchors = {});

struct GridPoint {
  double axial = 30e-3;
  double lateral = 0.0;
  double theta_xz = 0.0;
  double theta_yz = 0.0;
};

struct RegionPoint {
  GridPoint point;
  double amplitude = 0.0;
  bool pass = false;
};

inline constexpr double kOperatingThreshold = 1.5;  // V

// Pass/fail of implant 0 of `scene_template` moved to each grid point.
std::vector<RegionPoint> operating_region(const channel::Scene& scene_template, const std::vector<GridPoint>& grid,
                                          double threshold = kOperatingThreshold);

// Cartesian grid helper.
std::vector<GridPoint> make_grid(const std::vector<double>& axial, const std::vector<double>& lateral,
                                 const std::vector<double>& theta_xz, const std::vector<double>& theta_yz);

// Max distance over implant volume in mm/mm^3, from metres and cubic metres.
double figure_of_merit(double max_distance, double implant_volume);

}  // namespace mesim::linkbudget

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

#include "mesim/linkbudget.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mesim::linkbudget {

namespace {

// On-axis loop field shape, normalised so that only ratios are meaningful.
double geometry(const channel::CoilSpec& coil, double z) {
  const double r2 = coil.radius * coil.radius;
  return coil.radius * r2 / std::pow(r2 + z * z, 1.5);
}

}  // namespace

void AnchorDataset::validate() const {
  if (pte_vs_depth.size() < 2) throw std::invalid_argument("pte_vs_depth needs two points");
  for (std::size_t i = 0; i < pte_vs_depth.size(); ++i) {
    if (!(pte_vs_depth[i].second > 0.0)) throw std::invalid_argument("pte anchors must be positive");
    if (i > 0 && !(pte_vs_depth[i].first > pte_vs_depth[i - 1].first))
      throw std::invalid_argument("pte anchor depths must increase");
  }
  if (!(peak_pte > 0.0 && peak_pte < 1.0)) throw std::invalid_argument("peak pte must lie in (0, 1)");
  if (!(safe_power.second > 0.0)) throw std::invalid_argument("safe power anchor must be positive");
  if (!(field_limit.first >= safe_power.first)) throw std::invalid_argument("field limit depth below safe anchor");
}

double available_power(double v_amplitude, double source_resistance) {
  if (!(source_resistance > 0.0)) throw std::domain_error("source resistance must be positive");
  return v_amplitude * v_amplitude / (8.0 * source_resistance);
}

double pte(const channel::Scene& scene, std::size_t implant, double drive_level, const AnchorDataset& anchors) {
  if (implant >= scene.poses.size()) throw std::out_of_range("unknown implant index");
  if (!(scene.coil.drive_current_peak > 0.0)) throw std::domain_error("TX drive power must be positive");
  if (drive_level < 0.0) throw std::domain_error("drive level must be non-negative");
  if (drive_level == 0.0) return 0.0;

  // Received power and coil power both go as I^2, so the ratio depends on the
  // pose only. Computing it without the current keeps it exactly invariant.
  const auto& pose = scene.poses[implant];
  const double rel = geometry(scene.coil, pose.axial_distance) / geometry(scene.coil, 0.0) *
                     channel::angular_gain(scene.angular_xz, scene.angular_yz, pose.theta_xz, pose.theta_yz) *
                     channel::lateral_gain(scene.lateral, pose.lateral_offset).value * scene.tissue_attenuation;
  const double coupling = channel::coupling_perturbation(scene.poses)[implant];
  return anchors.peak_pte * rel * rel * coupling;
}

Estimate max_safe_power(double depth, const channel::CoilSpec& coil, const AnchorDataset& anchors) {
  if (depth < 0.0) throw std::domain_error("depth must be non-negative");
  Estimate e;
  if (depth > anchors.field_limit.first) {
    e.clamped = true;
    depth = anchors.field_limit.first;
  }
  const double ratio = geometry(coil, depth) / geometry(coil, anchors.safe_power.first);
  e.value = anchors.safe_power.second * ratio * ratio;
  return e;
}

Estimate table_pte(double depth, const AnchorDataset& anchors) {
  const auto& pts = anchors.pte_vs_depth;
  Estimate e;
  if (depth <= pts.front().first || depth >= pts.back().first) {
    e.clamped = depth < pts.front().first || depth > pts.back().first;
    e.value = depth <= pts.front().first ? pts.front().second : pts.back().second;
    return e;
  }
  const auto it = std::upper_bound(pts.begin(), pts.end(), depth,
                                   [](double v, const auto& p) { return v < p.first; });
  const auto& [d1, p1] = *it;
  const auto& [d0, p0] = *(it - 1);
  const double f = (depth - d0) / (d1 - d0);
  e.value = std::exp(std::log(p0) + f * (std::log(p1) - std::log(p0)));
  return e;
}

std::vector<RegionPoint> operating_region(const channel::Scene& scene_template, const std::vector<GridPoint>& grid,
                                          double threshold) {
  if (scene_template.poses.empty()) throw std::invalid_argument("scene template needs an implant");
  channel::Scene scene = scene_template;
  scene.poses.resize(1);
  std::vector<RegionPoint> out;
  out.reserve(grid.size());
  for (const auto& g : grid) {
    auto& pose = scene.poses[0];
    pose.axial_distance = g.axial;
    pose.lateral_offset = g.lateral;
    pose.theta_xz = g.theta_xz;
    pose.theta_yz = g.theta_yz;
    const double v = channel::steady_amplitude(scene, 0, 1.0, 1.0, 1.0);
    out.push_back({g, v, v >= threshold - 1e-12});
  }
  return out;
}

std::vector<GridPoint> make_grid(const std::vector<double>& axial, const std::vector<double>& lateral,
                                 const std::vector<double>& theta_xz, const std::vector<double>& theta_yz) {
  std::vector<GridPoint> grid;
  for (double a : axial)
    for (double l : lateral)
      for (double x : theta_xz)
        for (double y : theta_yz) grid.push_back({a, l, x, y});
  return grid;
}

double figure_of_merit(double max_distance, double implant_volume) {
  if (!(implant_volume > 0.0)) throw std::domain_error("implant volume must be positive");
  if (max_distance < 0.0) throw std::domain_error("distance must be non-negative");
  return (max_distance * 1e3) / (implant_volume * 1e9);
}

}  // namespace mesim::linkbudget

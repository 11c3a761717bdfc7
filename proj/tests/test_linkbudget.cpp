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


#include "doctest.h"

#include <cmath>

#include "mesim/linkbudget.hpp"

using namespace mesim;
using namespace mesim::linkbudget;

namespace {

channel::Scene scene_at(channel::Pose p) {
  channel::Scene s;
  s.poses = {p};
  s.coil.drive_current_peak = channel::calibrate_for_amplitude(s.coil, s.film, 1.0, 0.04, 1.5);
  return s;
}

double loop_ratio(double r, double z) { return std::pow(r * r / (r * r + z * z), 1.5); }

}  // namespace

TEST_CASE("peak transfer efficiency at the ideal centre") {
  CHECK(pte(scene_at({0.0, 0.0}), 0) == 0.0103);
}

TEST_CASE("transfer efficiency falls as the square of the field") {
  const double r = channel::CoilSpec{}.radius;
  CHECK(pte(scene_at({0.0, 0.0, 60.0, 0.0}), 0) == doctest::Approx(0.64 * 0.0103));
  CHECK(pte(scene_at({0.02, 0.0}), 0) == doctest::Approx(0.0103 * std::pow(loop_ratio(r, 0.02), 2)));
  auto s = scene_at({0.0, 0.0});
  s.tissue_attenuation = 0.5;
  CHECK(pte(s, 0) == doctest::Approx(0.25 * 0.0103));
}

TEST_CASE("transfer efficiency does not depend on drive strength") {
  auto s = scene_at({0.025, 0.005, 20.0, 10.0});
  const double base = pte(s, 0);
  for (double i : {0.1, 1.0, 7.0}) {
    s.coil.drive_current_peak = i;
    CHECK(pte(s, 0) == base);
  }
  CHECK(pte(s, 0, 0.3) == base);
  CHECK(pte(s, 0, 0.0) == 0.0);
  s.coil.drive_current_peak = 0.0;
  CHECK_THROWS(pte(s, 0));
}

TEST_CASE("available power into a matched load") {
  CHECK(available_power(2.0, 800.0) == doctest::Approx(4.0 / 6400.0));
  CHECK_THROWS(available_power(1.0, 0.0));
}

TEST_CASE("safe power anchor and extrapolation") {
  const auto a = max_safe_power(0.03);
  CHECK(a.value == 3.8e-3);
  CHECK_FALSE(a.clamped);
  const double r = channel::CoilSpec{}.radius;
  const double scale = std::pow(loop_ratio(r, 0.045) / loop_ratio(r, 0.03), 2);
  CHECK(max_safe_power(0.045).value == doctest::Approx(3.8e-3 * scale));
  CHECK(max_safe_power(0.08).clamped);
  CHECK(max_safe_power(0.08).value == max_safe_power(0.06).value);
  CHECK_THROWS(max_safe_power(-0.01));
}

TEST_CASE("tabulated transfer efficiency interpolates in log space") {
  CHECK(table_pte(0.010).value == 0.0167);
  CHECK(table_pte(0.030).value == 0.0028);
  CHECK(table_pte(0.020).value == doctest::Approx(std::sqrt(0.0167 * 0.0028)));
  CHECK(table_pte(0.005).clamped);
  CHECK(table_pte(0.040).clamped);
  CHECK_FALSE(table_pte(0.020).clamped);
}

TEST_CASE("anchor dataset validation") {
  AnchorDataset a;
  CHECK_NOTHROW(a.validate());
  a.pte_vs_depth = {{0.01, 0.01}};
  CHECK_THROWS(a.validate());
  a = {};
  a.peak_pte = 1.5;
  CHECK_THROWS(a.validate());
}

TEST_CASE("figure of merit is millimetres per cubic millimetre") {
  CHECK(figure_of_merit(0.040, 6.2e-9) == doctest::Approx(6.45).epsilon(0.01 / 6.45));
  CHECK(figure_of_merit(0.030, 1.0e-9) == doctest::Approx(30.0));
  CHECK_THROWS(figure_of_merit(0.01, 0.0));
}

TEST_CASE("operating region marks each point against the threshold") {
  const auto grid = make_grid({0.02, 0.04, 0.05}, {0.0}, {0.0}, {0.0});
  REQUIRE(grid.size() == 3);
  const auto region = operating_region(scene_at({0.01, 0.0}), grid);
  CHECK(region[0].pass);
  CHECK(region[1].amplitude == doctest::Approx(1.5).epsilon(1e-9));
  CHECK(region[1].pass);
  CHECK_FALSE(region[2].pass);
  CHECK(make_grid({1, 2}, {1, 2, 3}, {1}, {1, 2}).size() == 12);
}

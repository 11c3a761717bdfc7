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

#include <span>
#include <vector>

namespace mesim {

// Shape-preserving piecewise cubic Hermite interpolant (Fritsch-Carlson).
// Works from two knots upward; arguments outside the knot range are clamped
// to the end values.
class MonotoneCubic {
 public:
  MonotoneCubic() = default;
  // flat_start pins the slope at the first knot to zero, for curves that are
  // even in their argument.
  MonotoneCubic(std::vector<double> x, std::vector<double> y, bool flat_start = false);

  double operator()(double x) const;

  double front_x() const { return x_.front(); }
  double back_x() const { return x_.back(); }
  std::span<const double> xs() const { return x_; }
  std::span<const double> ys() const { return y_; }

 private:
  std::vector<double> x_, y_, slope_;
};

}  // namespace mesim

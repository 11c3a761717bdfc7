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

#include <string_view>
#include <vector>

#include "mesim/units.hpp"

namespace mesim {

enum class SegmentKind { Charge, Notch, Bit, Guard, Stim };

std::string_view to_string(SegmentKind kind);
SegmentKind segment_kind_from_string(std::string_view name);

// A run of carrier cycles at a constant relative TX amplitude. Level 0 is
// the carrier switched off; 1 is full drive.
struct FieldSegment {
  SegmentKind kind = SegmentKind::Charge;
  Cycle cycles = 0;
  double level = 1.0;

  bool operator==(const FieldSegment&) const = default;
};

// TX-side timeline of carrier amplitude segments.
class FieldSchedule {
 public:
  FieldSchedule() = default;
  explicit FieldSchedule(std::vector<FieldSegment> segments);

  void append(const FieldSegment& seg);
  void append(const FieldSchedule& other);

  Cycle total_cycles() const { return starts_.empty() ? 0 : starts_.back() + segments_.back().cycles; }
  double duration(double carrier_hz = kCarrierHz) const {
    return cycles_to_seconds(total_cycles(), carrier_hz);
  }

  // Level of the carrier during cycle `k`; zero past the end.
  double level_at(Cycle k) const;
  // Index of the segment containing cycle `k`, or -1 past the end.
  long segment_index_at(Cycle k) const;

  const std::vector<FieldSegment>& segments() const { return segments_; }
  Cycle start_of(std::size_t i) const { return starts_.at(i); }
  std::size_t notch_count() const;

  bool operator==(const FieldSchedule& o) const { return segments_ == o.segments_; }

 private:
  std::vector<FieldSegment> segments_;
  std::vector<Cycle> starts_;
};

}  // namespace mesim

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

#include "mesim/field_schedule.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace mesim {

std::string_view to_string(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::Charge: return "charge";
    case SegmentKind::Notch: return "notch";
    case SegmentKind::Bit: return "bit";
    case SegmentKind::Guard: return "guard";
    case SegmentKind::Stim: return "stim";
  }
  return "charge";
}

SegmentKind segment_kind_from_string(std::string_view name) {
  if (name == "charge") return SegmentKind::Charge;
  if (name == "notch") return SegmentKind::Notch;
  if (name == "bit") return SegmentKind::Bit;
  if (name == "guard") return SegmentKind::Guard;
  if (name == "stim") return SegmentKind::Stim;
  throw std::invalid_argument("unknown segment kind '" + std::string(name) + "'");
}

FieldSchedule::FieldSchedule(std::vector<FieldSegment> segments) {
  for (const auto& s : segments) append(s);
}

void FieldSchedule::append(const FieldSegment& seg) {
  if (seg.cycles <= 0) throw std::invalid_argument("field segment must span at least one cycle");
  if (seg.level < 0.0 || seg.level > 1.0) throw std::invalid_argument("field segment level outside [0, 1]");
  starts_.push_back(total_cycles());
  segments_.push_back(seg);
}

void FieldSchedule::append(const FieldSchedule& other) {
  for (const auto& s : other.segments_) append(s);
}

long FieldSchedule::segment_index_at(Cycle k) const {
  if (k < 0 || k >= total_cycles()) return -1;
  const auto it = std::upper_bound(starts_.begin(), starts_.end(), k);
  return static_cast<long>(it - starts_.begin()) - 1;
}

double FieldSchedule::level_at(Cycle k) const {
  const long i = segment_index_at(k);
  return i < 0 ? 0.0 : segments_[static_cast<std::size_t>(i)].level;
}

std::size_t FieldSchedule::notch_count() const {
  return static_cast<std::size_t>(std::count_if(segments_.begin(), segments_.end(),
                                                [](const FieldSegment& s) { return s.kind == SegmentKind::Notch; }));
}

}  // namespace mesim

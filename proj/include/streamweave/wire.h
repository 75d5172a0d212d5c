// Copyright 2026 The Streamweave Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Byte layout of connection frames, used by the trace dump.
//
//   unit        key u64 | timestamp u64 | seq u64 | payload length u32 | payload
//   WINDOW_END  window u64
//   EPOCH       epoch u32
//
// All integers are big-endian. End of stream travels as WINDOW_END with
// window 2^64-1.

#ifndef STREAMWEAVE_WIRE_H_
#define STREAMWEAVE_WIRE_H_

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "streamweave/core_model.h"

namespace streamweave {

enum class FrameKind { kUnit, kWindowEnd, kEpoch, kEnd };

inline constexpr uint64_t kEndWindow = std::numeric_limits<uint64_t>::max();

struct Frame {
  FrameKind kind = FrameKind::kUnit;
  DataUnit unit;        // kUnit
  uint64_t window = 0;  // kWindowEnd
  uint32_t epoch = 0;   // kEpoch

  static Frame of_unit(DataUnit u) { return {FrameKind::kUnit, std::move(u), 0, 0}; }
  static Frame window_end(uint64_t w) { return {FrameKind::kWindowEnd, {}, w, 0}; }
  static Frame epoch_marker(uint32_t e) { return {FrameKind::kEpoch, {}, 0, e}; }
  static Frame end() { return {FrameKind::kEnd, {}, kEndWindow, 0}; }
  bool is_unit() const { return kind == FrameKind::kUnit; }
};

std::vector<uint8_t> encode_frame(const Frame& f);
// Needs the kind since markers are not self-describing on the wire.
std::optional<Frame> decode_frame(FrameKind kind, std::span<const uint8_t> bytes);
std::string to_hex(std::span<const uint8_t> bytes);

}  // namespace streamweave

#endif  // STREAMWEAVE_WIRE_H_

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

#include "streamweave/wire.h"

namespace streamweave {
namespace {

void put(std::vector<uint8_t>& out, uint64_t v, int bytes) {
  for (int i = bytes - 1; i >= 0; --i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint64_t get(std::span<const uint8_t> in, size_t at, int bytes) {
  uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v = (v << 8) | in[at + i];
  return v;
}

}  // namespace

std::vector<uint8_t> encode_frame(const Frame& f) {
  std::vector<uint8_t> out;
  switch (f.kind) {
    case FrameKind::kUnit:
      out.reserve(28 + f.unit.payload.size());
      put(out, f.unit.key.value, 8);
      put(out, f.unit.timestamp, 8);
      put(out, f.unit.seq.value, 8);
      put(out, f.unit.payload.size(), 4);
      out.insert(out.end(), f.unit.payload.begin(), f.unit.payload.end());
      break;
    case FrameKind::kWindowEnd:
    case FrameKind::kEnd:
      put(out, f.window, 8);
      break;
    case FrameKind::kEpoch:
      put(out, f.epoch, 4);
      break;
  }
  return out;
}

std::optional<Frame> decode_frame(FrameKind kind, std::span<const uint8_t> in) {
  switch (kind) {
    case FrameKind::kUnit: {
      if (in.size() < 28) return std::nullopt;
      const uint64_t len = get(in, 24, 4);
      if (in.size() != 28 + len) return std::nullopt;
      DataUnit u;
      u.key = Key{get(in, 0, 8)};
      u.timestamp = get(in, 8, 8);
      u.seq = SequenceId{get(in, 16, 8)};
      u.payload.assign(in.begin() + 28, in.end());
      return Frame::of_unit(std::move(u));
    }
    case FrameKind::kWindowEnd:
    case FrameKind::kEnd: {
      if (in.size() != 8) return std::nullopt;
      const uint64_t w = get(in, 0, 8);
      if (w == kEndWindow) return Frame::end();
      return Frame::window_end(w);
    }
    case FrameKind::kEpoch:
      if (in.size() != 4) return std::nullopt;
      return Frame::epoch_marker(static_cast<uint32_t>(get(in, 0, 4)));
  }
  return std::nullopt;
}

std::string to_hex(std::span<const uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (uint8_t b : bytes) {
    s.push_back(kDigits[b >> 4]);
    s.push_back(kDigits[b & 0xf]);
  }
  return s;
}

}  // namespace streamweave

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

#ifndef STREAMWEAVE_STREAM_OPS_H_
#define STREAMWEAVE_STREAM_OPS_H_

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "streamweave/core_model.h"
#include "streamweave/partitioning.h"

namespace streamweave {

enum class SortDirection { kAscending, kDescending };

inline SortDirection direction_of(StreamOp op) {
  return op == StreamOp::kSortAsc ? SortDirection::kAscending
                                  : SortDirection::kDescending;
}

// Routing state of a GROUP stream for one window.
struct GroupRoute {
  uint32_t bucket_count = 1;
  BucketAllocation allocation;
  uint32_t epoch = 0;
};

uint32_t route_group(const DataUnit& u, const GroupRoute& route);

// k-way merge over sorted sources. A source is one incoming sorted run; it is
// either still open (more units may arrive) or done for the window.
struct MergeSource {
  std::deque<DataUnit> pending;
  bool window_done = false;
};

struct SortMergeState {
  SortDirection direction = SortDirection::kDescending;
  std::vector<MergeSource> sources;
};

struct NeedMoreInput {};
struct WindowDone {};
using MergeOutcome = std::variant<DataUnit, NeedMoreInput, WindowDone>;

// Picks the index of the source whose front unit should be emitted next, or
// nullopt if some open source has nothing pending. Ties go to the lowest
// source index.
std::optional<size_t> merge_choice(const SortMergeState& s);

// Emits the extreme-key unit once every source has a pending unit or is done.
MergeOutcome merge_step(SortMergeState& s);

// Stable sort by key.
void local_sort_window(std::vector<DataUnit>& units, SortDirection direction);

// Payload helpers for the built-in integer-valued stages (8 bytes big-endian).
Payload encode_u64(uint64_t value);
uint64_t decode_u64(std::span<const uint8_t> payload);

// Inner join of one window: one output per combination of same-key units drawn
// from every input, for keys present in all inputs. Output key is the shared
// key, timestamp the max of the contributors, payload the concatenation in
// input order. Keys come out ascending; combinations in input arrival order.
// The output sequence id is a digest of the contributors' ids.
std::vector<DataUnit> join_window(std::span<const std::vector<DataUnit>> inputs);

enum class SelectResult { kEmit, kDrop };
SelectResult select_filter(const DataUnit& u,
                           const std::function<bool(Key)>& predicate);

// Folds the integer payloads of a window with an associative combine.
uint64_t fold_window(std::span<const DataUnit> units,
                     const std::function<uint64_t(uint64_t, uint64_t)>& combine,
                     uint64_t identity);

}  // namespace streamweave

#endif  // STREAMWEAVE_STREAM_OPS_H_

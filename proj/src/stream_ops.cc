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

#include "streamweave/stream_ops.h"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace streamweave {

uint32_t route_group(const DataUnit& u, const GroupRoute& route) {
  return route.allocation.owner_of(bucket_of(u.key, route.bucket_count));
}

std::optional<size_t> merge_choice(const SortMergeState& s) {
  std::optional<size_t> best;
  for (size_t i = 0; i < s.sources.size(); ++i) {
    const MergeSource& src = s.sources[i];
    if (src.pending.empty()) {
      if (!src.window_done) return std::nullopt;
      continue;
    }
    if (!best) {
      best = i;
      continue;
    }
    const Key candidate = src.pending.front().key;
    const Key current = s.sources[*best].pending.front().key;
    bool better = s.direction == SortDirection::kDescending ? candidate > current
                                                            : candidate < current;
    if (better) best = i;
  }
  return best;
}

MergeOutcome merge_step(SortMergeState& s) {
  bool any_open = false;
  for (const auto& src : s.sources) {
    if (!src.pending.empty() || !src.window_done) any_open = true;
  }
  if (!any_open) return WindowDone{};
  std::optional<size_t> choice = merge_choice(s);
  if (!choice) return NeedMoreInput{};
  DataUnit out = std::move(s.sources[*choice].pending.front());
  s.sources[*choice].pending.pop_front();
  return out;
}

void local_sort_window(std::vector<DataUnit>& units, SortDirection direction) {
  if (direction == SortDirection::kAscending) {
    std::stable_sort(units.begin(), units.end(),
                     [](const DataUnit& a, const DataUnit& b) { return a.key < b.key; });
  } else {
    std::stable_sort(units.begin(), units.end(),
                     [](const DataUnit& a, const DataUnit& b) { return a.key > b.key; });
  }
}

Payload encode_u64(uint64_t value) {
  Payload out(8);
  for (int i = 7; i >= 0; --i) {
    out[i] = static_cast<uint8_t>(value & 0xff);
    value >>= 8;
  }
  return out;
}

uint64_t decode_u64(std::span<const uint8_t> payload) {
  if (payload.size() < 8) throw std::invalid_argument("payload shorter than 8 bytes");
  uint64_t v = 0;
  for (size_t i = 0; i < 8; ++i) v = (v << 8) | payload[i];
  return v;
}

std::vector<DataUnit> join_window(std::span<const std::vector<DataUnit>> inputs) {
  std::vector<DataUnit> out;
  if (inputs.size() < 2) return out;
  std::vector<std::map<Key, std::vector<const DataUnit*>>> by_key(inputs.size());
  for (size_t i = 0; i < inputs.size(); ++i) {
    for (const auto& u : inputs[i]) by_key[i][u.key].push_back(&u);
  }
  for (const auto& [key, first] : by_key[0]) {
    std::vector<const std::vector<const DataUnit*>*> groups{&first};
    bool present = true;
    for (size_t i = 1; i < inputs.size() && present; ++i) {
      auto it = by_key[i].find(key);
      if (it == by_key[i].end()) {
        present = false;
      } else {
        groups.push_back(&it->second);
      }
    }
    if (!present) continue;
    // Odometer over the cartesian product, last input varying fastest.
    std::vector<size_t> idx(groups.size(), 0);
    while (true) {
      DataUnit joined;
      joined.key = key;
      for (size_t g = 0; g < groups.size(); ++g) {
        const DataUnit* u = (*groups[g])[idx[g]];
        joined.timestamp = std::max(joined.timestamp, u->timestamp);
        joined.seq.value = mix64(joined.seq.value ^ u->seq.value) + g;
        joined.payload.insert(joined.payload.end(), u->payload.begin(),
                              u->payload.end());
      }
      out.push_back(std::move(joined));
      size_t g = groups.size();
      bool advanced = false;
      while (g > 0 && !advanced) {
        --g;
        if (++idx[g] < groups[g]->size()) {
          advanced = true;
        } else {
          idx[g] = 0;
        }
      }
      if (!advanced) break;
    }
  }
  return out;
}

SelectResult select_filter(const DataUnit& u,
                           const std::function<bool(Key)>& predicate) {
  return predicate(u.key) ? SelectResult::kEmit : SelectResult::kDrop;
}

uint64_t fold_window(std::span<const DataUnit> units,
                     const std::function<uint64_t(uint64_t, uint64_t)>& combine,
                     uint64_t identity) {
  uint64_t acc = identity;
  for (const auto& u : units) acc = combine(acc, decode_u64(u.payload));
  return acc;
}

}  // namespace streamweave

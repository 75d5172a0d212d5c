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

#include "streamweave/partitioning.h"

#include <algorithm>
#include <limits>
#include <numeric>

namespace streamweave {
namespace {

constexpr int128 kInfinity = std::numeric_limits<int128>::max() / 4;

// Core recurrence, templated on the accumulator so the common case runs in
// 64-bit arithmetic. Cost row 0 is the empty prefix; cost(i, j) takes the
// minimum over split s in [0, j] of cost(i-1, s) + dev(i, s..j)^2.
template <typename Acc>
void fill_tables(std::span<const uint64_t> counts,
                 std::span<const int128> targets, uint64_t scale,
                 DpTables& tables) {
  const uint32_t k = static_cast<uint32_t>(counts.size());
  const uint32_t l = static_cast<uint32_t>(targets.size());
  const Acc inf = std::numeric_limits<Acc>::max() / 4;

  // Prefix sums already multiplied by the scale.
  std::vector<Acc> prefix(k + 1, 0);
  for (uint32_t j = 0; j < k; ++j) {
    prefix[j + 1] = prefix[j] + static_cast<Acc>(counts[j]) * static_cast<Acc>(scale);
  }

  std::vector<Acc> prev(k + 1, inf);
  std::vector<Acc> cur(k + 1, inf);
  prev[0] = 0;
  for (uint32_t j = 0; j <= k; ++j) {
    tables.set(0, j, j == 0 ? 0 : kInfinity, 0);
  }
  for (uint32_t i = 1; i <= l; ++i) {
    const Acc target = static_cast<Acc>(targets[i - 1]);
    for (uint32_t j = 0; j <= k; ++j) {
      Acc best = inf;
      uint32_t best_split = 0;
      const Acc upto = prefix[j];
      for (uint32_t s = 0; s <= j; ++s) {
        const Acc base = prev[s];
        if (base >= inf) continue;
        const Acc dev = upto - prefix[s] - target;
        const Acc candidate = base + dev * dev;
        if (candidate < best) {
          best = candidate;
          best_split = s;
        }
      }
      cur[j] = best;
      tables.set(i, j, best >= inf ? kInfinity : static_cast<int128>(best),
                 best_split);
    }
    std::swap(prev, cur);
  }
}

// Conservative bound on any intermediate value of the recurrence.
bool fits_in_int64(std::span<const uint64_t> counts,
                   std::span<const int128> targets, uint64_t scale) {
  long double total = 0;
  for (uint64_t c : counts) total += static_cast<long double>(c);
  long double max_target = 0;
  for (int128 t : targets) {
    max_target = std::max(max_target, static_cast<long double>(t));
  }
  long double dev = total * static_cast<long double>(scale) + max_target;
  long double bound = dev * dev * static_cast<long double>(targets.size() + 1);
  return bound < 1e18L;
}

int128 scaled_cost_of(const std::vector<uint64_t>& loads,
                      std::span<const int128> targets, uint64_t scale) {
  int128 cost = 0;
  for (size_t i = 0; i < loads.size(); ++i) {
    int128 dev = static_cast<int128>(loads[i]) * scale - targets[i];
    cost += dev * dev;
  }
  return cost;
}

struct ScaledTargets {
  std::vector<int128> targets;
  uint64_t scale = 1;
};

ScaledTargets weighted_targets(uint64_t total, std::span<const uint64_t> weights) {
  if (weights.empty()) throw PartitionError("weights must be non-empty");
  uint64_t sum = 0;
  for (uint64_t w : weights) sum += w;
  if (sum == 0) throw PartitionError("weights must not all be zero");
  ScaledTargets out;
  out.scale = sum;
  out.targets.reserve(weights.size());
  for (uint64_t w : weights) {
    out.targets.push_back(static_cast<int128>(total) * w);
  }
  return out;
}

// Walks every composition of k buckets into l ordered (possibly empty) groups.
BucketAllocation brute_force(std::span<const uint64_t> counts,
                             std::span<const int128> targets, uint64_t scale) {
  const uint32_t k = static_cast<uint32_t>(counts.size());
  const uint32_t l = static_cast<uint32_t>(targets.size());
  if (grouping_count(k, l) > kBruteForceLimit) {
    throw PartitionError("instance too large for exhaustive search");
  }
  std::vector<uint32_t> cuts(l + 1, 0);  // cuts[0] = 0, cuts[l] = k
  cuts[l] = k;
  BucketAllocation best;
  bool have_best = false;
  std::vector<uint64_t> loads(l);

  // Recursively place cut i in [cuts[i-1], k].
  auto recurse = [&](auto&& self, uint32_t i) -> void {
    if (i == l) {
      for (uint32_t g = 0; g < l; ++g) {
        uint64_t sum = 0;
        for (uint32_t b = cuts[g]; b < cuts[g + 1]; ++b) sum += counts[b];
        loads[g] = sum;
      }
      int128 cost = scaled_cost_of(loads, targets, scale);
      if (!have_best || cost < best.scaled_cost) {
        have_best = true;
        best.scaled_cost = cost;
        best.segments.clear();
        for (uint32_t g = 0; g < l; ++g) {
          best.segments.push_back({{cuts[g], cuts[g + 1]}, g});
        }
      }
      return;
    }
    for (uint32_t c = cuts[i - 1]; c <= k; ++c) {
      cuts[i] = c;
      self(self, i + 1);
    }
  };
  recurse(recurse, 1);
  best.scale = scale;
  return best;
}

}  // namespace

uint64_t mix64(uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

BucketId bucket_of(Key key, uint32_t bucket_count) {
  if (bucket_count == 0) throw PartitionError("bucket count must be >= 1");
  return BucketId{static_cast<uint32_t>(mix64(key.value) % bucket_count)};
}

uint64_t BucketHistogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), uint64_t{0});
}

void BucketHistogram::add(const BucketHistogram& other) {
  if (counts.empty()) counts.assign(other.counts.size(), 0);
  if (other.counts.size() != counts.size()) {
    throw PartitionError("histogram size mismatch");
  }
  for (size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
}

uint32_t BucketAllocation::owner_of(BucketId b) const {
  auto it = std::upper_bound(
      segments.begin(), segments.end(), b.index,
      [](uint32_t value, const OwnedRange& seg) { return value < seg.range.end; });
  if (it == segments.end()) throw PartitionError("bucket outside allocation");
  return it->owner;
}

std::vector<uint32_t> BucketAllocation::owner_table() const {
  std::vector<uint32_t> table(bucket_count());
  for (const auto& seg : segments) {
    for (uint32_t b = seg.range.begin; b < seg.range.end; ++b) table[b] = seg.owner;
  }
  return table;
}

std::vector<uint64_t> BucketAllocation::loads(const BucketHistogram& h,
                                              uint32_t node_count) const {
  std::vector<uint64_t> out(node_count, 0);
  for (const auto& seg : segments) {
    for (uint32_t b = seg.range.begin; b < seg.range.end; ++b) {
      out.at(seg.owner) += h.counts.at(b);
    }
  }
  return out;
}

double BucketAllocation::cost() const {
  long double s = static_cast<long double>(scale);
  return static_cast<double>(static_cast<long double>(scaled_cost) / (s * s));
}

bool BucketAllocation::well_formed() const {
  uint32_t next = 0;
  for (const auto& seg : segments) {
    if (seg.range.begin != next || seg.range.end < seg.range.begin) return false;
    next = seg.range.end;
  }
  return true;
}

DpTables::DpTables(uint32_t nodes, uint32_t buckets)
    : nodes_(nodes),
      buckets_(buckets),
      cost_(static_cast<size_t>(nodes + 1) * (buckets + 1), 0),
      split_(static_cast<size_t>(nodes + 1) * (buckets + 1), 0) {}

AllocationResult solve_contiguous(std::span<const uint64_t> counts,
                                  std::span<const int128> scaled_targets,
                                  uint64_t scale) {
  if (scaled_targets.empty()) throw PartitionError("node count must be >= 1");
  if (counts.empty()) throw PartitionError("histogram must be non-empty");
  for (int128 t : scaled_targets) {
    if (t < 0) throw PartitionError("targets must be non-negative");
  }
  const uint32_t k = static_cast<uint32_t>(counts.size());
  const uint32_t l = static_cast<uint32_t>(scaled_targets.size());

  AllocationResult result;
  result.tables = DpTables(l, k);
  if (fits_in_int64(counts, scaled_targets, scale)) {
    fill_tables<int64_t>(counts, scaled_targets, scale, result.tables);
  } else {
    fill_tables<int128>(counts, scaled_targets, scale, result.tables);
  }

  // Backtrack from (l, k).
  std::vector<OwnedRange> segments(l);
  uint32_t j = k;
  for (uint32_t i = l; i >= 1; --i) {
    uint32_t s = result.tables.split(i, j);
    segments[i - 1] = {{s, j}, i - 1};
    j = s;
  }
  result.allocation.segments = std::move(segments);
  result.allocation.scaled_cost = result.tables.cost(l, k);
  result.allocation.scale = scale;
  return result;
}

AllocationResult allocate_buckets(const BucketHistogram& h, uint32_t nodes) {
  if (nodes < 1) throw PartitionError("node count must be >= 1");
  std::vector<int128> targets(nodes, static_cast<int128>(h.total()));
  return solve_contiguous(h.counts, targets, nodes);
}

BucketAllocation allocate_buckets_weighted(const BucketHistogram& h,
                                           std::span<const uint64_t> weights) {
  ScaledTargets t = weighted_targets(h.total(), weights);
  return solve_contiguous(h.counts, t.targets, t.scale).allocation;
}

uint64_t grouping_count(uint32_t buckets, uint32_t nodes) {
  if (nodes == 0) return 0;
  // C(n, r) with n = k + l - 1, r = l - 1, computed incrementally.
  uint64_t n = static_cast<uint64_t>(buckets) + nodes - 1;
  uint64_t r = std::min<uint64_t>(nodes - 1, buckets);
  unsigned __int128 c = 1;
  for (uint64_t i = 1; i <= r; ++i) {
    c = c * (n - r + i) / i;
    if (c > std::numeric_limits<uint64_t>::max()) {
      return std::numeric_limits<uint64_t>::max();
    }
  }
  return static_cast<uint64_t>(c);
}

BucketAllocation brute_force_allocate(const BucketHistogram& h, uint32_t nodes) {
  if (nodes < 1) throw PartitionError("node count must be >= 1");
  if (h.counts.empty()) throw PartitionError("histogram must be non-empty");
  std::vector<int128> targets(nodes, static_cast<int128>(h.total()));
  return brute_force(h.counts, targets, nodes);
}

BucketAllocation brute_force_allocate_weighted(const BucketHistogram& h,
                                               std::span<const uint64_t> weights) {
  if (h.counts.empty()) throw PartitionError("histogram must be non-empty");
  ScaledTargets t = weighted_targets(h.total(), weights);
  return brute_force(h.counts, t.targets, t.scale);
}

BucketAllocation repartition_on_failure(const BucketAllocation& current,
                                        uint32_t failed,
                                        std::span<const uint64_t> survivor_progress,
                                        const BucketHistogram& h,
                                        std::span<const uint32_t> dead) {
  if (h.counts.size() != current.bucket_count()) {
    throw PartitionError("histogram does not match allocation");
  }
  bool owns_any = false;
  uint32_t max_owner = 0;
  for (const auto& seg : current.segments) {
    max_owner = std::max(max_owner, seg.owner);
    owns_any |= seg.owner == failed;
  }
  const uint32_t node_count =
      std::max<uint32_t>(max_owner + 1, static_cast<uint32_t>(survivor_progress.size()));
  if (failed >= node_count) throw PartitionError("failed node not in allocation");

  std::vector<uint32_t> survivors;
  for (uint32_t n = 0; n < node_count; ++n) {
    if (n == failed) continue;
    if (std::find(dead.begin(), dead.end(), n) != dead.end()) continue;
    survivors.push_back(n);
  }
  if (survivors.empty()) throw PartitionError("no surviving nodes");

  std::vector<uint64_t> weights;
  weights.reserve(survivors.size());
  for (uint32_t n : survivors) {
    weights.push_back(n < survivor_progress.size() ? survivor_progress[n] : 0);
  }
  if (std::all_of(weights.begin(), weights.end(), [](uint64_t w) { return w == 0; })) {
    std::fill(weights.begin(), weights.end(), 1);
  }

  BucketAllocation out;
  out.scale = 1;
  if (!owns_any) {
    out.segments = current.segments;
    return out;
  }

  int128 sub_cost = 0;
  uint64_t sub_scale = 1;
  for (const auto& seg : current.segments) {
    if (seg.owner != failed) {
      out.segments.push_back(seg);
      continue;
    }
    if (seg.range.empty()) continue;
    BucketHistogram sub;
    sub.counts.assign(h.counts.begin() + seg.range.begin,
                      h.counts.begin() + seg.range.end);
    BucketAllocation split = allocate_buckets_weighted(sub, weights);
    sub_cost += split.scaled_cost;
    sub_scale = split.scale;
    for (const auto& piece : split.segments) {
      if (piece.range.empty()) continue;
      out.segments.push_back(
          {{seg.range.begin + piece.range.begin, seg.range.begin + piece.range.end},
           survivors[piece.owner]});
    }
  }
  out.scaled_cost = sub_cost;
  out.scale = sub_scale;
  return out;
}

BucketAllocation uniform_allocation(uint32_t buckets, uint32_t nodes) {
  if (nodes < 1) throw PartitionError("node count must be >= 1");
  BucketAllocation out;
  for (uint32_t i = 0; i < nodes; ++i) {
    uint32_t begin = static_cast<uint32_t>(static_cast<uint64_t>(buckets) * i / nodes);
    uint32_t end = static_cast<uint32_t>(static_cast<uint64_t>(buckets) * (i + 1) / nodes);
    out.segments.push_back({{begin, end}, i});
  }
  return out;
}

}  // namespace streamweave

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

// Key-to-bucket hashing and contiguous bucket grouping.
//
// Buckets are grouped onto receiver nodes as contiguous ranges. The grouping
// minimizes the sum of squared deviations of per-node load from a per-node
// target. All costs are kept in exact integer arithmetic by scaling: with
// weights w_i and W = sum(w_i), node i's target is total * w_i / W, and we
// minimize sum_i (W * load_i - total * w_i)^2, which has the same argmin as the
// unscaled objective. The unweighted case is w_i = 1, W = l.

#ifndef STREAMWEAVE_PARTITIONING_H_
#define STREAMWEAVE_PARTITIONING_H_

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "streamweave/core_model.h"

namespace streamweave {

using int128 = __int128;

class PartitionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct BucketId {
  uint32_t index = 0;
  auto operator<=>(const BucketId&) const = default;
};

// 64-bit finalizer (splitmix64 / murmur3-style multiply-xor-shift).
uint64_t mix64(uint64_t x);

BucketId bucket_of(Key key, uint32_t bucket_count);

// Bucket count for a receiving stage: multiplier * receivers.
inline uint32_t bucket_count_for(uint32_t receivers, uint32_t multiplier) {
  return receivers * multiplier;
}

struct BucketHistogram {
  std::vector<uint64_t> counts;

  uint64_t total() const;
  size_t size() const { return counts.size(); }
  // Bucket-wise sum; sizes must match.
  void add(const BucketHistogram& other);
};

// Half-open bucket range [begin, end).
struct BucketRange {
  uint32_t begin = 0;
  uint32_t end = 0;

  uint32_t size() const { return end - begin; }
  bool empty() const { return begin == end; }
  bool operator==(const BucketRange&) const = default;
};

struct OwnedRange {
  BucketRange range;
  uint32_t owner = 0;
  bool operator==(const OwnedRange&) const = default;
};

// Ordered, contiguous, disjoint segments covering [0, k). A fresh allocation
// has exactly one (possibly empty) segment per node, with owner i at position
// i; recovery may split a failed node's segment among survivors.
struct BucketAllocation {
  std::vector<OwnedRange> segments;
  // Scaled objective value and the scale it was computed with. The real-valued
  // cost is scaled_cost / scale^2.
  int128 scaled_cost = 0;
  uint64_t scale = 1;

  uint32_t bucket_count() const {
    return segments.empty() ? 0 : segments.back().range.end;
  }
  uint32_t owner_of(BucketId b) const;
  // Per-bucket owner table, for hot-path routing.
  std::vector<uint32_t> owner_table() const;
  // Load per node id in [0, node_count).
  std::vector<uint64_t> loads(const BucketHistogram& h,
                              uint32_t node_count) const;
  double cost() const;
  // True when segments are ordered, contiguous and start at bucket 0.
  bool well_formed() const;
};

// DP tables over (nodes i = 0..l) x (buckets j = 0..k); row/column 0 are the
// empty prefixes. cost(i, j) is the optimal scaled cost of putting the first j
// buckets on the first i nodes; split(i, j) is the chosen start bucket of node
// i's group.
class DpTables {
 public:
  DpTables() = default;
  DpTables(uint32_t nodes, uint32_t buckets);

  uint32_t nodes() const { return nodes_; }
  uint32_t buckets() const { return buckets_; }
  int128 cost(uint32_t i, uint32_t j) const { return cost_[index(i, j)]; }
  uint32_t split(uint32_t i, uint32_t j) const { return split_[index(i, j)]; }

  void set(uint32_t i, uint32_t j, int128 cost, uint32_t split) {
    cost_[index(i, j)] = cost;
    split_[index(i, j)] = split;
  }

 private:
  size_t index(uint32_t i, uint32_t j) const {
    return static_cast<size_t>(i) * (buckets_ + 1) + j;
  }

  uint32_t nodes_ = 0;
  uint32_t buckets_ = 0;
  std::vector<int128> cost_;
  std::vector<uint32_t> split_;
};

struct AllocationResult {
  BucketAllocation allocation;
  DpTables tables;
};

// Minimizes sum_i (scale * load_i - scaled_targets[i])^2 over contiguous
// groupings of `counts` onto scaled_targets.size() nodes, empty groups allowed.
// Ties resolve to the smallest split index. O(l k^2) with prefix sums.
AllocationResult solve_contiguous(std::span<const uint64_t> counts,
                                  std::span<const int128> scaled_targets,
                                  uint64_t scale);

// Equal targets (the mean load per node).
AllocationResult allocate_buckets(const BucketHistogram& h, uint32_t nodes);

// Targets proportional to `weights`.
BucketAllocation allocate_buckets_weighted(const BucketHistogram& h,
                                           std::span<const uint64_t> weights);

// Exhaustive search over all contiguous groupings (test oracle). Rejects
// instances with more than `kBruteForceLimit` groupings.
inline constexpr uint64_t kBruteForceLimit = 1'000'000;
BucketAllocation brute_force_allocate(const BucketHistogram& h, uint32_t nodes);
BucketAllocation brute_force_allocate_weighted(
    const BucketHistogram& h, std::span<const uint64_t> weights);

// Number of contiguous groupings of k buckets onto l nodes with empty groups
// allowed: C(k + l - 1, l - 1). Saturates at UINT64_MAX.
uint64_t grouping_count(uint32_t buckets, uint32_t nodes);

// Hands the failed node's buckets to the survivors. Survivors keep their own
// segments; the failed node's buckets are re-split, in survivor id order, with
// targets proportional to survivor_progress (indexed by node id; entries for
// the failed node and for nodes listed in `dead` are ignored). A survivor
// progress of all zeros means equal shares. The returned cost is that of the
// re-split sub-problem.
BucketAllocation repartition_on_failure(const BucketAllocation& current,
                                        uint32_t failed,
                                        std::span<const uint64_t> survivor_progress,
                                        const BucketHistogram& h,
                                        std::span<const uint32_t> dead = {});

// Contiguous allocation with an equal number of buckets per node, for when no
// histogram information is available.
BucketAllocation uniform_allocation(uint32_t buckets, uint32_t nodes);

}  // namespace streamweave

#endif  // STREAMWEAVE_PARTITIONING_H_

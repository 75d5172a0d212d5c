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

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

namespace streamweave {
namespace {

// Independent enumeration oracle: minimum of sum (load_i - target_i)^2 over
// every contiguous grouping, empty groups allowed, in doubles.
double enumerate_min_cost(const std::vector<uint64_t>& counts, const std::vector<double>& targets) {
  double best = INFINITY;
  std::vector<uint64_t> loads(targets.size(), 0);
  std::function<void(size_t, size_t)> rec = [&](size_t node, size_t start) {
    if (node + 1 == targets.size()) {
      uint64_t load = 0;
      for (size_t b = start; b < counts.size(); ++b) load += counts[b];
      loads[node] = load;
      double c = 0;
      for (size_t i = 0; i < targets.size(); ++i) {
        double d = static_cast<double>(loads[i]) - targets[i];
        c += d * d;
      }
      best = std::min(best, c);
      return;
    }
    uint64_t load = 0;
    for (size_t end = start; end <= counts.size(); ++end) {
      loads[node] = load;
      rec(node + 1, end);
      if (end < counts.size()) load += counts[end];
    }
  };
  rec(0, 0);
  return best;
}

std::vector<double> equal_targets(const std::vector<uint64_t>& counts, uint32_t l) {
  double total = 0;
  for (auto c : counts) total += static_cast<double>(c);
  return std::vector<double>(l, total / l);
}

double alloc_cost(const BucketAllocation& a, const std::vector<uint64_t>& counts,
                  const std::vector<double>& targets) {
  std::vector<uint64_t> loads = a.loads(BucketHistogram{counts}, static_cast<uint32_t>(targets.size()));
  double c = 0;
  for (size_t i = 0; i < targets.size(); ++i) {
    double d = static_cast<double>(loads[i]) - targets[i];
    c += d * d;
  }
  return c;
}

TEST(BucketOf, Deterministic) {
  for (uint64_t k : {1u, 7u, 96u}) {
    for (uint64_t key = 0; key < 1000; ++key) {
      BucketId b = bucket_of(Key{key}, static_cast<uint32_t>(k));
      EXPECT_EQ(b, bucket_of(Key{key}, static_cast<uint32_t>(k)));
      EXPECT_LT(b.index, k);
    }
  }
  EXPECT_EQ(bucket_of(Key{123456789}, 1).index, 0u);
}

TEST(BucketOf, UniformKeysSpread) {
  std::mt19937_64 rng(11);
  std::vector<uint64_t> counts(96, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[bucket_of(Key{rng()}, 96).index];
  uint64_t max = *std::max_element(counts.begin(), counts.end());
  EXPECT_LE(static_cast<double>(max), 3.0 * n / 96.0);
}

TEST(BucketOf, SequentialKeysSpread) {
  std::vector<uint64_t> counts(96, 0);
  for (uint64_t key = 0; key < 96000; ++key) ++counts[bucket_of(Key{key}, 96).index];
  uint64_t max = *std::max_element(counts.begin(), counts.end());
  EXPECT_LE(max, 3000u);
}

TEST(AllocateBuckets, EqualHalves) {
  auto r = allocate_buckets(BucketHistogram{{4, 4, 4, 4}}, 2);
  EXPECT_DOUBLE_EQ(r.allocation.cost(), 0.0);
  ASSERT_EQ(r.allocation.segments.size(), 2u);
  EXPECT_EQ(r.allocation.segments[0].range, (BucketRange{0, 2}));
  EXPECT_EQ(r.allocation.segments[1].range, (BucketRange{2, 4}));
  EXPECT_TRUE(r.allocation.well_formed());
}

TEST(AllocateBuckets, HandCheckedSplit) {
  auto r = allocate_buckets(BucketHistogram{{5, 3, 8, 2, 6}}, 2);
  EXPECT_DOUBLE_EQ(r.allocation.cost(), 32.0);
  auto loads = r.allocation.loads(BucketHistogram{{5, 3, 8, 2, 6}}, 2);
  EXPECT_TRUE((loads == std::vector<uint64_t>{8, 16}) || (loads == std::vector<uint64_t>{16, 8}));
  EXPECT_DOUBLE_EQ(brute_force_allocate(BucketHistogram{{5, 3, 8, 2, 6}}, 2).cost(), 32.0);
}

TEST(AllocateBuckets, EmptyGroups) {
  auto r = allocate_buckets(BucketHistogram{{9}}, 3);
  EXPECT_DOUBLE_EQ(r.allocation.cost(), 54.0);
  EXPECT_EQ(r.allocation.bucket_count(), 1u);
  EXPECT_TRUE(r.allocation.well_formed());
}

TEST(AllocateBuckets, Rejects) {
  EXPECT_THROW(allocate_buckets(BucketHistogram{{1, 2}}, 0), PartitionError);
  EXPECT_THROW(allocate_buckets(BucketHistogram{}, 2), PartitionError);
}

TEST(AllocateBuckets, SingleNodeCostZero) {
  EXPECT_DOUBLE_EQ(allocate_buckets(BucketHistogram{{3, 1, 4, 1, 5}}, 1).allocation.cost(), 0.0);
  EXPECT_DOUBLE_EQ(brute_force_allocate(BucketHistogram{{3, 1, 4, 1, 5}}, 1).cost(), 0.0);
}

TEST(AllocateBuckets, EqualCountsDivisible) {
  for (uint32_t l = 1; l <= 6; ++l) {
    std::vector<uint64_t> counts(l * 8, 5);
    EXPECT_DOUBLE_EQ(allocate_buckets(BucketHistogram{counts}, l).allocation.cost(), 0.0);
  }
}

TEST(AllocateBuckets, TieBreaksToSmallestSplit) {
  // Node 1 may start at bucket 1 or 2 with loads {2,2}; the earliest wins.
  auto r = allocate_buckets(BucketHistogram{{2, 0, 2}}, 2);
  EXPECT_EQ(r.allocation.segments[1].range.begin, 1u);
}

TEST(AllocateBuckets, MatchesOracles) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 400; ++trial) {
    uint32_t k = 1 + rng() % 10;
    uint32_t l = 1 + rng() % 5;
    std::vector<uint64_t> counts(k);
    for (auto& c : counts) c = rng() % (trial % 3 == 0 ? 3 : 50);
    if (BucketHistogram{counts}.total() == 0) counts[0] = 1;
    BucketHistogram h{counts};
    auto dp = allocate_buckets(h, l);
    auto bf = brute_force_allocate(h, l);
    double oracle = enumerate_min_cost(counts, equal_targets(counts, l));
    EXPECT_EQ(dp.allocation.scaled_cost, bf.scaled_cost);
    EXPECT_NEAR(dp.allocation.cost(), oracle, 1e-6);
    EXPECT_NEAR(alloc_cost(dp.allocation, counts, equal_targets(counts, l)), oracle, 1e-6);
    EXPECT_TRUE(dp.allocation.well_formed());
    EXPECT_EQ(dp.allocation.bucket_count(), k);
  }
}

TEST(AllocateBuckets, PrefixesAreOptimal) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    uint32_t k = 2 + rng() % 12;
    uint32_t l = 1 + rng() % 5;
    std::vector<uint64_t> counts(k);
    for (auto& c : counts) c = 1 + rng() % 20;
    auto r = allocate_buckets(BucketHistogram{counts}, l);
    const DpTables& t = r.tables;
    EXPECT_EQ(t.nodes(), l);
    EXPECT_EQ(t.buckets(), k);
    EXPECT_EQ(t.cost(l, k), r.allocation.scaled_cost);
    // Each prefix of the chosen grouping achieves the table optimum.
    const auto& segs = r.allocation.segments;
    ASSERT_EQ(segs.size(), l);
    int128 running = 0;
    uint64_t total = BucketHistogram{counts}.total();
    for (uint32_t i = 0; i < l; ++i) {
      uint64_t load = 0;
      for (uint32_t b = segs[i].range.begin; b < segs[i].range.end; ++b) load += counts[b];
      int128 d = static_cast<int128>(l) * load - static_cast<int128>(total);
      running += d * d;
      EXPECT_EQ(running, t.cost(i + 1, segs[i].range.end));
    }
  }
}

TEST(AllocateBucketsWeighted, Examples) {
  std::vector<uint64_t> w88{8, 8};
  EXPECT_DOUBLE_EQ(allocate_buckets_weighted(BucketHistogram{{4, 4, 4, 4}}, w88).cost(), 0.0);

  std::vector<uint64_t> w62{6, 2};
  auto a = allocate_buckets_weighted(BucketHistogram{{6, 2}}, w62);
  EXPECT_DOUBLE_EQ(a.cost(), 0.0);
  EXPECT_EQ(a.segments[0].range, (BucketRange{0, 1}));
  EXPECT_EQ(a.segments[1].range, (BucketRange{1, 2}));

  std::vector<uint64_t> w1050{10, 5, 0};
  auto b = allocate_buckets_weighted(BucketHistogram{{5, 5, 5}}, w1050);
  double oracle = enumerate_min_cost({5, 5, 5}, {10, 5, 0});
  EXPECT_NEAR(b.cost(), oracle, 1e-9);
  EXPECT_DOUBLE_EQ(oracle, 0.0);
  EXPECT_NEAR(brute_force_allocate_weighted(BucketHistogram{{5, 5, 5}}, w1050).cost(), oracle, 1e-9);
}

TEST(AllocateBucketsWeighted, Rejects) {
  std::vector<uint64_t> none;
  std::vector<uint64_t> zeros{0, 0};
  EXPECT_THROW(allocate_buckets_weighted(BucketHistogram{{1}}, none), PartitionError);
  EXPECT_THROW(allocate_buckets_weighted(BucketHistogram{{1}}, zeros), PartitionError);
}

TEST(AllocateBucketsWeighted, UniformWeightsMatchUnweighted) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    uint32_t k = 1 + rng() % 16;
    uint32_t l = 1 + rng() % 6;
    std::vector<uint64_t> counts(k);
    for (auto& c : counts) c = rng() % 40;
    counts[0] += 1;
    std::vector<uint64_t> w(l, 1 + rng() % 4);
    EXPECT_NEAR(allocate_buckets_weighted(BucketHistogram{counts}, w).cost(),
                allocate_buckets(BucketHistogram{counts}, l).allocation.cost(), 1e-6);
  }
}

TEST(AllocateBucketsWeighted, MatchesOracle) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 300; ++trial) {
    uint32_t k = 1 + rng() % 9;
    uint32_t l = 1 + rng() % 4;
    std::vector<uint64_t> counts(k);
    for (auto& c : counts) c = rng() % 30;
    counts[k - 1] += 1;
    std::vector<uint64_t> w(l);
    for (auto& x : w) x = rng() % 5;
    w[0] += 1;
    double total = 0, wsum = 0;
    for (auto c : counts) total += static_cast<double>(c);
    for (auto x : w) wsum += static_cast<double>(x);
    std::vector<double> targets;
    for (auto x : w) targets.push_back(total * static_cast<double>(x) / wsum);
    auto a = allocate_buckets_weighted(BucketHistogram{counts}, w);
    EXPECT_NEAR(a.cost(), enumerate_min_cost(counts, targets), 1e-6);
    EXPECT_NEAR(alloc_cost(a, counts, targets), a.cost(), 1e-6);
  }
}

TEST(BruteForce, GuardAndCounts) {
  EXPECT_EQ(grouping_count(4, 2), 5u);
  EXPECT_EQ(grouping_count(1, 3), 3u);
  std::vector<uint64_t> big(200, 1);
  EXPECT_THROW(brute_force_allocate(BucketHistogram{big}, 8), PartitionError);
}

TEST(Repartition, SingleSurvivorTakesAll) {
  BucketHistogram h{{1, 1, 4, 4}};
  BucketAllocation cur = allocate_buckets(BucketHistogram{{4, 4, 4, 4}}, 2).allocation;
  std::vector<uint64_t> progress{5, 5};
  auto next = repartition_on_failure(cur, 1, progress, h);
  EXPECT_TRUE(next.well_formed());
  for (uint32_t b = 0; b < 4; ++b) EXPECT_EQ(next.owner_of(BucketId{b}), 0u);
}

TEST(Repartition, WeightedSplitOfFailedRange) {
  // Node 2 owns buckets [6, 9) and fails; survivors progress 2:1.
  BucketHistogram h{{3, 3, 3, 3, 3, 3, 6, 2, 4}};
  BucketAllocation cur = uniform_allocation(9, 3);
  std::vector<uint64_t> progress{20, 10, 0};
  auto next = repartition_on_failure(cur, 2, progress, h);
  EXPECT_TRUE(next.well_formed());
  for (uint32_t b = 0; b < 3; ++b) EXPECT_EQ(next.owner_of(BucketId{b}), 0u);
  for (uint32_t b = 3; b < 6; ++b) EXPECT_EQ(next.owner_of(BucketId{b}), 1u);
  for (uint32_t b = 0; b < 9; ++b) EXPECT_NE(next.owner_of(BucketId{b}), 2u);
  // Oracle on the failed range alone: total 12, targets 8 and 4.
  EXPECT_NEAR(next.cost(), enumerate_min_cost({6, 2, 4}, {8, 4}), 1e-9);
  std::vector<uint64_t> gained(2, 0);
  for (uint32_t b = 6; b < 9; ++b) gained[next.owner_of(BucketId{b})] += h.counts[b];
  EXPECT_EQ(gained, (std::vector<uint64_t>{8, 4}));
}

TEST(Repartition, EmptyFailedRange) {
  BucketHistogram h{{5, 5, 0, 0}};
  BucketAllocation cur = uniform_allocation(4, 2);
  std::vector<uint64_t> progress{1, 1};
  auto next = repartition_on_failure(cur, 1, progress, h);
  EXPECT_DOUBLE_EQ(next.cost(), 0.0);
  for (uint32_t b = 0; b < 4; ++b) EXPECT_EQ(next.owner_of(BucketId{b}), 0u);
}

TEST(Repartition, NoSurvivorsRejected) {
  BucketAllocation cur = uniform_allocation(4, 1);
  std::vector<uint64_t> progress{1};
  EXPECT_THROW(repartition_on_failure(cur, 0, progress, BucketHistogram{{1, 1, 1, 1}}),
               PartitionError);
  BucketAllocation two = uniform_allocation(4, 2);
  std::vector<uint64_t> p2{1, 1};
  std::vector<uint32_t> dead{0};
  EXPECT_THROW(repartition_on_failure(two, 1, p2, BucketHistogram{{1, 1, 1, 1}}, dead),
               PartitionError);
}

TEST(Repartition, SymmetricFailuresSymmetricCosts) {
  BucketHistogram h{{2, 7, 1, 8, 2, 8, 1, 8, 2, 8, 4, 5}};
  BucketAllocation cur = uniform_allocation(12, 4);
  std::vector<uint64_t> progress{3, 3, 3, 3};
  // Reversing the histogram mirrors node i onto node 3 - i.
  BucketHistogram rev{std::vector<uint64_t>(h.counts.rbegin(), h.counts.rend())};
  for (uint32_t f = 0; f < 4; ++f) {
    EXPECT_NEAR(repartition_on_failure(cur, f, progress, h).cost(),
                repartition_on_failure(cur, 3 - f, progress, rev).cost(), 1e-9);
  }
}

TEST(Repartition, SecondFailureAfterFirst) {
  BucketHistogram h{{4, 4, 4, 4, 4, 4, 4, 4, 4}};
  BucketAllocation cur = uniform_allocation(9, 3);
  std::vector<uint64_t> progress{1, 1, 1};
  auto a = repartition_on_failure(cur, 2, progress, h);
  std::vector<uint32_t> dead{2};
  auto b = repartition_on_failure(a, 1, progress, h, dead);
  EXPECT_TRUE(b.well_formed());
  for (uint32_t x = 0; x < 9; ++x) EXPECT_EQ(b.owner_of(BucketId{x}), 0u);
}

TEST(Allocation, UniformAndOwnerTable) {
  BucketAllocation u = uniform_allocation(96, 3);
  EXPECT_TRUE(u.well_formed());
  auto table = u.owner_table();
  ASSERT_EQ(table.size(), 96u);
  EXPECT_EQ(table[0], 0u);
  EXPECT_EQ(table[32], 1u);
  EXPECT_EQ(table[95], 2u);
  BucketHistogram h{std::vector<uint64_t>(96, 1)};
  EXPECT_EQ(u.loads(h, 3), (std::vector<uint64_t>{32, 32, 32}));
}

}  // namespace
}  // namespace streamweave

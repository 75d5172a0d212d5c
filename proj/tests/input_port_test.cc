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


#include "input_port.h"

#include <gtest/gtest.h>

namespace streamweave::detail {
namespace {

struct RecordingSink : PortSink {
  void ack_frame(uint32_t conn, bool unit, bool consumed) override {
    acks.push_back({conn, unit, consumed});
  }
  void close_ack(uint32_t conn, uint64_t window, uint32_t epoch) override {
    closes.push_back({conn, window, epoch});
  }
  void held_consumed(uint32_t conn) override { held.push_back(conn); }
  void cancel(uint32_t conn, uint64_t window) override { cancels.push_back({conn, window}); }
  void reopened(uint64_t window) override { reopens.push_back(window); }

  struct Ack {
    uint32_t conn;
    bool unit;
    bool consumed;
  };
  struct Close {
    uint32_t conn;
    uint64_t window;
    uint32_t epoch;
  };
  std::vector<Ack> acks;
  std::vector<Close> closes;
  std::vector<std::pair<uint32_t, uint64_t>> cancels;
  std::vector<uint64_t> reopens;
  std::vector<uint32_t> held;
};

constexpr WindowSpec kSpec{10};

DataUnit unit(uint64_t key, uint64_t ts, uint64_t seq) {
  return DataUnit{Key{key}, ts, SequenceId{seq}, {}};
}

bool always() { return true; }

std::optional<uint64_t> key_of(const Packet& p) {
  if (auto* u = std::get_if<DataUnit>(&p)) return u->key.value;
  return std::nullopt;
}

TEST(InputPort, GroupBoundaryAfterAllConnectionsClose) {
  RecordingSink sink;
  InputPort port(StreamOp::kGroup, 2, 1, &sink);
  port.on_unit(0, unit(1, 0, 1), kSpec);
  port.on_unit(1, unit(2, 3, 2), kSpec);
  EXPECT_EQ(key_of(port.next(always)), 1u);
  EXPECT_EQ(key_of(port.next(always)), 2u);
  EXPECT_TRUE(std::holds_alternative<NoneAvailable>(port.next(always)));
  port.on_window_end(0, 0);
  EXPECT_TRUE(std::holds_alternative<NoneAvailable>(port.next(always)));
  port.on_window_end(1, 0);
  Packet b = port.next(always);
  ASSERT_TRUE(std::holds_alternative<WindowBoundary>(b));
  EXPECT_EQ(std::get<WindowBoundary>(b).window.n, 0u);
  EXPECT_FALSE(std::get<WindowBoundary>(b).supplemental);
  EXPECT_EQ(port.bounded_upto(), 1u);
  EXPECT_EQ(sink.closes.size(), 2u);
  EXPECT_TRUE(port.settled(0));
}

TEST(InputPort, LaterWindowHeldUntilBoundary) {
  RecordingSink sink;
  InputPort port(StreamOp::kGroup, 1, 1, &sink);
  port.on_unit(0, unit(5, 12, 1), kSpec);
  ASSERT_EQ(sink.acks.size(), 1u);
  EXPECT_FALSE(sink.acks[0].consumed);
  EXPECT_TRUE(std::holds_alternative<NoneAvailable>(port.next(always)));
  port.on_window_end(0, 0);
  EXPECT_TRUE(std::holds_alternative<WindowBoundary>(port.next(always)));
  EXPECT_EQ(key_of(port.next(always)), 5u);
  // Held units were acknowledged on arrival, not again on consumption.
  size_t unit_acks = 0;
  for (const auto& a : sink.acks) unit_acks += a.unit;
  EXPECT_EQ(unit_acks, 1u);
  EXPECT_EQ(sink.held, (std::vector<uint32_t>{0}));
}

TEST(InputPort, SortMergeWaitsForEveryConnection) {
  RecordingSink sink;
  InputPort port(StreamOp::kSortDesc, 3, 0, &sink);
  port.on_unit(0, unit(7, 0, 1), kSpec);
  port.on_unit(1, unit(9, 0, 2), kSpec);
  EXPECT_TRUE(std::holds_alternative<NoneAvailable>(port.next(always)));
  port.on_unit(2, unit(4, 0, 3), kSpec);
  EXPECT_EQ(key_of(port.next(always)), 9u);
  EXPECT_TRUE(std::holds_alternative<NoneAvailable>(port.next(always)));
  port.on_window_end(1, 0);
  EXPECT_EQ(key_of(port.next(always)), 7u);
  port.on_window_end(0, 0);
  port.on_window_end(2, 0);
  EXPECT_EQ(key_of(port.next(always)), 4u);
  EXPECT_TRUE(std::holds_alternative<WindowBoundary>(port.next(always)));
}

TEST(InputPort, DeadConnectionDoesNotBlock) {
  RecordingSink sink;
  InputPort port(StreamOp::kSortAsc, 2, 0, &sink);
  port.on_unit(0, unit(3, 0, 1), kSpec);
  EXPECT_TRUE(std::holds_alternative<NoneAvailable>(port.next(always)));
  port.set_dead(1);
  EXPECT_EQ(key_of(port.next(always)), 3u);
  port.on_window_end(0, 0);
  EXPECT_TRUE(std::holds_alternative<WindowBoundary>(port.next(always)));
}

TEST(InputPort, DuplicatesDropped) {
  RecordingSink sink;
  InputPort port(StreamOp::kGroup, 2, 0, &sink);
  port.on_unit(0, unit(1, 0, 42), kSpec);
  port.on_unit(1, unit(1, 0, 42), kSpec);
  port.on_unit(1, unit(2, 0, 43), kSpec);
  EXPECT_EQ(key_of(port.next(always)), 1u);
  EXPECT_EQ(key_of(port.next(always)), 2u);
  EXPECT_EQ(port.duplicates_dropped(), 1u);
}

TEST(InputPort, RateLimitedReturnsNone) {
  RecordingSink sink;
  InputPort port(StreamOp::kGroup, 1, 0, &sink);
  port.on_unit(0, unit(1, 0, 1), kSpec);
  EXPECT_TRUE(std::holds_alternative<NoneAvailable>(port.next([] { return false; })));
  EXPECT_TRUE(port.rate_limited());
  EXPECT_EQ(key_of(port.next(always)), 1u);
  EXPECT_FALSE(port.rate_limited());
}

TEST(InputPort, CancelDiscardsRestOfWindow) {
  RecordingSink sink;
  InputPort port(StreamOp::kGroup, 2, 1, &sink);
  port.on_unit(0, unit(1, 0, 1), kSpec);
  port.on_unit(0, unit(2, 0, 2), kSpec);
  port.on_unit(1, unit(3, 0, 3), kSpec);
  EXPECT_EQ(key_of(port.next(always)), 1u);
  port.cancel_current();
  EXPECT_EQ(sink.cancels.size(), 2u);
  EXPECT_EQ(port.discarded(), 2u);
  EXPECT_TRUE(std::holds_alternative<WindowBoundary>(port.next(always)));
  port.on_unit(1, unit(4, 1, 4), kSpec);  // late unit of the cancelled window
  EXPECT_EQ(port.discarded(), 3u);
  port.on_unit(0, unit(5, 10, 5), kSpec);
  EXPECT_EQ(key_of(port.next(always)), 5u);
}

TEST(InputPort, ResendAfterBoundaryIsSupplemental) {
  RecordingSink sink;
  InputPort port(StreamOp::kGroup, 2, 1, &sink);
  port.on_window_end(0, 0);
  port.on_window_end(1, 0);
  EXPECT_TRUE(std::holds_alternative<WindowBoundary>(port.next(always)));
  port.on_epoch(1, 1);
  port.on_unit(1, unit(8, 5, 9), kSpec);
  ASSERT_EQ(sink.reopens, (std::vector<uint64_t>{0}));
  EXPECT_FALSE(port.settled(0));
  EXPECT_FALSE(port.supplemental_ready(0));
  EXPECT_EQ(key_of(port.next(always)), 8u);
  EXPECT_EQ(port.last_epoch(), 1u);
  port.on_window_end(1, 0);
  EXPECT_TRUE(port.supplemental_ready(0));
  port.release_supplemental(0);
  Packet b = port.next(always);
  ASSERT_TRUE(std::holds_alternative<WindowBoundary>(b));
  EXPECT_TRUE(std::get<WindowBoundary>(b).supplemental);
  EXPECT_TRUE(port.settled(0));
}

TEST(InputPort, RequiredEpochDelaysBoundary) {
  RecordingSink sink;
  InputPort port(StreamOp::kGroup, 1, 0, &sink);
  port.require_epoch(0, 1);
  port.on_window_end(0, 0);
  EXPECT_TRUE(std::holds_alternative<NoneAvailable>(port.next(always)));
  port.on_epoch(0, 1);
  port.on_window_end(0, 0);
  EXPECT_TRUE(std::holds_alternative<WindowBoundary>(port.next(always)));
}

TEST(InputPort, EndOfStreamAfterLastWindow) {
  RecordingSink sink;
  InputPort port(StreamOp::kNone, 2, 0, &sink);
  port.on_window_end(0, 0);
  port.on_window_end(1, 0);
  port.on_end(0);
  EXPECT_TRUE(std::holds_alternative<WindowBoundary>(port.next(always)));
  EXPECT_TRUE(std::holds_alternative<NoneAvailable>(port.next(always)));
  port.on_end(1);
  EXPECT_TRUE(std::holds_alternative<EndOfStream>(port.next(always)));
  EXPECT_TRUE(port.eos_delivered());
}

TEST(InputPort, CommitDropsLateUnits) {
  RecordingSink sink;
  InputPort port(StreamOp::kGroup, 1, 1, &sink);
  port.on_window_end(0, 0);
  port.next(always);
  port.commit(0);
  port.on_unit(0, unit(1, 2, 1), kSpec);
  EXPECT_EQ(port.discarded(), 1u);
  EXPECT_TRUE(std::holds_alternative<NoneAvailable>(port.next(always)));
}

TEST(SourcePort, ReplaysWindowsThenEnds) {
  SourcePort src({unit(1, 0, 1), unit(2, 15, 2)}, kSpec, 2);
  EXPECT_EQ(key_of(src.next(always)), 1u);
  EXPECT_TRUE(std::holds_alternative<WindowBoundary>(src.next(always)));
  EXPECT_EQ(key_of(src.next(always)), 2u);
  EXPECT_TRUE(std::holds_alternative<WindowBoundary>(src.next(always)));
  Packet b2 = src.next(always);
  ASSERT_TRUE(std::holds_alternative<WindowBoundary>(b2));
  EXPECT_EQ(std::get<WindowBoundary>(b2).window.n, 2u);
  EXPECT_TRUE(std::holds_alternative<EndOfStream>(src.next(always)));
  EXPECT_TRUE(src.eos_delivered());
  EXPECT_EQ(src.remaining(), 0u);
}

TEST(SourcePort, NoWindowsMeansImmediateEnd) {
  SourcePort src({}, kSpec, std::nullopt);
  EXPECT_TRUE(std::holds_alternative<EndOfStream>(src.next(always)));
}

}  // namespace
}  // namespace streamweave::detail

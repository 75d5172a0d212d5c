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

// Deterministic discrete-event cluster simulator.
//
// Every stage node runs its stage function as a cooperative task. Streams are
// carried over one connection per (sender node, receiver node) pair with
// credit-based flow control; window markers and control messages are exempt
// from credits. A control node hosts the control processes of all streams.
// Events execute in (time, ordinal) order, so a run is a pure function of
// (scenario, seed).

#ifndef STREAMWEAVE_SIMULATOR_H_
#define STREAMWEAVE_SIMULATOR_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "streamweave/control.h"
#include "streamweave/core_model.h"
#include "streamweave/runtime_api.h"

namespace streamweave {

enum class KeyDistribution { kUniform, kZipf, kFile };

struct GeneratorSpec {
  std::string stage;  // source stage fed by this generator
  uint64_t units = 0;
  uint64_t windows = 1;  // units are spread evenly over this many windows
  KeyDistribution distribution = KeyDistribution::kUniform;
  uint64_t key_space = 1000;
  double zipf_exponent = 1.0;
  std::string file;  // kFile: whitespace-separated "key timestamp value" lines
  uint64_t value_range = 1000;  // payload value drawn from [0, value_range)
};

struct FailureSpec {
  std::string stage;
  uint32_t node_index = 0;
  uint64_t at_tick = 0;
};

struct RateOverride {
  std::string stage;
  uint32_t node_index = 0;
  double rate = 1.0;
};

struct SimParams {
  uint32_t bucket_multiplier = 32;
  uint32_t credits = 64;
  uint64_t latency = 1;
  double node_rate = 8.0;  // units a node consumes per tick
  DetectorConfig detector;
  uint64_t split_timeout = 250;
  uint64_t presend_threshold = 1000;
  uint64_t max_ticks = 1'000'000;
  bool trace = false;
};

struct Scenario {
  std::string name;
  Topology topology;
  WindowSpec window{100};
  std::vector<GeneratorSpec> generators;
  std::vector<FailureSpec> failures;
  std::vector<RateOverride> rates;
  SimParams params;
  uint64_t seed = 1;
};

// Units read by each node of each source stage, in read order.
std::map<std::string, std::vector<std::vector<DataUnit>>> generate_source_units(
    const Scenario& s, uint64_t seed);
// Highest window holding generated data, if any.
std::optional<uint64_t> last_window_of(
    const std::map<std::string, std::vector<std::vector<DataUnit>>>& units,
    WindowSpec spec);

struct NodeSpec {
  uint32_t id = 0;
  StageId stage = 0;
  uint32_t index = 0;
};

struct ConnectionSpec {
  uint32_t id = 0;
  uint32_t stream = 0;  // index into Topology::streams
  uint32_t sender = 0;
  uint32_t receiver = 0;
  uint32_t sender_pos = 0;    // index among the producer stage's nodes
  uint32_t receiver_pos = 0;  // index among the consumer stage's nodes
};

struct Network {
  std::vector<NodeSpec> nodes;
  std::vector<ConnectionSpec> connections;
  std::map<StageId, std::vector<uint32_t>> stage_nodes;
  uint32_t control_node = 0;  // id after all stage nodes
};

// Node ids are assigned stage by stage in topological order; every stream
// connects every producer node to every consumer node.
Network build_network(const Topology& t);

// Credit accounting of one connection. Unit frames need a credit; markers do
// not. Consumption at the receiver restores a credit.
class CreditLink {
 public:
  enum class PushResult { kAccepted, kBlocked };
  explicit CreditLink(uint32_t capacity) : capacity_(capacity), credit_(capacity) {}
  PushResult push(bool unit);
  void restore();
  uint32_t credit() const { return credit_; }
  uint32_t capacity() const { return capacity_; }
  uint32_t in_flight() const { return capacity_ - credit_; }

 private:
  uint32_t capacity_;
  uint32_t credit_;
};

enum class Outcome { kCompleted, kTickBudgetExceeded, kUnrecoverableStream };
std::string to_string(Outcome o);

struct LinkReport {
  uint32_t conn = 0;
  std::string stream;
  uint32_t sender = 0;
  uint32_t receiver = 0;
  uint64_t frames_sent = 0;
  uint64_t units_sent = 0;
  uint64_t markers_sent = 0;
  uint64_t units_resent = 0;
  uint64_t frames_delivered = 0;
  uint64_t units_delivered = 0;
  uint64_t units_dropped_in_flight = 0;    // sender failed while in flight
  uint64_t units_dropped_at_receiver = 0;  // receiver failed or evicted
  uint64_t units_in_flight_end = 0;
  uint64_t units_unsent_dropped = 0;  // queued at the sender, never transmitted
  uint32_t max_in_flight = 0;
};

struct NodeReport {
  uint32_t id = 0;
  std::string stage;
  uint32_t index = 0;
  std::string status;
  uint64_t units_consumed = 0;
  uint64_t units_emitted = 0;
  uint64_t duplicates_dropped = 0;
  uint64_t units_discarded = 0;
  uint64_t results = 0;
  std::optional<uint64_t> finished_tick;
};

// A unit the stage function of `node` received from `stream` (after the
// duplicate filter). `epoch` is the routing epoch it was sent under.
struct AcceptedUnit {
  uint32_t stream = 0;
  uint64_t window = 0;
  uint32_t node = 0;
  uint32_t epoch = 0;
  DataUnit unit;
  uint64_t tick = 0;
};

struct ResultUnit {
  uint32_t node = 0;
  StageId stage = 0;
  DataUnit unit;
  uint64_t tick = 0;
};

struct WindowLoad {
  uint32_t stream = 0;
  uint64_t window = 0;
  std::vector<uint64_t> loads;  // per receiver position
  double variance = 0;
  double max_over_mean = 0;
};

struct BufferReport {
  uint32_t stream = 0;
  uint32_t node = 0;
  uint64_t peak_units = 0;
  uint64_t final_units = 0;
};

struct FailureEvent {
  uint64_t tick = 0;
  uint32_t node = 0;
  std::string kind;  // "crash" (injected) or "evicted" (verdict on a live node)
};

struct SimReport {
  std::string scenario;
  uint64_t seed = 0;
  Outcome outcome = Outcome::kCompleted;
  uint64_t final_tick = 0;
  uint64_t events = 0;
  std::optional<uint64_t> last_window;
  std::vector<std::string> stream_names;
  std::vector<LinkReport> links;
  std::vector<NodeReport> nodes;
  std::vector<AcceptedUnit> accepted;
  std::vector<ResultUnit> results;
  std::vector<WindowLoad> window_loads;
  std::vector<SplitRecord> splits;
  std::vector<RecoveryRecord> recoveries;
  std::vector<FailureEvent> failures;
  std::map<uint64_t, uint64_t> commit_ticks;
  std::vector<BufferReport> buffers;
  std::optional<UnrecoverableStream> unrecoverable;
  std::vector<std::string> trace;  // one JSON object per line when enabled
};

// Throws StreamError on invalid scenarios (unknown stage functions, bad
// failure targets, unresolvable generator stages).
SimReport run(const Scenario& scenario,
              const StageRegistry& registry = StageRegistry::builtin());
SimReport run(const Scenario& scenario, uint64_t seed,
              const StageRegistry& registry = StageRegistry::builtin());

}  // namespace streamweave

#endif  // STREAMWEAVE_SIMULATOR_H_

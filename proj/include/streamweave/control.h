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

// Control processes: bucket split decisions, progress-based failure
// detection, failure verdicts with repartitioning, and window commit.
//
// ControlPlane is a message-driven state machine. The simulator feeds it the
// messages nodes send to the control node and delivers whatever it returns.

#ifndef STREAMWEAVE_CONTROL_H_
#define STREAMWEAVE_CONTROL_H_

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "streamweave/core_model.h"
#include "streamweave/partitioning.h"

namespace streamweave {

// One sender's cumulative view of one receiver on one stream. Acked counts
// frames the receiver has consumed; backlog is what the sender still has
// queued or unacknowledged for that receiver.
struct ProgressReport {
  uint32_t sender = 0;
  uint32_t receiver = 0;  // position among the stream's receivers
  uint32_t stream = 0;
  uint64_t window = 0;    // sender's dispatch frontier
  uint64_t units_sent = 0;
  uint64_t units_acked = 0;
  uint64_t backlog = 0;
  uint64_t tick = 0;
  uint64_t closes_acked = 0;  // window closes the receiver has acknowledged
};

struct DetectorConfig {
  double theta = 0.5;
  uint32_t lag_intervals = 3;
  uint64_t report_interval = 50;
};

// Interval summary of one sender's observation of one receiver.
struct ReceiverObservation {
  uint64_t delta = 0;          // acked during the interval
  uint64_t backlog = 0;        // outstanding at the end of the interval
  double reference_rate = 0;   // median delta over the sender's active receivers
  bool behind_peers = false;   // fewer closes acked than the median alive receiver
};

// Lagging: work is outstanding and progress is zero or below theta of the
// reference, or progress is zero while the receiver owes closes its peers
// have already acknowledged.
bool is_lagging(const ReceiverObservation& o, double theta);

enum class Health { kHealthy, kFailed };

// `recent` holds one entry per report interval, oldest first; each entry has
// the observations of every sender that reported in that interval. Failed iff
// the last lag_intervals entries are all non-empty and every observation in
// them is lagging.
Health detect_failure(std::span<const std::vector<ReceiverObservation>> recent,
                      const DetectorConfig& config);

// Bucket-wise sum of sender histograms, then an optimal split over the alive
// receivers (positions). All-zero input falls back to a uniform split.
BucketAllocation split_over_alive(const BucketHistogram& summed,
                                  std::span<const uint32_t> alive_positions);

struct ControlStream {
  std::string name;
  StreamOp op = StreamOp::kNone;
  StageId consumer = 0;
  std::vector<uint32_t> senders;    // node ids
  std::vector<uint32_t> receivers;  // node ids; allocation owners index this
  uint32_t bucket_count = 1;
  // GROUP streams into the same stage share one split decision so that equal
  // keys from different streams meet on the same node.
  uint32_t partition_group = 0;
};

struct ControlConfig {
  DetectorConfig detector;
  uint64_t split_timeout = 250;
};

struct HistogramMsg {
  uint32_t stream = 0;
  uint64_t window = 0;
  uint32_t sender = 0;
  std::vector<uint64_t> counts;
};

struct AckMsg {
  uint32_t node = 0;
  uint64_t window = 0;
  uint32_t epoch = 0;
};

struct ReopenMsg {
  uint32_t node = 0;
  uint64_t window = 0;
};

struct SplitDecision {
  uint32_t stream = 0;
  uint64_t window = 0;
  BucketAllocation allocation;
  uint32_t epoch = 0;
  bool partial = false;  // decided on a timeout without every sender's counts
};

struct FailureVerdict {
  uint32_t failed_node = 0;
  uint32_t epoch = 0;
  uint64_t committed_upto = 0;  // windows below are final
  // stream -> window -> allocation, for every decided uncommitted window of
  // each stream the failed node was receiving.
  std::map<uint32_t, std::map<uint64_t, BucketAllocation>> allocations;
};

struct CommitMsg {
  uint64_t window = 0;
};

using ControlOutput = std::variant<SplitDecision, FailureVerdict, CommitMsg>;

struct Outgoing {
  std::vector<uint32_t> destinations;  // node ids
  ControlOutput message;
};

struct TimerRequest {
  uint64_t at = 0;
  uint32_t group = 0;
  uint64_t window = 0;
};

struct SplitRecord {
  uint64_t tick = 0;
  uint32_t stream = 0;
  uint64_t window = 0;
  BucketAllocation allocation;
  std::vector<uint64_t> counts;
  bool partial = false;
};

struct RecoveryRecord {
  uint64_t tick = 0;
  uint32_t failed_node = 0;
  uint32_t epoch = 0;
  uint64_t committed_upto = 0;
  std::string cause;
  std::vector<uint32_t> streams;  // streams repartitioned
  uint64_t windows_repartitioned = 0;
};

struct UnrecoverableStream {
  uint32_t stream = 0;
  uint32_t failed_node = 0;
};

class ControlPlane {
 public:
  ControlPlane(std::vector<ControlStream> streams, std::vector<uint32_t> nodes,
               std::optional<uint64_t> last_window, ControlConfig config);

  std::vector<Outgoing> on_histogram(uint64_t tick, const HistogramMsg& msg);
  std::vector<Outgoing> on_split_timeout(uint64_t tick, uint32_t group,
                                         uint64_t window);
  void on_progress(const ProgressReport& report);
  // Closes the current report interval and runs detection on every stream.
  std::vector<Outgoing> evaluate(uint64_t tick);
  std::vector<Outgoing> on_ack(uint64_t tick, const AckMsg& msg);
  std::vector<Outgoing> on_reopen(const ReopenMsg& msg);
  std::vector<Outgoing> declare_failed(uint64_t tick, uint32_t node,
                                       const std::string& cause);

  std::vector<TimerRequest> take_timer_requests();

  uint32_t epoch() const { return epoch_; }
  uint64_t committed_upto() const { return committed_upto_; }
  bool all_committed() const;
  bool is_dead(uint32_t node) const { return dead_.contains(node); }
  const std::set<uint32_t>& dead() const { return dead_; }
  const std::optional<UnrecoverableStream>& unrecoverable() const {
    return unrecoverable_;
  }
  const std::vector<SplitRecord>& splits() const { return splits_; }
  const std::vector<RecoveryRecord>& recoveries() const { return recoveries_; }
  const std::map<uint64_t, uint64_t>& commit_ticks() const { return commit_ticks_; }
  const ControlStream& stream(uint32_t s) const { return streams_[s]; }
  // Current allocation of a GROUP stream's window, if decided.
  const BucketAllocation* allocation(uint32_t stream, uint64_t window) const;

 private:
  struct PendingSplit {
    std::map<uint32_t, std::set<uint32_t>> reported;  // stream -> senders
    BucketHistogram summed;
    bool timer_requested = false;
  };
  struct Group {
    std::vector<uint32_t> streams;
    std::vector<uint32_t> receivers;
    uint32_t bucket_count = 1;
    std::map<uint64_t, PendingSplit> pending;
    std::map<uint64_t, BucketAllocation> decided;
    std::map<uint64_t, BucketHistogram> basis;  // counts behind each decision
  };
  struct LinkProgress {
    uint64_t last_acked = 0;
    uint64_t delta = 0;
    uint64_t backlog = 0;
    uint64_t closes = 0;
    bool reported = false;
  };
  struct Detection {
    // (sender, receiver position) -> progress
    std::map<std::pair<uint32_t, uint32_t>, LinkProgress> links;
    // receiver position -> recent interval observations
    std::map<uint32_t, std::deque<std::vector<ReceiverObservation>>> history;
  };

  std::vector<Outgoing> maybe_decide(uint64_t tick, uint32_t group, uint64_t window,
                                     bool timed_out);
  std::vector<Outgoing> maybe_commit(uint64_t tick);
  std::vector<uint32_t> alive_positions(const Group& g) const;
  std::vector<uint32_t> live_nodes() const;
  bool position_dead(const std::vector<uint32_t>& receivers, uint32_t pos) const;

  std::vector<ControlStream> streams_;
  std::vector<Group> groups_;
  std::vector<Detection> detection_;  // per stream
  std::vector<uint32_t> nodes_;
  std::optional<uint64_t> last_window_;
  ControlConfig config_;

  uint32_t epoch_ = 0;
  uint64_t committed_upto_ = 0;
  uint64_t last_tick_ = 0;
  std::set<uint32_t> dead_;
  std::map<uint32_t, std::map<uint64_t, uint32_t>> acks_;  // node -> window -> epoch
  std::optional<UnrecoverableStream> unrecoverable_;
  std::vector<TimerRequest> timers_;
  std::vector<SplitRecord> splits_;
  std::vector<RecoveryRecord> recoveries_;
  std::map<uint64_t, uint64_t> commit_ticks_;
};

}  // namespace streamweave

#endif  // STREAMWEAVE_CONTROL_H_

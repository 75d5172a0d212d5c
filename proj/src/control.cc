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

#include "streamweave/control.h"

#include <algorithm>
#include <stdexcept>

namespace streamweave {

namespace {

double median(std::vector<uint64_t> v) {
  std::sort(v.begin(), v.end());
  const size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? static_cast<double>(v[m])
                           : (static_cast<double>(v[m - 1]) + static_cast<double>(v[m])) / 2.0;
}

}  // namespace

bool is_lagging(const ReceiverObservation& o, double theta) {
  if (o.backlog == 0) return o.delta == 0 && o.behind_peers;
  return o.delta == 0 || static_cast<double>(o.delta) < theta * o.reference_rate;
}

Health detect_failure(std::span<const std::vector<ReceiverObservation>> recent,
                      const DetectorConfig& config) {
  if (config.lag_intervals == 0 || recent.size() < config.lag_intervals) {
    return Health::kHealthy;
  }
  for (size_t i = recent.size() - config.lag_intervals; i < recent.size(); ++i) {
    if (recent[i].empty()) return Health::kHealthy;
    for (const auto& o : recent[i]) {
      if (!is_lagging(o, config.theta)) return Health::kHealthy;
    }
  }
  return Health::kFailed;
}

BucketAllocation split_over_alive(const BucketHistogram& summed,
                                  std::span<const uint32_t> alive_positions) {
  if (alive_positions.empty()) throw PartitionError("no alive receivers");
  const uint32_t l = static_cast<uint32_t>(alive_positions.size());
  BucketAllocation a = summed.total() == 0
                           ? uniform_allocation(static_cast<uint32_t>(summed.size()), l)
                           : allocate_buckets(summed, l).allocation;
  for (auto& seg : a.segments) seg.owner = alive_positions[seg.owner];
  return a;
}

ControlPlane::ControlPlane(std::vector<ControlStream> streams,
                           std::vector<uint32_t> nodes,
                           std::optional<uint64_t> last_window, ControlConfig config)
    : streams_(std::move(streams)),
      detection_(streams_.size()),
      nodes_(std::move(nodes)),
      last_window_(last_window),
      config_(config) {
  std::map<uint32_t, uint32_t> group_index;
  for (uint32_t s = 0; s < streams_.size(); ++s) {
    ControlStream& cs = streams_[s];
    if (cs.op != StreamOp::kGroup) continue;
    auto [it, inserted] =
        group_index.emplace(cs.partition_group, static_cast<uint32_t>(groups_.size()));
    if (inserted) {
      Group g;
      g.receivers = cs.receivers;
      g.bucket_count = cs.bucket_count;
      groups_.push_back(std::move(g));
    }
    Group& g = groups_[it->second];
    if (g.receivers != cs.receivers || g.bucket_count != cs.bucket_count) {
      throw std::invalid_argument("streams of one partition group must share receivers");
    }
    g.streams.push_back(s);
    cs.partition_group = it->second;
  }
}

std::vector<uint32_t> ControlPlane::live_nodes() const {
  std::vector<uint32_t> out;
  for (uint32_t n : nodes_) {
    if (!dead_.contains(n)) out.push_back(n);
  }
  return out;
}

bool ControlPlane::position_dead(const std::vector<uint32_t>& receivers,
                                 uint32_t pos) const {
  return dead_.contains(receivers[pos]);
}

std::vector<uint32_t> ControlPlane::alive_positions(const Group& g) const {
  std::vector<uint32_t> out;
  for (uint32_t p = 0; p < g.receivers.size(); ++p) {
    if (!position_dead(g.receivers, p)) out.push_back(p);
  }
  return out;
}

const BucketAllocation* ControlPlane::allocation(uint32_t stream, uint64_t window) const {
  const ControlStream& cs = streams_.at(stream);
  if (cs.op != StreamOp::kGroup) return nullptr;
  const Group& g = groups_[cs.partition_group];
  auto it = g.decided.find(window);
  return it == g.decided.end() ? nullptr : &it->second;
}

std::vector<Outgoing> ControlPlane::on_histogram(uint64_t tick, const HistogramMsg& msg) {
  last_tick_ = std::max(last_tick_, tick);
  const ControlStream& cs = streams_.at(msg.stream);
  if (cs.op != StreamOp::kGroup || dead_.contains(msg.sender)) return {};
  if (last_window_ && msg.window > *last_window_) return {};
  Group& g = groups_[cs.partition_group];
  if (g.decided.contains(msg.window)) return {};
  PendingSplit& p = g.pending[msg.window];
  if (p.summed.counts.empty()) p.summed.counts.assign(g.bucket_count, 0);
  if (!p.reported[msg.stream].insert(msg.sender).second) return {};
  if (msg.counts.size() != g.bucket_count) {
    throw std::invalid_argument("histogram size does not match bucket count");
  }
  p.summed.add(BucketHistogram{msg.counts});
  if (!p.timer_requested) {
    p.timer_requested = true;
    timers_.push_back({tick + config_.split_timeout, cs.partition_group, msg.window});
  }
  return maybe_decide(tick, cs.partition_group, msg.window, false);
}

std::vector<Outgoing> ControlPlane::on_split_timeout(uint64_t tick, uint32_t group,
                                                     uint64_t window) {
  last_tick_ = std::max(last_tick_, tick);
  return maybe_decide(tick, group, window, true);
}

std::vector<Outgoing> ControlPlane::maybe_decide(uint64_t tick, uint32_t group,
                                                 uint64_t window, bool timed_out) {
  Group& g = groups_[group];
  auto it = g.pending.find(window);
  if (it == g.pending.end() || g.decided.contains(window) || unrecoverable_) return {};
  PendingSplit& p = it->second;
  bool complete = true;
  for (uint32_t s : g.streams) {
    for (uint32_t sender : streams_[s].senders) {
      if (dead_.contains(sender)) continue;
      if (!p.reported[s].contains(sender)) complete = false;
    }
  }
  if (!complete && !timed_out) return {};
  std::vector<uint32_t> alive = alive_positions(g);
  BucketAllocation a = split_over_alive(p.summed, alive);
  g.decided[window] = a;
  g.basis[window] = p.summed;
  std::vector<Outgoing> out;
  for (uint32_t s : g.streams) {
    splits_.push_back({tick, s, window, a, p.summed.counts, !complete});
    std::vector<uint32_t> dest;
    for (uint32_t sender : streams_[s].senders) {
      if (!dead_.contains(sender)) dest.push_back(sender);
    }
    out.push_back({dest, SplitDecision{s, window, a, epoch_, !complete}});
  }
  g.pending.erase(it);
  return out;
}

void ControlPlane::on_progress(const ProgressReport& r) {
  last_tick_ = std::max(last_tick_, r.tick);
  if (r.stream >= detection_.size() || dead_.contains(r.sender)) return;
  LinkProgress& lp = detection_[r.stream].links[{r.sender, r.receiver}];
  lp.delta = r.units_acked >= lp.last_acked ? r.units_acked - lp.last_acked : 0;
  lp.last_acked = r.units_acked;
  lp.backlog = r.backlog;
  lp.closes = r.closes_acked;
  lp.reported = true;
}

std::vector<Outgoing> ControlPlane::evaluate(uint64_t tick) {
  last_tick_ = std::max(last_tick_, tick);
  std::vector<uint32_t> failed;
  for (uint32_t s = 0; s < streams_.size(); ++s) {
    const ControlStream& cs = streams_[s];
    Detection& d = detection_[s];
    // Each sender's reference: median delta over its alive receivers that had
    // work outstanding or made progress this interval.
    std::map<uint32_t, double> reference;
    std::map<uint32_t, double> median_closes;
    for (uint32_t sender : cs.senders) {
      std::vector<uint64_t> closes;
      for (uint32_t p = 0; p < cs.receivers.size(); ++p) {
        if (position_dead(cs.receivers, p)) continue;
        auto it = d.links.find({sender, p});
        if (it != d.links.end() && it->second.reported) closes.push_back(it->second.closes);
      }
      if (!closes.empty()) median_closes[sender] = median(closes);
      std::vector<uint64_t> deltas;
      for (uint32_t p = 0; p < cs.receivers.size(); ++p) {
        if (position_dead(cs.receivers, p)) continue;
        auto it = d.links.find({sender, p});
        if (it == d.links.end() || !it->second.reported) continue;
        const LinkProgress& lp = it->second;
        if (lp.backlog > 0 || lp.delta > 0) deltas.push_back(lp.delta);
      }
      if (!deltas.empty()) reference[sender] = median(deltas);
    }
    for (uint32_t p = 0; p < cs.receivers.size(); ++p) {
      if (position_dead(cs.receivers, p)) continue;
      std::vector<ReceiverObservation> interval;
      for (uint32_t sender : cs.senders) {
        auto it = d.links.find({sender, p});
        if (it == d.links.end() || !it->second.reported) continue;
        const LinkProgress& lp = it->second;
        interval.push_back({lp.delta, lp.backlog, reference[sender],
                            static_cast<double>(lp.closes) < median_closes[sender]});
      }
      auto& hist = d.history[p];
      hist.push_back(std::move(interval));
      while (hist.size() > std::max<uint32_t>(config_.detector.lag_intervals, 1)) {
        hist.pop_front();
      }
      std::vector<std::vector<ReceiverObservation>> recent(hist.begin(), hist.end());
      if (detect_failure(recent, config_.detector) == Health::kFailed) {
        uint32_t node = cs.receivers[p];
        if (std::find(failed.begin(), failed.end(), node) == failed.end()) {
          failed.push_back(node);
        }
      }
    }
    for (auto& [key, lp] : d.links) lp.reported = false;
  }
  std::vector<Outgoing> out;
  for (uint32_t node : failed) {
    auto more = declare_failed(tick, node, "no-progress");
    out.insert(out.end(), more.begin(), more.end());
    if (unrecoverable_) break;
  }
  return out;
}

std::vector<Outgoing> ControlPlane::declare_failed(uint64_t tick, uint32_t node,
                                                   const std::string& cause) {
  last_tick_ = std::max(last_tick_, tick);
  if (dead_.contains(node) || unrecoverable_) return {};
  for (uint32_t s = 0; s < streams_.size(); ++s) {
    const auto& rs = streams_[s].receivers;
    if (std::find(rs.begin(), rs.end(), node) == rs.end()) continue;
    bool survivor = false;
    for (uint32_t r : rs) survivor |= r != node && !dead_.contains(r);
    if (!survivor) {
      unrecoverable_ = UnrecoverableStream{s, node};
      dead_.insert(node);
      return {};
    }
  }
  dead_.insert(node);
  ++epoch_;

  RecoveryRecord rec;
  rec.tick = tick;
  rec.failed_node = node;
  rec.epoch = epoch_;
  rec.committed_upto = committed_upto_;
  rec.cause = cause;

  FailureVerdict v;
  v.failed_node = node;
  v.epoch = epoch_;
  v.committed_upto = committed_upto_;
  for (uint32_t gi = 0; gi < groups_.size(); ++gi) {
    Group& g = groups_[gi];
    auto pos_it = std::find(g.receivers.begin(), g.receivers.end(), node);
    if (pos_it == g.receivers.end()) continue;
    const uint32_t failed_pos = static_cast<uint32_t>(pos_it - g.receivers.begin());
    // Survivor progress: frames acked so far, summed over every sender.
    std::vector<uint64_t> progress(g.receivers.size(), 0);
    for (uint32_t s : g.streams) {
      for (const auto& [key, lp] : detection_[s].links) {
        if (key.second < progress.size()) progress[key.second] += lp.last_acked;
      }
    }
    std::vector<uint32_t> dead_pos;
    for (uint32_t p = 0; p < g.receivers.size(); ++p) {
      if (p != failed_pos && position_dead(g.receivers, p)) dead_pos.push_back(p);
    }
    for (auto& [w, alloc] : g.decided) {
      if (w < committed_upto_) continue;
      alloc = repartition_on_failure(alloc, failed_pos, progress, g.basis[w], dead_pos);
      ++rec.windows_repartitioned;
      for (uint32_t s : g.streams) v.allocations[s][w] = alloc;
    }
    for (uint32_t s : g.streams) rec.streams.push_back(s);
  }
  for (uint32_t s = 0; s < streams_.size(); ++s) {
    detection_[s].history.clear();
  }
  recoveries_.push_back(rec);

  std::vector<Outgoing> out;
  out.push_back({live_nodes(), v});
  // A dead sender no longer owes histograms.
  for (uint32_t gi = 0; gi < groups_.size(); ++gi) {
    std::vector<uint64_t> windows;
    for (const auto& [w, p] : groups_[gi].pending) windows.push_back(w);
    for (uint64_t w : windows) {
      auto more = maybe_decide(tick, gi, w, false);
      out.insert(out.end(), more.begin(), more.end());
    }
  }
  return out;
}

std::vector<Outgoing> ControlPlane::on_ack(uint64_t tick, const AckMsg& msg) {
  last_tick_ = std::max(last_tick_, tick);
  if (dead_.contains(msg.node)) return {};
  acks_[msg.node][msg.window] = msg.epoch;
  return maybe_commit(last_tick_);
}

std::vector<Outgoing> ControlPlane::on_reopen(const ReopenMsg& msg) {
  auto it = acks_.find(msg.node);
  if (it != acks_.end()) it->second.erase(msg.window);
  return {};
}

bool ControlPlane::all_committed() const {
  return !last_window_ || committed_upto_ > *last_window_;
}

std::vector<Outgoing> ControlPlane::maybe_commit(uint64_t tick) {
  std::vector<Outgoing> out;
  if (unrecoverable_) return out;
  const std::vector<uint32_t> live = live_nodes();
  while (!all_committed()) {
    const uint64_t w = committed_upto_;
    for (uint32_t n : live) {
      auto a = acks_.find(n);
      if (a == acks_.end()) return out;
      auto e = a->second.find(w);
      if (e == a->second.end() || e->second != epoch_) return out;
    }
    ++committed_upto_;
    commit_ticks_[w] = tick;
    for (auto& [n, per_window] : acks_) per_window.erase(w);
    for (auto& g : groups_) {
      g.basis.erase(w);
    }
    out.push_back({live, CommitMsg{w}});
  }
  return out;
}

std::vector<TimerRequest> ControlPlane::take_timer_requests() {
  std::vector<TimerRequest> out;
  out.swap(timers_);
  return out;
}

}  // namespace streamweave

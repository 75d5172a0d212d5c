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

#include <algorithm>

namespace streamweave::detail {

InputPort::InputPort(StreamOp op, uint32_t conn_count,
                     std::optional<uint64_t> last_window, PortSink* sink)
    : op_(op), conns_(conn_count), last_(last_window), sink_(sink) {}

InputPort::Window& InputPort::window(uint64_t w) {
  auto it = windows_.find(w);
  if (it != windows_.end()) return it->second;
  Window& win = windows_[w];
  if (is_sort(op_)) {
    // One open run per live connection, so the merge waits for every sender.
    for (uint32_t c = 0; c < conns_.size(); ++c) {
      if (conns_[c].dead) continue;
      Source s;
      s.conn = c;
      s.done = conns_[c].ended;
      win.last_source[c] = static_cast<uint32_t>(win.sources.size());
      win.sources.push_back(std::move(s));
    }
  }
  return win;
}

uint32_t InputPort::required(uint64_t w) const {
  uint32_t e = 0;
  for (const auto& [from, epoch] : required_) {
    if (from > w) break;
    e = std::max(e, epoch);
  }
  return e;
}

bool InputPort::closes_complete(uint64_t w, const Window& win) const {
  const uint32_t need = required(w);
  for (uint32_t c = 0; c < conns_.size(); ++c) {
    const Conn& conn = conns_[c];
    if (conn.dead) continue;
    std::optional<uint32_t> eff;
    auto it = win.closed_epoch.find(c);
    if (it != win.closed_epoch.end()) eff = it->second;
    if (conn.ended) eff = std::max(eff.value_or(0), conn.end_epoch);
    if (!eff || *eff < need) return false;
  }
  return true;
}

void InputPort::maybe_close_ack(uint64_t w, Window& win, uint32_t source) {
  Source& s = win.sources[source];
  if (s.closed && s.units.empty() && !s.close_acked && !conns_[s.conn].dead) {
    s.close_acked = true;
    sink_->close_ack(s.conn, w, s.close_epoch);
  }
}

void InputPort::on_unit(uint32_t conn, DataUnit unit, WindowSpec spec) {
  const uint64_t w = window_of(unit.timestamp, spec).n;
  Conn& c = conns_[conn];
  if (c.dead || w < committed_) {
    sink_->ack_frame(conn, true, true);
    ++discarded_;
    return;
  }
  Window& win = window(w);
  if (win.cancelled) {
    sink_->ack_frame(conn, true, true);
    ++discarded_;
    return;
  }
  uint32_t idx;
  auto ls = win.last_source.find(conn);
  if (ls != win.last_source.end() && !win.sources[ls->second].done) {
    idx = ls->second;
  } else {
    idx = static_cast<uint32_t>(win.sources.size());
    Source s;
    s.conn = conn;
    win.sources.push_back(std::move(s));
    win.last_source[conn] = idx;
  }
  // Units of later windows cannot be consumed yet; acknowledge them on
  // arrival so a sender that is ahead is not mistaken for a stuck receiver.
  const bool held = w > current_;
  if (held) sink_->ack_frame(conn, true, false);
  Source& s = win.sources[idx];
  s.units.push_back(std::move(unit));
  s.epochs.push_back(c.epoch);
  s.acked.push_back(held);
  win.arrival.push_back(idx);
  ++win.pending;
  if (win.bounded && !win.reopened) {
    win.reopened = true;
    sink_->reopened(w);
  }
}

void InputPort::on_window_end(uint32_t conn, uint64_t w) {
  sink_->ack_frame(conn, false, true);
  Conn& c = conns_[conn];
  if (c.dead || w < committed_) return;
  if (last_ && w > *last_) return;
  Window& win = window(w);
  if (win.cancelled) return;
  uint32_t& best = win.closed_epoch[conn];
  best = std::max(best, c.epoch);
  uint32_t idx;
  auto ls = win.last_source.find(conn);
  if (ls != win.last_source.end()) {
    idx = ls->second;
  } else {
    idx = static_cast<uint32_t>(win.sources.size());
    Source s;
    s.conn = conn;
    win.sources.push_back(std::move(s));
    win.last_source[conn] = idx;
  }
  Source& s = win.sources[idx];
  s.done = true;
  s.closed = true;
  s.close_epoch = c.epoch;
  s.close_acked = false;
  maybe_close_ack(w, win, idx);
}

void InputPort::on_epoch(uint32_t conn, uint32_t epoch) {
  sink_->ack_frame(conn, false, true);
  Conn& c = conns_[conn];
  c.epoch = std::max(c.epoch, epoch);
  // The sender re-closes its open windows and re-sends END after a new epoch.
  c.ended = false;
}

void InputPort::on_end(uint32_t conn) {
  sink_->ack_frame(conn, false, true);
  Conn& c = conns_[conn];
  if (c.dead) return;
  c.ended = true;
  c.end_epoch = c.epoch;
  for (auto& [w, win] : windows_) {
    for (auto& s : win.sources) {
      if (s.conn == conn) s.done = true;
    }
  }
}

void InputPort::set_dead(uint32_t conn) {
  Conn& c = conns_[conn];
  c.dead = true;
  for (auto& [w, win] : windows_) {
    for (auto& s : win.sources) {
      if (s.conn == conn) s.done = true;
    }
  }
}

void InputPort::require_epoch(uint64_t from_window, uint32_t epoch) {
  uint32_t& e = required_[from_window];
  e = std::max(e, epoch);
}

void InputPort::commit(uint64_t w) {
  windows_.erase(w);
  filter_.clear(WindowIndex{w});
  committed_ = std::max(committed_, w + 1);
}

std::optional<uint32_t> InputPort::choose(const Window& win) const {
  if (!is_sort(op_)) {
    if (win.arrival.empty()) return std::nullopt;
    return win.arrival.front();
  }
  const bool ascending = direction_of(op_) == SortDirection::kAscending;
  std::optional<uint32_t> best;
  for (uint32_t i = 0; i < win.sources.size(); ++i) {
    const Source& s = win.sources[i];
    if (s.units.empty()) {
      if (!s.done && !win.bounded) return std::nullopt;
      continue;
    }
    if (!best) {
      best = i;
      continue;
    }
    const Key candidate = s.units.front().key;
    const Key current = win.sources[*best].units.front().key;
    if (ascending ? candidate < current : candidate > current) best = i;
  }
  return best;
}

std::optional<Packet> InputPort::pop_from(uint64_t w, Window& win,
                                          const std::function<bool()>& take_token) {
  while (true) {
    std::optional<uint32_t> idx = choose(win);
    if (!idx) return std::nullopt;
    Source& s = win.sources[*idx];
    const bool duplicate = filter_.contains(WindowIndex{w}, s.units.front().seq);
    if (!duplicate && !take_token()) {
      rate_limited_ = true;
      return Packet{NoneAvailable{}};
    }
    DataUnit u = std::move(s.units.front());
    const uint32_t epoch = s.epochs.front();
    const bool acked = s.acked.front();
    s.units.pop_front();
    s.epochs.pop_front();
    s.acked.pop_front();
    if (!is_sort(op_)) win.arrival.pop_front();
    --win.pending;
    if (acked) {
      sink_->held_consumed(s.conn);
    } else {
      sink_->ack_frame(s.conn, true, true);
    }
    maybe_close_ack(w, win, *idx);
    if (duplicate) {
      ++duplicates_;
      continue;
    }
    filter_.check(WindowIndex{w}, u.seq);
    last_epoch_ = epoch;
    last_window_delivered_ = w;
    return Packet{std::move(u)};
  }
}

void InputPort::discard_all(uint64_t w, Window& win) {
  (void)w;
  for (auto& s : win.sources) {
    for (size_t i = 0; i < s.units.size(); ++i) {
      if (!s.acked[i]) sink_->ack_frame(s.conn, true, true);
      ++discarded_;
    }
    s.units.clear();
    s.epochs.clear();
    s.acked.clear();
    s.done = true;
  }
  win.arrival.clear();
  win.pending = 0;
}

Packet InputPort::next(const std::function<bool()>& take_token) {
  rate_limited_ = false;
  // Resent units of windows that were already bounded.
  for (auto& [w, win] : windows_) {
    if (w >= current_) break;
    if (win.pending == 0 || win.cancelled) continue;
    // A sorted supplemental batch is merged only once every run is complete.
    if (is_sort(op_) && !closes_complete(w, win)) continue;
    if (auto p = pop_from(w, win, take_token)) return *p;
  }
  if (!supplemental_.empty()) {
    const uint64_t w = supplemental_.front();
    supplemental_.pop_front();
    last_window_delivered_ = w;
    return WindowBoundary{WindowIndex{w}, true};
  }
  if (last_ && current_ <= *last_) {
    const uint64_t w = current_;
    Window& win = window(w);
    if (!win.cancelled) {
      if (auto p = pop_from(w, win, take_token)) return *p;
    }
    if (win.cancelled || (win.pending == 0 && closes_complete(w, win))) {
      win.bounded = true;
      ++current_;
      last_window_delivered_ = w;
      return WindowBoundary{WindowIndex{w}, false};
    }
    return NoneAvailable{};
  }
  if (!eos_delivered_) {
    bool all_ended = true;
    for (const auto& c : conns_) all_ended &= c.dead || c.ended;
    if (all_ended) {
      eos_delivered_ = true;
      return EndOfStream{};
    }
  }
  return NoneAvailable{};
}

void InputPort::cancel_current() {
  const uint64_t w = last_window_delivered_;
  if (w != current_) return;
  Window& win = window(w);
  if (win.cancelled) return;
  win.cancelled = true;
  // Cancel before returning credits so senders do not refill the window.
  for (uint32_t c = 0; c < conns_.size(); ++c) {
    if (!conns_[c].dead) sink_->cancel(c, w);
  }
  discard_all(w, win);
}

uint64_t InputPort::bounded_upto() const { return eos_delivered_ ? kNoWindow : current_; }

bool InputPort::has_pending(uint64_t w) const {
  auto it = windows_.find(w);
  return it != windows_.end() && it->second.pending > 0;
}

bool InputPort::is_reopened(uint64_t w) const {
  auto it = windows_.find(w);
  return it != windows_.end() && it->second.reopened;
}

bool InputPort::supplemental_ready(uint64_t w) const {
  if (w >= current_) return false;
  auto it = windows_.find(w);
  if (it == windows_.end()) return true;
  const Window& win = it->second;
  if (win.cancelled || !win.bounded) return win.cancelled;
  return win.pending == 0 && closes_complete(w, win);
}

void InputPort::release_supplemental(uint64_t w) {
  auto it = windows_.find(w);
  if (it != windows_.end()) it->second.reopened = false;
  supplemental_.push_back(w);
}

bool InputPort::supplemental_outstanding(uint64_t w) const {
  return std::find(supplemental_.begin(), supplemental_.end(), w) != supplemental_.end();
}

bool InputPort::settled(uint64_t w) const {
  if (w < committed_) return true;
  if (w >= current_) return last_ && w > *last_ && eos_delivered_;
  auto it = windows_.find(w);
  if (it == windows_.end()) return true;
  const Window& win = it->second;
  if (win.cancelled) return true;
  return win.pending == 0 && !win.reopened && !supplemental_outstanding(w) &&
         closes_complete(w, win);
}

SourcePort::SourcePort(std::vector<DataUnit> units, WindowSpec spec,
                       std::optional<uint64_t> last_window)
    : units_(std::move(units)), spec_(spec), last_(last_window) {}

Packet SourcePort::next(const std::function<bool()>& take_token) {
  rate_limited_ = false;
  if (eos_) return NoneAvailable{};
  if (last_ && current_ <= *last_) {
    if (next_ < units_.size() && window_of(units_[next_].timestamp, spec_).n == current_) {
      if (!take_token()) {
        rate_limited_ = true;
        return NoneAvailable{};
      }
      last_window_delivered_ = current_;
      return units_[next_++];
    }
    const uint64_t w = current_++;
    last_window_delivered_ = w;
    return WindowBoundary{WindowIndex{w}, false};
  }
  eos_ = true;
  return EndOfStream{};
}

}  // namespace streamweave::detail

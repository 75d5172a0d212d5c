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

// Receiver side of one input stream on one node.
//
// Frames from each connection are sorted into per-window runs. A run ends at
// the connection's WINDOW_END for that window; units arriving for a window
// after the connection closed it start a new run (recovery resends). The
// current window is the lowest one not yet bounded; units of later windows
// are held, units of earlier (already bounded) windows are delivered as a
// supplemental batch.

#ifndef STREAMWEAVE_SRC_INPUT_PORT_H_
#define STREAMWEAVE_SRC_INPUT_PORT_H_

#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "streamweave/runtime_api.h"
#include "streamweave/stream_ops.h"

namespace streamweave::detail {

inline constexpr uint64_t kNoWindow = std::numeric_limits<uint64_t>::max();

// Effects the port asks its node to carry out.
class PortSink {
 public:
  virtual ~PortSink() = default;
  // Return one frame's worth of credit / transport acknowledgement. `consumed`
  // is false for units held for a later window, which do not count as
  // progress.
  virtual void ack_frame(uint32_t conn, bool unit, bool consumed) = 0;
  // A unit acknowledged on arrival (held) has now been consumed.
  virtual void held_consumed(uint32_t conn) = 0;
  // Every unit of the connection's closed run for `window` has been consumed.
  virtual void close_ack(uint32_t conn, uint64_t window, uint32_t epoch) = 0;
  virtual void cancel(uint32_t conn, uint64_t window) = 0;
  // A bounded window received new units.
  virtual void reopened(uint64_t window) = 0;
};

class InputPort {
 public:
  InputPort(StreamOp op, uint32_t conn_count, std::optional<uint64_t> last_window,
            PortSink* sink);

  void on_unit(uint32_t conn, DataUnit unit, WindowSpec spec);
  void on_window_end(uint32_t conn, uint64_t window);
  void on_epoch(uint32_t conn, uint32_t epoch);
  void on_end(uint32_t conn);
  void set_dead(uint32_t conn);
  bool is_dead(uint32_t conn) const { return conns_[conn].dead; }
  void require_epoch(uint64_t from_window, uint32_t epoch);
  void commit(uint64_t window);

  // Next packet for the stage. `take_token` is called before a unit is handed
  // out and may refuse (rate limit), in which case NoneAvailable is returned
  // and rate_limited() becomes true.
  Packet next(const std::function<bool()>& take_token);
  bool rate_limited() const { return rate_limited_; }
  uint32_t last_epoch() const { return last_epoch_; }
  uint64_t last_window() const { return last_window_delivered_; }

  // Consumer is done with the current window.
  void cancel_current();

  // Windows below this have had their regular boundary delivered.
  uint64_t bounded_upto() const;
  bool eos_delivered() const { return eos_delivered_; }
  bool has_pending(uint64_t window) const;
  // A reopened window has received all resends and been drained.
  bool supplemental_ready(uint64_t window) const;
  void release_supplemental(uint64_t window);
  bool supplemental_outstanding(uint64_t window) const;
  bool is_reopened(uint64_t window) const;
  // Regular boundary delivered, closes current at the required epoch, nothing
  // pending: the port's part of the node's acknowledgement for `window`.
  bool settled(uint64_t window) const;
  size_t duplicates_dropped() const { return duplicates_; }
  uint64_t discarded() const { return discarded_; }

 private:
  struct Source {
    uint32_t conn = 0;
    std::deque<DataUnit> units;
    std::deque<uint32_t> epochs;
    std::deque<bool> acked;
    bool done = false;    // no more units will join this run
    bool closed = false;  // ended by WINDOW_END (needs a close ack)
    uint32_t close_epoch = 0;
    bool close_acked = false;
  };
  struct Window {
    std::vector<Source> sources;
    std::deque<uint32_t> arrival;            // source index per queued unit
    std::map<uint32_t, uint32_t> last_source;  // conn -> source index
    std::map<uint32_t, uint32_t> closed_epoch;  // conn -> highest close epoch
    bool bounded = false;
    bool cancelled = false;
    bool reopened = false;
    uint64_t pending = 0;
  };
  struct Conn {
    uint32_t epoch = 0;
    bool ended = false;
    uint32_t end_epoch = 0;
    bool dead = false;
  };

  Window& window(uint64_t w);
  uint32_t required(uint64_t w) const;
  bool closes_complete(uint64_t w, const Window& win) const;
  void maybe_close_ack(uint64_t w, Window& win, uint32_t source);
  void finish_source_units(Window& win);
  // Picks the next source to pop from, or nullopt.
  std::optional<uint32_t> choose(const Window& win) const;
  std::optional<Packet> pop_from(uint64_t w, Window& win,
                                 const std::function<bool()>& take_token);
  void discard_all(uint64_t w, Window& win);

  StreamOp op_;
  std::vector<Conn> conns_;
  std::optional<uint64_t> last_;
  PortSink* sink_;
  std::map<uint64_t, Window> windows_;
  std::map<uint64_t, uint32_t> required_;  // from window -> epoch
  uint64_t current_ = 0;
  uint64_t committed_ = 0;
  std::deque<uint64_t> supplemental_;
  DuplicateFilter filter_;
  bool eos_delivered_ = false;
  bool rate_limited_ = false;
  uint32_t last_epoch_ = 0;
  uint64_t last_window_delivered_ = 0;
  size_t duplicates_ = 0;
  uint64_t discarded_ = 0;
};

// Pseudo input of a source stage: replays generated units and window
// boundaries through `last_window`.
class SourcePort {
 public:
  SourcePort(std::vector<DataUnit> units, WindowSpec spec,
             std::optional<uint64_t> last_window);
  Packet next(const std::function<bool()>& take_token);
  bool rate_limited() const { return rate_limited_; }
  uint64_t bounded_upto() const { return eos_ ? kNoWindow : current_; }
  bool eos_delivered() const { return eos_; }
  uint64_t last_window() const { return last_window_delivered_; }
  size_t remaining() const { return units_.size() - next_; }

 private:
  std::vector<DataUnit> units_;
  WindowSpec spec_;
  std::optional<uint64_t> last_;
  size_t next_ = 0;
  uint64_t current_ = 0;
  bool eos_ = false;
  bool rate_limited_ = false;
  uint64_t last_window_delivered_ = 0;
};

}  // namespace streamweave::detail

#endif  // STREAMWEAVE_SRC_INPUT_PORT_H_

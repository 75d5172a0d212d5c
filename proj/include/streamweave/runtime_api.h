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

// Programmer-facing framework: topology declaration, stream handles, packet
// get/send, arrival notification and sequence ids.
//
// A stage function is a deterministic callback run cooperatively on each node
// of its stage. It pulls packets from input handles until none are available
// and pushes results to output handles; the framework owns all routing,
// buffering and recovery. Stage functions must be deterministic over their
// input sequence, since recovery replays inputs on another node and relies on
// regenerated sequence ids matching the originals.

#ifndef STREAMWEAVE_RUNTIME_API_H_
#define STREAMWEAVE_RUNTIME_API_H_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <variant>
#include <vector>

#include "streamweave/core_model.h"

namespace streamweave {

class StreamError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class HandleDirection { kInput, kOutput };

// Pseudo input stream name through which a source stage reads its generated
// data.
inline constexpr std::string_view kSourceStream = "@source";

struct StreamHandle {
  std::string stream;
  HandleDirection direction = HandleDirection::kInput;
  uint32_t index = 0;  // position among the stage's inputs or outputs
};

struct NoneAvailable {};
struct WindowBoundary {
  WindowIndex window;
  // Set when the window had already been closed once and was reopened by
  // recovery; the stage sees only the units delivered since.
  bool supplemental = false;
};
struct EndOfStream {};

using Packet = std::variant<DataUnit, NoneAvailable, WindowBoundary, EndOfStream>;

// Sequence id from (stage, window, key, per-(key, window) emit ordinal).
SequenceId derive_sequence_id(StageId stage, WindowIndex window, Key key,
                              uint64_t ordinal);

// Sequence id from the ids of the inputs that produced a result. Order of
// `inputs` does not matter; `fanout` distinguishes several outputs derived
// from the same inputs.
SequenceId derive_lineage_id(StageId stage, WindowIndex window, Key key,
                             std::span<const SequenceId> inputs,
                             uint64_t fanout = 0);

// Order-independent accumulator for derive_lineage_id over large input sets.
class LineageDigest {
 public:
  void add(SequenceId id);
  uint64_t value() const { return sum_; }
  uint64_t count() const { return count_; }

 private:
  uint64_t sum_ = 0;
  uint64_t count_ = 0;
};
SequenceId derive_lineage_id(StageId stage, WindowIndex window, Key key,
                             const LineageDigest& digest, uint64_t fanout = 0);

// Tracks per-(key, window) emit ordinals of one node.
class SequenceAllocator {
 public:
  explicit SequenceAllocator(StageId stage) : stage_(stage) {}
  SequenceId next(Key key, WindowIndex window);
  void reset(WindowIndex window);

 private:
  StageId stage_;
  std::map<uint64_t, std::map<uint64_t, uint64_t>> ordinals_;  // window -> key
};

enum class FilterResult { kAccept, kDropDuplicate };

// Receiver-side duplicate suppression; the seen-set lives until the window is
// committed.
class DuplicateFilter {
 public:
  FilterResult check(WindowIndex window, SequenceId seq);
  bool contains(WindowIndex window, SequenceId seq) const;
  void clear(WindowIndex window);
  size_t tracked(WindowIndex window) const;

 private:
  std::map<uint64_t, std::unordered_set<uint64_t>> seen_;
};

// Node-side view of the framework handed to stage functions.
class StageContext {
 public:
  virtual ~StageContext() = default;

  virtual StageId stage_id() const = 0;
  virtual uint32_t node_index() const = 0;
  virtual WindowSpec window_spec() const = 0;
  virtual const FunctionRef& function() const = 0;
  // Window of the most recent packet returned by get_packet.
  virtual WindowIndex current_window() const = 0;

  virtual std::vector<std::string> input_streams() const = 0;
  virtual std::vector<std::string> output_streams() const = 0;

  // Throws StreamError if the stream is not declared for this stage in the
  // requested direction.
  virtual StreamHandle get_stream_handle(std::string_view name,
                                         HandleDirection direction) = 0;

  virtual Packet get_packet(const StreamHandle& h) = 0;

  // Sequence id from derive_sequence_id with this node's emit ordinals.
  virtual void send_packet(const StreamHandle& h, Key key, uint64_t timestamp,
                           Payload payload) = 0;
  // Caller-provided sequence id (e.g. from derive_lineage_id).
  virtual void send_packet_with_id(const StreamHandle& h, Key key,
                                   uint64_t timestamp, Payload payload,
                                   SequenceId seq) = 0;

  // Consumer is done with the current window of `h`; the remaining units of
  // that window are never transmitted.
  virtual void stop_reading(const StreamHandle& h) = 0;

  // Runs `callback` (as a node wake) whenever units become readable on `h`.
  virtual void notify_arrival(const StreamHandle& h,
                              std::function<void(StageContext&)> callback) = 0;

  // Final output of a stage with no output streams.
  virtual void emit_result(const DataUnit& unit) = 0;
};

class StageFunction {
 public:
  virtual ~StageFunction() = default;
  virtual void on_start(StageContext&) {}
  // Called on every node wake that has no registered arrival callback.
  virtual void on_wake(StageContext& ctx) = 0;
};

using StageFactory =
    std::function<std::unique_ptr<StageFunction>(const FunctionRef&)>;

// Name -> factory. builtin() holds: identity, select, word-group-count,
// top-fraction-consumer, window-join, window-sum.
class StageRegistry {
 public:
  void add(std::string name, StageFactory factory);
  bool contains(std::string_view name) const;
  std::unique_ptr<StageFunction> create(const FunctionRef& ref) const;
  static const StageRegistry& builtin();

 private:
  std::map<std::string, StageFactory, std::less<>> factories_;
};

// Declaration builder mirroring newStage / newStream / newInputStream /
// newOutputStream.
class TopologyBuilder {
 public:
  StageId new_stage(uint32_t node_count, FunctionRef function = {},
                    std::string name = "");
  void new_stream(std::string name);
  void new_output_stream(StageId stage, std::string_view stream);
  void new_input_stream(StageId stage, std::string_view stream, StreamOp op);

  // Throws StreamError listing the violations if the result is invalid.
  Topology build() const;

 private:
  StageDecl& stage(StageId id);
  struct PendingStream {
    std::string name;
    std::optional<StageId> producer;
    std::optional<StageId> consumer;
    StreamOp op = StreamOp::kNone;
  };
  PendingStream& stream(std::string_view name);

  std::vector<StageDecl> stages_;
  std::vector<PendingStream> streams_;
};

}  // namespace streamweave

#endif  // STREAMWEAVE_RUNTIME_API_H_

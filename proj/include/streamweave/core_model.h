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

#ifndef STREAMWEAVE_CORE_MODEL_H_
#define STREAMWEAVE_CORE_MODEL_H_

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace streamweave {

// Stream key. Every stream uses the same fixed-width integer key type.
struct Key {
  uint64_t value = 0;
  auto operator<=>(const Key&) const = default;
};

struct SequenceId {
  uint64_t value = 0;
  auto operator<=>(const SequenceId&) const = default;
};

struct WindowIndex {
  uint64_t n = 0;
  auto operator<=>(const WindowIndex&) const = default;
};

struct WindowSpec {
  uint64_t width = 1;
};

using Payload = std::vector<uint8_t>;

// One stream element. The framework never looks inside the payload.
struct DataUnit {
  Key key;
  uint64_t timestamp = 0;
  SequenceId seq;
  Payload payload;

  bool operator==(const DataUnit&) const = default;
};

// Returns floor(ts / width): window n holds timestamps nT .. (n+1)T - 1.
WindowIndex window_of(uint64_t ts, WindowSpec spec);

// First timestamp of a window.
inline uint64_t window_start(WindowIndex w, WindowSpec spec) {
  return w.n * spec.width;
}

using StageId = uint32_t;

enum class StreamOp { kGroup, kSortAsc, kSortDesc, kNone };

std::string_view to_string(StreamOp op);
std::optional<StreamOp> parse_stream_op(std::string_view text);

inline bool is_sort(StreamOp op) {
  return op == StreamOp::kSortAsc || op == StreamOp::kSortDesc;
}

struct StreamDecl {
  std::string name;
  StageId producer = 0;
  StageId consumer = 0;
  StreamOp op = StreamOp::kNone;
};

// Reference to a registered stage function plus its string parameters.
struct FunctionRef {
  std::string name = "identity";
  std::map<std::string, std::string> params;
};

struct StageDecl {
  StageId id = 0;
  std::string name;
  uint32_t node_count = 1;
  std::vector<std::string> input_streams;
  std::vector<std::string> output_streams;
  FunctionRef function;
};

struct Topology {
  std::vector<StageDecl> stages;
  std::vector<StreamDecl> streams;

  const StageDecl* find_stage(StageId id) const;
  const StageDecl* find_stage(std::string_view name) const;
  const StreamDecl* find_stream(std::string_view name) const;
  bool is_source(const StageDecl& stage) const {
    return stage.input_streams.empty();
  }
  // Stages in an order where every producer precedes its consumers.
  // Only meaningful for a validated topology.
  std::vector<StageId> topological_order() const;
};

struct Violation {
  std::string subject;  // offending stage or stream
  std::string message;

  bool operator==(const Violation&) const = default;
};

// Empty result means the topology is valid.
std::vector<Violation> validate_topology(const Topology& t);

}  // namespace streamweave

#endif  // STREAMWEAVE_CORE_MODEL_H_

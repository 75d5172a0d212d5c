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

#include "streamweave/core_model.h"

#include <algorithm>
#include <queue>
#include <set>

namespace streamweave {

WindowIndex window_of(uint64_t ts, WindowSpec spec) {
  return WindowIndex{ts / spec.width};
}

std::string_view to_string(StreamOp op) {
  switch (op) {
    case StreamOp::kGroup:
      return "GROUP";
    case StreamOp::kSortAsc:
      return "SORT_ASC";
    case StreamOp::kSortDesc:
      return "SORT_DESC";
    case StreamOp::kNone:
      return "NONE";
  }
  return "NONE";
}

std::optional<StreamOp> parse_stream_op(std::string_view text) {
  for (StreamOp op : {StreamOp::kGroup, StreamOp::kSortAsc, StreamOp::kSortDesc,
                      StreamOp::kNone}) {
    if (text == to_string(op)) return op;
  }
  // Bare SORT defaults to descending, the direction used by merge examples.
  if (text == "SORT") return StreamOp::kSortDesc;
  return std::nullopt;
}

const StageDecl* Topology::find_stage(StageId id) const {
  for (const auto& s : stages) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

const StageDecl* Topology::find_stage(std::string_view name) const {
  for (const auto& s : stages) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

const StreamDecl* Topology::find_stream(std::string_view name) const {
  for (const auto& s : streams) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

std::vector<StageId> Topology::topological_order() const {
  std::map<StageId, int> indegree;
  std::map<StageId, std::vector<StageId>> edges;
  for (const auto& s : stages) indegree[s.id] = 0;
  for (const auto& st : streams) {
    if (!indegree.contains(st.producer) || !indegree.contains(st.consumer)) {
      continue;
    }
    edges[st.producer].push_back(st.consumer);
    ++indegree[st.consumer];
  }
  // Kahn's algorithm; the min-heap keeps the order deterministic.
  std::priority_queue<StageId, std::vector<StageId>, std::greater<>> ready;
  for (const auto& [id, deg] : indegree) {
    if (deg == 0) ready.push(id);
  }
  std::vector<StageId> order;
  while (!ready.empty()) {
    StageId id = ready.top();
    ready.pop();
    order.push_back(id);
    for (StageId next : edges[id]) {
      if (--indegree[next] == 0) ready.push(next);
    }
  }
  return order;
}

std::vector<Violation> validate_topology(const Topology& t) {
  std::vector<Violation> out;
  auto add = [&out](std::string subject, std::string message) {
    out.push_back({std::move(subject), std::move(message)});
  };

  std::set<StageId> stage_ids;
  std::set<std::string> stage_names;
  for (const auto& s : t.stages) {
    std::string subject = s.name.empty() ? "stage#" + std::to_string(s.id)
                                         : s.name;
    if (!stage_ids.insert(s.id).second) add(subject, "duplicate stage id");
    if (!s.name.empty() && !stage_names.insert(s.name).second) {
      add(subject, "duplicate stage name");
    }
    if (s.node_count < 1) add(subject, "zero nodes");
  }

  std::set<std::string> stream_names;
  for (const auto& st : t.streams) {
    if (!stream_names.insert(st.name).second) {
      add(st.name, "duplicate stream name");
    }
    const StageDecl* producer = t.find_stage(st.producer);
    const StageDecl* consumer = t.find_stage(st.consumer);
    if (producer == nullptr) add(st.name, "unknown producer");
    if (consumer == nullptr) add(st.name, "unknown consumer");
    if (producer != nullptr &&
        std::count(producer->output_streams.begin(),
                   producer->output_streams.end(), st.name) != 1) {
      add(st.name, "not attached as output of its producer");
    }
    if (consumer != nullptr &&
        std::count(consumer->input_streams.begin(),
                   consumer->input_streams.end(), st.name) != 1) {
      add(st.name, "not attached as input of its consumer");
    }
  }

  for (const auto& s : t.stages) {
    for (const auto& name : s.input_streams) {
      const StreamDecl* st = t.find_stream(name);
      if (st == nullptr) {
        add(s.name, "unknown input stream " + name);
      } else if (st->consumer != s.id) {
        add(name, "consumed by a stage other than its declared consumer");
      }
    }
    for (const auto& name : s.output_streams) {
      const StreamDecl* st = t.find_stream(name);
      if (st == nullptr) {
        add(s.name, "unknown output stream " + name);
      } else if (st->producer != s.id) {
        add(name, "produced by a stage other than its declared producer");
      }
    }
  }

  // Cycle check needs unique ids to be meaningful.
  if (out.empty() && t.topological_order().size() != t.stages.size()) {
    add("topology", "stream graph contains a cycle");
  }
  return out;
}

}  // namespace streamweave

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

#include "streamweave/runtime_api.h"

#include <algorithm>

#include "streamweave/partitioning.h"

namespace streamweave {
namespace {

uint64_t combine(uint64_t seed, uint64_t value) {
  return mix64(seed ^ (value + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

}  // namespace

SequenceId derive_sequence_id(StageId stage, WindowIndex window, Key key,
                              uint64_t ordinal) {
  uint64_t h = combine(0x5354524d57454156ULL, stage);
  h = combine(h, window.n);
  h = combine(h, key.value);
  h = combine(h, ordinal);
  return SequenceId{h};
}

void LineageDigest::add(SequenceId id) {
  sum_ += mix64(id.value ^ 0x6c696e65616765ULL);
  ++count_;
}

SequenceId derive_lineage_id(StageId stage, WindowIndex window, Key key,
                             const LineageDigest& digest, uint64_t fanout) {
  uint64_t h = combine(0x4c494e4541474545ULL, stage);
  h = combine(h, window.n);
  h = combine(h, key.value);
  h = combine(h, digest.value());
  h = combine(h, digest.count());
  h = combine(h, fanout);
  return SequenceId{h};
}

SequenceId derive_lineage_id(StageId stage, WindowIndex window, Key key,
                             std::span<const SequenceId> inputs, uint64_t fanout) {
  LineageDigest d;
  for (SequenceId id : inputs) d.add(id);
  return derive_lineage_id(stage, window, key, d, fanout);
}

SequenceId SequenceAllocator::next(Key key, WindowIndex window) {
  uint64_t& ordinal = ordinals_[window.n][key.value];
  return derive_sequence_id(stage_, window, key, ordinal++);
}

void SequenceAllocator::reset(WindowIndex window) { ordinals_.erase(window.n); }

FilterResult DuplicateFilter::check(WindowIndex window, SequenceId seq) {
  return seen_[window.n].insert(seq.value).second ? FilterResult::kAccept
                                                  : FilterResult::kDropDuplicate;
}

bool DuplicateFilter::contains(WindowIndex window, SequenceId seq) const {
  auto it = seen_.find(window.n);
  return it != seen_.end() && it->second.contains(seq.value);
}

void DuplicateFilter::clear(WindowIndex window) { seen_.erase(window.n); }

size_t DuplicateFilter::tracked(WindowIndex window) const {
  auto it = seen_.find(window.n);
  return it == seen_.end() ? 0 : it->second.size();
}

void StageRegistry::add(std::string name, StageFactory factory) {
  factories_[std::move(name)] = std::move(factory);
}

bool StageRegistry::contains(std::string_view name) const {
  return factories_.find(name) != factories_.end();
}

std::unique_ptr<StageFunction> StageRegistry::create(const FunctionRef& ref) const {
  auto it = factories_.find(ref.name);
  if (it == factories_.end()) {
    throw StreamError("unknown stage function '" + ref.name + "'");
  }
  return it->second(ref);
}

StageId TopologyBuilder::new_stage(uint32_t node_count, FunctionRef function,
                                   std::string name) {
  if (node_count < 1) throw StreamError("stage needs at least one node");
  StageId id = static_cast<StageId>(stages_.size());
  if (name.empty()) name = "stage" + std::to_string(id);
  for (const auto& s : stages_) {
    if (s.name == name) throw StreamError("duplicate stage '" + name + "'");
  }
  StageDecl decl;
  decl.id = id;
  decl.name = std::move(name);
  decl.node_count = node_count;
  decl.function = std::move(function);
  stages_.push_back(std::move(decl));
  return id;
}

void TopologyBuilder::new_stream(std::string name) {
  for (const auto& s : streams_) {
    if (s.name == name) throw StreamError("duplicate stream '" + name + "'");
  }
  streams_.push_back({std::move(name), std::nullopt, std::nullopt, StreamOp::kNone});
}

StageDecl& TopologyBuilder::stage(StageId id) {
  if (id >= stages_.size()) throw StreamError("unknown stage");
  return stages_[id];
}

TopologyBuilder::PendingStream& TopologyBuilder::stream(std::string_view name) {
  for (auto& s : streams_) {
    if (s.name == name) return s;
  }
  throw StreamError("unknown stream '" + std::string(name) + "'");
}

void TopologyBuilder::new_output_stream(StageId stage_id, std::string_view name) {
  StageDecl& st = stage(stage_id);
  PendingStream& s = stream(name);
  if (s.producer) throw StreamError("stream '" + s.name + "' already has a producer");
  s.producer = stage_id;
  st.output_streams.push_back(s.name);
}

void TopologyBuilder::new_input_stream(StageId stage_id, std::string_view name,
                                       StreamOp op) {
  StageDecl& st = stage(stage_id);
  PendingStream& s = stream(name);
  if (s.consumer) throw StreamError("stream '" + s.name + "' already has a consumer");
  s.consumer = stage_id;
  s.op = op;
  st.input_streams.push_back(s.name);
}

Topology TopologyBuilder::build() const {
  Topology t;
  t.stages = stages_;
  for (const auto& s : streams_) {
    if (!s.producer) throw StreamError("stream '" + s.name + "' has no producer");
    if (!s.consumer) throw StreamError("stream '" + s.name + "' has no consumer");
    t.streams.push_back({s.name, *s.producer, *s.consumer, s.op});
  }
  std::vector<Violation> violations = validate_topology(t);
  if (!violations.empty()) {
    std::string msg = "invalid topology:";
    for (const auto& v : violations) msg += " [" + v.subject + ": " + v.message + "]";
    throw StreamError(msg);
  }
  return t;
}

}  // namespace streamweave

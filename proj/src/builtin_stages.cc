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

#include <cmath>
#include <map>
#include <set>

#include "streamweave/runtime_api.h"
#include "streamweave/stream_ops.h"

namespace streamweave {
namespace {

uint64_t param_u64(const FunctionRef& ref, const std::string& name, uint64_t fallback) {
  auto it = ref.params.find(name);
  if (it == ref.params.end()) return fallback;
  try {
    return std::stoull(it->second);
  } catch (const std::exception&) {
    throw StreamError("parameter '" + name + "' of " + ref.name + " is not an integer");
  }
}

double param_double(const FunctionRef& ref, const std::string& name, double fallback) {
  auto it = ref.params.find(name);
  if (it == ref.params.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw StreamError("parameter '" + name + "' of " + ref.name + " is not a number");
  }
}

// Drains every input handle, tracking window completion across inputs. A
// window is complete once each input has delivered its boundary or has ended
// before reaching it. A supplemental (recovery) window completes once every
// input has delivered its supplemental boundary.
class WindowedStage : public StageFunction {
 public:
  void on_start(StageContext& ctx) override {
    std::vector<std::string> ins = ctx.input_streams();
    if (ins.empty()) ins.push_back(std::string(kSourceStream));
    for (const auto& name : ins) {
      inputs_.push_back(ctx.get_stream_handle(name, HandleDirection::kInput));
    }
    for (const auto& name : ctx.output_streams()) {
      outputs_.push_back(ctx.get_stream_handle(name, HandleDirection::kOutput));
    }
    ended_.assign(inputs_.size(), false);
    last_bounded_.assign(inputs_.size(), -1);
  }

  void on_wake(StageContext& ctx) override {
    bool progress = true;
    while (progress) {
      progress = false;
      for (size_t i = 0; i < inputs_.size(); ++i) progress |= drain(ctx, i);
    }
  }

 protected:
  virtual void on_unit(StageContext& ctx, size_t input, const DataUnit& u,
                       WindowIndex w) = 0;
  virtual void on_window(StageContext&, WindowIndex, bool /*supplemental*/) {}

  void emit(StageContext& ctx, Key key, uint64_t ts, const Payload& payload,
            SequenceId seq) {
    if (outputs_.empty()) {
      ctx.emit_result(DataUnit{key, ts, seq, payload});
      return;
    }
    for (const auto& h : outputs_) ctx.send_packet_with_id(h, key, ts, payload, seq);
  }

  const std::vector<StreamHandle>& inputs() const { return inputs_; }
  const std::vector<StreamHandle>& outputs() const { return outputs_; }

 private:
  bool drain(StageContext& ctx, size_t i) {
    bool any = false;
    while (true) {
      Packet p = ctx.get_packet(inputs_[i]);
      if (auto* u = std::get_if<DataUnit>(&p)) {
        on_unit(ctx, i, *u, ctx.current_window());
        any = true;
      } else if (auto* b = std::get_if<WindowBoundary>(&p)) {
        any = true;
        if (b->supplemental) {
          auto& seen = supplemental_[b->window.n];
          seen.insert(i);
          if (seen.size() == inputs_.size()) {
            supplemental_.erase(b->window.n);
            on_window(ctx, b->window, true);
          }
        } else {
          last_bounded_[i] = static_cast<int64_t>(b->window.n);
          bounded_[b->window.n].insert(i);
          check_complete(ctx);
        }
      } else if (std::holds_alternative<EndOfStream>(p)) {
        ended_[i] = true;
        check_complete(ctx);
        return true;
      } else {
        return any;
      }
    }
  }

  void check_complete(StageContext& ctx) {
    while (!bounded_.empty()) {
      auto it = bounded_.begin();
      const uint64_t w = it->first;
      for (size_t i = 0; i < inputs_.size(); ++i) {
        bool done = it->second.contains(i) ||
                    (ended_[i] && last_bounded_[i] < static_cast<int64_t>(w));
        if (!done) return;
      }
      bounded_.erase(it);
      on_window(ctx, WindowIndex{w}, false);
    }
  }

  std::vector<StreamHandle> inputs_;
  std::vector<StreamHandle> outputs_;
  std::vector<bool> ended_;
  std::vector<int64_t> last_bounded_;
  std::map<uint64_t, std::set<size_t>> bounded_;
  std::map<uint64_t, std::set<size_t>> supplemental_;
};

class IdentityStage : public WindowedStage {
 protected:
  void on_unit(StageContext& ctx, size_t, const DataUnit& u, WindowIndex w) override {
    if (outputs().empty()) return;  // sink: the framework records accepted units
    SequenceId ids[] = {u.seq};
    emit(ctx, u.key, u.timestamp, u.payload,
         derive_lineage_id(ctx.stage_id(), w, u.key, ids));
  }
};

class SelectStage : public WindowedStage {
 public:
  explicit SelectStage(const FunctionRef& ref)
      : modulus_(param_u64(ref, "modulus", 2)), remainder_(param_u64(ref, "remainder", 0)) {
    if (modulus_ == 0) throw StreamError("select: modulus must be >= 1");
  }

 protected:
  void on_unit(StageContext& ctx, size_t, const DataUnit& u, WindowIndex w) override {
    auto keep = [this](Key k) { return k.value % modulus_ == remainder_; };
    if (select_filter(u, keep) == SelectResult::kDrop) return;
    if (outputs().empty()) {
      ctx.emit_result(u);
      return;
    }
    SequenceId ids[] = {u.seq};
    emit(ctx, u.key, u.timestamp, u.payload,
         derive_lineage_id(ctx.stage_id(), w, u.key, ids));
  }

 private:
  uint64_t modulus_;
  uint64_t remainder_;
};

// Per window, one (key, count) unit for every key seen.
class WordGroupCountStage : public WindowedStage {
 protected:
  void on_unit(StageContext&, size_t, const DataUnit& u, WindowIndex w) override {
    Tally& t = windows_[w.n][u.key.value];
    ++t.count;
    t.lineage.add(u.seq);
  }

  void on_window(StageContext& ctx, WindowIndex w, bool) override {
    auto it = windows_.find(w.n);
    if (it == windows_.end()) return;
    const uint64_t ts = window_start(w, ctx.window_spec());
    for (const auto& [key, tally] : it->second) {
      emit(ctx, Key{key}, ts, encode_u64(tally.count),
           derive_lineage_id(ctx.stage_id(), w, Key{key}, tally.lineage));
    }
    windows_.erase(it);
  }

 private:
  struct Tally {
    uint64_t count = 0;
    LineageDigest lineage;
  };
  std::map<uint64_t, std::map<uint64_t, Tally>> windows_;
};

// Reads the first `take` units of each window from its first input, then
// tells the framework it is no longer interested in the rest.
class TopFractionConsumer : public WindowedStage {
 public:
  explicit TopFractionConsumer(const FunctionRef& ref) {
    if (ref.params.contains("take")) {
      take_ = param_u64(ref, "take", 0);
    } else {
      double fraction = param_double(ref, "fraction", 0.1);
      uint64_t window_units = param_u64(ref, "window_units", 0);
      if (fraction < 0 || fraction > 1) {
        throw StreamError("top-fraction-consumer: fraction must be in [0, 1]");
      }
      take_ = static_cast<uint64_t>(std::ceil(fraction * static_cast<double>(window_units)));
    }
  }

 protected:
  void on_unit(StageContext& ctx, size_t input, const DataUnit& u, WindowIndex w) override {
    if (w.n != window_) {
      window_ = w.n;
      taken_ = 0;
    }
    ++taken_;
    if (!outputs().empty()) {
      SequenceId ids[] = {u.seq};
      emit(ctx, u.key, u.timestamp, u.payload,
           derive_lineage_id(ctx.stage_id(), w, u.key, ids));
    }
    if (taken_ >= take_) ctx.stop_reading(inputs()[input]);
  }

  void on_window(StageContext&, WindowIndex w, bool) override {
    if (w.n >= window_) {
      window_ = w.n + 1;
      taken_ = 0;
    }
  }

 private:
  uint64_t take_ = 0;
  uint64_t window_ = 0;
  uint64_t taken_ = 0;
};

class WindowJoinStage : public WindowedStage {
 protected:
  void on_unit(StageContext&, size_t input, const DataUnit& u, WindowIndex w) override {
    auto& per_input = windows_[w.n];
    if (per_input.size() < inputs().size()) per_input.resize(inputs().size());
    per_input[input].push_back(u);
  }

  void on_window(StageContext& ctx, WindowIndex w, bool) override {
    auto it = windows_.find(w.n);
    if (it == windows_.end()) return;
    it->second.resize(inputs().size());
    for (const DataUnit& j : join_window(it->second)) {
      SequenceId ids[] = {j.seq};
      emit(ctx, j.key, j.timestamp, j.payload,
           derive_lineage_id(ctx.stage_id(), w, j.key, ids));
    }
    windows_.erase(it);
  }

 private:
  std::map<uint64_t, std::vector<std::vector<DataUnit>>> windows_;
};

// Sums 8-byte integer payloads per window and emits one unit under a constant
// key, so a GROUP stream collects every partial on one node.
class WindowSumStage : public WindowedStage {
 public:
  explicit WindowSumStage(const FunctionRef& ref) : key_{param_u64(ref, "key", 0)} {}

 protected:
  void on_unit(StageContext&, size_t, const DataUnit& u, WindowIndex w) override {
    Partial& p = windows_[w.n];
    DataUnit one[] = {u};
    p.sum = fold_window(one, [](uint64_t a, uint64_t b) { return a + b; }, p.sum);
    p.lineage.add(u.seq);
  }

  void on_window(StageContext& ctx, WindowIndex w, bool supplemental) override {
    auto it = windows_.find(w.n);
    if (it == windows_.end()) {
      if (supplemental) return;
      it = windows_.emplace(w.n, Partial{}).first;
    }
    emit(ctx, key_, window_start(w, ctx.window_spec()), encode_u64(it->second.sum),
         derive_lineage_id(ctx.stage_id(), w, key_, it->second.lineage));
    windows_.erase(it);
  }

 private:
  struct Partial {
    uint64_t sum = 0;
    LineageDigest lineage;
  };
  Key key_;
  std::map<uint64_t, Partial> windows_;
};

StageRegistry make_builtin() {
  StageRegistry r;
  r.add("identity", [](const FunctionRef&) { return std::make_unique<IdentityStage>(); });
  r.add("select", [](const FunctionRef& f) { return std::make_unique<SelectStage>(f); });
  r.add("word-group-count",
        [](const FunctionRef&) { return std::make_unique<WordGroupCountStage>(); });
  r.add("top-fraction-consumer",
        [](const FunctionRef& f) { return std::make_unique<TopFractionConsumer>(f); });
  r.add("window-join",
        [](const FunctionRef&) { return std::make_unique<WindowJoinStage>(); });
  r.add("window-sum",
        [](const FunctionRef& f) { return std::make_unique<WindowSumStage>(f); });
  return r;
}

}  // namespace

const StageRegistry& StageRegistry::builtin() {
  static const StageRegistry registry = make_builtin();
  return registry;
}

}  // namespace streamweave

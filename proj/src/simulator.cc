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

#include "streamweave/simulator.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <queue>
#include <random>
#include <set>
#include <tuple>
#include <variant>

#include "input_port.h"
#include <nlohmann/json.hpp>
#include "streamweave/partitioning.h"
#include "streamweave/stream_ops.h"
#include "streamweave/wire.h"

namespace streamweave {

CreditLink::PushResult CreditLink::push(bool unit) {
  if (!unit) return PushResult::kAccepted;
  if (credit_ == 0) return PushResult::kBlocked;
  --credit_;
  return PushResult::kAccepted;
}

void CreditLink::restore() {
  if (credit_ < capacity_) ++credit_;
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::kCompleted:
      return "completed";
    case Outcome::kTickBudgetExceeded:
      return "tick_budget_exceeded";
    case Outcome::kUnrecoverableStream:
      return "unrecoverable_stream";
  }
  return "unknown";
}

namespace {

double unit_interval(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct RawUnit {
  uint64_t key = 0;
  uint64_t ts = 0;
  uint64_t value = 0;
};

std::vector<RawUnit> read_unit_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StreamError("cannot open generator file: " + path);
  std::vector<RawUnit> out;
  RawUnit r;
  while (in >> r.key >> r.ts >> r.value) out.push_back(r);
  if (!in.eof()) throw StreamError("malformed generator file: " + path);
  return out;
}

std::vector<RawUnit> draw_units(const GeneratorSpec& g, WindowSpec spec,
                                std::mt19937_64& rng) {
  if (g.distribution == KeyDistribution::kFile) return read_unit_file(g.file);
  if (g.units > 0 && (g.key_space == 0 || g.windows == 0 || g.value_range == 0)) {
    throw StreamError("generator for " + g.stage +
                      ": key_space, windows and value_range must be >= 1");
  }
  std::vector<double> cdf;
  if (g.distribution == KeyDistribution::kZipf) {
    cdf.reserve(g.key_space);
    double total = 0;
    for (uint64_t r = 1; r <= g.key_space; ++r) {
      total += 1.0 / std::pow(static_cast<double>(r), g.zipf_exponent);
      cdf.push_back(total);
    }
  }
  std::vector<RawUnit> out;
  out.reserve(g.units);
  const unsigned __int128 span = static_cast<unsigned __int128>(g.windows) * spec.width;
  for (uint64_t i = 0; i < g.units; ++i) {
    RawUnit r;
    if (g.distribution == KeyDistribution::kZipf) {
      const double u = unit_interval(rng) * cdf.back();
      auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
      if (it == cdf.end()) --it;
      r.key = static_cast<uint64_t>(it - cdf.begin());
    } else {
      r.key = static_cast<uint64_t>(unit_interval(rng) * static_cast<double>(g.key_space));
    }
    r.ts = static_cast<uint64_t>(span * i / g.units);
    r.value = static_cast<uint64_t>(unit_interval(rng) * static_cast<double>(g.value_range));
    out.push_back(r);
  }
  return out;
}

}  // namespace

std::map<std::string, std::vector<std::vector<DataUnit>>> generate_source_units(
    const Scenario& s, uint64_t seed) {
  std::map<std::string, std::vector<std::vector<DataUnit>>> out;
  for (const auto& st : s.topology.stages) {
    if (s.topology.is_source(st)) out[st.name].resize(st.node_count);
  }
  // Per-(key, window) ordinals, per source stage.
  std::map<std::string, std::map<std::pair<uint64_t, uint64_t>, uint64_t>> ordinals;
  for (size_t gi = 0; gi < s.generators.size(); ++gi) {
    const GeneratorSpec& g = s.generators[gi];
    const StageDecl* st = s.topology.find_stage(g.stage);
    if (!st) throw StreamError("generator names unknown stage: " + g.stage);
    if (!s.topology.is_source(*st)) {
      throw StreamError("generator stage is not a source stage: " + g.stage);
    }
    std::mt19937_64 rng(mix64(seed) ^ mix64(0x5eedULL + gi));
    std::vector<RawUnit> raw = draw_units(g, s.window, rng);
    auto& nodes = out[st->name];
    auto& ords = ordinals[st->name];
    for (size_t i = 0; i < raw.size(); ++i) {
      const WindowIndex w = window_of(raw[i].ts, s.window);
      const Key key{raw[i].key};
      DataUnit u;
      u.key = key;
      u.timestamp = raw[i].ts;
      u.seq = derive_sequence_id(st->id, w, key, ords[{key.value, w.n}]++);
      u.payload = encode_u64(raw[i].value);
      nodes[i % nodes.size()].push_back(std::move(u));
    }
  }
  for (auto& [name, nodes] : out) {
    for (auto& units : nodes) {
      std::stable_sort(units.begin(), units.end(),
                       [](const DataUnit& a, const DataUnit& b) {
                         return a.timestamp < b.timestamp;
                       });
    }
  }
  return out;
}

std::optional<uint64_t> last_window_of(
    const std::map<std::string, std::vector<std::vector<DataUnit>>>& units,
    WindowSpec spec) {
  std::optional<uint64_t> last;
  for (const auto& [name, nodes] : units) {
    for (const auto& list : nodes) {
      for (const auto& u : list) {
        const uint64_t w = window_of(u.timestamp, spec).n;
        if (!last || w > *last) last = w;
      }
    }
  }
  return last;
}

Network build_network(const Topology& t) {
  Network net;
  for (StageId sid : t.topological_order()) {
    const StageDecl* st = t.find_stage(sid);
    for (uint32_t i = 0; i < st->node_count; ++i) {
      const uint32_t id = static_cast<uint32_t>(net.nodes.size());
      net.nodes.push_back({id, sid, i});
      net.stage_nodes[sid].push_back(id);
    }
  }
  for (uint32_t s = 0; s < t.streams.size(); ++s) {
    const StreamDecl& sd = t.streams[s];
    const auto& senders = net.stage_nodes[sd.producer];
    const auto& receivers = net.stage_nodes[sd.consumer];
    for (uint32_t sp = 0; sp < senders.size(); ++sp) {
      for (uint32_t rp = 0; rp < receivers.size(); ++rp) {
        const uint32_t id = static_cast<uint32_t>(net.connections.size());
        net.connections.push_back({id, s, senders[sp], receivers[rp], sp, rp});
      }
    }
  }
  net.control_node = static_cast<uint32_t>(net.nodes.size());
  return net;
}

namespace {

using detail::InputPort;
using detail::kNoWindow;
using detail::PortSink;
using detail::SourcePort;
using json = nlohmann::json;

enum class EventKind {
  kDeliver,
  kFrameAck,
  kCloseAck,
  kCancel,
  kWake,
  kFail,
  kToControl,
  kFromControl,
  kReportTick,
  kEvaluate,
  kSplitTimer,
};

using ToControl = std::variant<HistogramMsg, AckMsg, ReopenMsg, ProgressReport>;

struct Event {
  uint64_t time = 0;
  uint64_t ordinal = 0;
  EventKind kind = EventKind::kWake;
  uint32_t target = 0;  // connection, node or partition group
  uint64_t window = 0;
  uint32_t epoch = 0;
  bool unit = false;
  bool consumed = false;
  bool transport = true;  // frame ack; false for a progress-only notice
  std::variant<std::monostate, Frame, ToControl, ControlOutput> payload;
};

struct Later {
  bool operator()(const Event& a, const Event& b) const {
    return std::tie(a.time, a.ordinal) > std::tie(b.time, b.ordinal);
  }
};

enum class NodeStatus { kAlive, kCrashed, kEvicted };

std::string status_name(NodeStatus s) {
  switch (s) {
    case NodeStatus::kAlive:
      return "alive";
    case NodeStatus::kCrashed:
      return "crashed";
    case NodeStatus::kEvicted:
      return "evicted";
  }
  return "unknown";
}

struct QueuedFrame {
  Frame frame;
  uint64_t window = 0;
  bool resend = false;
};

struct Conn {
  ConnectionSpec spec;
  CreditLink link;
  std::deque<QueuedFrame> queue;
  bool dead = false;  // receiver abandoned by the sender
  uint64_t frames_acked = 0;
  uint64_t progress_acked = 0;
  uint64_t closes_acked = 0;
  uint32_t in_flight_units = 0;
  uint32_t port = 0;    // receiver-side input index
  uint32_t output = 0;  // sender-side output index
  LinkReport report;
};

struct OutWindow {
  std::vector<DataUnit> units;
  std::vector<int32_t> assigned;  // receiver position, -1 when not sent
  size_t dispatched = 0;
  bool closed = false;        // the producer is done with the window
  bool close_queued = false;  // WINDOW_END queued to every receiver
  std::map<uint32_t, uint32_t> closed_epoch;
  std::map<uint32_t, uint32_t> close_acked;
  std::set<uint32_t> cancelled;
  std::vector<uint64_t> counts;  // per bucket
};

struct Output {
  uint32_t stream = 0;
  StreamOp op = StreamOp::kNone;
  std::vector<uint32_t> conns;  // by receiver position
  uint32_t bucket_count = 1;
  std::set<uint32_t> dead_pos;
  std::map<uint64_t, OutWindow> windows;
  std::map<uint64_t, std::vector<uint32_t>> owners;  // window -> bucket owners
  std::set<uint64_t> hist_sent;
  uint32_t rr = 0;
  bool end_sent = false;
  uint64_t buffered = 0;
  uint64_t peak = 0;
  std::optional<uint64_t> last_send_ts;  // send_packet only
};

class Sim;

class PortAdapter final : public PortSink {
 public:
  PortAdapter(Sim& sim, uint32_t node, std::vector<uint32_t> conns)
      : sim_(sim), node_(node), conns_(std::move(conns)) {}
  void ack_frame(uint32_t conn, bool unit, bool consumed) override;
  void held_consumed(uint32_t conn) override;
  void close_ack(uint32_t conn, uint64_t window, uint32_t epoch) override;
  void cancel(uint32_t conn, uint64_t window) override;
  void reopened(uint64_t window) override;

 private:
  Sim& sim_;
  uint32_t node_;
  std::vector<uint32_t> conns_;
};

class Node final : public StageContext {
 public:
  Node(Sim& sim, const NodeSpec& spec, const StageDecl& stage)
      : sim_(sim), id(spec.id), index(spec.index), stage(&stage), seqs(stage.id) {}

  StageId stage_id() const override { return stage->id; }
  uint32_t node_index() const override { return index; }
  WindowSpec window_spec() const override;
  const FunctionRef& function() const override { return stage->function; }
  WindowIndex current_window() const override { return current; }
  std::vector<std::string> input_streams() const override { return stage->input_streams; }
  std::vector<std::string> output_streams() const override {
    return stage->output_streams;
  }
  StreamHandle get_stream_handle(std::string_view name, HandleDirection direction) override;
  Packet get_packet(const StreamHandle& h) override;
  void send_packet(const StreamHandle& h, Key key, uint64_t timestamp,
                   Payload payload) override;
  void send_packet_with_id(const StreamHandle& h, Key key, uint64_t timestamp,
                           Payload payload, SequenceId seq) override;
  void stop_reading(const StreamHandle& h) override;
  void notify_arrival(const StreamHandle& h,
                      std::function<void(StageContext&)> callback) override;
  void emit_result(const DataUnit& unit) override;

  bool alive() const { return status == NodeStatus::kAlive; }
  bool producer_ended() const;
  uint64_t bounded_upto() const;

  Sim& sim_;
  uint32_t id;
  uint32_t index;
  const StageDecl* stage;
  NodeStatus status = NodeStatus::kAlive;
  std::unique_ptr<StageFunction> fn;
  std::optional<SourcePort> source;
  std::vector<std::unique_ptr<PortAdapter>> adapters;
  std::vector<std::unique_ptr<InputPort>> ports;
  std::vector<uint32_t> port_streams;  // stream index per input
  std::vector<Output> outputs;
  std::map<uint32_t, std::function<void(StageContext&)>> callbacks;
  double rate = 8.0;
  double tokens = 8.0;
  uint64_t refill_at = 0;
  bool throttled = false;
  uint32_t epoch = 0;
  uint64_t committed_upto = 0;
  uint64_t closed_upto = 0;  // windows below are closed by the producer
  std::map<uint64_t, uint32_t> acked;
  WindowIndex current{0};
  SequenceAllocator seqs;
  std::optional<uint64_t> wake_at;
  NodeReport report;
};

class Sim {
 public:
  Sim(const Scenario& sc, uint64_t seed, const StageRegistry& registry);
  SimReport run();

  // Used by nodes and port adapters.
  void schedule(Event e);
  void schedule_wake(Node& n, uint64_t at);
  void send_to_control(ToControl msg);
  bool take_token(Node& n);
  void emit(Node& n, uint32_t output, DataUnit u);
  void record_accepted(Node& n, uint32_t input, const DataUnit& u, uint32_t epoch);
  void record_result(Node& n, const DataUnit& u);
  void trace(json j);

  uint64_t now() const { return now_; }
  const SimParams& params() const { return p_; }
  WindowSpec spec() const { return sc_.window; }
  Node& node(uint32_t id) { return *nodes_[id]; }
  Conn& conn(uint32_t id) { return conns_[id]; }

 private:
  void handle(Event& e);
  void on_deliver(Event& e);
  void on_frame_ack(const Event& e);
  void on_close_ack(const Event& e);
  void on_cancel(const Event& e);
  void on_fail(const Event& e);
  void on_to_control(Event& e);
  void on_from_control(Event& e);
  void on_report_tick();
  void deliver_control(std::vector<Outgoing> outs);

  void run_node(Node& n);
  void post_wake(Node& n);
  void close_window(Node& n, uint64_t w);
  void send_hist(Node& n, Output& out, uint64_t target, const std::vector<uint64_t>& counts);
  void try_dispatch(Node& n, Output& out, uint64_t w, bool allow_late);
  int32_t route(Output& out, uint64_t w, const DataUnit& u, const OutWindow& win);
  void queue_window_end(Node& n, Output& out, uint64_t w, OutWindow& win);
  void enqueue(Conn& c, Frame f, uint64_t w, bool resend);
  void drop_queue(Conn& c);
  void pump(Conn& c);
  bool supplemental_quiet(const Node& n, uint64_t w) const;
  bool node_settled(const Node& n, uint64_t w) const;
  void try_ack(Node& n);
  bool finished(const Node& n) const;
  bool done() const;

  void on_split(Node& n, const SplitDecision& d);
  void on_verdict(Node& n, const FailureVerdict& v);
  void on_commit(Node& n, uint64_t w);

  SimReport build_report();

  const Scenario& sc_;
  uint64_t seed_;
  SimParams p_;
  Network net_;
  std::optional<uint64_t> last_;
  std::vector<std::unique_ptr<Node>> nodes_;
  std::vector<Conn> conns_;
  std::unique_ptr<ControlPlane> control_;
  std::priority_queue<Event, std::vector<Event>, Later> events_;
  uint64_t now_ = 0;
  uint64_t ordinal_ = 0;
  uint64_t event_count_ = 0;
  SimReport report_;
};

// ---------------------------------------------------------------------------
// Port adapter

void PortAdapter::ack_frame(uint32_t conn, bool unit, bool consumed) {
  Event e;
  e.time = sim_.now() + sim_.params().latency;
  e.kind = EventKind::kFrameAck;
  e.target = conns_[conn];
  e.unit = unit;
  e.consumed = consumed;
  sim_.schedule(std::move(e));
}

void PortAdapter::held_consumed(uint32_t conn) {
  Event e;
  e.time = sim_.now() + sim_.params().latency;
  e.kind = EventKind::kFrameAck;
  e.target = conns_[conn];
  e.consumed = true;
  e.transport = false;
  sim_.schedule(std::move(e));
}

void PortAdapter::close_ack(uint32_t conn, uint64_t window, uint32_t epoch) {
  Event e;
  e.time = sim_.now() + sim_.params().latency;
  e.kind = EventKind::kCloseAck;
  e.target = conns_[conn];
  e.window = window;
  e.epoch = epoch;
  sim_.schedule(std::move(e));
}

void PortAdapter::cancel(uint32_t conn, uint64_t window) {
  Event e;
  e.time = sim_.now() + sim_.params().latency;
  e.kind = EventKind::kCancel;
  e.target = conns_[conn];
  e.window = window;
  sim_.schedule(std::move(e));
}

void PortAdapter::reopened(uint64_t window) {
  Node& n = sim_.node(node_);
  n.acked.erase(window);
  sim_.send_to_control(ReopenMsg{node_, window});
}

// ---------------------------------------------------------------------------
// Node as stage context

WindowSpec Node::window_spec() const { return sim_.spec(); }

StreamHandle Node::get_stream_handle(std::string_view name, HandleDirection direction) {
  if (direction == HandleDirection::kInput) {
    if (source && name == kSourceStream) {
      return {std::string(name), direction, 0};
    }
    const auto& ins = stage->input_streams;
    auto it = std::find(ins.begin(), ins.end(), name);
    if (it == ins.end()) {
      throw StreamError("stage " + stage->name + " has no input stream '" +
                        std::string(name) + "'");
    }
    return {std::string(name), direction, static_cast<uint32_t>(it - ins.begin())};
  }
  const auto& outs = stage->output_streams;
  auto it = std::find(outs.begin(), outs.end(), name);
  if (it == outs.end()) {
    throw StreamError("stage " + stage->name + " has no output stream '" +
                      std::string(name) + "'");
  }
  return {std::string(name), direction, static_cast<uint32_t>(it - outs.begin())};
}

Packet Node::get_packet(const StreamHandle& h) {
  if (h.direction != HandleDirection::kInput) {
    throw StreamError("get_packet on output handle '" + h.stream + "'");
  }
  auto take = [this] { return sim_.take_token(*this); };
  if (source) {
    Packet p = source->next(take);
    if (auto* u = std::get_if<DataUnit>(&p)) {
      current = window_of(u->timestamp, sim_.spec());
      ++report.units_consumed;
    } else if (auto* b = std::get_if<WindowBoundary>(&p)) {
      current = b->window;
    }
    return p;
  }
  if (h.index >= ports.size()) throw StreamError("invalid input handle '" + h.stream + "'");
  InputPort& port = *ports[h.index];
  Packet p = port.next(take);
  if (auto* u = std::get_if<DataUnit>(&p)) {
    current = window_of(u->timestamp, sim_.spec());
    ++report.units_consumed;
    sim_.record_accepted(*this, h.index, *u, port.last_epoch());
  } else if (auto* b = std::get_if<WindowBoundary>(&p)) {
    current = b->window;
  }
  return p;
}

void Node::send_packet(const StreamHandle& h, Key key, uint64_t timestamp,
                       Payload payload) {
  if (h.direction == HandleDirection::kOutput && h.index < outputs.size()) {
    auto& last = outputs[h.index].last_send_ts;
    if (last && timestamp < *last) {
      throw StreamError("timestamp regression on '" + h.stream + "': " +
                        std::to_string(timestamp) + " after " + std::to_string(*last));
    }
    last = timestamp;
  }
  const SequenceId seq = seqs.next(key, window_of(timestamp, sim_.spec()));
  send_packet_with_id(h, key, timestamp, std::move(payload), seq);
}

void Node::send_packet_with_id(const StreamHandle& h, Key key, uint64_t timestamp,
                               Payload payload, SequenceId seq) {
  if (h.direction != HandleDirection::kOutput || h.index >= outputs.size()) {
    throw StreamError("send_packet on invalid output handle '" + h.stream + "'");
  }
  sim_.emit(*this, h.index, DataUnit{key, timestamp, seq, std::move(payload)});
}

void Node::stop_reading(const StreamHandle& h) {
  if (h.direction != HandleDirection::kInput || source) return;
  if (h.index < ports.size()) ports[h.index]->cancel_current();
}

void Node::notify_arrival(const StreamHandle& h,
                          std::function<void(StageContext&)> callback) {
  callbacks[h.index] = std::move(callback);
}

void Node::emit_result(const DataUnit& unit) { sim_.record_result(*this, unit); }

bool Node::producer_ended() const {
  if (source) return source->eos_delivered();
  for (const auto& p : ports) {
    if (!p->eos_delivered()) return false;
  }
  return true;
}

uint64_t Node::bounded_upto() const {
  if (source) return source->bounded_upto();
  uint64_t b = kNoWindow;
  for (const auto& p : ports) b = std::min(b, p->bounded_upto());
  return b;
}

// ---------------------------------------------------------------------------
// Simulator

Sim::Sim(const Scenario& sc, uint64_t seed, const StageRegistry& registry)
    : sc_(sc), seed_(seed), p_(sc.params) {
  if (auto v = validate_topology(sc.topology); !v.empty()) {
    std::string msg = "invalid topology:";
    for (const auto& x : v) msg += " [" + x.subject + ": " + x.message + "]";
    throw StreamError(msg);
  }
  if (sc.window.width == 0) throw StreamError("window width must be >= 1");
  if (p_.credits == 0) throw StreamError("credits must be >= 1");
  if (p_.bucket_multiplier == 0) throw StreamError("bucket_multiplier must be >= 1");
  if (p_.node_rate <= 0) throw StreamError("node_rate must be > 0");
  if (p_.detector.report_interval == 0) throw StreamError("report_interval must be >= 1");
  for (const auto& st : sc.topology.stages) {
    if (!registry.contains(st.function.name)) {
      throw StreamError("stage " + st.name + ": unknown stage function '" +
                        st.function.name + "'");
    }
  }
  auto check_target = [&](const std::string& stage, uint32_t index, const char* what) {
    const StageDecl* st = sc.topology.find_stage(stage);
    if (!st) throw StreamError(std::string(what) + " names unknown stage: " + stage);
    if (index >= st->node_count) {
      throw StreamError(std::string(what) + " names unknown node " + stage + "[" +
                        std::to_string(index) + "]");
    }
    return st;
  };
  for (const auto& f : sc.failures) check_target(f.stage, f.node_index, "failure");
  for (const auto& r : sc.rates) {
    check_target(r.stage, r.node_index, "rate override");
    if (r.rate <= 0) throw StreamError("rate override must be > 0");
  }

  auto units = generate_source_units(sc, seed);
  last_ = last_window_of(units, sc.window);
  net_ = build_network(sc.topology);

  for (const auto& ns : net_.nodes) {
    const StageDecl& st = *sc.topology.find_stage(ns.stage);
    auto n = std::make_unique<Node>(*this, ns, st);
    n->rate = p_.node_rate;
    for (const auto& r : sc.rates) {
      if (r.stage == st.name && r.node_index == ns.index) n->rate = r.rate;
    }
    n->tokens = std::max(n->rate, 1.0);
    n->report.id = ns.id;
    n->report.stage = st.name;
    n->report.index = ns.index;
    if (sc.topology.is_source(st)) {
      n->source.emplace(std::move(units[st.name][ns.index]), sc.window, last_);
    }
    nodes_.push_back(std::move(n));
  }

  // Receiver ports and sender outputs.
  std::map<std::pair<uint32_t, uint32_t>, std::vector<uint32_t>> port_conns;
  for (const auto& cs : net_.connections) {
    Conn c{cs, CreditLink(p_.credits), {}, false, 0, 0, 0, 0, 0, 0, {}};
    const StreamDecl& sd = sc.topology.streams[cs.stream];
    const StageDecl& cons = *sc.topology.find_stage(sd.consumer);
    const StageDecl& prod = *sc.topology.find_stage(sd.producer);
    c.port = static_cast<uint32_t>(
        std::find(cons.input_streams.begin(), cons.input_streams.end(), sd.name) -
        cons.input_streams.begin());
    c.output = static_cast<uint32_t>(
        std::find(prod.output_streams.begin(), prod.output_streams.end(), sd.name) -
        prod.output_streams.begin());
    c.report.conn = cs.id;
    c.report.stream = sd.name;
    c.report.sender = cs.sender;
    c.report.receiver = cs.receiver;
    auto& pc = port_conns[{cs.receiver, c.port}];
    if (pc.size() <= cs.sender_pos) pc.resize(cs.sender_pos + 1);
    pc[cs.sender_pos] = cs.id;
    conns_.push_back(std::move(c));
  }
  std::map<std::string, uint32_t> stream_index;
  for (uint32_t s = 0; s < sc.topology.streams.size(); ++s) {
    stream_index[sc.topology.streams[s].name] = s;
  }
  for (auto& n : nodes_) {
    for (uint32_t i = 0; i < n->stage->input_streams.size(); ++i) {
      const uint32_t s = stream_index.at(n->stage->input_streams[i]);
      const StreamDecl& sd = sc.topology.streams[s];
      auto conns = port_conns[{n->id, i}];
      auto adapter = std::make_unique<PortAdapter>(*this, n->id, conns);
      n->ports.push_back(std::make_unique<InputPort>(
          sd.op, static_cast<uint32_t>(conns.size()), last_, adapter.get()));
      n->adapters.push_back(std::move(adapter));
      n->port_streams.push_back(s);
    }
    for (const auto& name : n->stage->output_streams) {
      const uint32_t s = stream_index.at(name);
      const StreamDecl& sd = sc.topology.streams[s];
      Output out;
      out.stream = s;
      out.op = sd.op;
      const uint32_t receivers =
          static_cast<uint32_t>(net_.stage_nodes.at(sd.consumer).size());
      out.bucket_count = bucket_count_for(receivers, p_.bucket_multiplier);
      out.conns.assign(receivers, 0);
      n->outputs.push_back(std::move(out));
    }
  }
  for (const auto& c : conns_) {
    nodes_[c.spec.sender]->outputs[c.output].conns[c.spec.receiver_pos] = c.spec.id;
  }

  std::vector<ControlStream> cstreams;
  for (uint32_t s = 0; s < sc.topology.streams.size(); ++s) {
    const StreamDecl& sd = sc.topology.streams[s];
    ControlStream cs;
    cs.name = sd.name;
    cs.op = sd.op;
    cs.consumer = sd.consumer;
    cs.senders = net_.stage_nodes.at(sd.producer);
    cs.receivers = net_.stage_nodes.at(sd.consumer);
    cs.bucket_count =
        bucket_count_for(static_cast<uint32_t>(cs.receivers.size()), p_.bucket_multiplier);
    cs.partition_group = sd.consumer;
    cstreams.push_back(std::move(cs));
    report_.stream_names.push_back(sd.name);
  }
  std::vector<uint32_t> ids;
  for (const auto& ns : net_.nodes) ids.push_back(ns.id);
  control_ = std::make_unique<ControlPlane>(std::move(cstreams), std::move(ids), last_,
                                            ControlConfig{p_.detector, p_.split_timeout});

  for (auto& n : nodes_) n->fn = registry.create(n->stage->function);
}

void Sim::schedule(Event e) {
  e.ordinal = ordinal_++;
  events_.push(std::move(e));
}

void Sim::schedule_wake(Node& n, uint64_t at) {
  if (!n.alive()) return;
  if (n.wake_at && *n.wake_at <= at && *n.wake_at >= now_) return;
  n.wake_at = at;
  Event e;
  e.time = at;
  e.kind = EventKind::kWake;
  e.target = n.id;
  schedule(std::move(e));
}

void Sim::send_to_control(ToControl msg) {
  Event e;
  e.time = now_ + p_.latency;
  e.kind = EventKind::kToControl;
  e.payload = std::move(msg);
  schedule(std::move(e));
}

bool Sim::take_token(Node& n) {
  if (n.tokens >= 1.0) {
    n.tokens -= 1.0;
    return true;
  }
  n.throttled = true;
  return false;
}

void Sim::trace(json j) {
  if (!p_.trace) return;
  json line;
  line["t"] = now_;
  line.update(j);
  report_.trace.push_back(line.dump());
}

void Sim::record_accepted(Node& n, uint32_t input, const DataUnit& u, uint32_t epoch) {
  report_.accepted.push_back({n.port_streams[input], window_of(u.timestamp, sc_.window).n,
                              n.id, epoch, u, now_});
}

void Sim::record_result(Node& n, const DataUnit& u) {
  ++n.report.results;
  report_.results.push_back({n.id, n.stage->id, u, now_});
}

void Sim::emit(Node& n, uint32_t o, DataUnit u) {
  Output& out = n.outputs[o];
  const uint64_t w = window_of(u.timestamp, sc_.window).n;
  ++n.report.units_emitted;
  if (w < n.committed_upto || !last_ || w > *last_) return;
  OutWindow& win = out.windows[w];
  if (out.op == StreamOp::kGroup) {
    if (win.counts.empty()) win.counts.assign(out.bucket_count, 0);
    if (!win.closed) ++win.counts[bucket_of(u.key, out.bucket_count).index];
  }
  win.units.push_back(std::move(u));
  win.assigned.push_back(-1);
  out.peak = std::max(out.peak, ++out.buffered);
  if (out.op == StreamOp::kGroup && w == 0 && !out.hist_sent.contains(0) &&
      win.units.size() >= p_.presend_threshold) {
    send_hist(n, out, 0, win.counts);
  }
  try_dispatch(n, out, w, false);
}

void Sim::send_hist(Node& n, Output& out, uint64_t target,
                    const std::vector<uint64_t>& counts) {
  if (!out.hist_sent.insert(target).second) return;
  HistogramMsg m{out.stream, target, n.id, counts};
  if (m.counts.empty()) m.counts.assign(out.bucket_count, 0);
  trace({{"ev", "hist"}, {"node", n.id}, {"stream", out.stream}, {"window", target}});
  send_to_control(std::move(m));
}

int32_t Sim::route(Output& out, uint64_t w, const DataUnit& u, const OutWindow& win) {
  auto usable = [&](uint32_t p) {
    return !out.dead_pos.contains(p) && !win.cancelled.contains(p);
  };
  if (out.op == StreamOp::kGroup) {
    const auto& owners = out.owners.at(w);
    const uint32_t p = owners[bucket_of(u.key, out.bucket_count).index];
    return usable(p) ? static_cast<int32_t>(p) : -1;
  }
  const uint32_t l = static_cast<uint32_t>(out.conns.size());
  for (uint32_t tries = 0; tries < l; ++tries) {
    const uint32_t p = out.rr++ % l;
    if (usable(p)) return static_cast<int32_t>(p);
  }
  return -1;
}

void Sim::try_dispatch(Node& n, Output& out, uint64_t w, bool allow_late) {
  auto it = out.windows.find(w);
  if (it == out.windows.end()) return;
  OutWindow& win = it->second;
  if (win.dispatched < win.units.size()) {
    if (out.op == StreamOp::kGroup && !out.owners.contains(w)) return;
    if (is_sort(out.op) && !win.closed) return;
    const bool late = win.close_queued;
    if (late && !allow_late) return;
    if (is_sort(out.op)) {
      // Stable sort of the undispatched tail; assignments there are all -1.
      std::vector<DataUnit> tail(std::make_move_iterator(win.units.begin() + win.dispatched),
                                 std::make_move_iterator(win.units.end()));
      local_sort_window(tail, direction_of(out.op));
      std::move(tail.begin(), tail.end(), win.units.begin() + win.dispatched);
    }
    for (size_t i = win.dispatched; i < win.units.size(); ++i) {
      const int32_t pos = route(out, w, win.units[i], win);
      win.assigned[i] = pos;
      if (pos >= 0) {
        enqueue(conns_[out.conns[pos]], Frame::of_unit(win.units[i]), w, late);
      }
    }
    win.dispatched = win.units.size();
    if (late) {
      queue_window_end(n, out, w, win);
      return;
    }
  }
  if (win.closed && !win.close_queued) {
    win.close_queued = true;
    queue_window_end(n, out, w, win);
  }
}

void Sim::queue_window_end(Node& n, Output& out, uint64_t w, OutWindow& win) {
  for (uint32_t p = 0; p < out.conns.size(); ++p) {
    if (out.dead_pos.contains(p) || win.cancelled.contains(p)) continue;
    enqueue(conns_[out.conns[p]], Frame::window_end(w), w, false);
    win.closed_epoch[p] = n.epoch;
    win.close_acked.erase(p);
  }
}

void Sim::enqueue(Conn& c, Frame f, uint64_t w, bool resend) {
  if (c.dead) return;
  c.queue.push_back({std::move(f), w, resend});
  pump(c);
}

void Sim::drop_queue(Conn& c) {
  for (const auto& q : c.queue) {
    if (q.frame.is_unit()) ++c.report.units_unsent_dropped;
  }
  c.queue.clear();
}

void Sim::pump(Conn& c) {
  if (c.dead || !nodes_[c.spec.sender]->alive()) return;
  while (!c.queue.empty()) {
    QueuedFrame& q = c.queue.front();
    const bool unit = q.frame.is_unit();
    if (c.link.push(unit) == CreditLink::PushResult::kBlocked) break;
    ++c.report.frames_sent;
    if (unit) {
      ++c.report.units_sent;
      if (q.resend) ++c.report.units_resent;
      ++c.in_flight_units;
      c.report.max_in_flight = std::max(c.report.max_in_flight, c.link.in_flight());
    } else {
      ++c.report.markers_sent;
    }
    if (p_.trace) {
      const char* kind = unit                                      ? "unit"
                         : q.frame.kind == FrameKind::kWindowEnd ? "window_end"
                         : q.frame.kind == FrameKind::kEpoch     ? "epoch"
                                                                 : "end";
      trace({{"ev", "send"},
             {"conn", c.spec.id},
             {"kind", kind},
             {"frame", to_hex(encode_frame(q.frame))}});
    }
    Event e;
    e.time = now_ + p_.latency;
    e.kind = EventKind::kDeliver;
    e.target = c.spec.id;
    e.unit = unit;
    e.payload = std::move(q.frame);
    schedule(std::move(e));
    c.queue.pop_front();
  }
}

void Sim::on_deliver(Event& e) {
  Conn& c = conns_[e.target];
  Frame& f = std::get<Frame>(e.payload);
  const bool unit = f.is_unit();
  if (unit) --c.in_flight_units;
  Node& snd = *nodes_[c.spec.sender];
  Node& rcv = *nodes_[c.spec.receiver];
  if (!snd.alive()) {
    if (unit) ++c.report.units_dropped_in_flight;
    trace({{"ev", "drop_in_flight"}, {"conn", c.spec.id}});
    return;
  }
  if (!rcv.alive()) {
    if (unit) ++c.report.units_dropped_at_receiver;
    trace({{"ev", "drop_at_receiver"}, {"conn", c.spec.id}});
    return;
  }
  ++c.report.frames_delivered;
  if (unit) ++c.report.units_delivered;
  InputPort& port = *rcv.ports[c.port];
  const uint32_t local = c.spec.sender_pos;
  switch (f.kind) {
    case FrameKind::kUnit:
      port.on_unit(local, std::move(f.unit), sc_.window);
      break;
    case FrameKind::kWindowEnd:
      port.on_window_end(local, f.window);
      break;
    case FrameKind::kEpoch:
      port.on_epoch(local, f.epoch);
      break;
    case FrameKind::kEnd:
      port.on_end(local);
      break;
  }
  schedule_wake(rcv, now_);
}

void Sim::on_frame_ack(const Event& e) {
  Conn& c = conns_[e.target];
  if (!nodes_[c.spec.sender]->alive()) return;
  if (e.transport) ++c.frames_acked;
  if (e.consumed) ++c.progress_acked;
  if (e.unit) c.link.restore();
  pump(c);
}

void Sim::on_close_ack(const Event& e) {
  Conn& c = conns_[e.target];
  Node& snd = *nodes_[c.spec.sender];
  if (!snd.alive()) return;
  ++c.closes_acked;
  Output& out = snd.outputs[c.output];
  auto it = out.windows.find(e.window);
  if (it == out.windows.end()) return;
  uint32_t& acked = it->second.close_acked[c.spec.receiver_pos];
  acked = std::max(acked, e.epoch);
  schedule_wake(snd, now_);
}

void Sim::on_cancel(const Event& e) {
  Conn& c = conns_[e.target];
  Node& snd = *nodes_[c.spec.sender];
  if (!snd.alive()) return;
  Output& out = snd.outputs[c.output];
  if (e.window < snd.committed_upto) return;
  out.windows[e.window].cancelled.insert(c.spec.receiver_pos);
  std::deque<QueuedFrame> kept;
  for (auto& q : c.queue) {
    if (q.window == e.window &&
        (q.frame.is_unit() || q.frame.kind == FrameKind::kWindowEnd)) {
      if (q.frame.is_unit()) ++c.report.units_unsent_dropped;
      continue;
    }
    kept.push_back(std::move(q));
  }
  c.queue.swap(kept);
  trace({{"ev", "cancel"}, {"conn", c.spec.id}, {"window", e.window}});
  schedule_wake(snd, now_);
}

void Sim::on_fail(const Event& e) {
  Node& n = *nodes_[e.target];
  if (!n.alive()) return;
  n.status = NodeStatus::kCrashed;
  report_.failures.push_back({now_, n.id, "crash"});
  trace({{"ev", "crash"}, {"node", n.id}});
}

void Sim::on_to_control(Event& e) {
  auto& msg = std::get<ToControl>(e.payload);
  std::vector<Outgoing> outs;
  if (auto* h = std::get_if<HistogramMsg>(&msg)) {
    outs = control_->on_histogram(now_, *h);
  } else if (auto* a = std::get_if<AckMsg>(&msg)) {
    trace({{"ev", "ack"}, {"node", a->node}, {"window", a->window}, {"epoch", a->epoch}});
    outs = control_->on_ack(now_, *a);
  } else if (auto* r = std::get_if<ReopenMsg>(&msg)) {
    trace({{"ev", "reopen"}, {"node", r->node}, {"window", r->window}});
    outs = control_->on_reopen(*r);
  } else if (auto* pr = std::get_if<ProgressReport>(&msg)) {
    control_->on_progress(*pr);
  }
  deliver_control(std::move(outs));
}

void Sim::deliver_control(std::vector<Outgoing> outs) {
  for (auto& o : outs) {
    if (auto* v = std::get_if<FailureVerdict>(&o.message)) {
      Node& f = *nodes_[v->failed_node];
      if (f.alive()) {
        f.status = NodeStatus::kEvicted;
        report_.failures.push_back({now_, f.id, "evicted"});
      }
      trace({{"ev", "verdict"},
             {"node", v->failed_node},
             {"epoch", v->epoch},
             {"committed_upto", v->committed_upto}});
    } else if (auto* d = std::get_if<SplitDecision>(&o.message)) {
      trace({{"ev", "split"},
             {"stream", d->stream},
             {"window", d->window},
             {"partial", d->partial}});
    } else if (auto* c = std::get_if<CommitMsg>(&o.message)) {
      trace({{"ev", "commit"}, {"window", c->window}});
    }
    for (uint32_t dest : o.destinations) {
      Event e;
      e.time = now_ + p_.latency;
      e.kind = EventKind::kFromControl;
      e.target = dest;
      e.payload = o.message;
      schedule(std::move(e));
    }
  }
  for (const auto& t : control_->take_timer_requests()) {
    Event e;
    e.time = t.at;
    e.kind = EventKind::kSplitTimer;
    e.target = t.group;
    e.window = t.window;
    schedule(std::move(e));
  }
}

void Sim::on_from_control(Event& e) {
  Node& n = *nodes_[e.target];
  if (!n.alive()) return;
  auto& msg = std::get<ControlOutput>(e.payload);
  if (auto* d = std::get_if<SplitDecision>(&msg)) {
    on_split(n, *d);
  } else if (auto* v = std::get_if<FailureVerdict>(&msg)) {
    on_verdict(n, *v);
  } else if (auto* c = std::get_if<CommitMsg>(&msg)) {
    on_commit(n, c->window);
  }
  schedule_wake(n, now_);
}

void Sim::on_split(Node& n, const SplitDecision& d) {
  if (d.window < n.committed_upto) return;
  for (auto& out : n.outputs) {
    if (out.stream != d.stream) continue;
    out.owners[d.window] = d.allocation.owner_table();
    try_dispatch(n, out, d.window, false);
  }
}

void Sim::on_verdict(Node& n, const FailureVerdict& v) {
  n.epoch = std::max(n.epoch, v.epoch);
  for (uint32_t i = 0; i < n.ports.size(); ++i) {
    InputPort& port = *n.ports[i];
    const StreamDecl& sd = sc_.topology.streams[n.port_streams[i]];
    const auto& senders = net_.stage_nodes.at(sd.producer);
    for (uint32_t sp = 0; sp < senders.size(); ++sp) {
      if (senders[sp] == v.failed_node) port.set_dead(sp);
    }
    port.require_epoch(v.committed_upto, v.epoch);
  }
  for (auto& out : n.outputs) {
    std::optional<uint32_t> failed_pos;
    for (uint32_t p = 0; p < out.conns.size(); ++p) {
      if (conns_[out.conns[p]].spec.receiver == v.failed_node) failed_pos = p;
    }
    if (failed_pos) {
      out.dead_pos.insert(*failed_pos);
      Conn& dc = conns_[out.conns[*failed_pos]];
      drop_queue(dc);
      dc.dead = true;
    }
    for (uint32_t p = 0; p < out.conns.size(); ++p) {
      if (!out.dead_pos.contains(p)) {
        enqueue(conns_[out.conns[p]], Frame::epoch_marker(v.epoch), 0, false);
      }
    }
    if (auto a = v.allocations.find(out.stream); a != v.allocations.end()) {
      for (const auto& [w, alloc] : a->second) {
        if (w >= n.committed_upto) out.owners[w] = alloc.owner_table();
      }
    }
    for (auto& [w, win] : out.windows) {
      if (failed_pos) {
        for (size_t i = 0; i < win.dispatched; ++i) {
          if (win.assigned[i] != static_cast<int32_t>(*failed_pos)) continue;
          if (out.op == StreamOp::kGroup && !out.owners.contains(w)) continue;
          const int32_t pos = route(out, w, win.units[i], win);
          win.assigned[i] = pos;
          if (pos >= 0) enqueue(conns_[out.conns[pos]], Frame::of_unit(win.units[i]), w, true);
        }
      }
      if (win.close_queued) queue_window_end(n, out, w, win);
    }
    if (out.end_sent) {
      for (uint32_t p = 0; p < out.conns.size(); ++p) {
        if (!out.dead_pos.contains(p)) {
          enqueue(conns_[out.conns[p]], Frame::end(), kEndWindow, false);
        }
      }
    }
  }
}

void Sim::on_commit(Node& n, uint64_t w) {
  for (auto& port : n.ports) port->commit(w);
  for (auto& out : n.outputs) {
    auto it = out.windows.find(w);
    if (it != out.windows.end()) {
      out.buffered -= it->second.units.size();
      out.windows.erase(it);
    }
    out.owners.erase(w);
  }
  n.committed_upto = std::max(n.committed_upto, w + 1);
  n.acked.erase(w);
}

void Sim::on_report_tick() {
  for (auto& n : nodes_) {
    if (!n->alive()) continue;
    for (const auto& out : n->outputs) {
      for (uint32_t p = 0; p < out.conns.size(); ++p) {
        const Conn& c = conns_[out.conns[p]];
        if (c.dead) continue;
        ProgressReport r;
        r.sender = n->id;
        r.receiver = p;
        r.stream = out.stream;
        r.window = n->closed_upto;
        r.units_sent = c.report.frames_sent;
        r.units_acked = c.progress_acked;
        r.backlog = c.queue.size() + (c.report.frames_sent - c.frames_acked);
        r.tick = now_;
        r.closes_acked = c.closes_acked;
        send_to_control(r);
      }
    }
  }
  Event ev;
  ev.time = now_ + p_.latency;
  ev.kind = EventKind::kEvaluate;
  schedule(std::move(ev));
  Event next;
  next.time = now_ + p_.detector.report_interval;
  next.kind = EventKind::kReportTick;
  schedule(std::move(next));
}

void Sim::run_node(Node& n) {
  const double cap = std::max(n.rate, 1.0);
  n.tokens = std::min(cap, n.tokens + n.rate * static_cast<double>(now_ - n.refill_at));
  n.refill_at = now_;
  n.throttled = false;
  if (n.callbacks.empty()) {
    n.fn->on_wake(n);
  } else {
    for (auto& [idx, cb] : n.callbacks) cb(n);
  }
  post_wake(n);
}

bool Sim::supplemental_quiet(const Node& n, uint64_t w) const {
  for (const auto& p : n.ports) {
    if (p->is_reopened(w) || p->supplemental_outstanding(w)) return false;
  }
  return true;
}

void Sim::post_wake(Node& n) {
  if (!n.alive()) return;
  bool again = false;
  if (last_) {
    const uint64_t limit = std::min(n.bounded_upto(), *last_ + 1);
    while (n.closed_upto < limit) close_window(n, n.closed_upto++);
    for (uint64_t w = n.committed_upto; w <= *last_ && !n.ports.empty(); ++w) {
      bool reopened = false;
      bool ready = true;
      for (const auto& p : n.ports) {
        reopened |= p->is_reopened(w);
        ready &= p->supplemental_ready(w);
      }
      if (reopened && ready) {
        for (auto& p : n.ports) p->release_supplemental(w);
        again = true;
      }
    }
    for (auto& out : n.outputs) {
      for (auto& [w, win] : out.windows) {
        if (win.close_queued && win.dispatched < win.units.size() &&
            supplemental_quiet(n, w)) {
          try_dispatch(n, out, w, true);
        }
      }
    }
  }
  if (n.producer_ended()) {
    for (auto& out : n.outputs) {
      if (out.end_sent) continue;
      bool all_closed = !last_ || n.closed_upto > *last_;
      for (const auto& [w, win] : out.windows) {
        all_closed &= win.close_queued && win.dispatched == win.units.size();
      }
      if (!all_closed) continue;
      out.end_sent = true;
      for (uint32_t p = 0; p < out.conns.size(); ++p) {
        if (!out.dead_pos.contains(p)) {
          enqueue(conns_[out.conns[p]], Frame::end(), kEndWindow, false);
        }
      }
    }
  }
  try_ack(n);
  if (!n.report.finished_tick && finished(n)) n.report.finished_tick = now_;
  if (again) schedule_wake(n, now_);
  if (n.throttled) {
    const double need = (1.0 - n.tokens) / n.rate;
    schedule_wake(n, now_ + std::max<uint64_t>(1, static_cast<uint64_t>(std::ceil(need))));
  }
}

void Sim::close_window(Node& n, uint64_t w) {
  for (auto& out : n.outputs) {
    OutWindow& win = out.windows[w];
    win.closed = true;
    if (out.op == StreamOp::kGroup) {
      if (win.counts.empty()) win.counts.assign(out.bucket_count, 0);
      if (w == 0) send_hist(n, out, 0, win.counts);
      if (last_ && w + 1 <= *last_) send_hist(n, out, w + 1, win.counts);
    }
    try_dispatch(n, out, w, false);
  }
}

bool Sim::node_settled(const Node& n, uint64_t w) const {
  if (n.source) {
    if (n.source->bounded_upto() <= w) return false;
  }
  for (const auto& p : n.ports) {
    if (!p->settled(w) || p->is_reopened(w)) return false;
  }
  for (const auto& out : n.outputs) {
    auto it = out.windows.find(w);
    if (it == out.windows.end()) return false;
    const OutWindow& win = it->second;
    if (!win.closed || !win.close_queued || win.dispatched < win.units.size()) return false;
    for (uint32_t p = 0; p < out.conns.size(); ++p) {
      if (out.dead_pos.contains(p) || win.cancelled.contains(p)) continue;
      auto ce = win.closed_epoch.find(p);
      auto ca = win.close_acked.find(p);
      if (ce == win.closed_epoch.end() || ce->second != n.epoch) return false;
      if (ca == win.close_acked.end() || ca->second != n.epoch) return false;
    }
  }
  return true;
}

void Sim::try_ack(Node& n) {
  if (!last_) return;
  for (uint64_t w = n.committed_upto; w <= *last_; ++w) {
    auto it = n.acked.find(w);
    if (it != n.acked.end() && it->second == n.epoch) continue;
    if (!node_settled(n, w)) break;
    n.acked[w] = n.epoch;
    send_to_control(AckMsg{n.id, w, n.epoch});
  }
}

bool Sim::finished(const Node& n) const {
  if (!n.producer_ended()) return false;
  for (const auto& out : n.outputs) {
    if (!out.end_sent) return false;
  }
  return true;
}

bool Sim::done() const {
  if (!control_->all_committed()) return false;
  for (const auto& n : nodes_) {
    if (!n->alive()) continue;
    if (!finished(*n)) return false;
    // Final commits must reach every node so that buffers are released.
    if (last_ && n->committed_upto <= *last_) return false;
  }
  return true;
}

void Sim::handle(Event& e) {
  switch (e.kind) {
    case EventKind::kDeliver:
      on_deliver(e);
      break;
    case EventKind::kFrameAck:
      on_frame_ack(e);
      break;
    case EventKind::kCloseAck:
      on_close_ack(e);
      break;
    case EventKind::kCancel:
      on_cancel(e);
      break;
    case EventKind::kWake: {
      Node& n = *nodes_[e.target];
      if (n.wake_at == now_) n.wake_at.reset();
      if (n.alive()) run_node(n);
      break;
    }
    case EventKind::kFail:
      on_fail(e);
      break;
    case EventKind::kToControl:
      on_to_control(e);
      break;
    case EventKind::kFromControl:
      on_from_control(e);
      break;
    case EventKind::kReportTick:
      on_report_tick();
      break;
    case EventKind::kEvaluate:
      deliver_control(control_->evaluate(now_));
      break;
    case EventKind::kSplitTimer:
      deliver_control(control_->on_split_timeout(now_, e.target, e.window));
      break;
  }
}

SimReport Sim::run() {
  report_.scenario = sc_.name;
  report_.seed = seed_;
  report_.last_window = last_;
  for (auto& n : nodes_) n->fn->on_start(*n);
  for (auto& n : nodes_) schedule_wake(*n, 0);
  for (const auto& f : sc_.failures) {
    Event e;
    e.time = f.at_tick;
    e.kind = EventKind::kFail;
    e.target = net_.stage_nodes.at(sc_.topology.find_stage(f.stage)->id)[f.node_index];
    schedule(std::move(e));
  }
  Event tick;
  tick.time = p_.detector.report_interval;
  tick.kind = EventKind::kReportTick;
  schedule(std::move(tick));

  report_.outcome = Outcome::kTickBudgetExceeded;
  if (done()) {
    report_.outcome = Outcome::kCompleted;
  } else {
    while (!events_.empty()) {
      if (events_.top().time > p_.max_ticks) {
        now_ = p_.max_ticks;
        break;
      }
      Event e = events_.top();
      events_.pop();
      now_ = e.time;
      ++event_count_;
      handle(e);
      if (control_->unrecoverable()) {
        report_.outcome = Outcome::kUnrecoverableStream;
        break;
      }
      if (done()) {
        report_.outcome = Outcome::kCompleted;
        break;
      }
    }
  }
  return build_report();
}

SimReport Sim::build_report() {
  SimReport& r = report_;
  r.final_tick = now_;
  r.events = event_count_;
  for (auto& c : conns_) {
    c.report.units_in_flight_end = c.in_flight_units;
    r.links.push_back(c.report);
  }
  for (auto& n : nodes_) {
    NodeReport nr = n->report;
    nr.status = status_name(n->status);
    for (const auto& p : n->ports) {
      nr.duplicates_dropped += p->duplicates_dropped();
      nr.units_discarded += p->discarded();
    }
    r.nodes.push_back(nr);
    for (const auto& out : n->outputs) {
      r.buffers.push_back({out.stream, n->id, out.peak, out.buffered});
    }
  }
  // Per-window receiver loads of GROUP streams, from accepted units.
  for (uint32_t s = 0; s < sc_.topology.streams.size(); ++s) {
    const StreamDecl& sd = sc_.topology.streams[s];
    if (sd.op != StreamOp::kGroup) continue;
    const auto& receivers = net_.stage_nodes.at(sd.consumer);
    std::map<uint64_t, std::vector<uint64_t>> loads;
    for (const auto& a : r.accepted) {
      if (a.stream != s) continue;
      auto& l = loads[a.window];
      l.resize(receivers.size(), 0);
      auto pos = std::find(receivers.begin(), receivers.end(), a.node) - receivers.begin();
      ++l[pos];
    }
    for (auto& [w, l] : loads) {
      WindowLoad wl;
      wl.stream = s;
      wl.window = w;
      wl.loads = l;
      double mean = 0;
      for (uint64_t x : l) mean += static_cast<double>(x);
      mean /= static_cast<double>(l.size());
      double var = 0;
      uint64_t mx = 0;
      for (uint64_t x : l) {
        var += (static_cast<double>(x) - mean) * (static_cast<double>(x) - mean);
        mx = std::max(mx, x);
      }
      wl.variance = var / static_cast<double>(l.size());
      wl.max_over_mean = mean > 0 ? static_cast<double>(mx) / mean : 0.0;
      r.window_loads.push_back(std::move(wl));
    }
  }
  r.splits = control_->splits();
  r.recoveries = control_->recoveries();
  r.commit_ticks = control_->commit_ticks();
  r.unrecoverable = control_->unrecoverable();
  return r;
}

}  // namespace

SimReport run(const Scenario& scenario, const StageRegistry& registry) {
  return run(scenario, scenario.seed, registry);
}

SimReport run(const Scenario& scenario, uint64_t seed, const StageRegistry& registry) {
  Sim sim(scenario, seed, registry);
  return sim.run();
}

}  // namespace streamweave

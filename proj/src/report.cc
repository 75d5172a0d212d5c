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

#include "streamweave/report.h"

#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>
#include "streamweave/wire.h"

namespace streamweave {
namespace {

using json = nlohmann::json;

json unit_json(const DataUnit& u) {
  return {{"key", u.key.value},
          {"ts", u.timestamp},
          {"seq", u.seq.value},
          {"payload", to_hex(u.payload)}};
}

json segments_json(const BucketAllocation& a) {
  json segs = json::array();
  for (const auto& s : a.segments) {
    segs.push_back({{"begin", s.range.begin}, {"end", s.range.end}, {"owner", s.owner}});
  }
  return segs;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(std::string s, size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string stream_name(const SimReport& r, uint32_t s) {
  return s < r.stream_names.size() ? r.stream_names[s] : std::to_string(s);
}

}  // namespace

std::string report_json_lines(const SimReport& r, const ReportOptions& options) {
  std::ostringstream out;
  auto emit = [&](json j) { out << j.dump() << '\n'; };
  json run = {{"record", "run"},
              {"scenario", r.scenario},
              {"seed", r.seed},
              {"outcome", to_string(r.outcome)},
              {"final_tick", r.final_tick},
              {"events", r.events},
              {"streams", r.stream_names}};
  run["last_window"] = r.last_window ? json(*r.last_window) : json(nullptr);
  if (r.unrecoverable) {
    run["unrecoverable"] = {{"stream", stream_name(r, r.unrecoverable->stream)},
                            {"failed_node", r.unrecoverable->failed_node}};
  }
  emit(run);
  for (const auto& l : r.links) {
    emit({{"record", "link"},
          {"conn", l.conn},
          {"stream", l.stream},
          {"sender", l.sender},
          {"receiver", l.receiver},
          {"frames_sent", l.frames_sent},
          {"units_sent", l.units_sent},
          {"markers_sent", l.markers_sent},
          {"units_resent", l.units_resent},
          {"frames_delivered", l.frames_delivered},
          {"units_delivered", l.units_delivered},
          {"units_dropped_in_flight", l.units_dropped_in_flight},
          {"units_dropped_at_receiver", l.units_dropped_at_receiver},
          {"units_in_flight_end", l.units_in_flight_end},
          {"units_unsent_dropped", l.units_unsent_dropped},
          {"max_in_flight", l.max_in_flight}});
  }
  for (const auto& n : r.nodes) {
    emit({{"record", "node"},
          {"node", n.id},
          {"stage", n.stage},
          {"index", n.index},
          {"status", n.status},
          {"units_consumed", n.units_consumed},
          {"units_emitted", n.units_emitted},
          {"duplicates_dropped", n.duplicates_dropped},
          {"units_discarded", n.units_discarded},
          {"results", n.results},
          {"finished_tick", n.finished_tick ? json(*n.finished_tick) : json(nullptr)}});
  }
  for (const auto& w : r.window_loads) {
    emit({{"record", "window_load"},
          {"stream", stream_name(r, w.stream)},
          {"window", w.window},
          {"loads", w.loads},
          {"variance", w.variance},
          {"max_over_mean", w.max_over_mean}});
  }
  for (const auto& s : r.splits) {
    emit({{"record", "split"},
          {"tick", s.tick},
          {"stream", stream_name(r, s.stream)},
          {"window", s.window},
          {"partial", s.partial},
          {"segments", segments_json(s.allocation)},
          {"cost", s.allocation.cost()},
          {"total", BucketHistogram{s.counts}.total()}});
  }
  for (const auto& rec : r.recoveries) {
    json streams = json::array();
    for (uint32_t s : rec.streams) streams.push_back(stream_name(r, s));
    emit({{"record", "recovery"},
          {"tick", rec.tick},
          {"failed_node", rec.failed_node},
          {"epoch", rec.epoch},
          {"committed_upto", rec.committed_upto},
          {"cause", rec.cause},
          {"streams", streams},
          {"windows_repartitioned", rec.windows_repartitioned}});
  }
  for (const auto& f : r.failures) {
    emit({{"record", "failure"}, {"tick", f.tick}, {"node", f.node}, {"kind", f.kind}});
  }
  for (const auto& [w, t] : r.commit_ticks) {
    emit({{"record", "commit"}, {"window", w}, {"tick", t}});
  }
  for (const auto& b : r.buffers) {
    emit({{"record", "buffer"},
          {"stream", stream_name(r, b.stream)},
          {"node", b.node},
          {"peak_units", b.peak_units},
          {"final_units", b.final_units}});
  }
  for (const auto& res : r.results) {
    json j = {{"record", "result"}, {"node", res.node}, {"stage", res.stage}, {"tick", res.tick}};
    j["unit"] = unit_json(res.unit);
    emit(j);
  }
  if (options.include_accepted) {
    for (const auto& a : r.accepted) {
      json j = {{"record", "accepted"},
                {"stream", stream_name(r, a.stream)},
                {"window", a.window},
                {"node", a.node},
                {"epoch", a.epoch},
                {"tick", a.tick}};
      j["unit"] = unit_json(a.unit);
      emit(j);
    }
  }
  return out.str();
}

std::string summary_table(const SimReport& r) {
  std::ostringstream out;
  out << "scenario " << r.scenario << "  seed " << r.seed << "  outcome "
      << to_string(r.outcome) << "  final tick " << r.final_tick << "\n\n";

  out << "nodes\n";
  out << pad("  id", 6) << pad("stage", 16) << pad("status", 10) << pad("consumed", 10)
      << pad("emitted", 10) << pad("dups", 7) << "results\n";
  for (const auto& n : r.nodes) {
    out << pad("  " + std::to_string(n.id), 6) << pad(n.stage + "[" + std::to_string(n.index) + "]", 16)
        << pad(n.status, 10) << pad(std::to_string(n.units_consumed), 10)
        << pad(std::to_string(n.units_emitted), 10)
        << pad(std::to_string(n.duplicates_dropped), 7) << n.results << "\n";
  }

  out << "\nlinks\n";
  out << pad("  stream", 14) << pad("from", 6) << pad("to", 6) << pad("units", 9)
      << pad("resent", 8) << pad("delivered", 11) << "dropped\n";
  for (const auto& l : r.links) {
    out << pad("  " + l.stream, 14) << pad(std::to_string(l.sender), 6)
        << pad(std::to_string(l.receiver), 6) << pad(std::to_string(l.units_sent), 9)
        << pad(std::to_string(l.units_resent), 8)
        << pad(std::to_string(l.units_delivered), 11)
        << l.units_dropped_in_flight + l.units_dropped_at_receiver << "\n";
  }

  if (!r.window_loads.empty()) {
    out << "\nreceiver load per window\n";
    out << pad("  stream", 14) << pad("window", 8) << pad("variance", 12) << pad("max/mean", 10)
        << "loads\n";
    for (const auto& w : r.window_loads) {
      std::string loads;
      for (size_t i = 0; i < w.loads.size(); ++i) {
        if (i) loads += " ";
        loads += std::to_string(w.loads[i]);
      }
      out << pad("  " + stream_name(r, w.stream), 14) << pad(std::to_string(w.window), 8)
          << pad(fixed(w.variance, 1), 12) << pad(fixed(w.max_over_mean, 3), 10) << loads
          << "\n";
    }
  }

  out << "\nrecoveries\n";
  if (r.recoveries.empty()) out << "  none\n";
  for (const auto& rec : r.recoveries) {
    out << "  tick " << rec.tick << "  node " << rec.failed_node << "  epoch " << rec.epoch
        << "  cause " << rec.cause << "  committed below " << rec.committed_upto
        << "  windows repartitioned " << rec.windows_repartitioned << "\n";
  }

  out << "\ncommits\n";
  if (r.commit_ticks.empty()) out << "  none\n";
  for (const auto& [w, t] : r.commit_ticks) {
    out << "  window " << w << " at tick " << t << "\n";
  }
  return out.str();
}

std::string allocation_table(const SimReport& r) {
  std::ostringstream out;
  for (const auto& s : r.splits) {
    out << "stream " << stream_name(r, s.stream) << "  window " << s.window << "  tick "
        << s.tick << (s.partial ? "  partial" : "") << "\n";
    out << "  buckets " << s.counts.size() << "  units " << BucketHistogram{s.counts}.total()
        << "  cost " << fixed(s.allocation.cost(), 6) << "\n";
    for (const auto& seg : s.allocation.segments) {
      uint64_t load = 0;
      for (uint32_t b = seg.range.begin; b < seg.range.end; ++b) load += s.counts[b];
      out << "  owner " << seg.owner << "  buckets [" << seg.range.begin << ", "
          << seg.range.end << ")  load " << load << "\n";
    }
  }
  return out.str();
}

std::string trace_lines(const SimReport& r) {
  std::string out;
  for (const auto& line : r.trace) {
    out += line;
    out += '\n';
  }
  return out;
}

}  // namespace streamweave

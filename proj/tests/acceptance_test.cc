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


// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "streamweave/partitioning.h"
#include "streamweave/report.h"
#include "streamweave/scenario.h"
#include "streamweave/simulator.h"
#include "streamweave/stream_ops.h"

namespace sw = streamweave;

namespace {

constexpr int kSeeds = 10;

struct Verdict {
  bool pass = true;
  std::string detail;
};

sw::Scenario load(const std::string& name) {
  return sw::load_scenario(std::string(STREAMWEAVE_SOURCE_DIR) + "/scenarios/" + name);
}

uint32_t stream_index(const sw::Scenario& s, const std::string& name) {
  for (uint32_t i = 0; i < s.topology.streams.size(); ++i) {
    if (s.topology.streams[i].name == name) return i;
  }
  throw std::runtime_error("no stream " + name);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Verdict dp_optimality() {
  std::mt19937_64 rng(20260101);
  auto t0 = std::chrono::steady_clock::now();
  int mismatches = 0;
  for (int i = 0; i < 500; ++i) {
    uint32_t k = 1 + static_cast<uint32_t>(rng() % 10);
    uint32_t l = 1 + static_cast<uint32_t>(rng() % 5);
    sw::BucketHistogram h;
    for (uint32_t b = 0; b < k; ++b) h.counts.push_back(rng() % 21);
    auto dp = sw::allocate_buckets(h, l).allocation;
    auto bf = sw::brute_force_allocate(h, l);
    if (dp.scaled_cost != bf.scaled_cost || dp.scale != bf.scale) ++mismatches;
  }
  double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 5.0,
          "500 instances, " + std::to_string(mismatches) + " cost mismatches, " +
              fmt("%.3f s", secs) + " (limit 5 s)"};
}

Verdict dp_scale() {
  std::mt19937_64 rng(7);
  sw::BucketHistogram h;
  for (int b = 0; b < 1000; ++b) h.counts.push_back(rng() % 1000);
  auto t0 = std::chrono::steady_clock::now();
  auto r = sw::allocate_buckets(h, 1000);
  double secs = seconds_since(t0);
  bool ok = secs < 10.0 && r.allocation.well_formed() && r.allocation.bucket_count() == 1000;
  return {ok, "l = k = 1000 in " + fmt("%.3f s", secs) + " (limit 10 s)"};
}

Verdict group_colocation() {
  sw::Scenario s = load("group3x3.toml");
  uint64_t violations = 0, runs_ok = 0, checked = 0;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    sw::SimReport r = sw::run(s, seed);
    if (r.outcome == sw::Outcome::kCompleted) ++runs_ok;
    std::map<std::tuple<uint32_t, uint64_t, uint32_t, uint64_t>, std::set<uint32_t>> where;
    for (const auto& a : r.accepted) {
      if (s.topology.streams[a.stream].op != sw::StreamOp::kGroup) continue;
      where[{a.stream, a.window, a.epoch, a.unit.key.value}].insert(a.node);
    }
    for (const auto& [k, nodes] : where) {
      ++checked;
      if (nodes.size() > 1) ++violations;
    }
  }
  return {violations == 0 && runs_ok == kSeeds && checked > 0,
          std::to_string(kSeeds) + " seeds, " + std::to_string(checked) +
              " (stream, window, epoch, key) groups, " + std::to_string(violations) +
              " violations, " + std::to_string(runs_ok) + " runs completed"};
}

Verdict sort_merge() {
  sw::Scenario s = load("sort3x1.toml");
  uint64_t violations = 0, windows = 0;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    sw::SimReport r = sw::run(s, seed);
    if (r.outcome != sw::Outcome::kCompleted) {
      ++violations;
      continue;
    }
    std::map<uint64_t, std::multiset<std::pair<uint64_t, sw::Payload>>> sent;
    const auto generated = sw::generate_source_units(s, seed);
    for (const auto& node : generated.at("source")) {
      for (const auto& u : node) {
        sent[sw::window_of(u.timestamp, s.window).n].insert({u.key.value, u.payload});
      }
    }
    std::map<uint64_t, std::vector<const sw::DataUnit*>> got;
    for (const auto& a : r.accepted) got[a.window].push_back(&a.unit);
    for (const auto& [w, units] : got) {
      for (size_t i = 1; i < units.size(); ++i) {
        if (units[i - 1]->key < units[i]->key) {
          ++violations;
          break;
        }
      }
    }
    std::set<uint64_t> all_windows;
    for (const auto& [w, _] : sent) all_windows.insert(w);
    for (const auto& [w, _] : got) all_windows.insert(w);
    for (uint64_t w : all_windows) {
      ++windows;
      std::multiset<std::pair<uint64_t, sw::Payload>> m;
      for (const auto* u : got[w]) m.insert({u->key.value, u->payload});
      if (m != sent[w]) ++violations;
    }
  }
  return {violations == 0 && windows > 0,
          std::to_string(kSeeds) + " seeds, " + std::to_string(windows) + " windows, " +
              std::to_string(violations) + " violations"};
}

Verdict early_termination() {
  sw::Scenario s = load("topk.toml");
  sw::SimReport r = sw::run(s);
  uint64_t n = 0;
  for (const auto& g : s.generators) n += g.units;
  uint64_t sent = 0, links = 0;
  for (const auto& l : r.links) {
    if (l.stream == "sorted") {
      sent += l.units_sent;
      ++links;
    }
  }
  const double bound = 0.10 * static_cast<double>(n) + static_cast<double>(links) * s.params.credits +
                       static_cast<double>(links);
  bool ok = r.outcome == sw::Outcome::kCompleted && static_cast<double>(sent) <= bound;
  return {ok, "N = " + std::to_string(n) + ", " + std::to_string(links) + " links, " +
                  std::to_string(sent) + " units transmitted (bound " + fmt("%.0f", bound) +
                  "), outcome " + sw::to_string(r.outcome)};
}

using SinkView = std::map<uint64_t, std::multiset<std::tuple<uint64_t, uint64_t, uint64_t, sw::Payload>>>;

SinkView sink_view(const sw::SimReport& r, uint32_t stream) {
  SinkView out;
  for (const auto& a : r.accepted) {
    if (a.stream != stream) continue;
    out[a.window].insert({a.unit.key.value, a.unit.timestamp, a.unit.seq.value, a.unit.payload});
  }
  return out;
}

uint64_t duplicates_passed(const sw::SimReport& r, uint32_t stream) {
  std::set<std::pair<uint64_t, uint64_t>> seen;
  uint64_t dups = 0;
  for (const auto& a : r.accepted) {
    if (a.stream != stream) continue;
    if (!seen.insert({a.window, a.unit.seq.value}).second) ++dups;
  }
  return dups;
}

Verdict exactly_once() {
  sw::Scenario base = load("quickstart.toml");
  base.failures.clear();
  const uint32_t out = stream_index(base, "counts");
  struct Variant {
    std::string name;
    std::function<void(sw::Scenario&, uint64_t)> apply;  // baseline final tick
    bool expect_recovery;
  };
  std::vector<Variant> variants = {
      {"crash at 25%", [](sw::Scenario& s, uint64_t t) { s.failures.push_back({"count", 1, t / 4}); }, true},
      {"crash at 75%", [](sw::Scenario& s, uint64_t t) { s.failures.push_back({"count", 1, 3 * t / 4}); }, true},
      {"two crashes",
       [](sw::Scenario& s, uint64_t t) {
         s.failures.push_back({"count", 0, t / 4});
         s.failures.push_back({"count", 2, t / 2});
       },
       true},
      {"overload", [](sw::Scenario& s, uint64_t) { s.rates.push_back({"count", 1, 0.5}); }, true},
  };
  std::string detail;
  bool ok = true;
  for (const auto& v : variants) {
    int equal = 0, recovered = 0;
    uint64_t dups = 0;
    for (int seed = 1; seed <= kSeeds; ++seed) {
      sw::SimReport b = sw::run(base, seed);
      sw::Scenario f = base;
      v.apply(f, b.final_tick);
      sw::SimReport r = sw::run(f, seed);
      if (r.outcome == sw::Outcome::kCompleted && sink_view(r, out) == sink_view(b, out) &&
          b.outcome == sw::Outcome::kCompleted) {
        ++equal;
      }
      if (!r.recoveries.empty()) ++recovered;
      dups += duplicates_passed(r, out);
    }
    bool vok = equal == kSeeds && dups == 0 && (!v.expect_recovery || recovered == kSeeds);
    ok &= vok;
    if (!detail.empty()) detail += "; ";
    detail += v.name + ": " + std::to_string(equal) + "/" + std::to_string(kSeeds) +
              " equal, " + std::to_string(recovered) + " recovered, " + std::to_string(dups) +
              " duplicates";
  }
  return {ok, detail};
}

double max_over_mean(const std::vector<uint64_t>& loads) {
  uint64_t total = 0, max = 0;
  for (auto x : loads) {
    total += x;
    max = std::max(max, x);
  }
  if (total == 0) return 1.0;
  return static_cast<double>(max) * static_cast<double>(loads.size()) / static_cast<double>(total);
}

Verdict load_balance() {
  sw::Scenario s = load("skew.toml");
  sw::SimReport r = sw::run(s);
  const uint32_t words = stream_index(s, "words");
  std::map<uint64_t, std::vector<uint64_t>> modulo;
  const auto generated = sw::generate_source_units(s, s.seed);
  for (const auto& node : generated.at("source")) {
    for (const auto& u : node) {
      auto& loads = modulo[sw::window_of(u.timestamp, s.window).n];
      loads.resize(3, 0);
      ++loads[u.key.value % 3];
    }
  }
  double worst = 0, ours_sum = 0, mod_sum = 0;
  uint64_t windows = 0;
  for (const auto& wl : r.window_loads) {
    if (wl.stream != words || wl.window < 1) continue;
    ++windows;
    worst = std::max(worst, wl.max_over_mean);
    ours_sum += wl.max_over_mean;
    mod_sum += max_over_mean(modulo[wl.window]);
  }
  double ours = windows ? ours_sum / windows : 0;
  double mod = windows ? mod_sum / windows : 0;
  bool ok = r.outcome == sw::Outcome::kCompleted && windows > 0 && worst <= 1.25 && ours < mod;
  return {ok, std::to_string(windows) + " windows from the second on, worst max/mean " +
                  fmt("%.3f", worst) + " (limit 1.25), mean " + fmt("%.3f", ours) +
                  " vs modulo-3 " + fmt("%.3f", mod)};
}

Verdict determinism() {
  const std::filesystem::path dir = std::filesystem::path(STREAMWEAVE_SOURCE_DIR) / "scenarios";
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() == ".toml") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  int identical = 0;
  for (const auto& f : files) {
    sw::Scenario s = sw::load_scenario(f.string());
    s.params.trace = true;
    sw::ReportOptions all{true};
    sw::SimReport a = sw::run(s, s.seed + 11);
    sw::SimReport b = sw::run(s, s.seed + 11);
    if (sw::report_json_lines(a, all) == sw::report_json_lines(b, all) &&
        sw::trace_lines(a) == sw::trace_lines(b) && sw::summary_table(a) == sw::summary_table(b)) {
      ++identical;
    }
  }
  return {identical == static_cast<int>(files.size()) && !files.empty(),
          std::to_string(identical) + "/" + std::to_string(files.size()) +
              " scenarios byte-identical across reruns (report, trace, summary)"};
}

Verdict derived_oracles() {
  uint64_t join_bad = 0, join_windows = 0, sum_bad = 0, sum_windows = 0, max_window_units = 0;

  sw::Scenario js = load("join.toml");
  const uint32_t joined = stream_index(js, "joined");
  for (int seed = 1; seed <= kSeeds; ++seed) {
    sw::SimReport r = sw::run(js, seed);
    auto gen = sw::generate_source_units(js, seed);
    std::map<uint64_t, std::vector<sw::DataUnit>> left, right;
    for (const auto& node : gen.at("left")) {
      for (const auto& u : node) left[sw::window_of(u.timestamp, js.window).n].push_back(u);
    }
    for (const auto& node : gen.at("right")) {
      for (const auto& u : node) right[sw::window_of(u.timestamp, js.window).n].push_back(u);
    }
    std::map<uint64_t, std::multiset<std::pair<uint64_t, sw::Payload>>> got;
    for (const auto& a : r.accepted) {
      if (a.stream == joined) got[a.window].insert({a.unit.key.value, a.unit.payload});
    }
    std::set<uint64_t> windows;
    for (const auto& [w, _] : left) windows.insert(w);
    for (const auto& [w, _] : right) windows.insert(w);
    for (uint64_t w : windows) {
      ++join_windows;
      max_window_units = std::max<uint64_t>(max_window_units, left[w].size() + right[w].size());
      std::multiset<std::pair<uint64_t, sw::Payload>> expect;
      for (const auto& a : left[w]) {
        for (const auto& b : right[w]) {
          if (a.key != b.key) continue;
          sw::Payload p = a.payload;
          p.insert(p.end(), b.payload.begin(), b.payload.end());
          expect.insert({a.key.value, p});
        }
      }
      if (got[w] != expect || r.outcome != sw::Outcome::kCompleted) ++join_bad;
    }
  }

  sw::Scenario ss = load("sum.toml");
  for (int seed = 1; seed <= kSeeds; ++seed) {
    sw::SimReport r = sw::run(ss, seed);
    std::map<uint64_t, std::vector<sw::DataUnit>> by_window;
    const auto generated = sw::generate_source_units(ss, seed);
    for (const auto& node : generated.at("source")) {
      for (const auto& u : node) by_window[sw::window_of(u.timestamp, ss.window).n].push_back(u);
    }
    std::map<uint64_t, std::vector<uint64_t>> results;
    for (const auto& res : r.results) {
      results[sw::window_of(res.unit.timestamp, ss.window).n].push_back(
          sw::decode_u64(res.unit.payload));
    }
    for (const auto& [w, units] : by_window) {
      ++sum_windows;
      max_window_units = std::max<uint64_t>(max_window_units, units.size());
      uint64_t expect = 0;
      for (const auto& u : units) expect += sw::decode_u64(u.payload);
      const auto& got = results[w];
      if (got.size() != 1 || got[0] != expect || r.outcome != sw::Outcome::kCompleted) ++sum_bad;
    }
  }
  bool ok = join_bad == 0 && sum_bad == 0 && join_windows > 0 && sum_windows > 0 &&
            max_window_units <= 1000;
  return {ok, "join " + std::to_string(join_windows - join_bad) + "/" +
                  std::to_string(join_windows) + " windows match nested loop, sum " +
                  std::to_string(sum_windows - sum_bad) + "/" + std::to_string(sum_windows) +
                  " windows match fold, largest window " + std::to_string(max_window_units) +
                  " units"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    Verdict (*check)();
  };
  const Criterion criteria[] = {
      {1, "dp optimality", dp_optimality},
      {2, "dp scale", dp_scale},
      {3, "group colocation", group_colocation},
      {4, "sort-merge correctness", sort_merge},
      {5, "early termination", early_termination},
      {6, "exactly-once recovery", exactly_once},
      {7, "load balancing under skew", load_balance},
      {8, "determinism", determinism},
      {9, "derived-operation oracles", derived_oracles},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %d %s: %s (%s)\n", c.id, v.pass ? "PASS" : "FAIL", c.name,
                v.detail.c_str());
    std::fflush(stdout);
    failed += !v.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed,
              std::size(criteria));
  return failed == 0 ? 0 : 1;
}

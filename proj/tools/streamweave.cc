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

// Scenario runner.
//
// Exit codes: 0 completed, 1 internal error, 2 invalid scenario or flags,
// 3 unrecoverable stream, 4 tick budget exceeded.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <spdlog/cfg/helpers.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "streamweave/report.h"
#include "streamweave/scenario.h"
#include "streamweave/simulator.h"

namespace {

constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitUnrecoverable = 3;
constexpr int kExitTickBudget = 4;

bool write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  return static_cast<bool>(out);
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  if (const char* levels = std::getenv("STREAMWEAVE_LOG")) {
    spdlog::cfg::helpers::load_levels(levels);
  }

  CLI::App app{"Run a streamweave cluster scenario on the discrete-event simulator"};
  std::string scenario_path;
  std::optional<uint64_t> seed;
  std::optional<uint64_t> max_ticks;
  std::string out_path;
  bool trace = false;
  bool dump_allocation = false;
  app.add_option("--scenario", scenario_path, "scenario file (TOML)")->required();
  app.add_option("--seed", seed, "override the scenario seed");
  app.add_option("--max-ticks", max_ticks, "override the tick budget");
  app.add_option("--out", out_path,
                 "write report records (JSON lines) here; the trace goes to PATH.trace");
  app.add_flag("--trace", trace, "record one line per simulator event");
  app.add_flag("--dump-allocation", dump_allocation, "print every bucket split decision");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  streamweave::Scenario sc;
  try {
    sc = streamweave::load_scenario(scenario_path);
  } catch (const streamweave::ScenarioError& e) {
    std::cerr << scenario_path << ": " << e.what() << "\n";
    return kExitConfig;
  }
  if (seed) sc.seed = *seed;
  if (max_ticks) sc.params.max_ticks = *max_ticks;
  sc.params.trace = trace;
  spdlog::info("loaded scenario '{}' ({} stages, {} streams), seed {}", sc.name,
               sc.topology.stages.size(), sc.topology.streams.size(), sc.seed);

  streamweave::SimReport report;
  try {
    report = streamweave::run(sc);
  } catch (const streamweave::StreamError& e) {
    std::cerr << scenario_path << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  spdlog::info("run finished: {} at tick {} after {} events",
               streamweave::to_string(report.outcome), report.final_tick, report.events);

  std::cout << streamweave::summary_table(report);
  if (dump_allocation) std::cout << "\nallocations\n" << streamweave::allocation_table(report);
  if (!out_path.empty()) {
    if (!write_file(out_path, streamweave::report_json_lines(report))) {
      std::cerr << "cannot write " << out_path << "\n";
      return kExitInternal;
    }
    if (trace && !write_file(out_path + ".trace", streamweave::trace_lines(report))) {
      std::cerr << "cannot write " << out_path << ".trace\n";
      return kExitInternal;
    }
  } else if (trace) {
    std::cout << "\ntrace\n" << streamweave::trace_lines(report);
  }

  switch (report.outcome) {
    case streamweave::Outcome::kCompleted:
      return 0;
    case streamweave::Outcome::kUnrecoverableStream:
      return kExitUnrecoverable;
    case streamweave::Outcome::kTickBudgetExceeded:
      return kExitTickBudget;
  }
  return kExitInternal;
}

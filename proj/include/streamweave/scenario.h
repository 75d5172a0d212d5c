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

// Scenario files (TOML).
//
//   name = "group3x3"
//   seed = 7
//   window = 100
//
//   [params]            # all optional
//   bucket_multiplier = 32
//   credits = 64
//   latency = 1
//   node_rate = 8.0
//   theta = 0.5
//   lag_intervals = 3
//   report_interval = 50
//   split_timeout = 250
//   presend_threshold = 1000
//   max_ticks = 1000000
//
//   [[stages]]
//   name = "count"
//   nodes = 3
//   function = "word-group-count"
//   params = {}                # per-function settings
//
//   [[streams]]
//   name = "words"
//   from = "source"
//   to = "count"
//   op = "group"        # group | sort_asc | sort_desc | sort | none
//
//   [[generators]]
//   stage = "source"
//   units = 30000
//   windows = 10
//   distribution = "uniform"   # uniform | zipf | file
//   key_space = 200
//   zipf_s = 1.0
//   file = "units.txt"         # relative to the scenario file
//   value_range = 1000
//
//   [[failures]]
//   stage = "count"
//   node = 0
//   at_tick = 300
//
//   [[rates]]
//   stage = "count"
//   node = 1
//   rate = 1.0

#ifndef STREAMWEAVE_SCENARIO_H_
#define STREAMWEAVE_SCENARIO_H_

#include <string>
#include <string_view>
#include <vector>

#include "streamweave/runtime_api.h"
#include "streamweave/simulator.h"

namespace streamweave {

// Malformed or inconsistent scenario; `problems` lists every offending key.
class ScenarioError : public StreamError {
 public:
  explicit ScenarioError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

Scenario parse_scenario(std::string_view text, const std::string& base_dir = ".");
Scenario load_scenario(const std::string& path);

}  // namespace streamweave

#endif  // STREAMWEAVE_SCENARIO_H_

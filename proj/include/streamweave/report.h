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

// SimReport rendering: line-delimited JSON records, a summary table and the
// bucket allocation table.
//
// Every record carries a "record" field naming its type: run, link, node,
// window_load, split, recovery, failure, commit, buffer, result and, when
// requested, accepted.

#ifndef STREAMWEAVE_REPORT_H_
#define STREAMWEAVE_REPORT_H_

#include <string>

#include "streamweave/simulator.h"

namespace streamweave {

struct ReportOptions {
  bool include_accepted = false;  // one record per accepted unit
};

std::string report_json_lines(const SimReport& r, const ReportOptions& options = {});
std::string summary_table(const SimReport& r);
// One block per split decision: per-bucket counts, segments and cost.
std::string allocation_table(const SimReport& r);
std::string trace_lines(const SimReport& r);

}  // namespace streamweave

#endif  // STREAMWEAVE_REPORT_H_

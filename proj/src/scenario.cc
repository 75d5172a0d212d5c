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

#include "streamweave/scenario.h"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "toml.hpp"

namespace streamweave {
namespace {

std::string join_problems(const std::vector<std::string>& problems) {
  std::string s = "invalid scenario:";
  for (const auto& p : problems) s += "\n  " + p;
  return s;
}

// Typed access to one table, recording every problem under its dotted path.
class Reader {
 public:
  Reader(const toml::table& t, std::string path, std::vector<std::string>& problems)
      : t_(t), path_(std::move(path)), problems_(problems) {}

  void allow(std::initializer_list<std::string_view> keys) {
    std::set<std::string_view> ok(keys);
    for (const auto& [k, v] : t_) {
      if (!ok.contains(k.str())) problems_.push_back(key(k.str()) + ": unknown key");
    }
  }

  std::optional<int64_t> integer(std::string_view k, bool required = false,
                                 int64_t min = 0) {
    const toml::node* n = t_.get(k);
    if (!n) {
      if (required) problems_.push_back(key(k) + ": missing");
      return std::nullopt;
    }
    auto v = n->value<int64_t>();
    if (!n->is_integer() || !v) {
      problems_.push_back(key(k) + ": expected an integer");
      return std::nullopt;
    }
    if (*v < min) {
      problems_.push_back(key(k) + ": must be >= " + std::to_string(min));
      return std::nullopt;
    }
    return v;
  }

  std::optional<double> number(std::string_view k, bool required = false) {
    const toml::node* n = t_.get(k);
    if (!n) {
      if (required) problems_.push_back(key(k) + ": missing");
      return std::nullopt;
    }
    if (!n->is_number()) {
      problems_.push_back(key(k) + ": expected a number");
      return std::nullopt;
    }
    return n->value<double>();
  }

  std::optional<std::string> string(std::string_view k, bool required = false) {
    const toml::node* n = t_.get(k);
    if (!n) {
      if (required) problems_.push_back(key(k) + ": missing");
      return std::nullopt;
    }
    if (!n->is_string()) {
      problems_.push_back(key(k) + ": expected a string");
      return std::nullopt;
    }
    return n->value<std::string>();
  }

  std::string key(std::string_view k) const {
    return path_.empty() ? std::string(k) : path_ + "." + std::string(k);
  }

 private:
  const toml::table& t_;
  std::string path_;
  std::vector<std::string>& problems_;
};

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

// Array of tables at `name`, or empty; records a problem if it is anything else.
std::vector<const toml::table*> tables(const toml::table& root, std::string_view name,
                                       std::vector<std::string>& problems) {
  std::vector<const toml::table*> out;
  const toml::node* n = root.get(name);
  if (!n) return out;
  const toml::array* arr = n->as_array();
  if (!arr) {
    problems.push_back(std::string(name) + ": expected an array of tables");
    return out;
  }
  for (size_t i = 0; i < arr->size(); ++i) {
    const toml::table* t = arr->get(i)->as_table();
    if (!t) {
      problems.push_back(std::string(name) + "[" + std::to_string(i) + "]: expected a table");
      continue;
    }
    out.push_back(t);
  }
  return out;
}

}  // namespace

ScenarioError::ScenarioError(std::vector<std::string> problems)
    : StreamError(join_problems(problems)), problems_(std::move(problems)) {}

Scenario parse_scenario(std::string_view text, const std::string& base_dir) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "syntax error at line " << e.source().begin.line << ": " << e.description();
    throw ScenarioError({msg.str()});
  }

  std::vector<std::string> problems;
  Scenario sc;
  Reader top(root, "", problems);
  top.allow({"name", "seed", "window", "params", "stages", "streams", "generators",
             "failures", "rates"});
  sc.name = top.string("name").value_or("scenario");
  if (auto v = top.integer("seed", true)) sc.seed = static_cast<uint64_t>(*v);
  if (auto v = top.integer("window", true, 1)) sc.window.width = static_cast<uint64_t>(*v);

  if (const toml::node* pn = root.get("params")) {
    if (const toml::table* pt = pn->as_table()) {
      Reader p(*pt, "params", problems);
      p.allow({"bucket_multiplier", "credits", "latency", "node_rate", "theta",
               "lag_intervals", "report_interval", "split_timeout", "presend_threshold",
               "max_ticks"});
      SimParams& sp = sc.params;
      if (auto v = p.integer("bucket_multiplier", false, 1)) {
        sp.bucket_multiplier = static_cast<uint32_t>(*v);
      }
      if (auto v = p.integer("credits", false, 1)) sp.credits = static_cast<uint32_t>(*v);
      if (auto v = p.integer("latency", false, 1)) sp.latency = static_cast<uint64_t>(*v);
      if (auto v = p.number("node_rate")) {
        if (*v <= 0) problems.push_back("params.node_rate: must be > 0");
        sp.node_rate = *v;
      }
      if (auto v = p.number("theta")) {
        if (*v < 0 || *v > 1) problems.push_back("params.theta: must be in [0, 1]");
        sp.detector.theta = *v;
      }
      if (auto v = p.integer("lag_intervals", false, 1)) {
        sp.detector.lag_intervals = static_cast<uint32_t>(*v);
      }
      if (auto v = p.integer("report_interval", false, 1)) {
        sp.detector.report_interval = static_cast<uint64_t>(*v);
      }
      if (auto v = p.integer("split_timeout", false, 1)) {
        sp.split_timeout = static_cast<uint64_t>(*v);
      }
      if (auto v = p.integer("presend_threshold", false, 1)) {
        sp.presend_threshold = static_cast<uint64_t>(*v);
      }
      if (auto v = p.integer("max_ticks", false, 1)) sp.max_ticks = static_cast<uint64_t>(*v);
    } else {
      problems.push_back("params: expected a table");
    }
  }

  TopologyBuilder builder;
  std::map<std::string, StageId> stage_ids;
  auto stage_tables = tables(root, "stages", problems);
  if (stage_tables.empty()) problems.push_back("stages: at least one stage is required");
  for (size_t i = 0; i < stage_tables.size(); ++i) {
    const std::string path = "stages[" + std::to_string(i) + "]";
    Reader r(*stage_tables[i], path, problems);
    r.allow({"name", "nodes", "function", "params"});
    auto name = r.string("name", true);
    auto nodes = r.integer("nodes", true, 1);
    FunctionRef fn;
    fn.name = r.string("function").value_or("identity");
    if (const toml::node* pn = stage_tables[i]->get("params")) {
      if (const toml::table* pt = pn->as_table()) {
        for (const auto& [k, v] : *pt) {
          if (auto s = v.value<std::string>(); s && v.is_string()) {
            fn.params[std::string(k.str())] = *s;
          } else if (v.is_integer()) {
            fn.params[std::string(k.str())] = std::to_string(*v.value<int64_t>());
          } else if (v.is_floating_point()) {
            std::ostringstream os;
            os << *v.value<double>();
            fn.params[std::string(k.str())] = os.str();
          } else {
            problems.push_back(path + ".params." + std::string(k.str()) +
                               ": expected a string or number");
          }
        }
      } else {
        problems.push_back(path + ".params: expected a table");
      }
    }
    if (!name || !nodes) continue;
    if (stage_ids.contains(*name)) {
      problems.push_back(path + ".name: duplicate stage '" + *name + "'");
      continue;
    }
    if (!StageRegistry::builtin().contains(fn.name)) {
      problems.push_back(path + ".function: unknown stage function '" + fn.name + "'");
    }
    stage_ids[*name] = builder.new_stage(static_cast<uint32_t>(*nodes), fn, *name);
  }

  auto stream_tables = tables(root, "streams", problems);
  for (size_t i = 0; i < stream_tables.size(); ++i) {
    const std::string path = "streams[" + std::to_string(i) + "]";
    Reader r(*stream_tables[i], path, problems);
    r.allow({"name", "from", "to", "op"});
    auto name = r.string("name", true);
    auto from = r.string("from", true);
    auto to = r.string("to", true);
    auto op_text = r.string("op");
    std::optional<StreamOp> op = StreamOp::kNone;
    if (op_text) {
      op = parse_stream_op(upper(*op_text));
      if (!op) problems.push_back(path + ".op: unknown operation '" + *op_text + "'");
    }
    if (from && !stage_ids.contains(*from)) {
      problems.push_back(path + ".from: unknown stage '" + *from + "'");
      from.reset();
    }
    if (to && !stage_ids.contains(*to)) {
      problems.push_back(path + ".to: unknown stage '" + *to + "'");
      to.reset();
    }
    if (!name || !from || !to || !op) continue;
    try {
      builder.new_stream(*name);
      builder.new_output_stream(stage_ids[*from], *name);
      builder.new_input_stream(stage_ids[*to], *name, *op);
    } catch (const StreamError& e) {
      problems.push_back(path + ": " + e.what());
    }
  }

  auto gen_tables = tables(root, "generators", problems);
  for (size_t i = 0; i < gen_tables.size(); ++i) {
    const std::string path = "generators[" + std::to_string(i) + "]";
    Reader r(*gen_tables[i], path, problems);
    r.allow({"stage", "units", "windows", "distribution", "key_space", "zipf_s", "file",
             "value_range"});
    GeneratorSpec g;
    g.stage = r.string("stage", true).value_or("");
    if (!g.stage.empty() && !stage_ids.contains(g.stage)) {
      problems.push_back(path + ".stage: unknown stage '" + g.stage + "'");
    }
    const std::string dist = r.string("distribution").value_or("uniform");
    if (dist == "uniform") {
      g.distribution = KeyDistribution::kUniform;
    } else if (dist == "zipf") {
      g.distribution = KeyDistribution::kZipf;
    } else if (dist == "file") {
      g.distribution = KeyDistribution::kFile;
    } else {
      problems.push_back(path + ".distribution: expected uniform, zipf or file");
    }
    if (g.distribution == KeyDistribution::kFile) {
      auto file = r.string("file", true);
      if (file) {
        std::filesystem::path fp(*file);
        if (fp.is_relative()) fp = std::filesystem::path(base_dir) / fp;
        g.file = fp.string();
      }
    } else {
      if (auto v = r.integer("units", true, 0)) g.units = static_cast<uint64_t>(*v);
    }
    if (auto v = r.integer("windows", false, 1)) g.windows = static_cast<uint64_t>(*v);
    if (auto v = r.integer("key_space", false, 1)) g.key_space = static_cast<uint64_t>(*v);
    if (auto v = r.number("zipf_s")) {
      if (*v < 0) problems.push_back(path + ".zipf_s: must be >= 0");
      g.zipf_exponent = *v;
    }
    if (auto v = r.integer("value_range", false, 1)) {
      g.value_range = static_cast<uint64_t>(*v);
    }
    sc.generators.push_back(std::move(g));
  }

  auto node_target = [&](Reader& r, const std::string& path, std::string& stage,
                         uint32_t& node) {
    stage = r.string("stage", true).value_or("");
    auto n = r.integer("node", true, 0);
    if (n) node = static_cast<uint32_t>(*n);
    if (stage.empty()) return;
    if (!stage_ids.contains(stage)) {
      problems.push_back(path + ".stage: unknown stage '" + stage + "'");
    }
  };
  auto fail_tables = tables(root, "failures", problems);
  for (size_t i = 0; i < fail_tables.size(); ++i) {
    const std::string path = "failures[" + std::to_string(i) + "]";
    Reader r(*fail_tables[i], path, problems);
    r.allow({"stage", "node", "at_tick"});
    FailureSpec f;
    node_target(r, path, f.stage, f.node_index);
    if (auto v = r.integer("at_tick", true, 0)) f.at_tick = static_cast<uint64_t>(*v);
    sc.failures.push_back(std::move(f));
  }
  auto rate_tables = tables(root, "rates", problems);
  for (size_t i = 0; i < rate_tables.size(); ++i) {
    const std::string path = "rates[" + std::to_string(i) + "]";
    Reader r(*rate_tables[i], path, problems);
    r.allow({"stage", "node", "rate"});
    RateOverride o;
    node_target(r, path, o.stage, o.node_index);
    if (auto v = r.number("rate", true)) {
      if (*v <= 0) problems.push_back(path + ".rate: must be > 0");
      o.rate = *v;
    }
    sc.rates.push_back(std::move(o));
  }

  if (problems.empty()) {
    try {
      sc.topology = builder.build();
    } catch (const StreamError& e) {
      problems.push_back(std::string("topology: ") + e.what());
    }
  }
  if (problems.empty()) {
    auto node_count = [&](const std::string& stage) {
      return sc.topology.find_stage(stage)->node_count;
    };
    for (size_t i = 0; i < sc.generators.size(); ++i) {
      const StageDecl* st = sc.topology.find_stage(sc.generators[i].stage);
      if (!sc.topology.is_source(*st)) {
        problems.push_back("generators[" + std::to_string(i) + "].stage: '" + st->name +
                           "' has input streams and cannot be fed by a generator");
      }
    }
    for (size_t i = 0; i < sc.failures.size(); ++i) {
      if (sc.failures[i].node_index >= node_count(sc.failures[i].stage)) {
        problems.push_back("failures[" + std::to_string(i) + "].node: out of range");
      }
    }
    for (size_t i = 0; i < sc.rates.size(); ++i) {
      if (sc.rates[i].node_index >= node_count(sc.rates[i].stage)) {
        problems.push_back("rates[" + std::to_string(i) + "].node: out of range");
      }
    }
  }
  if (!problems.empty()) throw ScenarioError(std::move(problems));
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError({"cannot read scenario file: " + path});
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string dir = std::filesystem::path(path).parent_path().string();
  return parse_scenario(buf.str(), dir.empty() ? "." : dir);
}

}  // namespace streamweave

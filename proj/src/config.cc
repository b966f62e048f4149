/*
 * Copyright 2026 The FedOrtho Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "fot/config.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "fot/error.h"

namespace fot {
namespace {

std::string_view Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void BadValue(std::string_view key, std::string_view value,
                           std::string_view expected) {
  throw Error(ErrorCode::kConfigError, std::string(key) + ": cannot parse '" +
                                           std::string(value) + "' as " +
                                           std::string(expected));
}

std::size_t ParseCount(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    BadValue(key, v, "a non-negative integer");
  }
  return out;
}

uint64_t ParseU64(std::string_view key, std::string_view v) {
  uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    BadValue(key, v, "an unsigned integer");
  }
  return out;
}

double ParseReal(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    BadValue(key, v, "a real number");
  }
  return out;
}

bool ParseBool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  BadValue(key, v, "a boolean");
}

std::vector<std::size_t> ParseCountList(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const std::size_t comma = std::min(v.find(',', start), v.size());
    out.push_back(ParseCount(key, Trim(v.substr(start, comma - start))));
    start = comma + 1;
  }
  return out;
}

std::string FormatReal(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string FormatList(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define FOT_COUNT_FIELD(name, member)                                                \
  Field {                                                                            \
    name, [](ExperimentConfig& c, std::string_view v) { c.member = ParseCount(name, v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.member); }           \
  }
#define FOT_REAL_FIELD(name, member)                                                \
  Field {                                                                           \
    name, [](ExperimentConfig& c, std::string_view v) { c.member = ParseReal(name, v); }, \
        [](const ExperimentConfig& c) { return FormatReal(c.member); }              \
  }
#define FOT_BOOL_FIELD(name, member)                                                \
  Field {                                                                           \
    name, [](ExperimentConfig& c, std::string_view v) { c.member = ParseBool(name, v); }, \
        [](const ExperimentConfig& c) { return std::string(c.member ? "true" : "false"); } \
  }

const std::vector<Field>& Fields() {
  static const std::vector<Field> fields = {
      {"method",
       [](ExperimentConfig& c, std::string_view v) {
         if (v == "fot") {
           c.method = Method::kFot;
         } else if (v == "fedavg") {
           c.method = Method::kFedAvg;
         } else {
           BadValue("method", v, "fot|fedavg");
         }
       },
       [](const ExperimentConfig& c) { return std::string(MethodName(c.method)); }},
      {"benchmark",
       [](ExperimentConfig& c, std::string_view v) {
         if (v == "permuted_blobs") {
           c.benchmark = Benchmark::kPermutedBlobs;
         } else if (v == "split_blobs") {
           c.benchmark = Benchmark::kSplitBlobs;
         } else if (v == "permuted_csv") {
           c.benchmark = Benchmark::kPermutedCsv;
         } else if (v == "split_csv") {
           c.benchmark = Benchmark::kSplitCsv;
         } else {
           BadValue("benchmark", v, "permuted_blobs|split_blobs|permuted_csv|split_csv");
         }
       },
       [](const ExperimentConfig& c) -> std::string {
         switch (c.benchmark) {
           case Benchmark::kPermutedBlobs:
             return "permuted_blobs";
           case Benchmark::kSplitBlobs:
             return "split_blobs";
           case Benchmark::kPermutedCsv:
             return "permuted_csv";
           case Benchmark::kSplitCsv:
             return "split_csv";
         }
         return "";
       }},
      FOT_COUNT_FIELD("data.tasks", tasks),
      FOT_COUNT_FIELD("data.classes", classes),
      FOT_COUNT_FIELD("data.dim", dim),
      FOT_COUNT_FIELD("data.train_per_class", train_per_class),
      FOT_COUNT_FIELD("data.test_per_class", test_per_class),
      FOT_REAL_FIELD("data.separation", separation),
      FOT_REAL_FIELD("data.noise_std", noise_std),
      FOT_COUNT_FIELD("data.classes_per_task", classes_per_task),
      {"data.csv_path",
       [](ExperimentConfig& c, std::string_view v) { c.csv_path = std::string(v); },
       [](const ExperimentConfig& c) { return c.csv_path; }},
      FOT_COUNT_FIELD("data.csv_test_per_class", csv_test_per_class),
      FOT_BOOL_FIELD("data.normalize", normalize),
      {"partition",
       [](ExperimentConfig& c, std::string_view v) {
         if (v == "iid") {
           c.partition = PartitionScheme::kIid;
         } else if (v == "noniid") {
           c.partition = PartitionScheme::kNonIid;
         } else {
           BadValue("partition", v, "iid|noniid");
         }
       },
       [](const ExperimentConfig& c) {
         return std::string(c.partition == PartitionScheme::kIid ? "iid" : "noniid");
       }},
      FOT_COUNT_FIELD("shards_per_client", shards_per_client),
      FOT_COUNT_FIELD("clients", clients),
      FOT_REAL_FIELD("participation", participation),
      FOT_COUNT_FIELD("rounds_per_task", rounds_per_task),
      FOT_COUNT_FIELD("first_task_rounds", first_task_rounds),
      FOT_COUNT_FIELD("train.epochs", train.epochs),
      FOT_REAL_FIELD("train.lr", train.lr),
      FOT_COUNT_FIELD("train.batch_size", train.batch_size),
      {"model.hidden",
       [](ExperimentConfig& c, std::string_view v) {
         c.hidden = ParseCountList("model.hidden", v);
       },
       [](const ExperimentConfig& c) { return FormatList(c.hidden); }},
      FOT_REAL_FIELD("server_lr", server_lr),
      FOT_REAL_FIELD("gpse.threshold", gpse.threshold),
      FOT_REAL_FIELD("gpse.threshold_increment", gpse.threshold_increment),
      {"gpse.coverage",
       [](ExperimentConfig& c, std::string_view v) {
         const auto mode = ParseCoverageMode(v);
         if (!mode) BadValue("gpse.coverage", v, "as_written|complement");
         c.gpse.coverage = *mode;
       },
       [](const ExperimentConfig& c) { return std::string(CoverageModeName(c.gpse.coverage)); }},
      FOT_REAL_FIELD("gpse.drop_tol", gpse.drop_tol),
      FOT_REAL_FIELD("gpse.sampling_multiplier", sampling_multiplier),
      FOT_BOOL_FIELD("dp.enabled", dp.enabled),
      FOT_REAL_FIELD("dp.clip", dp.clip_bound),
      FOT_REAL_FIELD("dp.epsilon", dp.epsilon),
      FOT_REAL_FIELD("dp.delta", dp.delta),
      FOT_REAL_FIELD("dp.noise_std", dp.noise_std),
      FOT_BOOL_FIELD("freeze_first_layer", freeze_first_layer),
      {"seed", [](ExperimentConfig& c, std::string_view v) { c.seed = ParseU64("seed", v); },
       [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
      {"output_dir",
       [](ExperimentConfig& c, std::string_view v) { c.output_dir = std::string(v); },
       [](const ExperimentConfig& c) { return c.output_dir; }},
      FOT_BOOL_FIELD("eval_every_round", eval_every_round),
      FOT_COUNT_FIELD("workers", workers),
  };
  return fields;
}

#undef FOT_COUNT_FIELD
#undef FOT_REAL_FIELD
#undef FOT_BOOL_FIELD

}  // namespace

std::string_view MethodName(Method method) {
  return method == Method::kFot ? "fot" : "fedavg";
}

const std::vector<std::string>& ConfigKeys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const Field& f : Fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void SetConfigValue(ExperimentConfig& config, std::string_view key, std::string_view value) {
  for (const Field& f : Fields()) {
    if (f.key == key) {
      f.set(config, Trim(value));
      return;
    }
  }
  throw Error(ErrorCode::kConfigError, "unknown config key '" + std::string(key) + "'");
}

void ApplyOverride(ExperimentConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw Error(ErrorCode::kConfigError,
                "override '" + std::string(assignment) + "' is not key=value");
  }
  SetConfigValue(config, Trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

ExperimentConfig ParseConfig(std::string_view text) {
  ExperimentConfig config;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t end = std::min(text.find('\n', start), text.size());
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = Trim(line);
    if (line.empty()) continue;
    try {
      ApplyOverride(config, line);
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfigError,
                  "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

ExperimentConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfigError, "cannot open config " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return ParseConfig(buffer.str());
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfigError, path.string() + ": " + e.what());
  }
}

void ValidateConfig(const ExperimentConfig& c) {
  std::vector<std::string> problems;
  auto require = [&](bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  };
  require(c.tasks >= 1, "data.tasks must be >= 1");
  require(c.clients >= 1, "clients must be >= 1");
  require(c.participation > 0.0 && c.participation <= 1.0,
          "participation must lie in (0, 1]");
  require(c.rounds_per_task >= 1, "rounds_per_task must be >= 1");
  require(c.train.epochs >= 1, "train.epochs must be >= 1");
  require(c.train.batch_size >= 1, "train.batch_size must be >= 1");
  require(c.train.lr >= 0.0, "train.lr must be >= 0");
  require(!c.hidden.empty(), "model.hidden needs at least one layer");
  for (std::size_t h : c.hidden) require(h >= 1, "model.hidden widths must be >= 1");
  require(c.server_lr > 0.0, "server_lr must be > 0");
  require(c.sampling_multiplier > 0.0, "gpse.sampling_multiplier must be > 0");
  require(c.workers >= 1, "workers must be >= 1");
  require(c.shards_per_client >= 1, "shards_per_client must be >= 1");
  const bool blobs = c.benchmark == Benchmark::kPermutedBlobs ||
                     c.benchmark == Benchmark::kSplitBlobs;
  if (blobs) {
    require(c.classes >= 2, "data.classes must be >= 2");
    require(c.dim >= c.classes, "data.dim must be >= data.classes");
    require(c.train_per_class >= 1, "data.train_per_class must be >= 1");
    require(c.test_per_class >= 1, "data.test_per_class must be >= 1");
    require(c.noise_std >= 0.0, "data.noise_std must be >= 0");
  } else {
    require(!c.csv_path.empty(), "data.csv_path is required for csv benchmarks");
  }
  if (c.benchmark == Benchmark::kSplitBlobs) {
    require(c.classes_per_task >= 1 && c.classes % c.classes_per_task == 0,
            "data.classes must be divisible by data.classes_per_task");
    require(c.classes_per_task >= 1 && c.classes / c.classes_per_task == c.tasks,
            "data.tasks must equal data.classes / data.classes_per_task");
  }
  try {
    c.gpse.Validate(c.tasks);
  } catch (const Error& e) {
    problems.push_back(e.what());
  }
  try {
    DpConfig dp = c.dp;
    dp.client_count = c.clients;
    dp.Validate();
  } catch (const Error& e) {
    problems.push_back(e.what());
  }
  if (!problems.empty()) {
    std::string msg = "invalid configuration:";
    for (const std::string& p : problems) msg += "\n  - " + p;
    throw Error(ErrorCode::kConfigError, msg);
  }
}

std::vector<std::pair<std::string, std::string>> ConfigToKeyValues(
    const ExperimentConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Field& f : Fields()) out.emplace_back(f.key, f.get(config));
  return out;
}

}  // namespace fot

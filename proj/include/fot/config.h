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

#ifndef FOT_CONFIG_H_
#define FOT_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fot/client.h"
#include "fot/model.h"
#include "fot/server.h"

namespace fot {

enum class Method { kFot, kFedAvg };
enum class Benchmark { kPermutedBlobs, kSplitBlobs, kPermutedCsv, kSplitCsv };
enum class PartitionScheme { kIid, kNonIid };

// Defaults describe the desk-scale permuted blob benchmark.
struct ExperimentConfig {
  Method method = Method::kFot;

  Benchmark benchmark = Benchmark::kPermutedBlobs;
  std::size_t tasks = 3;
  std::size_t classes = 4;
  std::size_t dim = 20;
  std::size_t train_per_class = 100;
  std::size_t test_per_class = 100;
  double separation = 0.5;
  double noise_std = 0.1;
  std::size_t classes_per_task = 2;
  std::string csv_path;
  std::size_t csv_test_per_class = 100;
  bool normalize = false;

  PartitionScheme partition = PartitionScheme::kIid;
  std::size_t shards_per_client = 2;
  std::size_t clients = 8;
  double participation = 1.0;
  std::size_t rounds_per_task = 30;
  // 0 means the first task also uses rounds_per_task.
  std::size_t first_task_rounds = 0;

  TrainConfig train{.epochs = 1, .lr = 0.3, .batch_size = 64};
  std::vector<std::size_t> hidden{32, 32};
  double server_lr = 1.0;

  GpseConfig gpse;
  double sampling_multiplier = 1.0;
  DpConfig dp;
  bool freeze_first_layer = false;

  uint64_t seed = 1;
  std::string output_dir = "runs/default";
  bool eval_every_round = false;
  std::size_t workers = 1;

  std::size_t RoundsFor(TaskId task) const {
    return task == 0 && first_task_rounds > 0 ? first_task_rounds : rounds_per_task;
  }
};

std::string_view MethodName(Method method);

// Every accepted key, in manifest order.
const std::vector<std::string>& ConfigKeys();

// Sets one key from its textual value. Throws ConfigError for unknown keys
// or unparsable values.
void SetConfigValue(ExperimentConfig& config, std::string_view key, std::string_view value);
// "key=value".
void ApplyOverride(ExperimentConfig& config, std::string_view assignment);

// Flat `key = value` lines; `#` starts a comment.
ExperimentConfig ParseConfig(std::string_view text);
ExperimentConfig LoadConfig(const std::filesystem::path& path);

// Collects every violated constraint and throws one ConfigError listing
// them all.
void ValidateConfig(const ExperimentConfig& config);

// Resolved values of every key in ConfigKeys() order.
std::vector<std::pair<std::string, std::string>> ConfigToKeyValues(
    const ExperimentConfig& config);

}  // namespace fot

#endif  // FOT_CONFIG_H_

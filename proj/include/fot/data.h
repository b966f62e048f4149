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

#ifndef FOT_DATA_H_
#define FOT_DATA_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fot/model.h"

namespace fot {

struct TaskData {
  LabeledDataset train;
  LabeledDataset test;
  std::size_t class_count = 0;
};

enum class TaskKind { kPermuted, kSplit };

struct TaskSequence {
  TaskKind kind = TaskKind::kPermuted;
  std::vector<TaskData> tasks;

  std::size_t size() const { return tasks.size(); }
};

// Per-client index lists into one task's training set.
struct Partition {
  std::vector<std::vector<std::size_t>> clients;
};

// Gaussian clusters around separation * (random orthonormal directions).
// Labels are balanced and the sample order is shuffled.
LabeledDataset GenBaseBlobs(std::size_t classes, std::size_t dim, std::size_t per_class,
                            double separation, double noise_std, uint64_t seed);

// Stratified split: the first test_per_class samples of each class (in
// dataset order) go to test, the rest to train.
TaskData SplitTrainTest(const LabeledDataset& data, std::size_t test_per_class);

// Task 0 is the base; task t > 0 applies one fixed random feature
// permutation to both train and test.
TaskSequence GenPermutedTasks(const TaskData& base, std::size_t k_tasks, uint64_t seed);

// Shuffles the classes, chunks them, and re-indexes labels to
// 0..classes_per_task-1 within each task. Throws InvalidInput when the class
// count is not divisible.
TaskSequence GenSplitTasks(const TaskData& base, std::size_t classes_per_task,
                           uint64_t seed);

// Sort by label, cut into clients * shards_per_client contiguous shards,
// deal the shards at random.
Partition ShardNonIid(const LabeledDataset& data, std::size_t clients,
                      std::size_t shards_per_client, uint64_t seed);

// Random shuffle, sizes balanced within one.
Partition ShardIid(const LabeledDataset& data, std::size_t clients, uint64_t seed);

// Rows are `label,f1,...,fd`. Class count is max label + 1. With normalize
// the features are min-max scaled to [0, 1] over the whole file.
LabeledDataset LoadCsv(const std::filesystem::path& path, bool normalize = false);
void WriteCsv(const LabeledDataset& data, const std::filesystem::path& path);

// Applies a coordinate permutation: out[i] = in[perm[i]].
Matrix PermuteRows(const Matrix& features, std::span<const std::size_t> perm);

}  // namespace fot

#endif  // FOT_DATA_H_

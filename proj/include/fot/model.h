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

#ifndef FOT_MODEL_H_
#define FOT_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "fot/linalg.h"

namespace fot {

// Tasks are numbered from 0 in arrival order.
using TaskId = std::size_t;

// Features are stored column-per-sample (dim x n). sample_ids are global
// indices within the task's training set; they key the per-sample sketch
// randomness so that re-partitioning data across clients is invisible.
struct LabeledDataset {
  Matrix features;
  std::vector<std::size_t> labels;
  std::vector<uint64_t> sample_ids;
  std::size_t class_count = 0;

  LabeledDataset() = default;
  // sample_ids default to 0..n-1. Throws InvalidInput on inconsistent sizes
  // or out-of-range labels.
  LabeledDataset(Matrix features, std::vector<std::size_t> labels,
                 std::size_t class_count, std::vector<uint64_t> sample_ids = {});

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.rows(); }
  bool empty() const { return labels.empty(); }

  LabeledDataset Subset(std::span<const std::size_t> indices) const;
};

// Multi-head MLP. Every weight matrix has a trailing bias column that
// multiplies a constant-one row appended to the layer input.
struct MlpModel {
  std::vector<Matrix> trunk;
  std::map<TaskId, Matrix> heads;

  MlpModel() = default;
  // Seeded uniform init in +-sqrt(6 / (fan_in + fan_out)).
  MlpModel(std::size_t input_dim, std::span<const std::size_t> hidden,
           uint64_t seed);

  void AddHead(TaskId task, std::size_t classes, uint64_t seed);
  bool HasHead(TaskId task) const { return heads.contains(task); }
  // Throws UnknownTask.
  const Matrix& Head(TaskId task) const;
  Matrix& Head(TaskId task);

  std::size_t input_dim() const;
  std::size_t layer_count() const { return trunk.size(); }
  // Augmented input dimension d of every trunk layer.
  std::vector<std::size_t> LayerInputDims() const;
  bool AllFinite() const;
};

// Per-layer augmented inputs: inputs[l] is (in_l + 1) x n with a final row
// of ones.
struct CapturedActivations {
  std::vector<Matrix> inputs;
};

struct ForwardResult {
  Matrix logits;  // classes x n
  CapturedActivations captured;
};

// Weight delta or gradient with the same shapes as the trunk plus the head
// of one task.
struct Update {
  std::vector<Matrix> trunk;
  TaskId task = 0;
  Matrix head;

  static Update ZerosLike(const MlpModel& model, TaskId task);
  Update& operator+=(const Update& other);
  Update& operator*=(double s);
  bool AllFinite() const;
  double SquaredNorm() const;
};

struct Gradient {
  double loss = 0.0;
  Update grads;
};

struct TrainConfig {
  std::size_t epochs = 1;
  double lr = 0.01;
  std::size_t batch_size = 64;
};

// Appends a row of ones.
Matrix Augment(const Matrix& x);

ForwardResult Forward(const MlpModel& model, TaskId task, const Matrix& x);

// Mean softmax cross-entropy and its gradient w.r.t. all trunk layers and the
// task head.
Gradient Backward(const MlpModel& model, TaskId task, const Matrix& x,
                  std::span<const std::size_t> labels);

// Minibatch SGD on a copy of the model. Returns W_before - W_after.
Update LocalTrain(const MlpModel& model, TaskId task, const LabeledDataset& data,
                  const TrainConfig& config, uint64_t seed);

// Fraction of argmax-correct predictions; ties go to the lowest class.
double Evaluate(const MlpModel& model, TaskId task, const LabeledDataset& data);

}  // namespace fot

#endif  // FOT_MODEL_H_

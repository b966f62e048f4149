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

#ifndef FOT_CLIENT_H_
#define FOT_CLIENT_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "fot/linalg.h"
#include "fot/model.h"
#include "fot/subspace.h"

namespace fot {

// Holds the data of the task currently being learned and nothing else.
// Handing over a new task's data discards the previous one, which is how
// the continual constraint is enforced.
class ClientState {
 public:
  ClientState(std::size_t id, uint64_t seed) : id_(id), seed_(seed) {}

  std::size_t id() const { return id_; }
  uint64_t seed() const { return seed_; }

  // Tasks must arrive in increasing order.
  void BeginTask(TaskId task, LabeledDataset data);
  std::optional<TaskId> active_task() const { return active_task_; }
  // Throws NoData unless `task` is the active task.
  const LabeledDataset& Data(TaskId task) const;

 private:
  std::size_t id_;
  uint64_t seed_;
  std::optional<TaskId> active_task_;
  LabeledDataset data_;
};

// Regular local training on the active task. The seed schedule makes the
// result a pure function of (client seed, task, round).
Update LocalRound(const ClientState& state, const MlpModel& global_model, TaskId task,
                  const TrainConfig& config, std::size_t round);

struct DpConfig {
  bool enabled = false;
  double clip_bound = 1.0;
  double epsilon = 10.0;
  double delta = 1e-5;
  std::size_t client_count = 1;
  // 0 selects the smallest admissible value scaled by kAutoNoiseMargin.
  double noise_std = 0.0;

  static constexpr double kAutoNoiseMargin = 1.1;

  // ln(1.25/delta) / (epsilon^2 C).
  double MinNoiseVariance() const;
  double ResolvedNoiseStd() const;
  // Throws ConfigError when enabled and the noise is too small or a field is
  // out of range.
  void Validate() const;
};

struct SketchOptions {
  // s_l per trunk layer; empty means s_l = d_l.
  std::vector<std::size_t> sampling_dims;
  DpConfig dp;
  bool freeze_first_layer = false;
  // Shared across all clients: g_j is drawn from (sketch_seed, task, layer,
  // sample id), never from client identity.
  uint64_t sketch_seed = 0;
  // When > 0, every per-sample term x*_j g_j^T is rounded to a multiple of
  // 2^-bits and summed exactly in integers, so the secure sum is identical
  // for any partition of the samples. 0 accumulates in floating point.
  int grid_bits = 0;
};

// Client-local diagnostics that never leave the client.
struct SketchDiagnostics {
  std::vector<double> pre_noise_norms;  // per layer, 0 for skipped layers
};

// Randomized activation collection for one client.
Sketch CollectSketch(const ClientState& state, const MlpModel& global_model, TaskId task,
                     const OrthogonalSet& ortho, const SketchOptions& options,
                     SketchDiagnostics* diagnostics = nullptr);

// The standard-normal vector g_j of length `length` for one sample.
std::vector<double> SampleGaussian(uint64_t sketch_seed, TaskId task, std::size_t layer,
                                   uint64_t sample_id, std::size_t length);

// x * min(1, c / ||x||_F), with ||result||_F <= c guaranteed in floating point.
Matrix Clip(const Matrix& x, double c);

}  // namespace fot

#endif  // FOT_CLIENT_H_

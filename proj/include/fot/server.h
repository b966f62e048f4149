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

#ifndef FOT_SERVER_H_
#define FOT_SERVER_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fot/linalg.h"
#include "fot/model.h"
#include "fot/subspace.h"

namespace fot {

struct FedProjectOptions {
  double server_lr = 1.0;
  // Blocks the first trunk layer entirely (used after task 0 when the
  // first layer is frozen).
  bool freeze_first_layer = false;
};

// Averages the securely summed updates, removes from every trunk layer's
// delta the row components inside that layer's basis, and applies
// W <- W - mu * delta*. The task head gets the unprojected average.
MlpModel FedProject(const Update& updates_sum, std::size_t participating,
                    const OrthogonalSet& ortho, const MlpModel& model,
                    const FedProjectOptions& options = {});

// Plain FedAvg step: W <- W - mu * sum / participating.
MlpModel FedAverage(const Update& updates_sum, std::size_t participating,
                    const MlpModel& model, double server_lr = 1.0);

// How the already-covered share of the input enters the rank criterion.
enum class CoverageMode {
  // Adds ||X*||_F / ||X||_F literally.
  kAsWritten,
  // Adds 1 - ||X*||_F / ||X||_F, the fraction already covered.
  kComplement,
};

std::string_view CoverageModeName(CoverageMode mode);
std::optional<CoverageMode> ParseCoverageMode(std::string_view name);

// Smallest r with sqrt(sum_{i<r} s_i^2 / sum_i s_i^2) + coverage > th,
// capped at max_rank (and at the number of singular values).
std::size_t RankSelect(std::span<const double> singular_values, double ratio, double th,
                       CoverageMode mode, std::size_t max_rank);

// sqrt(residual_sq / total_sq), 0 when total_sq is 0.
double AggregateRatio(double residual_sq, double total_sq);

struct GpseConfig {
  double threshold = 0.94;
  double threshold_increment = 0.0;
  CoverageMode coverage = CoverageMode::kComplement;
  double drop_tol = kDefaultDropTolerance;

  double ThresholdFor(TaskId task) const {
    return threshold + threshold_increment * static_cast<double>(task);
  }
  // Throws ConfigError if a scheduled threshold leaves (0, 2].
  void Validate(std::size_t task_count) const;
};

struct GpseLayerLog {
  std::size_t layer = 0;
  bool skipped = false;
  double ratio = 0.0;
  std::size_t rank = 0;
  std::size_t basis_before = 0;
  std::size_t basis_after = 0;
};

// Expands the orthogonal set from the securely summed sketches: per layer
// SVD of A, rank selection, then Gram-Schmidt over [O | U_r].
OrthogonalSet GpseRound(std::span<const std::optional<LayerSketch>> sketch_sum,
                        const OrthogonalSet& ortho, const GpseConfig& config, TaskId task,
                        std::vector<GpseLayerLog>* log = nullptr);

}  // namespace fot

#endif  // FOT_SERVER_H_

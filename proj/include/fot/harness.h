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

#ifndef FOT_HARNESS_H_
#define FOT_HARNESS_H_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fot/config.h"
#include "fot/data.h"
#include "fot/model.h"
#include "fot/server.h"
#include "fot/subspace.h"

namespace fot {

// a(i, t): accuracy on task i after training task t, for i <= t.
class AccuracyMatrix {
 public:
  explicit AccuracyMatrix(std::size_t tasks = 0);

  std::size_t tasks() const { return tasks_; }
  // Throws InvalidInput for i > t, indices out of range or values outside
  // [0, 1].
  void Set(std::size_t i, std::size_t t, double accuracy);
  std::optional<double> Get(std::size_t i, std::size_t t) const;

  friend bool operator==(const AccuracyMatrix&, const AccuracyMatrix&) = default;

 private:
  std::size_t tasks_;
  std::vector<std::optional<double>> cells_;
};

// ACC over the first k tasks: mean of a(i, k-1), i < k.
double MetricAcc(const AccuracyMatrix& a, std::size_t k);
// FGT over the first k tasks: mean over i < k-1 of a(i, i) - a(i, k-1).
// Throws InvalidInput for k < 2.
double MetricFgt(const AccuracyMatrix& a, std::size_t k);

struct SubspaceEntry {
  std::size_t task = 0;
  std::size_t layer = 0;
  std::size_t basis_size = 0;
  std::size_t dim = 0;
  double utilization = 0.0;
};

struct SubspaceReport {
  std::vector<SubspaceEntry> entries;
};

struct RoundLog {
  std::size_t task = 0;
  std::size_t round = 0;
  std::size_t participants = 0;
  double update_norm = 0.0;
  // max over trunk layers of ||dW O||_F / max(1, ||dW||_F).
  double ortho_residual = 0.0;
  // Accuracy on the current task; only set with eval_every_round.
  std::optional<double> eval_accuracy;
};

struct GpseLog {
  std::size_t task = 0;
  std::vector<GpseLayerLog> layers;
  // Largest client sketch norm before DP noise (client-local diagnostic).
  double max_pre_noise_norm = 0.0;
};

struct PhaseTimes {
  double local_train = 0.0;
  double aggregation = 0.0;
  double projection = 0.0;
  double gpse = 0.0;
  double evaluation = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  AccuracyMatrix accuracy;
  SubspaceReport subspace;
  std::vector<RoundLog> rounds;
  std::vector<GpseLog> gpse;
  // Global model and orthogonal set at the end of each task (after GPSE).
  std::vector<MlpModel> task_models;
  std::vector<OrthogonalSet> task_bases;
  double acc = 0.0;
  // NaN for single-task runs.
  double fgt = 0.0;
  PhaseTimes times;
};

TaskSequence BuildBenchmark(const ExperimentConfig& config);

// Runs federated continual training end to end: per task, R_t rounds of
// local training, secure aggregation and FedProject (or FedAvg), then a
// GPSE round for FOT and evaluation of every task seen so far.
ExperimentResult RunExperiment(const ExperimentConfig& config);

// Writes accuracy_matrix.csv, metrics.csv, subspace.csv, rounds.csv and
// manifest.txt into out_dir, creating it when needed.
void WriteReports(const ExperimentResult& result, const std::filesystem::path& out_dir);

AccuracyMatrix ReadAccuracyCsv(const std::filesystem::path& path, std::size_t tasks);

struct SweepPoint {
  std::string value;
  double acc = 0.0;
  double fgt = 0.0;
  // Final basis utilization per trunk layer.
  std::vector<double> utilization;
};

struct SweepReport {
  std::string param;
  std::vector<SweepPoint> points;
  // Per layer: utilization non-decreasing along the given value order.
  std::vector<bool> layer_monotone;
  bool monotone = true;
};

SweepReport RunSweep(const ExperimentConfig& base, const std::string& param,
                     const std::vector<std::string>& values);
void WriteSweepReport(const SweepReport& report, const std::filesystem::path& out_dir);

}  // namespace fot

#endif  // FOT_HARNESS_H_

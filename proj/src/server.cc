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

#include "fot/server.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "fot/error.h"

namespace fot {

OrthogonalSet OrthogonalSet::EmptyFor(const MlpModel& model) {
  OrthogonalSet set;
  for (std::size_t d : model.LayerInputDims()) set.layers.emplace_back(d);
  return set;
}

void OrthogonalSet::CheckCompatible(const MlpModel& model) const {
  const std::vector<std::size_t> dims = model.LayerInputDims();
  if (dims.size() != layers.size()) {
    throw Error(ErrorCode::kInvalidInput, "orthogonal set has " +
                                              std::to_string(layers.size()) +
                                              " layers, model has " +
                                              std::to_string(dims.size()));
  }
  for (std::size_t l = 0; l < dims.size(); ++l) {
    if (layers[l].dim() != dims[l]) {
      throw Error(ErrorCode::kInvalidInput,
                  "layer " + std::to_string(l) + " basis dimension " +
                      std::to_string(layers[l].dim()) + " != input dimension " +
                      std::to_string(dims[l]));
    }
  }
}

namespace {

void CheckUpdate(const Update& sum, std::size_t participating, const MlpModel& model) {
  if (participating == 0) {
    throw Error(ErrorCode::kProtocolError, "no participating clients");
  }
  if (sum.trunk.size() != model.trunk.size()) {
    throw Error(ErrorCode::kInvalidInput, "update layer count does not match model");
  }
  if (!sum.AllFinite()) throw Error(ErrorCode::kInvalidInput, "non-finite update");
}

}  // namespace

MlpModel FedProject(const Update& updates_sum, std::size_t participating,
                    const OrthogonalSet& ortho, const MlpModel& model,
                    const FedProjectOptions& options) {
  CheckUpdate(updates_sum, participating, model);
  ortho.CheckCompatible(model);
  if (!(options.server_lr > 0.0)) {
    throw Error(ErrorCode::kInvalidInput, "server learning rate must be > 0");
  }
  const double inv = 1.0 / static_cast<double>(participating);
  MlpModel next = model;
  for (std::size_t l = 0; l < model.trunk.size(); ++l) {
    if (options.freeze_first_layer && l == 0) continue;
    const Matrix average = inv * updates_sum.trunk[l];
    const Matrix projected = ProjectRowsOut(ortho.layers[l], average);
    next.trunk[l] -= options.server_lr * projected;
  }
  next.Head(updates_sum.task) -= options.server_lr * (inv * updates_sum.head);
  return next;
}

MlpModel FedAverage(const Update& updates_sum, std::size_t participating,
                    const MlpModel& model, double server_lr) {
  CheckUpdate(updates_sum, participating, model);
  const double inv = 1.0 / static_cast<double>(participating);
  MlpModel next = model;
  for (std::size_t l = 0; l < model.trunk.size(); ++l) {
    next.trunk[l] -= server_lr * (inv * updates_sum.trunk[l]);
  }
  next.Head(updates_sum.task) -= server_lr * (inv * updates_sum.head);
  return next;
}

std::string_view CoverageModeName(CoverageMode mode) {
  return mode == CoverageMode::kAsWritten ? "as_written" : "complement";
}

std::optional<CoverageMode> ParseCoverageMode(std::string_view name) {
  if (name == "as_written") return CoverageMode::kAsWritten;
  if (name == "complement") return CoverageMode::kComplement;
  return std::nullopt;
}

std::size_t RankSelect(std::span<const double> singular_values, double ratio, double th,
                       CoverageMode mode, std::size_t max_rank) {
  double total = 0.0;
  for (std::size_t i = 0; i < singular_values.size(); ++i) {
    const double s = singular_values[i];
    if (!(s >= 0.0)) throw Error(ErrorCode::kInvalidInput, "negative singular value");
    if (i > 0 && s > singular_values[i - 1]) {
      throw Error(ErrorCode::kInvalidInput, "singular values must be descending");
    }
    total += s * s;
  }
  if (total == 0.0) return 0;
  const double coverage = mode == CoverageMode::kAsWritten ? ratio : 1.0 - ratio;
  const std::size_t cap = std::min(max_rank, singular_values.size());
  double captured = 0.0;
  for (std::size_t r = 0; r <= cap; ++r) {
    if (r > 0) captured += singular_values[r - 1] * singular_values[r - 1];
    if (std::sqrt(captured / total) + coverage > th) return r;
  }
  return cap;
}

double AggregateRatio(double residual_sq, double total_sq) {
  if (residual_sq < 0.0 || total_sq < 0.0 || !std::isfinite(residual_sq) ||
      !std::isfinite(total_sq)) {
    throw Error(ErrorCode::kInvalidInput, "squared norms must be finite and >= 0");
  }
  if (total_sq == 0.0) return 0.0;
  // Fixed-point transport can push the residual a hair above the total.
  return std::min(1.0, std::sqrt(residual_sq / total_sq));
}

void GpseConfig::Validate(std::size_t task_count) const {
  for (std::size_t t = 0; t < std::max<std::size_t>(task_count, 1); ++t) {
    const double th = ThresholdFor(t);
    if (!(th > 0.0 && th <= 2.0)) {
      throw Error(ErrorCode::kConfigError,
                  "threshold for task " + std::to_string(t) + " is " +
                      std::to_string(th) + ", must lie in (0, 2]");
    }
  }
  if (!(drop_tol > 0.0)) throw Error(ErrorCode::kConfigError, "drop_tol must be > 0");
}

OrthogonalSet GpseRound(std::span<const std::optional<LayerSketch>> sketch_sum,
                        const OrthogonalSet& ortho, const GpseConfig& config, TaskId task,
                        std::vector<GpseLayerLog>* log) {
  if (sketch_sum.size() != ortho.layer_count()) {
    throw Error(ErrorCode::kInvalidInput, "sketch layer count does not match the set");
  }
  OrthogonalSet next = ortho;
  const double th = config.ThresholdFor(task);
  for (std::size_t l = 0; l < sketch_sum.size(); ++l) {
    GpseLayerLog entry;
    entry.layer = l;
    entry.basis_before = ortho.layers[l].size();
    entry.basis_after = entry.basis_before;
    const auto& layer = sketch_sum[l];
    if (!layer || layer->total_sq == 0.0) {
      entry.skipped = true;
      if (log) log->push_back(entry);
      continue;
    }
    if (!layer->a.AllFinite()) {
      throw Error(ErrorCode::kInvalidInput, "non-finite sketch at layer " + std::to_string(l));
    }
    const OrthonormalBasis& basis = ortho.layers[l];
    if (layer->a.rows() != basis.dim()) {
      throw Error(ErrorCode::kInvalidInput, "sketch rows do not match basis dimension");
    }
    entry.ratio = AggregateRatio(layer->residual_sq, layer->total_sq);
    const SvdResult svd = Svd(layer->a);
    entry.rank = RankSelect(svd.s, entry.ratio, th, config.coverage,
                            basis.dim() - basis.size());
    if (entry.rank > 0) {
      const Matrix candidates = HStack(basis.vectors(), svd.u.Columns(0, entry.rank));
      next.layers[l] = GramSchmidt(candidates, config.drop_tol);
    }
    entry.basis_after = next.layers[l].size();
    if (log) log->push_back(entry);
  }
  return next;
}

}  // namespace fot

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

#include "fot/client.h"

#include <cmath>
#include <random>
#include <string>
#include <utility>

#include "fot/error.h"
#include "fot/rng.h"

namespace fot {

void ClientState::BeginTask(TaskId task, LabeledDataset data) {
  if (active_task_ && task <= *active_task_) {
    throw Error(ErrorCode::kInvalidInput,
                "client " + std::to_string(id_) + " cannot return to task " +
                    std::to_string(task));
  }
  active_task_ = task;
  data_ = std::move(data);
}

const LabeledDataset& ClientState::Data(TaskId task) const {
  if (!active_task_ || *active_task_ != task) {
    throw Error(ErrorCode::kNoData, "client " + std::to_string(id_) +
                                        " holds no data for task " +
                                        std::to_string(task));
  }
  return data_;
}

Update LocalRound(const ClientState& state, const MlpModel& global_model, TaskId task,
                  const TrainConfig& config, std::size_t round) {
  const LabeledDataset& data = state.Data(task);
  return LocalTrain(global_model, task, data, config,
                    DeriveSeed({state.seed(), task, round}));
}

double DpConfig::MinNoiseVariance() const {
  return std::log(1.25 / delta) /
         (epsilon * epsilon * static_cast<double>(client_count));
}

double DpConfig::ResolvedNoiseStd() const {
  if (noise_std > 0.0) return noise_std;
  return kAutoNoiseMargin * std::sqrt(MinNoiseVariance());
}

void DpConfig::Validate() const {
  if (!enabled) return;
  if (!(clip_bound > 0.0)) throw Error(ErrorCode::kConfigError, "dp.clip must be > 0");
  if (!(epsilon > 0.0)) throw Error(ErrorCode::kConfigError, "dp.epsilon must be > 0");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw Error(ErrorCode::kConfigError, "dp.delta must lie in (0, 1)");
  }
  if (client_count == 0) throw Error(ErrorCode::kConfigError, "dp needs clients");
  const double sigma = ResolvedNoiseStd();
  if (!(sigma * sigma > MinNoiseVariance())) {
    throw Error(ErrorCode::kConfigError,
                "dp.noise_std " + std::to_string(sigma) +
                    " too small: variance must exceed " +
                    std::to_string(MinNoiseVariance()));
  }
}

std::vector<double> SampleGaussian(uint64_t sketch_seed, TaskId task, std::size_t layer,
                                   uint64_t sample_id, std::size_t length) {
  std::mt19937_64 engine(DeriveSeed({sketch_seed, stream::kSketch, task, layer, sample_id}));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> g(length);
  for (double& x : g) x = normal(engine);
  return g;
}

Matrix Clip(const Matrix& x, double c) {
  if (!(c > 0.0)) throw Error(ErrorCode::kInvalidInput, "clip bound must be > 0");
  const double norm = FrobeniusNorm(x);
  if (norm <= c) return x;
  double scale = c / norm;
  Matrix out = scale * x;
  while (FrobeniusNorm(out) > c) {
    scale = std::nextafter(scale, 0.0);
    out = scale * x;
  }
  return out;
}

namespace {

Matrix AccumulateFloat(const Matrix& projected, std::span<const uint64_t> ids,
                       uint64_t seed, TaskId task, std::size_t layer, std::size_t s) {
  const std::size_t d = projected.rows();
  Matrix a(d, s);
  for (std::size_t j = 0; j < projected.cols(); ++j) {
    const std::vector<double> g = SampleGaussian(seed, task, layer, ids[j], s);
    for (std::size_t r = 0; r < d; ++r) {
      const double x = projected(r, j);
      if (x == 0.0) continue;
      auto row = a.row(r);
      for (std::size_t c = 0; c < s; ++c) row[c] += x * g[c];
    }
  }
  return a;
}

Matrix AccumulateOnGrid(const Matrix& projected, std::span<const uint64_t> ids,
                        uint64_t seed, TaskId task, std::size_t layer, std::size_t s,
                        int bits) {
  const std::size_t d = projected.rows();
  const double scale = std::ldexp(1.0, bits);
  std::vector<int64_t> acc(d * s, 0);
  for (std::size_t j = 0; j < projected.cols(); ++j) {
    const std::vector<double> g = SampleGaussian(seed, task, layer, ids[j], s);
    for (std::size_t r = 0; r < d; ++r) {
      const double x = projected(r, j);
      if (x == 0.0) continue;
      for (std::size_t c = 0; c < s; ++c) {
        acc[r * s + c] += std::llround(x * g[c] * scale);
      }
    }
  }
  Matrix a(d, s);
  for (std::size_t i = 0; i < acc.size(); ++i) {
    a.values()[i] = static_cast<double>(acc[i]) / scale;
  }
  return a;
}

}  // namespace

Sketch CollectSketch(const ClientState& state, const MlpModel& global_model, TaskId task,
                     const OrthogonalSet& ortho, const SketchOptions& options,
                     SketchDiagnostics* diagnostics) {
  const LabeledDataset& data = state.Data(task);
  ortho.CheckCompatible(global_model);
  const std::size_t layers = global_model.layer_count();
  if (!options.sampling_dims.empty() && options.sampling_dims.size() != layers) {
    throw Error(ErrorCode::kInvalidInput, "one sampling dimension per layer required");
  }
  options.dp.Validate();

  const CapturedActivations captured =
      Forward(global_model, task, data.features).captured;

  Sketch sketch;
  sketch.sample_count = data.size();
  sketch.layers.resize(layers);
  if (diagnostics) diagnostics->pre_noise_norms.assign(layers, 0.0);
  std::mt19937_64 noise_engine(DeriveSeed({state.seed(), stream::kDpNoise, task}));
  std::normal_distribution<double> normal(
      0.0, options.dp.enabled ? options.dp.ResolvedNoiseStd() : 1.0);

  for (std::size_t l = 0; l < layers; ++l) {
    if (options.freeze_first_layer && task > 0 && l == 0) continue;
    const Matrix& x = captured.inputs[l];
    const std::size_t s =
        options.sampling_dims.empty() ? x.rows() : options.sampling_dims[l];
    if (s == 0) throw Error(ErrorCode::kInvalidInput, "sampling dimension must be >= 1");
    const Matrix projected = ProjectOut(ortho.layers[l], x);

    LayerSketch layer;
    layer.total_sq = SquaredNorm(x);
    layer.residual_sq = SquaredNorm(projected);
    layer.a = options.grid_bits > 0
                  ? AccumulateOnGrid(projected, data.sample_ids, options.sketch_seed,
                                     task, l, s, options.grid_bits)
                  : AccumulateFloat(projected, data.sample_ids, options.sketch_seed,
                                    task, l, s);
    if (options.dp.enabled) {
      layer.a = Clip(layer.a, options.dp.clip_bound);
      if (diagnostics) diagnostics->pre_noise_norms[l] = FrobeniusNorm(layer.a);
      for (double& v : layer.a.values()) v += normal(noise_engine);
    } else if (diagnostics) {
      diagnostics->pre_noise_norms[l] = FrobeniusNorm(layer.a);
    }
    sketch.layers[l] = std::move(layer);
  }
  return sketch;
}

}  // namespace fot

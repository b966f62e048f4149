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

#include "fot/model.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <utility>

#include "fot/error.h"
#include "fot/rng.h"

namespace fot {
namespace {

Matrix UniformInit(std::size_t out, std::size_t in_aug, uint64_t seed) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in_aug - 1 + out));
  std::mt19937_64 engine(seed);
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix w(out, in_aug);
  for (double& x : w.values()) x = dist(engine);
  return w;
}

void Relu(Matrix& m) {
  for (double& x : m.values()) x = std::max(x, 0.0);
}

struct Trace {
  std::vector<Matrix> inputs;       // augmented input of each trunk layer
  std::vector<Matrix> pre;          // pre-activation of each trunk layer
  Matrix head_input;                // augmented input of the head
  Matrix logits;
};

Trace RunForward(const MlpModel& model, TaskId task, const Matrix& x) {
  const Matrix& head = model.Head(task);
  if (x.rows() != model.input_dim()) {
    throw Error(ErrorCode::kInvalidInput,
                "input dimension " + std::to_string(x.rows()) +
                    " does not match model input " +
                    std::to_string(model.input_dim()));
  }
  Trace trace;
  Matrix h = x;
  for (const Matrix& w : model.trunk) {
    trace.inputs.push_back(Augment(h));
    Matrix z = w * trace.inputs.back();
    h = z;
    Relu(h);
    trace.pre.push_back(std::move(z));
  }
  trace.head_input = Augment(h);
  trace.logits = head * trace.head_input;
  return trace;
}

// Drops the bias column: the part of W that multiplies the layer's real
// inputs.
Matrix WithoutBias(const Matrix& w) { return w.Columns(0, w.cols() - 1); }

}  // namespace

LabeledDataset::LabeledDataset(Matrix features_in, std::vector<std::size_t> labels_in,
                               std::size_t class_count_in,
                               std::vector<uint64_t> sample_ids_in)
    : features(std::move(features_in)),
      labels(std::move(labels_in)),
      sample_ids(std::move(sample_ids_in)),
      class_count(class_count_in) {
  if (features.cols() != labels.size()) {
    throw Error(ErrorCode::kInvalidInput, "feature columns and label count differ");
  }
  if (sample_ids.empty()) {
    sample_ids.resize(labels.size());
    std::iota(sample_ids.begin(), sample_ids.end(), uint64_t{0});
  }
  if (sample_ids.size() != labels.size()) {
    throw Error(ErrorCode::kInvalidInput, "sample id count and label count differ");
  }
  for (std::size_t y : labels) {
    if (y >= class_count) {
      throw Error(ErrorCode::kInvalidInput,
                  "label " + std::to_string(y) + " outside class range " +
                      std::to_string(class_count));
    }
  }
}

LabeledDataset LabeledDataset::Subset(std::span<const std::size_t> indices) const {
  Matrix f(dim(), indices.size());
  std::vector<std::size_t> y;
  std::vector<uint64_t> ids;
  y.reserve(indices.size());
  ids.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t j = indices[k];
    if (j >= size()) throw Error(ErrorCode::kInvalidInput, "subset index out of range");
    for (std::size_t r = 0; r < dim(); ++r) f(r, k) = features(r, j);
    y.push_back(labels[j]);
    ids.push_back(sample_ids[j]);
  }
  return LabeledDataset(std::move(f), std::move(y), class_count, std::move(ids));
}

MlpModel::MlpModel(std::size_t input_dim, std::span<const std::size_t> hidden,
                   uint64_t seed) {
  if (input_dim == 0 || hidden.empty()) {
    throw Error(ErrorCode::kInvalidInput, "model needs an input and a hidden layer");
  }
  std::size_t in = input_dim;
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    if (hidden[l] == 0) throw Error(ErrorCode::kInvalidInput, "zero-width layer");
    trunk.push_back(UniformInit(hidden[l], in + 1, DeriveSeed({seed, stream::kInit, l})));
    in = hidden[l];
  }
}

void MlpModel::AddHead(TaskId task, std::size_t classes, uint64_t seed) {
  if (trunk.empty()) throw Error(ErrorCode::kInvalidInput, "model has no trunk");
  if (classes == 0) throw Error(ErrorCode::kInvalidInput, "head needs a class");
  heads[task] = UniformInit(classes, trunk.back().rows() + 1,
                            DeriveSeed({seed, stream::kHead, task}));
}

const Matrix& MlpModel::Head(TaskId task) const {
  auto it = heads.find(task);
  if (it == heads.end()) {
    throw Error(ErrorCode::kUnknownTask, "no head for task " + std::to_string(task));
  }
  return it->second;
}

Matrix& MlpModel::Head(TaskId task) {
  auto it = heads.find(task);
  if (it == heads.end()) {
    throw Error(ErrorCode::kUnknownTask, "no head for task " + std::to_string(task));
  }
  return it->second;
}

std::size_t MlpModel::input_dim() const {
  return trunk.empty() ? 0 : trunk.front().cols() - 1;
}

std::vector<std::size_t> MlpModel::LayerInputDims() const {
  std::vector<std::size_t> dims;
  for (const Matrix& w : trunk) dims.push_back(w.cols());
  return dims;
}

bool MlpModel::AllFinite() const {
  return std::all_of(trunk.begin(), trunk.end(),
                     [](const Matrix& w) { return w.AllFinite(); }) &&
         std::all_of(heads.begin(), heads.end(),
                     [](const auto& kv) { return kv.second.AllFinite(); });
}

Update Update::ZerosLike(const MlpModel& model, TaskId task) {
  Update u;
  u.task = task;
  for (const Matrix& w : model.trunk) u.trunk.emplace_back(w.rows(), w.cols());
  const Matrix& head = model.Head(task);
  u.head = Matrix(head.rows(), head.cols());
  return u;
}

Update& Update::operator+=(const Update& other) {
  if (other.trunk.size() != trunk.size() || other.task != task) {
    throw Error(ErrorCode::kInvalidInput, "incompatible updates");
  }
  for (std::size_t l = 0; l < trunk.size(); ++l) trunk[l] += other.trunk[l];
  head += other.head;
  return *this;
}

Update& Update::operator*=(double s) {
  for (Matrix& m : trunk) m *= s;
  head *= s;
  return *this;
}

bool Update::AllFinite() const {
  return head.AllFinite() && std::all_of(trunk.begin(), trunk.end(), [](const Matrix& m) {
           return m.AllFinite();
         });
}

double Update::SquaredNorm() const {
  double acc = fot::SquaredNorm(head);
  for (const Matrix& m : trunk) acc += fot::SquaredNorm(m);
  return acc;
}

Matrix Augment(const Matrix& x) {
  Matrix out(x.rows() + 1, x.cols());
  std::copy(x.values().begin(), x.values().end(), out.values().begin());
  for (double& v : out.row(x.rows())) v = 1.0;
  return out;
}

ForwardResult Forward(const MlpModel& model, TaskId task, const Matrix& x) {
  Trace trace = RunForward(model, task, x);
  return {std::move(trace.logits), {std::move(trace.inputs)}};
}

Gradient Backward(const MlpModel& model, TaskId task, const Matrix& x,
                  std::span<const std::size_t> labels) {
  if (x.cols() == 0) throw Error(ErrorCode::kEmptyDataset, "empty batch");
  if (labels.size() != x.cols()) {
    throw Error(ErrorCode::kInvalidInput, "label count does not match batch");
  }
  const Trace trace = RunForward(model, task, x);
  const std::size_t n = x.cols();
  const std::size_t classes = trace.logits.rows();
  for (std::size_t y : labels) {
    if (y >= classes) {
      throw Error(ErrorCode::kInvalidInput, "label " + std::to_string(y) +
                                                " out of range for " +
                                                std::to_string(classes) + " classes");
    }
  }

  // dlogits = (softmax - onehot) / n
  Matrix dlogits(classes, n);
  double loss = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double mx = trace.logits(0, j);
    for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, trace.logits(c, j));
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) denom += std::exp(trace.logits(c, j) - mx);
    const double log_denom = std::log(denom);
    loss += log_denom - (trace.logits(labels[j], j) - mx);
    for (std::size_t c = 0; c < classes; ++c) {
      const double p = std::exp(trace.logits(c, j) - mx - log_denom);
      dlogits(c, j) = (p - (c == labels[j] ? 1.0 : 0.0)) / static_cast<double>(n);
    }
  }

  Gradient g;
  g.loss = loss / static_cast<double>(n);
  g.grads.task = task;
  g.grads.head = TimesTranspose(dlogits, trace.head_input);
  g.grads.trunk.resize(model.trunk.size());

  // Gradient w.r.t. the output of the last trunk layer (post-ReLU).
  Matrix dh = TransposeTimes(WithoutBias(model.Head(task)), dlogits);
  for (std::size_t l = model.trunk.size(); l-- > 0;) {
    Matrix dz = std::move(dh);
    const Matrix& pre = trace.pre[l];
    for (std::size_t i = 0; i < dz.size(); ++i) {
      if (pre.values()[i] <= 0.0) dz.values()[i] = 0.0;
    }
    g.grads.trunk[l] = TimesTranspose(dz, trace.inputs[l]);
    if (l > 0) dh = TransposeTimes(WithoutBias(model.trunk[l]), dz);
  }
  return g;
}

Update LocalTrain(const MlpModel& model, TaskId task, const LabeledDataset& data,
                  const TrainConfig& config, uint64_t seed) {
  if (data.empty()) throw Error(ErrorCode::kEmptyDataset, "local training without data");
  if (config.epochs == 0 || config.batch_size == 0) {
    throw Error(ErrorCode::kInvalidInput, "epochs and batch size must be >= 1");
  }
  MlpModel work = model;
  std::mt19937_64 engine(DeriveSeed({seed, stream::kTrain}));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), engine);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const LabeledDataset batch = data.Subset(idx);
      Gradient g = Backward(work, task, batch.features, batch.labels);
      for (std::size_t l = 0; l < work.trunk.size(); ++l) {
        work.trunk[l] -= config.lr * std::move(g.grads.trunk[l]);
      }
      work.Head(task) -= config.lr * std::move(g.grads.head);
    }
  }
  Update delta;
  delta.task = task;
  for (std::size_t l = 0; l < work.trunk.size(); ++l) {
    delta.trunk.push_back(model.trunk[l] - work.trunk[l]);
  }
  delta.head = model.Head(task) - work.Head(task);
  return delta;
}

double Evaluate(const MlpModel& model, TaskId task, const LabeledDataset& data) {
  if (data.empty()) throw Error(ErrorCode::kEmptyDataset, "evaluation without data");
  const Matrix logits = Forward(model, task, data.features).logits;
  std::size_t correct = 0;
  for (std::size_t j = 0; j < data.size(); ++j) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.rows(); ++c) {
      if (logits(c, j) > logits(best, j)) best = c;
    }
    if (best == data.labels[j]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace fot

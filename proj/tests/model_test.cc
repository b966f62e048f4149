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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "fot/linalg.h"
#include "test_util.h"

namespace fot {
namespace {

using testing::ThrownCode;
using testing::TinyDataset;

MlpModel MakeModel(std::size_t in, std::vector<std::size_t> hidden, std::size_t classes,
                   uint64_t seed) {
  MlpModel m(in, hidden, seed);
  m.AddHead(0, classes, seed + 1);
  return m;
}

// Straight loop re-implementation of the forward pass.
std::vector<double> OracleLogits(const MlpModel& m, TaskId task, std::vector<double> h) {
  auto layer = [](const Matrix& w, const std::vector<double>& in, bool relu) {
    std::vector<double> out(w.rows());
    for (std::size_t r = 0; r < w.rows(); ++r) {
      double z = w(r, w.cols() - 1);
      for (std::size_t c = 0; c + 1 < w.cols(); ++c) z += w(r, c) * in[c];
      out[r] = relu ? std::max(0.0, z) : z;
    }
    return out;
  };
  for (const Matrix& w : m.trunk) h = layer(w, h, true);
  return layer(m.Head(task), h, false);
}

TEST(LabeledDatasetTest, ValidatesShapesAndLabels) {
  EXPECT_EQ(ThrownCode([] { LabeledDataset(Matrix(2, 3), {0, 1}, 2); }),
            ErrorCode::kInvalidInput);
  EXPECT_EQ(ThrownCode([] { LabeledDataset(Matrix(2, 2), {0, 2}, 2); }),
            ErrorCode::kInvalidInput);
  const LabeledDataset d(Matrix(2, 3), {0, 1, 0}, 2);
  EXPECT_EQ(d.sample_ids, (std::vector<uint64_t>{0, 1, 2}));
  const std::vector<std::size_t> idx{2, 0};
  const LabeledDataset s = d.Subset(idx);
  EXPECT_EQ(s.sample_ids, (std::vector<uint64_t>{2, 0}));
  EXPECT_EQ(s.size(), 2u);
}

TEST(MlpModelTest, ShapesAndInitRange) {
  const std::vector<std::size_t> hidden{5, 4};
  MlpModel m(3, hidden, 1);
  ASSERT_EQ(m.layer_count(), 2u);
  EXPECT_EQ(m.trunk[0].rows(), 5u);
  EXPECT_EQ(m.trunk[0].cols(), 4u);
  EXPECT_EQ(m.trunk[1].rows(), 4u);
  EXPECT_EQ(m.trunk[1].cols(), 6u);
  EXPECT_EQ(m.LayerInputDims(), (std::vector<std::size_t>{4, 6}));
  const double bound = std::sqrt(6.0 / (3 + 5));  // fan_in excludes the bias
  for (double w : m.trunk[0].values()) EXPECT_LE(std::abs(w), bound);
  m.AddHead(2, 3, 9);
  EXPECT_TRUE(m.HasHead(2));
  EXPECT_EQ(m.Head(2).rows(), 3u);
  EXPECT_EQ(m.Head(2).cols(), 5u);
  EXPECT_EQ(ThrownCode([&] { m.Head(0); }), ErrorCode::kUnknownTask);
  EXPECT_EQ(MlpModel(3, hidden, 1).trunk, MlpModel(3, hidden, 1).trunk);
}

TEST(ForwardTest, ZeroWeightsGiveZeroLogits) {
  MlpModel m = MakeModel(3, {4, 4}, 3, 2);
  for (Matrix& w : m.trunk) w = Matrix(w.rows(), w.cols());
  m.Head(0) = Matrix(3, 5);
  const ForwardResult r = Forward(m, 0, GaussianMatrix(3, 6, 3));
  for (double v : r.logits.values()) EXPECT_EQ(v, 0.0);
}

TEST(ForwardTest, AugmentationVisible) {
  MlpModel m = MakeModel(2, {2}, 2, 4);
  m.trunk[0] = Matrix::FromRows({{1, 0, 0}, {0, 1, 0}});
  const ForwardResult r = Forward(m, 0, Matrix::FromRows({{2}, {-1}}));
  ASSERT_EQ(r.captured.inputs.size(), 1u);
  EXPECT_EQ(r.captured.inputs[0], Matrix::FromRows({{2}, {-1}, {1}}));
}

TEST(ForwardTest, MatchesLoopOracle) {
  const MlpModel m = MakeModel(4, {6, 5}, 3, 5);
  const Matrix x = GaussianMatrix(4, 7, 6);
  const ForwardResult r = Forward(m, 0, x);
  for (std::size_t j = 0; j < x.cols(); ++j) {
    std::vector<double> col(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) col[i] = x(i, j);
    const std::vector<double> want = OracleLogits(m, 0, col);
    for (std::size_t c = 0; c < want.size(); ++c) EXPECT_NEAR(r.logits(c, j), want[c], 1e-12);
  }
  for (const Matrix& in : r.captured.inputs) {
    EXPECT_EQ(in.cols(), x.cols());
    for (std::size_t j = 0; j < in.cols(); ++j) EXPECT_EQ(in(in.rows() - 1, j), 1.0);
  }
}

TEST(ForwardTest, Errors) {
  const MlpModel m = MakeModel(3, {4}, 2, 1);
  EXPECT_EQ(ThrownCode([&] { Forward(m, 1, Matrix(3, 1)); }), ErrorCode::kUnknownTask);
  EXPECT_EQ(ThrownCode([&] { Forward(m, 0, Matrix(2, 1)); }), ErrorCode::kInvalidInput);
}

TEST(BackwardTest, UniformLogitsLossIsLogC) {
  MlpModel m = MakeModel(3, {4}, 5, 7);
  m.Head(0) = Matrix(5, 5);
  const std::vector<std::size_t> labels{0, 3, 4};
  const Gradient g = Backward(m, 0, GaussianMatrix(3, 3, 8), labels);
  EXPECT_NEAR(g.loss, std::log(5.0), 1e-14);
}

double LossAt(const MlpModel& m, const Matrix& x, std::span<const std::size_t> y) {
  return Backward(m, 0, x, y).loss;
}

TEST(BackwardTest, FiniteDifferenceCheck) {
  MlpModel m = MakeModel(6, {8, 8, 8}, 4, 11);
  const Matrix x = GaussianMatrix(6, 10, 12);
  std::vector<std::size_t> y(10);
  for (std::size_t j = 0; j < y.size(); ++j) y[j] = (j * 7) % 4;
  const Gradient g = Backward(m, 0, x, y);

  // 100 random parameters spread over the trunk and the head.
  std::mt19937_64 engine(13);
  const double h = 1e-5;
  for (int probe = 0; probe < 100; ++probe) {
    const std::size_t which = engine() % (m.trunk.size() + 1);
    Matrix& w = which < m.trunk.size() ? m.trunk[which] : m.Head(0);
    const Matrix& grad = which < m.trunk.size() ? g.grads.trunk[which] : g.grads.head;
    const std::size_t r = engine() % w.rows();
    const std::size_t c = engine() % w.cols();
    const double saved = w(r, c);
    w(r, c) = saved + h;
    const double up = LossAt(m, x, y);
    w(r, c) = saved - h;
    const double down = LossAt(m, x, y);
    w(r, c) = saved;
    const double fd = (up - down) / (2 * h);
    EXPECT_LE(std::abs(grad(r, c) - fd) / std::max(1.0, std::abs(fd)), 1e-4)
        << "layer " << which << " (" << r << ", " << c << ")";
  }
}

TEST(BackwardTest, DuplicatedSamplesLeaveGradientUnchanged) {
  const MlpModel m = MakeModel(3, {5}, 3, 21);
  const Matrix x = GaussianMatrix(3, 4, 22);
  const std::vector<std::size_t> y{0, 1, 2, 1};
  const Matrix xx = HStack(x, x);
  std::vector<std::size_t> yy = y;
  yy.insert(yy.end(), y.begin(), y.end());
  const Gradient a = Backward(m, 0, x, y);
  const Gradient b = Backward(m, 0, xx, yy);
  EXPECT_NEAR(a.loss, b.loss, 1e-14);
  for (std::size_t l = 0; l < a.grads.trunk.size(); ++l) {
    EXPECT_LE(MaxAbsDiff(a.grads.trunk[l], b.grads.trunk[l]), 1e-14);
  }
  EXPECT_LE(MaxAbsDiff(a.grads.head, b.grads.head), 1e-14);
}

TEST(BackwardTest, LabelOutOfRange) {
  const MlpModel m = MakeModel(3, {5}, 3, 21);
  const std::vector<std::size_t> y{3};
  EXPECT_EQ(ThrownCode([&] { Backward(m, 0, Matrix(3, 1), y); }), ErrorCode::kInvalidInput);
}

TEST(LocalTrainTest, ZeroLearningRateGivesZeroUpdate) {
  const MlpModel m = MakeModel(4, {6}, 2, 31);
  const LabeledDataset d = TinyDataset(4, 2, 20, 32);
  const Update u = LocalTrain(m, 0, d, {.epochs = 2, .lr = 0.0, .batch_size = 3}, 1);
  EXPECT_EQ(u.SquaredNorm(), 0.0);
  EXPECT_EQ(u.task, 0u);
}

TEST(LocalTrainTest, SingleStepIsLrTimesGradient) {
  const MlpModel m = MakeModel(4, {6, 3}, 2, 41);
  const LabeledDataset d = TinyDataset(4, 2, 1, 42);
  const double lr = 0.07;
  const Update u = LocalTrain(m, 0, d, {.epochs = 1, .lr = lr, .batch_size = 8}, 5);
  const Gradient g = Backward(m, 0, d.features, d.labels);
  for (std::size_t l = 0; l < m.trunk.size(); ++l) {
    EXPECT_LE(MaxAbsDiff(u.trunk[l], lr * g.grads.trunk[l]), 1e-15);
  }
  EXPECT_LE(MaxAbsDiff(u.head, lr * g.grads.head), 1e-15);
}

TEST(LocalTrainTest, DeterministicAndDoesNotMutateModel) {
  const MlpModel m = MakeModel(4, {6}, 3, 51);
  const MlpModel copy = m;
  const LabeledDataset d = TinyDataset(4, 3, 30, 52);
  const TrainConfig cfg{.epochs = 2, .lr = 0.1, .batch_size = 4};
  const Update a = LocalTrain(m, 0, d, cfg, 9);
  const Update b = LocalTrain(m, 0, d, cfg, 9);
  EXPECT_EQ(a.trunk, b.trunk);
  EXPECT_EQ(a.head, b.head);
  EXPECT_EQ(m.trunk, copy.trunk);
  EXPECT_GT(a.SquaredNorm(), 0.0);
}

TEST(LocalTrainTest, Errors) {
  const MlpModel m = MakeModel(4, {6}, 3, 51);
  EXPECT_EQ(ThrownCode([&] { LocalTrain(m, 0, LabeledDataset(), {}, 1); }),
            ErrorCode::kEmptyDataset);
  const LabeledDataset d = TinyDataset(4, 3, 3, 1);
  EXPECT_EQ(ThrownCode([&] { LocalTrain(m, 0, d, {.epochs = 0}, 1); }),
            ErrorCode::kInvalidInput);
}

TEST(LocalTrainTest, TrainingReducesLoss) {
  MlpModel m = MakeModel(4, {8}, 2, 61);
  const LabeledDataset d = TinyDataset(4, 2, 40, 62);
  const double before = Backward(m, 0, d.features, d.labels).loss;
  const Update u = LocalTrain(m, 0, d, {.epochs = 5, .lr = 0.1, .batch_size = 8}, 3);
  for (std::size_t l = 0; l < m.trunk.size(); ++l) m.trunk[l] -= u.trunk[l];
  m.Head(0) -= u.head;
  EXPECT_LT(Backward(m, 0, d.features, d.labels).loss, before);
}

TEST(EvaluateTest, ConstantPredictor) {
  MlpModel m = MakeModel(2, {3}, 3, 71);
  m.Head(0) = Matrix(3, 4);
  m.Head(0)(1, 3) = 1.0;  // bias favours class 1
  const LabeledDataset d(GaussianMatrix(2, 5, 72), {1, 1, 1, 1, 1}, 3);
  EXPECT_EQ(Evaluate(m, 0, d), 1.0);
}

TEST(EvaluateTest, TiesGoToLowestClassAndCounts) {
  MlpModel m = MakeModel(2, {3}, 3, 73);
  m.Head(0) = Matrix(3, 4);  // all logits tie -> class 0
  const LabeledDataset d(GaussianMatrix(2, 4, 74), {0, 0, 0, 2}, 3);
  EXPECT_DOUBLE_EQ(Evaluate(m, 0, d), 0.75);
}

TEST(EvaluateTest, RandomLabelsNearChance) {
  const std::size_t c = 4;
  MlpModel m = MakeModel(5, {8}, c, 81);
  std::mt19937_64 engine(82);
  std::vector<std::size_t> labels(1000);
  for (auto& y : labels) y = engine() % c;
  const LabeledDataset d(GaussianMatrix(5, 1000, 83), labels, c);
  EXPECT_NEAR(Evaluate(m, 0, d), 1.0 / c, 0.1);
}

TEST(EvaluateTest, Errors) {
  const MlpModel m = MakeModel(2, {3}, 3, 1);
  EXPECT_EQ(ThrownCode([&] { Evaluate(m, 0, LabeledDataset()); }), ErrorCode::kEmptyDataset);
  const LabeledDataset d(Matrix(2, 1), {0}, 3);
  EXPECT_EQ(ThrownCode([&] { Evaluate(m, 4, d); }), ErrorCode::kUnknownTask);
}

TEST(UpdateTest, Arithmetic) {
  const MlpModel m = MakeModel(3, {4}, 2, 91);
  Update a = Update::ZerosLike(m, 0);
  EXPECT_EQ(a.SquaredNorm(), 0.0);
  a.trunk[0](0, 0) = 2.0;
  a.head(1, 1) = 1.0;
  Update b = a;
  b += a;
  b *= 0.5;
  EXPECT_EQ(b.trunk, a.trunk);
  EXPECT_EQ(b.SquaredNorm(), 5.0);
  Update other = Update::ZerosLike(MakeModel(3, {5}, 2, 1), 0);
  EXPECT_EQ(ThrownCode([&] { a += other; }), ErrorCode::kInvalidInput);
}

}  // namespace
}  // namespace fot

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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "fot/client.h"
#include "fot/linalg.h"
#include "test_util.h"

namespace fot {
namespace {

using testing::RandomBasis;
using testing::ThrownCode;

MlpModel MakeModel(uint64_t seed) {
  MlpModel m(5, std::vector<std::size_t>{6, 4}, seed);
  m.AddHead(0, 3, seed);
  return m;
}

Update RandomUpdate(const MlpModel& m, uint64_t seed) {
  Update u = Update::ZerosLike(m, 0);
  for (std::size_t l = 0; l < u.trunk.size(); ++l) {
    u.trunk[l] = GaussianMatrix(u.trunk[l].rows(), u.trunk[l].cols(), seed + l);
  }
  u.head = GaussianMatrix(u.head.rows(), u.head.cols(), seed + 100);
  return u;
}

OrthogonalSet RandomSet(const MlpModel& m, std::size_t k, uint64_t seed) {
  OrthogonalSet o;
  for (std::size_t d : m.LayerInputDims()) o.layers.push_back(RandomBasis(d, k, seed++));
  return o;
}

// Smallest r passing the inequality, evaluated term by term from scratch.
std::size_t OracleRank(const std::vector<double>& s, double coverage, double th,
                       std::size_t cap) {
  double total = 0.0;
  for (double v : s) total += v * v;
  if (total == 0.0) return 0;
  for (std::size_t r = 0; r <= std::min(cap, s.size()); ++r) {
    double head = 0.0;
    for (std::size_t i = 0; i < r; ++i) head += s[i] * s[i];
    if (std::sqrt(head / total) + coverage > th) return r;
  }
  return std::min(cap, s.size());
}

TEST(FedProjectTest, EmptySetEqualsFedAverage) {
  const MlpModel m = MakeModel(1);
  const Update sum = RandomUpdate(m, 2);
  const MlpModel a = FedProject(sum, 4, OrthogonalSet::EmptyFor(m), m);
  const MlpModel b = FedAverage(sum, 4, m);
  EXPECT_EQ(a.trunk, b.trunk);
  EXPECT_EQ(a.heads, b.heads);
  EXPECT_LE(MaxAbsDiff(b.trunk[0], m.trunk[0] - 0.25 * sum.trunk[0]), 1e-15);
}

TEST(FedProjectTest, FullSetBlocksTrunk) {
  const MlpModel m = MakeModel(3);
  OrthogonalSet full;
  for (std::size_t d : m.LayerInputDims()) full.layers.push_back(RandomBasis(d, d, d));
  const Update sum = RandomUpdate(m, 4);
  const MlpModel next = FedProject(sum, 2, full, m);
  for (std::size_t l = 0; l < m.trunk.size(); ++l) {
    EXPECT_LE(MaxAbsDiff(next.trunk[l], m.trunk[l]), 1e-14);
  }
  EXPECT_LE(MaxAbsDiff(next.Head(0), m.Head(0) - 0.5 * sum.head), 1e-15);
}

TEST(FedProjectTest, StepIsOrthogonalToBasis) {
  const MlpModel m = MakeModel(5);
  const OrthogonalSet o = RandomSet(m, 2, 6);
  const Update sum = RandomUpdate(m, 7);
  const MlpModel next = FedProject(sum, 3, o, m, {.server_lr = 0.7});
  for (std::size_t l = 0; l < m.trunk.size(); ++l) {
    const Matrix step = next.trunk[l] - m.trunk[l];
    EXPECT_LE(FrobeniusNorm(step * o.layers[l].vectors()), 1e-9);
    const Matrix want = -0.7 / 3.0 * ProjectRowsOut(o.layers[l], sum.trunk[l]);
    EXPECT_LE(MaxAbsDiff(step, want), 1e-14);
  }
}

TEST(FedProjectTest, FrozenFirstLayer) {
  const MlpModel m = MakeModel(8);
  const MlpModel next =
      FedProject(RandomUpdate(m, 9), 1, OrthogonalSet::EmptyFor(m), m, {.freeze_first_layer = true});
  EXPECT_EQ(next.trunk[0], m.trunk[0]);
  EXPECT_NE(next.trunk[1], m.trunk[1]);
}

TEST(FedProjectTest, Errors) {
  const MlpModel m = MakeModel(8);
  const Update sum = RandomUpdate(m, 1);
  EXPECT_EQ(ThrownCode([&] { FedProject(sum, 0, OrthogonalSet::EmptyFor(m), m); }),
            ErrorCode::kProtocolError);
  EXPECT_EQ(ThrownCode([&] { FedAverage(sum, 0, m); }), ErrorCode::kProtocolError);
  OrthogonalSet wrong;
  wrong.layers.emplace_back(3);
  EXPECT_EQ(ThrownCode([&] { FedProject(sum, 1, wrong, m); }), ErrorCode::kInvalidInput);
}

TEST(RankSelectTest, AsWrittenExamples) {
  const auto as_written = CoverageMode::kAsWritten;
  EXPECT_EQ(RankSelect(std::vector<double>{1, 0, 0}, 0.0, 0.9, as_written, 10), 1u);
  EXPECT_EQ(RankSelect(std::vector<double>{5, 3, 1}, 1.0, 0.99, as_written, 10), 0u);
  EXPECT_EQ(RankSelect(std::vector<double>{5, 3, 1}, 1.0, 1.0, as_written, 10), 1u);
  EXPECT_EQ(RankSelect(std::vector<double>{3, 2, 1}, 0.2, 0.95, as_written, 10), 1u);
  EXPECT_EQ(RankSelect(std::vector<double>{0, 0}, 0.3, 0.5, as_written, 10), 0u);
}

TEST(RankSelectTest, ComplementExamples) {
  const auto complement = CoverageMode::kComplement;
  // Nothing covered yet: plain energy criterion.
  EXPECT_EQ(RankSelect(std::vector<double>{1, 0, 0}, 1.0, 0.9, complement, 10), 1u);
  EXPECT_EQ(RankSelect(std::vector<double>{3, 2, 1}, 1.0, 0.95, complement, 10), 2u);
  // Almost everything covered: nothing to add.
  EXPECT_EQ(RankSelect(std::vector<double>{3, 2, 1}, 0.01, 0.95, complement, 10), 0u);
  // Threshold above what the energy can reach: capped.
  EXPECT_EQ(RankSelect(std::vector<double>{3, 2, 1}, 1.0, 1.5, complement, 2), 2u);
}

TEST(RankSelectTest, MatchesOracleOnRandomSpectra) {
  std::mt19937_64 engine(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> s(1 + engine() % 8);
    for (double& v : s) v = u(engine) * 10;
    std::sort(s.rbegin(), s.rend());
    const double ratio = u(engine);
    const double th = 0.05 + 1.9 * u(engine);
    const std::size_t cap = engine() % 10;
    for (auto mode : {CoverageMode::kAsWritten, CoverageMode::kComplement}) {
      const double coverage = mode == CoverageMode::kAsWritten ? ratio : 1 - ratio;
      EXPECT_EQ(RankSelect(s, ratio, th, mode, cap), OracleRank(s, coverage, th, cap));
    }
  }
}

TEST(RankSelectTest, RejectsUnsortedOrNegative) {
  EXPECT_EQ(ThrownCode([] {
              RankSelect(std::vector<double>{1, 2}, 0, 0.5, CoverageMode::kComplement, 2);
            }),
            ErrorCode::kInvalidInput);
  EXPECT_EQ(ThrownCode([] {
              RankSelect(std::vector<double>{1, -1}, 0, 0.5, CoverageMode::kComplement, 2);
            }),
            ErrorCode::kInvalidInput);
}

TEST(CoverageModeTest, NamesRoundTrip) {
  for (auto mode : {CoverageMode::kAsWritten, CoverageMode::kComplement}) {
    EXPECT_EQ(ParseCoverageMode(CoverageModeName(mode)), mode);
  }
  EXPECT_FALSE(ParseCoverageMode("sideways").has_value());
}

TEST(AggregateRatioTest, Examples) {
  EXPECT_EQ(AggregateRatio(3.0, 3.0), 1.0);
  EXPECT_EQ(AggregateRatio(0.0, 3.0), 0.0);
  EXPECT_EQ(AggregateRatio(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(AggregateRatio(1.0 + 3.0, 4.0 + 12.0), 0.5);
  EXPECT_EQ(ThrownCode([] { AggregateRatio(-1.0, 2.0); }), ErrorCode::kInvalidInput);
  EXPECT_EQ(ThrownCode([] { AggregateRatio(1.0, -2.0); }), ErrorCode::kInvalidInput);
}

TEST(AggregateRatioTest, SumOfSquaredNormsIsGlobalRatio) {
  const OrthonormalBasis o = RandomBasis(6, 2, 1);
  const Matrix x1 = GaussianMatrix(6, 9, 2);
  const Matrix x2 = GaussianMatrix(6, 4, 3);
  const double res = SquaredNorm(ProjectOut(o, x1)) + SquaredNorm(ProjectOut(o, x2));
  const double tot = SquaredNorm(x1) + SquaredNorm(x2);
  const Matrix both = HStack(x1, x2);
  EXPECT_NEAR(AggregateRatio(res, tot), FrobeniusNorm(ProjectOut(o, both)) / FrobeniusNorm(both),
              1e-14);
}

TEST(GpseConfigTest, ScheduleAndValidation) {
  GpseConfig cfg{.threshold = 0.9, .threshold_increment = 0.05};
  EXPECT_DOUBLE_EQ(cfg.ThresholdFor(2), 1.0);
  EXPECT_NO_THROW(cfg.Validate(3));
  EXPECT_EQ(ThrownCode([&] { cfg.Validate(30); }), ErrorCode::kConfigError);
  cfg = GpseConfig{.threshold = 0.0};
  EXPECT_EQ(ThrownCode([&] { cfg.Validate(1); }), ErrorCode::kConfigError);
  cfg = GpseConfig{.threshold = 2.0};
  EXPECT_NO_THROW(cfg.Validate(1));
}

// Server-side sketch of a data matrix x (d x n) against the current set.
LayerSketch SketchOf(const Matrix& x, const OrthonormalBasis& o, std::size_t s, uint64_t seed) {
  const Matrix projected = ProjectOut(o, x);
  return {projected * GaussianMatrix(x.cols(), s, seed), SquaredNorm(projected), SquaredNorm(x)};
}

TEST(GpseRoundTest, ZeroSketchLeavesSetUnchanged) {
  OrthogonalSet o;
  o.layers.push_back(RandomBasis(5, 2, 1));
  const std::vector<std::optional<LayerSketch>> sum{LayerSketch{Matrix(5, 5), 0.0, 7.0}};
  std::vector<GpseLayerLog> log;
  const OrthogonalSet next = GpseRound(sum, o, {}, 1, &log);
  EXPECT_EQ(next.layers[0].vectors(), o.layers[0].vectors());
  ASSERT_EQ(log.size(), 1u);
  EXPECT_EQ(log[0].rank, 0u);
  EXPECT_FALSE(log[0].skipped);
}

TEST(GpseRoundTest, LineDataRecoversTheLine) {
  const std::size_t d = 8;
  const Matrix dir = GaussianMatrix(d, 1, 3);
  const Matrix x = dir * GaussianMatrix(1, 40, 4);
  OrthogonalSet o;
  o.layers.emplace_back(d);
  const std::vector<std::optional<LayerSketch>> sum{SketchOf(x, o.layers[0], d, 5)};
  std::vector<GpseLayerLog> log;
  const OrthogonalSet next = GpseRound(sum, o, {.threshold = 0.9}, 0, &log);
  ASSERT_EQ(next.layers[0].size(), 1u);
  EXPECT_EQ(log[0].rank, 1u);
  EXPECT_DOUBLE_EQ(log[0].ratio, 1.0);
  const OrthonormalBasis truth(Svd(x).u.Columns(0, 1));
  EXPECT_LE(PrincipalAngles(truth, next.layers[0])[0], 1e-6);
}

TEST(GpseRoundTest, SecondRoundOnSameDataAddsNothing) {
  const std::size_t d = 10;
  const Matrix x = testing::LowRankSamples(d, 3, 60, 0.0, 11);
  OrthogonalSet o;
  o.layers.emplace_back(d);
  const GpseConfig cfg{.threshold = 0.999};
  o = GpseRound(std::vector<std::optional<LayerSketch>>{SketchOf(x, o.layers[0], d, 1)}, o, cfg,
                0);
  EXPECT_EQ(o.layers[0].size(), 3u);
  std::vector<GpseLayerLog> log;
  const OrthogonalSet again = GpseRound(
      std::vector<std::optional<LayerSketch>>{SketchOf(x, o.layers[0], d, 2)}, o, cfg, 1, &log);
  EXPECT_EQ(again.layers[0].size(), 3u);
  EXPECT_LE(log[0].ratio, 1e-7);
  EXPECT_EQ(log[0].rank, 0u);
}

TEST(GpseRoundTest, ExpansionIsMonotoneAndBounded) {
  const std::size_t d = 6;
  OrthogonalSet o;
  o.layers.emplace_back(d);
  std::size_t last = 0;
  for (TaskId t = 0; t < 6; ++t) {
    const Matrix x = GaussianMatrix(d, 30, 100 + t);
    o = GpseRound(std::vector<std::optional<LayerSketch>>{SketchOf(x, o.layers[0], d, t)}, o,
                  {.threshold = 0.95}, t);
    EXPECT_GE(o.layers[0].size(), last);
    EXPECT_LE(o.layers[0].size(), d);
    last = o.layers[0].size();
    EXPECT_NO_THROW(OrthonormalBasis(o.layers[0].vectors()));
  }
}

TEST(GpseRoundTest, SkipsMissingOrEmptyLayers) {
  OrthogonalSet o;
  o.layers.emplace_back(3);
  o.layers.emplace_back(4);
  const std::vector<std::optional<LayerSketch>> sum{std::nullopt,
                                                    LayerSketch{Matrix(4, 4), 0.0, 0.0}};
  std::vector<GpseLayerLog> log;
  GpseRound(sum, o, {}, 1, &log);
  ASSERT_EQ(log.size(), 2u);
  EXPECT_TRUE(log[0].skipped);
  EXPECT_TRUE(log[1].skipped);
}

TEST(GpseRoundTest, Errors) {
  OrthogonalSet o;
  o.layers.emplace_back(2);
  Matrix bad(2, 2, 1.0);
  bad(1, 1) = std::nan("");
  EXPECT_EQ(ThrownCode([&] {
              GpseRound(std::vector<std::optional<LayerSketch>>{LayerSketch{bad, 1, 1}}, o, {}, 0);
            }),
            ErrorCode::kInvalidInput);
  EXPECT_EQ(ThrownCode([&] {
              GpseRound(std::vector<std::optional<LayerSketch>>{LayerSketch{Matrix(3, 2), 1, 1}},
                        o, {}, 0);
            }),
            ErrorCode::kInvalidInput);
  EXPECT_EQ(ThrownCode([&] { GpseRound(std::vector<std::optional<LayerSketch>>{}, o, {}, 0); }),
            ErrorCode::kInvalidInput);
}

TEST(GpseRoundTest, PlantedSubspaceRecoveredThroughClients) {
  // End to end through client sketches: 3-dim planted subspace plus small
  // noise; the extracted basis matches the centralized top-3 subspace.
  const std::size_t d = 20;
  MlpModel m(d, std::vector<std::size_t>{4}, 1);
  m.AddHead(0, 2, 1);
  const Matrix all = testing::LowRankSamples(d, 3, 300, 1e-3, 21);
  OrthogonalSet o = OrthogonalSet::EmptyFor(m);
  Matrix bias(d + 1, 1);
  bias(d, 0) = 1.0;
  o.layers[0] = OrthonormalBasis(bias);
  const LabeledDataset data(all, std::vector<std::size_t>(300, 0), 2);

  std::optional<LayerSketch> sum;
  for (std::size_t c = 0; c < 3; ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t j = c; j < 300; j += 3) idx.push_back(j);
    ClientState client(c, c);
    client.BeginTask(0, data.Subset(idx));
    SketchOptions opt;
    opt.sampling_dims = {13};
    const LayerSketch s = *CollectSketch(client, m, 0, o, opt).layers[0];
    if (!sum) {
      sum = s;
    } else {
      sum->a += s.a;
      sum->residual_sq += s.residual_sq;
      sum->total_sq += s.total_sq;
    }
  }
  const OrthogonalSet next =
      GpseRound(std::vector<std::optional<LayerSketch>>{sum}, o, {.threshold = 0.99}, 0);
  ASSERT_EQ(next.layers[0].size(), 4u);
  const OrthonormalBasis got(next.layers[0].vectors().Columns(1, 4));
  const OrthonormalBasis truth(Svd(ProjectOut(o.layers[0], Augment(all))).u.Columns(0, 3));
  for (double a : PrincipalAngles(truth, got)) EXPECT_LE(a, 1e-2);
}

}  // namespace
}  // namespace fot

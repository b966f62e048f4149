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

#include "fot/harness.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>
#include <utility>

#include "fot/client.h"
#include "fot/error.h"
#include "fot/rng.h"
#include "fot/secagg.h"

namespace fot {
namespace {

constexpr uint64_t kClientStream = 0xc11e47;

template <typename Fn>
void ParallelFor(std::size_t n, std::size_t workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, n); ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

class Stopwatch {
 public:
  explicit Stopwatch(double& sink) : sink_(sink), start_(std::chrono::steady_clock::now()) {}
  ~Stopwatch() {
    sink_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  double& sink_;
  std::chrono::steady_clock::time_point start_;
};

std::vector<std::size_t> SampleParticipants(const ExperimentConfig& c, TaskId task,
                                            std::size_t round) {
  std::vector<std::size_t> all(c.clients);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto m = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(c.participation * static_cast<double>(c.clients))));
  if (m >= c.clients) return all;
  std::mt19937_64 engine(DeriveSeed({c.seed, stream::kParticipants, task, round}));
  std::shuffle(all.begin(), all.end(), engine);
  all.resize(m);
  std::sort(all.begin(), all.end());
  return all;
}

PayloadLayout UpdateLayout(const MlpModel& model, TaskId task) {
  std::vector<PayloadLayout::Shape> shapes;
  for (const Matrix& w : model.trunk) shapes.push_back({w.rows(), w.cols()});
  const Matrix& head = model.Head(task);
  shapes.push_back({head.rows(), head.cols()});
  return PayloadLayout(std::move(shapes));
}

std::vector<Matrix> UpdateBlocks(Update u) {
  std::vector<Matrix> blocks = std::move(u.trunk);
  blocks.push_back(std::move(u.head));
  return blocks;
}

Update UpdateFromBlocks(std::vector<Matrix> blocks, TaskId task) {
  Update u;
  u.task = task;
  u.head = std::move(blocks.back());
  blocks.pop_back();
  u.trunk = std::move(blocks);
  return u;
}

double OrthoResidual(const MlpModel& before, const MlpModel& after, const OrthogonalSet& ortho) {
  double worst = 0.0;
  for (std::size_t l = 0; l < before.trunk.size(); ++l) {
    const OrthonormalBasis& basis = ortho.layers[l];
    if (basis.empty()) continue;
    const Matrix delta = after.trunk[l] - before.trunk[l];
    const double leak = FrobeniusNorm(delta * basis.vectors());
    worst = std::max(worst, leak / std::max(1.0, FrobeniusNorm(delta)));
  }
  return worst;
}

std::vector<std::size_t> SamplingDims(const ExperimentConfig& c, const MlpModel& model) {
  std::vector<std::size_t> dims;
  for (std::size_t d : model.LayerInputDims()) {
    dims.push_back(std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(c.sampling_multiplier * static_cast<double>(d)))));
  }
  return dims;
}

// Runs one GPSE round over all clients through secure aggregation and
// returns the expanded set.
OrthogonalSet RunGpse(const ExperimentConfig& c, const std::vector<ClientState>& clients,
                      const MlpModel& model, TaskId task, const OrthogonalSet& ortho,
                      const FixedPointCodec& codec, GpseLog& log) {
  SketchOptions options;
  options.sampling_dims = SamplingDims(c, model);
  options.dp = c.dp;
  options.dp.client_count = c.clients;
  options.freeze_first_layer = c.freeze_first_layer;
  options.sketch_seed = DeriveSeed({c.seed, stream::kSketch});
  options.grid_bits = codec.fraction_bits();

  const std::size_t layers = model.layer_count();
  std::vector<bool> active(layers, true);
  if (c.freeze_first_layer && task > 0) active[0] = false;
  std::vector<PayloadLayout::Shape> shapes;
  const std::vector<std::size_t> dims = model.LayerInputDims();
  for (std::size_t l = 0; l < layers; ++l) {
    if (!active[l]) continue;
    shapes.push_back({dims[l], options.sampling_dims[l]});
    shapes.push_back({1, 2});
  }
  shapes.push_back({1, 1});
  const PayloadLayout layout(shapes);

  RoundSpec spec;
  spec.master_seed = DeriveSeed({c.seed, stream::kPairMask});
  spec.round_id = DeriveSeed({task, 0, 1});
  spec.participants.resize(clients.size());
  std::iota(spec.participants.begin(), spec.participants.end(), std::size_t{0});

  std::vector<MaskedPayload> masked(clients.size());
  std::vector<double> pre_noise(clients.size(), 0.0);
  ParallelFor(clients.size(), c.workers, [&](std::size_t k) {
    SketchDiagnostics diag;
    Sketch sketch = CollectSketch(clients[k], model, task, ortho, options, &diag);
    pre_noise[k] = *std::max_element(diag.pre_noise_norms.begin(), diag.pre_noise_norms.end());
    std::vector<Matrix> blocks;
    for (std::size_t l = 0; l < layers; ++l) {
      if (!active[l]) continue;
      LayerSketch& ls = *sketch.layers[l];
      blocks.push_back(std::move(ls.a));
      blocks.push_back(Matrix::FromRows({{ls.residual_sq, ls.total_sq}}));
    }
    blocks.push_back(Matrix::FromRows({{static_cast<double>(sketch.sample_count)}}));
    masked[k] = Mask(layout.Pack(blocks), k, spec, codec);
  });
  log.max_pre_noise_norm = *std::max_element(pre_noise.begin(), pre_noise.end());

  std::vector<Matrix> blocks =
      layout.Unpack(Aggregate(masked, spec, codec), clients.size());
  std::vector<std::optional<LayerSketch>> sums(layers);
  std::size_t b = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    if (!active[l]) continue;
    LayerSketch ls;
    ls.a = std::move(blocks[b++]);
    const Matrix& norms = blocks[b++];
    ls.residual_sq = std::max(0.0, norms(0, 0));
    ls.total_sq = std::max(0.0, norms(0, 1));
    sums[l] = std::move(ls);
  }
  log.task = task;
  return GpseRound(sums, ortho, c.gpse, task, &log.layers);
}

std::string Real(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::ofstream OpenForWrite(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  return out;
}

void CreateDir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorCode::kIoError, "cannot create " + dir.string() + ": " + ec.message());
  }
}

void CheckWritten(const std::ofstream& out, const std::filesystem::path& path) {
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

}  // namespace

AccuracyMatrix::AccuracyMatrix(std::size_t tasks) : tasks_(tasks), cells_(tasks * tasks) {}

void AccuracyMatrix::Set(std::size_t i, std::size_t t, double accuracy) {
  if (i > t || t >= tasks_) {
    throw Error(ErrorCode::kInvalidInput, "accuracy cell (" + std::to_string(i) + ", " +
                                              std::to_string(t) + ") out of range");
  }
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) {
    throw Error(ErrorCode::kInvalidInput, "accuracy must lie in [0, 1]");
  }
  cells_[i * tasks_ + t] = accuracy;
}

std::optional<double> AccuracyMatrix::Get(std::size_t i, std::size_t t) const {
  if (i >= tasks_ || t >= tasks_) return std::nullopt;
  return cells_[i * tasks_ + t];
}

double MetricAcc(const AccuracyMatrix& a, std::size_t k) {
  if (k == 0 || k > a.tasks()) throw Error(ErrorCode::kInvalidInput, "bad task count");
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const auto v = a.Get(i, k - 1);
    if (!v) {
      throw Error(ErrorCode::kInvalidInput,
                  "accuracy column " + std::to_string(k - 1) + " is incomplete");
    }
    sum += *v;
  }
  return sum / static_cast<double>(k);
}

double MetricFgt(const AccuracyMatrix& a, std::size_t k) {
  if (k < 2) throw Error(ErrorCode::kInvalidInput, "forgetting needs at least two tasks");
  if (k > a.tasks()) throw Error(ErrorCode::kInvalidInput, "bad task count");
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < k; ++i) {
    const auto just_trained = a.Get(i, i);
    const auto final = a.Get(i, k - 1);
    if (!just_trained || !final) {
      throw Error(ErrorCode::kInvalidInput, "accuracy matrix is incomplete");
    }
    sum += *just_trained - *final;
  }
  return sum / static_cast<double>(k - 1);
}

TaskSequence BuildBenchmark(const ExperimentConfig& c) {
  switch (c.benchmark) {
    case Benchmark::kPermutedBlobs:
    case Benchmark::kSplitBlobs: {
      const LabeledDataset base =
          GenBaseBlobs(c.classes, c.dim, c.train_per_class + c.test_per_class, c.separation,
                       c.noise_std, DeriveSeed({c.seed, stream::kData}));
      const TaskData split = SplitTrainTest(base, c.test_per_class);
      return c.benchmark == Benchmark::kPermutedBlobs
                 ? GenPermutedTasks(split, c.tasks, c.seed)
                 : GenSplitTasks(split, c.classes_per_task, c.seed);
    }
    case Benchmark::kPermutedCsv:
    case Benchmark::kSplitCsv: {
      const TaskData split =
          SplitTrainTest(LoadCsv(c.csv_path, c.normalize), c.csv_test_per_class);
      return c.benchmark == Benchmark::kPermutedCsv
                 ? GenPermutedTasks(split, c.tasks, c.seed)
                 : GenSplitTasks(split, c.classes_per_task, c.seed);
    }
  }
  throw Error(ErrorCode::kConfigError, "unknown benchmark");
}

ExperimentResult RunExperiment(const ExperimentConfig& config) {
  ValidateConfig(config);
  const TaskSequence seq = BuildBenchmark(config);
  const std::size_t task_count = seq.size();
  const bool fot = config.method == Method::kFot;

  ExperimentResult result;
  result.config = config;
  result.accuracy = AccuracyMatrix(task_count);

  MlpModel model(seq.tasks.front().train.dim(), config.hidden,
                 DeriveSeed({config.seed, stream::kInit}));
  OrthogonalSet ortho = OrthogonalSet::EmptyFor(model);
  std::vector<ClientState> clients;
  for (std::size_t c = 0; c < config.clients; ++c) {
    clients.emplace_back(c, DeriveSeed({config.seed, kClientStream, c}));
  }
  const FixedPointCodec codec;
  const uint64_t mask_seed = DeriveSeed({config.seed, stream::kPairMask});

  for (TaskId t = 0; t < task_count; ++t) {
    const TaskData& task = seq.tasks[t];
    model.AddHead(t, task.class_count, config.seed);
    const uint64_t partition_seed = DeriveSeed({config.seed, stream::kPartition, t});
    const Partition partition =
        config.partition == PartitionScheme::kIid
            ? ShardIid(task.train, config.clients, partition_seed)
            : ShardNonIid(task.train, config.clients, config.shards_per_client, partition_seed);
    for (std::size_t c = 0; c < config.clients; ++c) {
      if (partition.clients[c].empty()) {
        throw Error(ErrorCode::kEmptyDataset,
                    "client " + std::to_string(c) + " received no data for task " +
                        std::to_string(t));
      }
      clients[c].BeginTask(t, task.train.Subset(partition.clients[c]));
    }
    const PayloadLayout layout = UpdateLayout(model, t);
    FedProjectOptions project_options;
    project_options.server_lr = config.server_lr;
    project_options.freeze_first_layer = config.freeze_first_layer && t > 0;

    for (std::size_t r = 0; r < config.RoundsFor(t); ++r) {
      RoundSpec spec;
      spec.master_seed = mask_seed;
      spec.round_id = DeriveSeed({t, r, 0});
      spec.participants = SampleParticipants(config, t, r);

      std::vector<MaskedPayload> masked(spec.participants.size());
      {
        Stopwatch sw(result.times.local_train);
        ParallelFor(spec.participants.size(), config.workers, [&](std::size_t k) {
          const std::size_t id = spec.participants[k];
          Update u = LocalRound(clients[id], model, t, config.train, r);
          masked[k] = Mask(layout.Pack(UpdateBlocks(std::move(u))), id, spec, codec);
        });
      }
      Update sum;
      {
        Stopwatch sw(result.times.aggregation);
        sum = UpdateFromBlocks(
            layout.Unpack(Aggregate(masked, spec, codec), spec.participants.size()), t);
      }
      MlpModel next;
      {
        Stopwatch sw(result.times.projection);
        next = fot ? FedProject(sum, spec.participants.size(), ortho, model, project_options)
                   : FedAverage(sum, spec.participants.size(), model, config.server_lr);
      }
      RoundLog log;
      log.task = t;
      log.round = r;
      log.participants = spec.participants.size();
      double sq = 0.0;
      for (std::size_t l = 0; l < model.trunk.size(); ++l) {
        sq += SquaredNorm(next.trunk[l] - model.trunk[l]);
      }
      log.update_norm = std::sqrt(sq);
      log.ortho_residual = OrthoResidual(model, next, ortho);
      model = std::move(next);
      if (!model.AllFinite()) {
        throw Error(ErrorCode::kInvalidInput, "training diverged (non-finite weights)");
      }
      if (config.eval_every_round) {
        Stopwatch sw(result.times.evaluation);
        log.eval_accuracy = Evaluate(model, t, task.test);
      }
      result.rounds.push_back(log);
    }

    if (fot) {
      Stopwatch sw(result.times.gpse);
      GpseLog log;
      ortho = RunGpse(config, clients, model, t, ortho, codec, log);
      result.gpse.push_back(std::move(log));
    }
    result.task_models.push_back(model);
    result.task_bases.push_back(ortho);
    for (std::size_t l = 0; l < ortho.layer_count(); ++l) {
      const OrthonormalBasis& basis = ortho.layers[l];
      result.subspace.entries.push_back(
          {t, l, basis.size(), basis.dim(),
           static_cast<double>(basis.size()) / static_cast<double>(basis.dim())});
    }
    {
      Stopwatch sw(result.times.evaluation);
      for (TaskId i = 0; i <= t; ++i) {
        result.accuracy.Set(i, t, Evaluate(model, i, seq.tasks[i].test));
      }
    }
  }
  result.acc = MetricAcc(result.accuracy, task_count);
  result.fgt = task_count >= 2 ? MetricFgt(result.accuracy, task_count)
                               : std::numeric_limits<double>::quiet_NaN();
  return result;
}

void WriteReports(const ExperimentResult& result, const std::filesystem::path& out_dir) {
  CreateDir(out_dir);
  {
    const auto path = out_dir / "accuracy_matrix.csv";
    auto out = OpenForWrite(path);
    out << "task_eval,task_after,accuracy\n";
    for (std::size_t t = 0; t < result.accuracy.tasks(); ++t) {
      for (std::size_t i = 0; i <= t; ++i) {
        if (auto v = result.accuracy.Get(i, t)) out << i << ',' << t << ',' << Real(*v) << '\n';
      }
    }
    CheckWritten(out, path);
  }
  {
    const auto path = out_dir / "metrics.csv";
    auto out = OpenForWrite(path);
    out << "method,acc,fgt,seed\n"
        << MethodName(result.config.method) << ',' << Real(result.acc) << ','
        << Real(result.fgt) << ',' << result.config.seed << '\n';
    CheckWritten(out, path);
  }
  {
    const auto path = out_dir / "subspace.csv";
    auto out = OpenForWrite(path);
    out << "task,layer,basis_size,dim,utilization\n";
    for (const SubspaceEntry& e : result.subspace.entries) {
      out << e.task << ',' << e.layer << ',' << e.basis_size << ',' << e.dim << ','
          << Real(e.utilization) << '\n';
    }
    CheckWritten(out, path);
  }
  {
    const auto path = out_dir / "rounds.csv";
    auto out = OpenForWrite(path);
    out << "task,round,participants,update_norm,ortho_residual,eval_accuracy\n";
    for (const RoundLog& r : result.rounds) {
      out << r.task << ',' << r.round << ',' << r.participants << ',' << Real(r.update_norm)
          << ',' << Real(r.ortho_residual) << ','
          << (r.eval_accuracy ? Real(*r.eval_accuracy) : "") << '\n';
    }
    CheckWritten(out, path);
  }
  {
    const auto path = out_dir / "gpse.csv";
    auto out = OpenForWrite(path);
    out << "task,layer,skipped,ratio,rank,basis_before,basis_after\n";
    for (const GpseLog& g : result.gpse) {
      for (const GpseLayerLog& l : g.layers) {
        out << g.task << ',' << l.layer << ',' << (l.skipped ? 1 : 0) << ','
            << Real(l.ratio) << ',' << l.rank << ',' << l.basis_before << ','
            << l.basis_after << '\n';
      }
    }
    CheckWritten(out, path);
  }
  {
    const auto path = out_dir / "timing.csv";
    auto out = OpenForWrite(path);
    const PhaseTimes& t = result.times;
    out << "phase,seconds\n"
        << "local_train," << Real(t.local_train) << '\n'
        << "aggregation," << Real(t.aggregation) << '\n'
        << "projection," << Real(t.projection) << '\n'
        << "gpse," << Real(t.gpse) << '\n'
        << "evaluation," << Real(t.evaluation) << '\n';
    CheckWritten(out, path);
  }
  {
    const auto path = out_dir / "manifest.txt";
    auto out = OpenForWrite(path);
    out << "# resolved experiment configuration\n";
    for (const auto& [key, value] : ConfigToKeyValues(result.config)) {
      out << key << '=' << value << '\n';
    }
    if (result.config.dp.enabled) {
      DpConfig dp = result.config.dp;
      dp.client_count = result.config.clients;
      out << "# resolved dp.noise_std=" << Real(dp.ResolvedNoiseStd()) << '\n';
    }
    CheckWritten(out, path);
  }
}

AccuracyMatrix ReadAccuracyCsv(const std::filesystem::path& path, std::size_t tasks) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "task_eval,task_after,accuracy") {
    throw Error(ErrorCode::kParseError, path.string() + ": unexpected header");
  }
  AccuracyMatrix a(tasks);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::size_t i = 0;
    std::size_t t = 0;
    double v = 0.0;
    char c1 = 0;
    char c2 = 0;
    if (!(row >> i >> c1 >> t >> c2 >> v) || c1 != ',' || c2 != ',') {
      throw Error(ErrorCode::kParseError, path.string() + ":" + std::to_string(line_no) +
                                              ": malformed row");
    }
    a.Set(i, t, v);
  }
  return a;
}

SweepReport RunSweep(const ExperimentConfig& base, const std::string& param,
                     const std::vector<std::string>& values) {
  SweepReport report;
  report.param = param;
  for (const std::string& value : values) {
    ExperimentConfig cfg = base;
    SetConfigValue(cfg, param, value);
    const ExperimentResult r = RunExperiment(cfg);
    SweepPoint point;
    point.value = value;
    point.acc = r.acc;
    point.fgt = r.fgt;
    const OrthogonalSet& last = r.task_bases.back();
    for (const OrthonormalBasis& b : last.layers) {
      point.utilization.push_back(static_cast<double>(b.size()) / static_cast<double>(b.dim()));
    }
    report.points.push_back(std::move(point));
  }
  const std::size_t layers = report.points.empty() ? 0 : report.points.front().utilization.size();
  report.layer_monotone.assign(layers, true);
  for (std::size_t p = 1; p < report.points.size(); ++p) {
    for (std::size_t l = 0; l < layers; ++l) {
      if (report.points[p].utilization[l] < report.points[p - 1].utilization[l]) {
        report.layer_monotone[l] = false;
      }
    }
  }
  report.monotone = std::all_of(report.layer_monotone.begin(), report.layer_monotone.end(),
                                [](bool b) { return b; });
  return report;
}

void WriteSweepReport(const SweepReport& report, const std::filesystem::path& out_dir) {
  CreateDir(out_dir);
  const auto csv_path = out_dir / "sweep.csv";
  auto csv = OpenForWrite(csv_path);
  csv << "param,value,acc,fgt,layer,utilization\n";
  for (const SweepPoint& p : report.points) {
    for (std::size_t l = 0; l < p.utilization.size(); ++l) {
      csv << report.param << ',' << p.value << ',' << Real(p.acc) << ',' << Real(p.fgt) << ','
          << l << ',' << Real(p.utilization[l]) << '\n';
    }
  }
  CheckWritten(csv, csv_path);

  const auto txt_path = out_dir / "sweep_report.txt";
  auto txt = OpenForWrite(txt_path);
  txt << "param=" << report.param << '\n';
  for (std::size_t l = 0; l < report.layer_monotone.size(); ++l) {
    txt << "layer " << l << " utilization non-decreasing: "
        << (report.layer_monotone[l] ? "yes" : "no") << '\n';
  }
  txt << "monotone=" << (report.monotone ? "yes" : "no") << '\n';
  CheckWritten(txt, txt_path);
}

}  // namespace fot

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

#include "fot/data.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "fot/error.h"
#include "fot/rng.h"

namespace fot {
namespace {

std::vector<std::size_t> Iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

LabeledDataset Relabel(const LabeledDataset& data, std::span<const std::size_t> keep,
                       std::span<const std::size_t> new_label, std::size_t classes) {
  LabeledDataset sub = data.Subset(keep);
  for (std::size_t& y : sub.labels) y = new_label[y];
  return LabeledDataset(std::move(sub.features), std::move(sub.labels), classes,
                        std::move(sub.sample_ids));
}

LabeledDataset Permuted(const LabeledDataset& data, std::span<const std::size_t> perm) {
  return LabeledDataset(PermuteRows(data.features, perm), data.labels, data.class_count,
                        data.sample_ids);
}

}  // namespace

LabeledDataset GenBaseBlobs(std::size_t classes, std::size_t dim, std::size_t per_class,
                            double separation, double noise_std, uint64_t seed) {
  if (classes < 2 || dim < classes) {
    throw Error(ErrorCode::kInvalidInput, "blobs need classes >= 2 and dim >= classes");
  }
  const OrthonormalBasis centers =
      GramSchmidt(GaussianMatrix(dim, classes, DeriveSeed({seed, stream::kData, 0})));
  if (centers.size() != classes) {
    throw Error(ErrorCode::kInvalidInput, "degenerate center draw");
  }
  const std::size_t n = classes * per_class;
  std::vector<std::size_t> order = Iota(n);
  std::mt19937_64 engine(DeriveSeed({seed, stream::kData, 1}));
  std::shuffle(order.begin(), order.end(), engine);
  std::normal_distribution<double> normal(0.0, 1.0);

  Matrix features(dim, n);
  std::vector<std::size_t> labels(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t col = order[k];
    const std::size_t label = k / per_class;
    labels[col] = label;
    for (std::size_t r = 0; r < dim; ++r) {
      const double noise = noise_std > 0.0 ? noise_std * normal(engine) : 0.0;
      features(r, col) = separation * centers.vectors()(r, label) + noise;
    }
  }
  return LabeledDataset(std::move(features), std::move(labels), classes);
}

TaskData SplitTrainTest(const LabeledDataset& data, std::size_t test_per_class) {
  std::vector<std::size_t> taken(data.class_count, 0);
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  for (std::size_t j = 0; j < data.size(); ++j) {
    std::size_t& t = taken[data.labels[j]];
    if (t < test_per_class) {
      test_idx.push_back(j);
      ++t;
    } else {
      train_idx.push_back(j);
    }
  }
  TaskData out;
  out.class_count = data.class_count;
  out.train = data.Subset(train_idx);
  out.test = data.Subset(test_idx);
  // Ids index the training set of the task.
  std::iota(out.train.sample_ids.begin(), out.train.sample_ids.end(), uint64_t{0});
  std::iota(out.test.sample_ids.begin(), out.test.sample_ids.end(), uint64_t{0});
  return out;
}

Matrix PermuteRows(const Matrix& features, std::span<const std::size_t> perm) {
  if (perm.size() != features.rows()) {
    throw Error(ErrorCode::kInvalidInput, "permutation length does not match features");
  }
  Matrix out(features.rows(), features.cols());
  for (std::size_t r = 0; r < perm.size(); ++r) {
    std::copy(features.row(perm[r]).begin(), features.row(perm[r]).end(),
              out.row(r).begin());
  }
  return out;
}

TaskSequence GenPermutedTasks(const TaskData& base, std::size_t k_tasks, uint64_t seed) {
  if (k_tasks == 0) throw Error(ErrorCode::kInvalidInput, "need at least one task");
  TaskSequence seq;
  seq.kind = TaskKind::kPermuted;
  seq.tasks.push_back(base);
  std::mt19937_64 engine(DeriveSeed({seed, stream::kData, 2}));
  for (std::size_t t = 1; t < k_tasks; ++t) {
    std::vector<std::size_t> perm = Iota(base.train.dim());
    std::shuffle(perm.begin(), perm.end(), engine);
    seq.tasks.push_back(
        {Permuted(base.train, perm), Permuted(base.test, perm), base.class_count});
  }
  return seq;
}

TaskSequence GenSplitTasks(const TaskData& base, std::size_t classes_per_task,
                           uint64_t seed) {
  const std::size_t classes = base.class_count;
  if (classes_per_task == 0 || classes % classes_per_task != 0) {
    throw Error(ErrorCode::kInvalidInput,
                std::to_string(classes) + " classes are not divisible into tasks of " +
                    std::to_string(classes_per_task));
  }
  std::vector<std::size_t> order = Iota(classes);
  std::mt19937_64 engine(DeriveSeed({seed, stream::kData, 3}));
  std::shuffle(order.begin(), order.end(), engine);

  TaskSequence seq;
  seq.kind = TaskKind::kSplit;
  constexpr std::size_t kAbsent = std::numeric_limits<std::size_t>::max();
  for (std::size_t t = 0; t < classes / classes_per_task; ++t) {
    std::vector<std::size_t> new_label(classes, kAbsent);
    for (std::size_t k = 0; k < classes_per_task; ++k) {
      new_label[order[t * classes_per_task + k]] = k;
    }
    auto pick = [&](const LabeledDataset& d) {
      std::vector<std::size_t> keep;
      for (std::size_t j = 0; j < d.size(); ++j) {
        if (new_label[d.labels[j]] != kAbsent) keep.push_back(j);
      }
      LabeledDataset out = Relabel(d, keep, new_label, classes_per_task);
      std::iota(out.sample_ids.begin(), out.sample_ids.end(), uint64_t{0});
      return out;
    };
    seq.tasks.push_back({pick(base.train), pick(base.test), classes_per_task});
  }
  return seq;
}

Partition ShardNonIid(const LabeledDataset& data, std::size_t clients,
                      std::size_t shards_per_client, uint64_t seed) {
  const std::size_t shards = clients * shards_per_client;
  if (clients == 0 || shards_per_client == 0 || shards > data.size()) {
    throw Error(ErrorCode::kInvalidInput,
                "cannot cut " + std::to_string(data.size()) + " samples into " +
                    std::to_string(shards) + " shards");
  }
  std::vector<std::size_t> sorted = Iota(data.size());
  std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
    return data.labels[a] < data.labels[b];
  });
  std::vector<std::size_t> shard_ids = Iota(shards);
  std::mt19937_64 engine(DeriveSeed({seed, stream::kPartition, 0}));
  std::shuffle(shard_ids.begin(), shard_ids.end(), engine);

  Partition p;
  p.clients.resize(clients);
  for (std::size_t k = 0; k < shards; ++k) {
    const std::size_t shard = shard_ids[k];
    const std::size_t begin = shard * data.size() / shards;
    const std::size_t end = (shard + 1) * data.size() / shards;
    auto& dst = p.clients[k / shards_per_client];
    dst.insert(dst.end(), sorted.begin() + static_cast<std::ptrdiff_t>(begin),
               sorted.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return p;
}

Partition ShardIid(const LabeledDataset& data, std::size_t clients, uint64_t seed) {
  if (clients == 0) throw Error(ErrorCode::kInvalidInput, "need at least one client");
  std::vector<std::size_t> order = Iota(data.size());
  std::mt19937_64 engine(DeriveSeed({seed, stream::kPartition, 1}));
  std::shuffle(order.begin(), order.end(), engine);
  Partition p;
  p.clients.resize(clients);
  for (std::size_t c = 0; c < clients; ++c) {
    const std::size_t begin = c * data.size() / clients;
    const std::size_t end = (c + 1) * data.size() / clients;
    p.clients[c].assign(order.begin() + static_cast<std::ptrdiff_t>(begin),
                        order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return p;
}

LabeledDataset LoadCsv(const std::filesystem::path& path, bool normalize) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> labels;
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> fields;
    std::size_t start = 0;
    while (start <= line.size()) {
      const std::size_t comma = std::min(line.find(',', start), line.size());
      const std::string token = line.substr(start, comma - start);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
      if (token.empty() || ec != std::errc() || ptr != token.data() + token.size() ||
          !std::isfinite(v)) {
        throw Error(ErrorCode::kParseError, path.string() + ":" + std::to_string(line_no) +
                                                ": bad field '" + token + "'");
      }
      fields.push_back(v);
      start = comma + 1;
    }
    if (fields.size() < 2) {
      throw Error(ErrorCode::kParseError,
                  path.string() + ":" + std::to_string(line_no) + ": need label and features");
    }
    if (fields[0] < 0.0 || fields[0] != std::floor(fields[0])) {
      throw Error(ErrorCode::kParseError,
                  path.string() + ":" + std::to_string(line_no) + ": label must be a non-negative integer");
    }
    if (dim == 0) dim = fields.size() - 1;
    if (fields.size() - 1 != dim) {
      throw Error(ErrorCode::kParseError, path.string() + ":" + std::to_string(line_no) +
                                              ": expected " + std::to_string(dim) +
                                              " features");
    }
    labels.push_back(static_cast<std::size_t>(fields[0]));
    rows.emplace_back(fields.begin() + 1, fields.end());
  }
  if (rows.empty()) throw Error(ErrorCode::kEmptyDataset, path.string() + " has no rows");

  Matrix features(dim, rows.size());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    for (std::size_t r = 0; r < dim; ++r) features(r, j) = rows[j][r];
  }
  if (normalize) {
    const auto [lo, hi] =
        std::minmax_element(features.values().begin(), features.values().end());
    const double min = *lo;
    const double range = *hi - *lo;
    for (double& v : features.values()) v = range > 0.0 ? (v - min) / range : 0.0;
  }
  const std::size_t classes = *std::max_element(labels.begin(), labels.end()) + 1;
  return LabeledDataset(std::move(features), std::move(labels), classes);
}

void WriteCsv(const LabeledDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << std::setprecision(17);
  for (std::size_t j = 0; j < data.size(); ++j) {
    out << data.labels[j];
    for (std::size_t r = 0; r < data.dim(); ++r) out << ',' << data.features(r, j);
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

}  // namespace fot

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

// Command-line driver for federated orthogonal training experiments.
//
//   fot run --config exp.cfg [--set key=value]... [--out dir]
//   fot compare --configs a.cfg,b.cfg [--set key=value]...
//   fot sweep --config exp.cfg --param gpse.threshold --values 0.9,0.94,0.97
//
// FOT_SEED, when set, overrides the seed of every loaded config.
// Exit codes: 0 success, 2 bad configuration or arguments, 3 runtime failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fot/config.h"
#include "fot/error.h"
#include "fot/harness.h"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

fot::ExperimentConfig Load(const std::string& path, const std::vector<std::string>& overrides) {
  fot::ExperimentConfig cfg = path.empty() ? fot::ExperimentConfig{} : fot::LoadConfig(path);
  if (const char* env = std::getenv("FOT_SEED")) fot::SetConfigValue(cfg, "seed", env);
  for (const std::string& o : overrides) fot::ApplyOverride(cfg, o);
  fot::ValidateConfig(cfg);
  return cfg;
}

void PrintSummary(const fot::ExperimentResult& r) {
  std::cout << "method=" << fot::MethodName(r.config.method) << " seed=" << r.config.seed
            << " tasks=" << r.accuracy.tasks() << " acc=" << r.acc << " fgt=" << r.fgt << '\n';
  for (const fot::SubspaceEntry& e : r.subspace.entries) {
    if (e.task + 1 != r.accuracy.tasks()) continue;
    std::cout << "  layer " << e.layer << ": basis " << e.basis_size << "/" << e.dim << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated orthogonal training experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  CLI::App* run = app.add_subcommand("run", "Run one experiment and write its reports");
  run->add_option("--config", config_path, "Config file (key = value lines)");
  run->add_option("--set", overrides, "Override one key, key=value");
  run->add_option("--out", out_dir, "Output directory (default: output_dir from the config)");

  std::vector<std::string> compare_paths;
  CLI::App* compare = app.add_subcommand("compare", "Run several configs and tabulate ACC/FGT");
  compare->add_option("--configs", compare_paths, "Config files")->delimiter(',')->required();
  compare->add_option("--set", overrides, "Override applied to every config");

  std::string param;
  std::vector<std::string> values;
  CLI::App* sweep = app.add_subcommand("sweep", "Sweep one key and report basis utilization");
  sweep->add_option("--config", config_path, "Base config file");
  sweep->add_option("--set", overrides, "Override one key, key=value");
  sweep->add_option("--param", param, "Key to sweep")->required();
  sweep->add_option("--values", values, "Comma-separated values")->delimiter(',')->required();
  sweep->add_option("--out", out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      const fot::ExperimentConfig cfg = Load(config_path, overrides);
      const fot::ExperimentResult result = fot::RunExperiment(cfg);
      const std::filesystem::path dir = out_dir.empty() ? cfg.output_dir : out_dir;
      fot::WriteReports(result, dir);
      PrintSummary(result);
      std::cout << "reports written to " << dir.string() << '\n';
    } else if (*compare) {
      std::cout << "config,method,seed,acc,fgt\n";
      for (const std::string& path : compare_paths) {
        const fot::ExperimentConfig cfg = Load(path, overrides);
        const fot::ExperimentResult r = fot::RunExperiment(cfg);
        fot::WriteReports(r, cfg.output_dir);
        std::cout << path << ',' << fot::MethodName(cfg.method) << ',' << cfg.seed << ','
                  << r.acc << ',' << r.fgt << '\n';
      }
    } else if (*sweep) {
      const fot::ExperimentConfig cfg = Load(config_path, overrides);
      const fot::SweepReport report = fot::RunSweep(cfg, param, values);
      const std::filesystem::path dir =
          out_dir.empty() ? std::filesystem::path(cfg.output_dir) / "sweep"
                         : std::filesystem::path(out_dir);
      fot::WriteSweepReport(report, dir);
      for (const fot::SweepPoint& p : report.points) {
        std::cout << param << '=' << p.value << " acc=" << p.acc << " fgt=" << p.fgt
                  << " utilization=";
        for (std::size_t l = 0; l < p.utilization.size(); ++l) {
          std::cout << (l ? "," : "") << p.utilization[l];
        }
        std::cout << '\n';
      }
      std::cout << "monotone=" << (report.monotone ? "yes" : "no") << '\n';
    }
  } catch (const fot::Error& e) {
    std::cerr << "error [" << fot::ErrorCodeName(e.code()) << "]: " << e.what() << '\n';
    return e.code() == fot::ErrorCode::kConfigError ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "emt/ensemble.hpp"
#include "emt/eval.hpp"

namespace emt {

/// Straight 13-step, 8 mm line through the volume center, used by the
/// rotation sanity check.
TrajectorySpec default_trajectory(const GroundTruthGrid& grid);

struct SimulateOptions {
  std::string preset;  // "table1" or empty
  std::filesystem::path spec_path;
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
};

/// Writes grid.json, one CSV per environment and envs.json with the
/// calibrated specs; prints each dataset's raw displacement RMSE.
int cmd_simulate(const SimulateOptions& options, std::ostream& log);

struct TrainOptions {
  std::filesystem::path data_dir;
  std::filesystem::path out_path;
  EnsembleTrainConfig config;
  bool finetune = true;
  bool quiet = false;
};

int cmd_train(const TrainOptions& options, std::ostream& log);

struct EvaluateOptions {
  std::filesystem::path data_dir;
  std::filesystem::path ensemble_path;
  std::filesystem::path out_json = "report.json";
  std::filesystem::path out_table = "report.txt";
  Stage stage = Stage::raw;
  bool ablation = false;
  bool consistency = false;
  std::filesystem::path trajectory_csv;  // empty: skip the trajectory check
  std::string trajectory_env;            // default: first evaluation entry
  std::filesystem::path svg_dir;         // empty: no scatter plots
  // Ablation arm configuration.
  TrainConfig gan_base;
  int members = 10;
  std::uint64_t seed = 0;
  int jobs = 1;
};

/// Returns 0 iff every requested arm completed.
int cmd_evaluate(const EvaluateOptions& options, std::ostream& log);

int cmd_compensate(const std::filesystem::path& ensemble_path, std::istream& in,
                   std::ostream& out, std::ostream& err);

}  // namespace emt

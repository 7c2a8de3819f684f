#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emt/ensemble.hpp"
#include "emt/sim.hpp"

namespace emt {

enum class Stage { raw, cyclegan, cyclegan_ft };

std::string to_string(Stage s);
Stage stage_from_string(const std::string& s);

struct EvalCell {
  std::string method;
  std::string env_id;
  double rmse = 0.0;
  double stddev = 0.0;
  bool skipped = false;
  std::string note;
};

struct ConsistencySection {
  double raw_spread_mm = 0.0;
  double model_spread_mm = 0.0;
};

struct EvalReport {
  std::vector<EvalCell> cells;
  /// Scalar prediction uncertainty per method, averaged over all evaluation
  /// points.
  std::map<std::string, double> sigma_pred;
  std::optional<ConsistencySection> consistency;
  std::uint64_t master_seed = 0;
  std::string config_hash;
  std::vector<std::string> dataset_ids;
};

/// Applies the requested compensation stage per point, then summarizes
/// displacement errors per environment. Raw needs no model and ignores it.
std::vector<EvalCell> evaluate(const EnsembleModel* model,
                               std::span<const Dataset> datasets, Stage stage);

struct ConsistencyResult {
  double model_spread_mm = 0.0;
  double raw_spread_mm = 0.0;
};

/// Mean over shared grid indices of the max-min spread of compensated z
/// across environments; the raw spread serves as the baseline.
ConsistencyResult consistency_metric(const EnsembleModel& model,
                                     std::span<const Dataset> env_datasets);

struct TrajectorySpec {
  MeasurementPoint start;           // position in mm plus the true orientation
  std::array<double, 3> step_mm{};  // per-step displacement
  int steps = 13;

  void validate() const;
};

struct AngleSeries {
  std::vector<double> phi_x;
  std::vector<double> phi_y;
  std::vector<double> phi_z;
};

struct TrajectoryCheck {
  AngleSeries raw;
  AngleSeries compensated;
  /// Circular standard deviation in degrees, per angle (x, y, z order).
  std::array<double, 3> raw_circ_std{};
  std::array<double, 3> comp_circ_std{};
};

/// Circular standard deviation of a series of angles in degrees.
double circular_stddev_deg(std::span<const double> angles_deg);

/// Simulates distorted measurements along a straight trajectory, compensates
/// each, and compares the circular spread of each angle series.
TrajectoryCheck trajectory_rotation_check(const EnsembleModel& model,
                                          const TrajectorySpec& spec,
                                          const DistortionEnv& env);

// --- topology baseline -------------------------------------------------------

MlpLayout default_ann_layout();

struct AnnConfig {
  MlpLayout layout = default_ann_layout();
  TrainSchedule schedule;
  std::uint64_t base_seed = 0;
  int member_count = 10;
  /// Confines the corrections to the x-y plane (the z offset is forced to 0).
  bool confine_xy = false;
};

/// Feed-forward baseline that moves measured positions by a learned offset to
/// minimize pairwise displacement-distance error across all training
/// environments.
struct AnnModel {
  std::vector<MlpParams> members;
  NormalizationBounds bounds;
  AnnConfig config;
};

AnnModel ann_baseline_train(const AnnConfig& config,
                            std::span<const Dataset> train_data);

CompensatedPoint ann_predict(const AnnModel& model, const MeasurementPoint& p);

std::vector<EvalCell> ann_baseline_eval(const AnnModel& model,
                                        std::span<const Dataset> datasets);

// --- ablation ----------------------------------------------------------------

struct AblationConfig {
  TrainConfig gan_base;
  int gan_members = 10;
  AnnConfig ann;
  std::uint64_t master_seed = 0;
  int jobs = 1;
  std::string lab_env_id = "laboratory";
};

/// Runs raw, vanilla GAN, CycleGAN, CycleGAN + fine-tune and the ANN baseline
/// over shared datasets and seeds. A failing arm is recorded per cell and the
/// run continues.
EvalReport ablation_run(const AblationConfig& config,
                        std::span<const Dataset> datasets);

// --- report output -----------------------------------------------------------

std::string report_to_json_string(const EvalReport& report);
EvalReport report_from_json_string(const std::string& s);
void save_report_json(const EvalReport& report, const std::filesystem::path& path);

/// Aligned text table: one row per (method, environment) with RMSE, error
/// stddev and the per-method sigma_pred column.
std::string format_report_table(const EvalReport& report);

/// Scatter of compensated vs. reference points for one environment,
/// x against z.
void write_scatter_svg(const Dataset& reference, const Dataset& raw,
                       const std::vector<MeasurementPoint>& compensated,
                       const std::filesystem::path& path);

void write_trajectory_csv(const TrajectoryCheck& check,
                          const std::filesystem::path& path);

}  // namespace emt

#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "emt/common.hpp"

namespace emt {

inline constexpr int kChannels = 7;
using Vec7 = std::array<double, 7>;

/// Wraps an angle in degrees into [-180, 180).
double canonical_angle_deg(double a);

/// One tracker sample: position in mm, dimensionless quality estimate and
/// three orientation angles in degrees.
struct MeasurementPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double q = 0.0;
  double phi_x = 0.0;
  double phi_y = 0.0;
  double phi_z = 0.0;

  Vec7 channels() const { return {x, y, z, q, phi_x, phi_y, phi_z}; }
  static MeasurementPoint from_channels(const Vec7& v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
  }

  std::array<double, 3> position() const { return {x, y, z}; }

  /// Angles wrapped into [-180, 180); applied at ingestion.
  MeasurementPoint canonicalized() const;

  /// Throws DataError if q < 0 or any channel is non-finite.
  void validate() const;
};

struct GridIndex {
  int i = 0;
  int j = 0;
  int k = 0;
  auto operator<=>(const GridIndex&) const = default;
};

/// Stud lattice at known pitch and elevations; the ground-truth geometry
/// behind the displacement metric. Index (i,j,k) sits at
/// (i*pitch_xy, j*pitch_xy, z_layers[k]).
struct GroundTruthGrid {
  double pitch_xy = 8.0;
  std::vector<double> z_layers;
  int nx = 0;
  int ny = 0;

  int nz() const { return static_cast<int>(z_layers.size()); }
  void validate() const;
  bool contains(const GridIndex& g) const;
  std::array<double, 3> true_position(const GridIndex& g) const;
  double true_distance(const GridIndex& a, const GridIndex& b) const;
  std::vector<GridIndex> all_indices() const;
  std::array<double, 3> centroid() const;
};

enum class Role { train, validation, evaluation };

std::string to_string(Role role);
Role role_from_string(const std::string& s);

/// Labelled measurements for one environment, keyed by grid index.
struct Dataset {
  struct Sample {
    GridIndex index;
    MeasurementPoint point;
  };

  std::string env_id;
  Role role = Role::train;
  GroundTruthGrid grid;
  std::vector<Sample> samples;

  /// Unique indices, all within grid extent; points validated.
  void validate() const;
};

/// Per-channel [min, max] used to map points onto the unit interval.
struct NormalizationBounds {
  Vec7 min{};
  Vec7 max{};

  void validate() const;

  /// Channel ranges over all samples of the given datasets. Channels with
  /// a degenerate range are padded to +-0.5 around the value so the bounds
  /// stay valid.
  static NormalizationBounds from_datasets(std::span<const Dataset> datasets);
};

struct NormalizedPoint {
  Vec7 v{};
  bool out_of_range = false;
};

/// Maps channel i to (v_i - min_i) / (max_i - min_i). Values outside the
/// bounds are not clamped; the flag marks extrapolation.
NormalizedPoint normalize_point(const MeasurementPoint& p,
                                const NormalizationBounds& b);

MeasurementPoint denormalize_point(const Vec7& v, const NormalizationBounds& b);

enum class PairingRule { all_pairs, axis_neighbors };

/// |measured inter-point distance - true inter-point distance| for one pair.
struct DisplacementError {
  GridIndex index_a;
  GridIndex index_b;
  double measured_dist = 0.0;
  double true_dist = 0.0;
  double error = 0.0;
};

/// One entry per unordered sample pair (all_pairs) or per pair of samples
/// adjacent along a single grid axis (axis_neighbors).
std::vector<DisplacementError> displacement_errors(
    const Dataset& d, PairingRule pairing = PairingRule::all_pairs);

struct ErrorSummary {
  double rmse = 0.0;
  double stddev = 0.0;  // population standard deviation of the errors
};

ErrorSummary displacement_rmse(std::span<const DisplacementError> errors);

// --- file formats ---------------------------------------------------------
// Dataset CSV: header `env,role,i,j,k,x,y,z,q,phi_x,phi_y,phi_z`, one row per
// sample, '.' decimal separator. Grid metadata lives in a sidecar JSON.

void save_dataset_csv(const Dataset& d, const std::filesystem::path& path);

/// Parses one CSV file; rows are grouped by (env, role) so a file may carry
/// several datasets. Parse failures report the offending line number.
std::vector<Dataset> load_datasets_csv(const std::filesystem::path& path,
                                       const GroundTruthGrid& grid);

void save_grid_json(const GroundTruthGrid& grid,
                    const std::filesystem::path& path);
GroundTruthGrid load_grid_json(const std::filesystem::path& path);

/// Loads grid.json plus every *.csv in the directory.
std::vector<Dataset> load_dataset_dir(const std::filesystem::path& dir);

}  // namespace emt

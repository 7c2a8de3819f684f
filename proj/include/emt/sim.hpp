#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "emt/geometry.hpp"

namespace emt {

enum class FieldTermKind { polynomial_deg2, polynomial_deg3, inverse_cube_dipole };

std::string to_string(FieldTermKind k);
FieldTermKind field_term_kind_from_string(const std::string& s);

/// Coefficient layout per kind (positions scaled by kFieldScale around
/// kFieldCenter before evaluation):
///   polynomial_deg2    18 values, 3 output channels x monomials
///                      (ux^2, uy^2, uz^2, ux*uy, ux*uz, uy*uz)
///   polynomial_deg3    30 values, 3 output channels x monomials
///                      (ux^3, uy^3, uz^3, ux^2 uy, ux^2 uz, uy^2 ux,
///                       uy^2 uz, uz^2 ux, uz^2 uy, ux uy uz)
///   inverse_cube_dipole 3 values: dipole moment vector, mm of displacement
///                      at the reference distance
struct FieldTerm {
  FieldTermKind kind = FieldTermKind::polynomial_deg2;
  std::vector<double> coeffs;
};

/// Parameters of one synthetic tracking environment. source_distance plays
/// the role of the distance between the distorting X-ray source and the
/// board; the dipole term weakens with it as distance^-3.
struct DistortionEnvSpec {
  std::string env_id;
  double source_distance_mm = 500.0;
  double gantry_angle_deg = 0.0;
  std::vector<FieldTerm> field_terms;
  double severity_scale = 0.0;
  double noise_sigma_pos_mm = 0.0;
  double noise_sigma_ang_deg = 0.0;
  double quality_gain = 1.0;

  void validate() const;
};

/// Spec plus realized coefficient tables; immutable after construction.
struct DistortionEnv {
  DistortionEnvSpec spec;
  std::uint64_t seed = 0;
  std::array<std::array<double, 6>, 3> poly2{};   // per channel
  std::array<std::array<double, 10>, 3> poly3{};  // per channel
  std::array<double, 3> dipole_moment{};
  std::array<double, 3> dipole_anchor{};
  double dipole_amplitude = 0.0;  // (d_ref / source_distance)^3
};

/// Center of the scaled field coordinates: the default grid's midpoint.
inline constexpr std::array<double, 3> kFieldCenter{16.0, 12.0, 9.6};
/// Positions are scaled by 1/kFieldScale around the center for polynomials.
inline constexpr double kFieldScale = 100.0;
/// Axis-aligned working volume, mm, identical per axis.
inline constexpr double kVolumeMin = -180.0;
inline constexpr double kVolumeMax = 220.0;
/// The dipole anchor sits at this distance from the center along the gantry
/// direction; source_distance only modulates the amplitude, as distance^-3.
inline constexpr double kDipoleReferenceDistance = 100.0;
/// Softening radius that keeps the dipole field finite near its anchor.
inline constexpr double kDipoleSoftening = 30.0;
/// Raw samples averaged per measuring point; noise enters as sigma/sqrt(N).
inline constexpr double kAveragedSamples = 500.0;
/// Relative distortion weight per position channel; z is hit hardest.
inline constexpr std::array<double, 3> kChannelWeights{1.0, 1.0, 2.0};
/// Angular perturbation per mm of field displacement, degrees.
inline constexpr double kAngularCoupling = 2.0;

bool in_working_volume(const std::array<double, 3>& pos);

DistortionEnv make_environment(const DistortionEnvSpec& spec, std::uint64_t seed);

/// Smooth pre-noise displacement of the field at a position, mm.
std::array<double, 3> field_displacement(const DistortionEnv& env,
                                         const std::array<double, 3>& pos);

/// Applies the environment to a true pose: position displaced by the field
/// plus averaged noise, angles perturbed by the coupled angular field, and a
/// quality estimate proportional to the local displacement magnitude.
/// Deterministic in (env, sample_seed).
MeasurementPoint distort(const DistortionEnv& env, const MeasurementPoint& true_pose,
                         std::uint64_t sample_seed);

/// One measurement per grid index; deterministic in all arguments.
Dataset generate_dataset(const DistortionEnv& env, const GroundTruthGrid& grid,
                         Role role, std::uint64_t seed);

/// Bisects severity_scale (at most 60 iterations) until the generated
/// dataset's uncompensated displacement RMSE lands within tolerance of the
/// target. The emitted dataset must be generated with the same seed.
DistortionEnvSpec calibrate_severity(const DistortionEnvSpec& spec,
                                     const GroundTruthGrid& grid,
                                     double target_rmse, double tolerance,
                                     std::uint64_t seed);

// --- presets ---------------------------------------------------------------

GroundTruthGrid default_grid();

struct PresetEntry {
  DistortionEnvSpec spec;
  Role role = Role::train;
  double target_rmse = 0.0;
  double tolerance = 0.02;
  std::uint64_t seed = 0;
};

/// Nine environments (one laboratory, eight distorted ones at varying source
/// distances and gantry angles) with calibration targets that mirror the
/// reference benchmark magnitudes.
std::vector<PresetEntry> table1_preset(std::uint64_t master_seed);

// --- spec file --------------------------------------------------------------

struct SimulationSpec {
  GroundTruthGrid grid;
  std::vector<PresetEntry> environments;
};

SimulationSpec load_simulation_spec(const std::filesystem::path& path);
void save_simulation_spec(const SimulationSpec& spec,
                          const std::filesystem::path& path);

}  // namespace emt

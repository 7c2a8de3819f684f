#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "emt/cyclegan.hpp"
#include "emt/geometry.hpp"

namespace emt {

/// Affine correction per position channel over features (1, x, y, z, q).
struct FineTuneCoeffs {
  std::array<double, 5> x{};
  std::array<double, 5> y{};
  std::array<double, 5> z{};
};

/// The deployable compensator: several identically shaped checkpoints trained
/// from different seeds, plus an optional linear fine-tune stage.
struct EnsembleModel {
  std::vector<GanCheckpoint> members;
  std::optional<FineTuneCoeffs> finetune;

  /// At least two members, identical layouts and normalization bounds.
  void validate() const;
};

struct CompensatedPoint {
  MeasurementPoint point;
  /// Population standard deviation across members, per channel; exactly 0 on
  /// the passthrough x and y channels.
  Vec7 sigma_pred{};
  /// Mean of the (z, x, y) sigmas; the single uncertainty figure quoted in
  /// reports.
  double sigma_scalar = 0.0;
};

struct EnsembleTrainConfig {
  TrainConfig base;
  int member_count = 10;
  std::uint64_t base_seed = 0;
  /// Members train sequentially by default; > 1 trains them in parallel
  /// (results are identical either way).
  int jobs = 1;
};

/// Member k trains with seed base_seed + k; members are fully independent.
EnsembleModel train_ensemble(const EnsembleTrainConfig& config,
                             std::span<const Dataset> train_data,
                             std::span<const Dataset> val_data);

/// Ensemble mean per channel plus member spread; the fine-tune correction,
/// when present, is applied after averaging.
CompensatedPoint predict(const EnsembleModel& ensemble, const MeasurementPoint& p);

/// Same as predict but with explicit control over the fine-tune stage.
CompensatedPoint predict_stage(const EnsembleModel& ensemble,
                               const MeasurementPoint& p, bool apply_ft);

/// Ordinary least squares per output channel mapping features of the
/// ensemble-mean compensated points to residuals against the grid truth,
/// after a rigid translation aligning the compensated centroid to the grid
/// centroid. Normal equations carry a 1e-9 ridge on the diagonal. The
/// reference should hold samples from the domain the ensemble translates
/// (see finetune_reference); duplicate grid indices are allowed.
FineTuneCoeffs fit_finetune(const EnsembleModel& ensemble,
                            const Dataset& reference);

/// Merges the distorted-domain training datasets into one reference set for
/// fit_finetune. The regression runs on translated points, so the reference
/// must come from the domain the ensemble actually translates; fitting on
/// laboratory inputs puts the generator outside its training distribution.
Dataset finetune_reference(std::span<const Dataset> train_data,
                           const std::string& lab_env_id);

/// Shifts x, y, z by the fitted affine correction; angles and q unchanged.
/// The quality feature comes from the measured point (it encodes the local
/// distortion magnitude, which the translated quality no longer carries);
/// the two-argument form falls back to the point's own q.
MeasurementPoint apply_finetune(const FineTuneCoeffs& coeffs,
                                const MeasurementPoint& p, double measured_q);
MeasurementPoint apply_finetune(const FineTuneCoeffs& coeffs,
                                const MeasurementPoint& p);

double scalar_sigma(const Vec7& sigma_pred);

// --- serialization ----------------------------------------------------------

std::string ensemble_to_json_string(const EnsembleModel& e);
EnsembleModel ensemble_from_json_string(const std::string& s);
void save_ensemble(const EnsembleModel& e, const std::filesystem::path& path);
EnsembleModel load_ensemble(const std::filesystem::path& path);

/// Line filter: reads `x,y,z,q,phi_x,phi_y,phi_z` records, writes the
/// compensated point plus sigma_z and the scalar sigma, flushing per line.
/// Malformed lines go to err with their line number; processing continues.
void stream_compensate(std::istream& in, std::ostream& out, std::ostream& err,
                       const EnsembleModel& ensemble);

}  // namespace emt

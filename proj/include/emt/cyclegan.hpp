#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emt/geometry.hpp"
#include "emt/net.hpp"

namespace emt {

/// The two translation directions and their discriminators. Generators map a
/// full 7-channel point to the 5 generated channels (z, q, phi_x, phi_y,
/// phi_z); x and y pass through unchanged.
struct GanModels {
  MlpParams g_cl;  // distorted -> laboratory
  MlpParams g_lc;  // laboratory -> distorted
  MlpParams d_cl;  // judges laboratory-domain validity
  MlpParams d_lc;  // judges distorted-domain validity
};

struct LossWeights {
  double adv = 0.5;
  double cycle = 10.0;
  double comp = 1e-5;
  double quality = 1.0;

  void validate() const;
};

/// Discriminator targets are drawn uniformly from narrow bands instead of
/// hard 0/1; the generator is scored against l_valid.
struct SoftLabelSpec {
  double valid_lo = 0.8;
  double valid_hi = 1.0;
  double fake_lo = 0.0;
  double fake_hi = 0.2;
  double l_valid = 1.0;

  void validate() const;
};

enum class GanMode { cyclegan, vanilla_gan };

std::string to_string(GanMode m);
GanMode gan_mode_from_string(const std::string& s);

MlpLayout default_generator_layout();
MlpLayout default_discriminator_layout();

struct TrainConfig {
  MlpLayout generator_layout = default_generator_layout();
  MlpLayout discriminator_layout = default_discriminator_layout();
  LossWeights weights;
  SoftLabelSpec labels;
  TrainSchedule schedule;
  GanMode mode = GanMode::cyclegan;
  std::uint64_t seed = 0;
  /// Training datasets with this env_id form the laboratory domain; all
  /// others form the distorted domain.
  std::string lab_env_id = "laboratory";

  void validate() const;
};

struct EpochTrace {
  int epoch = 0;
  double adv = 0.0;
  double cycle = 0.0;
  double comp = 0.0;
  double quality = 0.0;
  double total = 0.0;
  double d_cl = 0.0;
  double d_lc = 0.0;
  /// RMSE of translated-vs-true z over the validation pool (0 when absent).
  double val_z_rmse = 0.0;
};

/// Everything needed for inference and reproduction: the models, the exact
/// bounds used during training, the seed and config snapshot, and the loss
/// trace.
struct GanCheckpoint {
  GanMode mode = GanMode::cyclegan;
  std::uint64_t seed = 0;
  GanModels models;
  NormalizationBounds bounds;
  LossWeights weights;
  SoftLabelSpec labels;
  TrainSchedule schedule;
  double initial_val_z_rmse = 0.0;
  std::vector<EpochTrace> trace;
};

/// Recombines passthrough x,y with the 5 generated channels. Operates on
/// normalized vectors; x and y are bit-identical to the input.
Vec7 assemble_full_point(const Vec7& input, std::span<const double> generated);

/// One normalized training point plus the metadata needed for pairwise
/// distance supervision.
struct GanBatchPoint {
  Vec7 v{};                          // normalized channels
  std::size_t env = 0;               // index of the originating dataset
  std::array<double, 3> true_pos{};  // mm, from grid geometry
};

/// Same-environment pairs within a batch and their true distances in mm.
struct PairInfo {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<double> true_dist;
};

PairInfo pairs_from_batch(std::span<const GanBatchPoint> batch);

struct LossComponents {
  double adv = 0.0;
  double cycle = 0.0;
  double comp = 0.0;
  double quality = 0.0;
  double total = 0.0;
};

struct GeneratorGrads {
  MlpGrads g_cl;
  MlpGrads g_lc;
};

/// Full generator objective:
///   adv     BCE of both discriminators against l_valid
///   cycle   L1 recovery of the generated channels in both directions
///   comp    MSE between denormalized pairwise distances of translated
///           distorted-domain points and their true grid distances (mm^2)
///   quality mean of the squared generated quality channel
/// total = adv*w.adv + cycle*w.cycle + comp*w.comp + quality*w.quality.
/// Discriminators are treated as fixed. pair_info may be null only when
/// w.comp == 0. In vanilla mode pass mode=vanilla_gan: the cycle and the
/// laboratory-side adversarial term are dropped and g_lc/d_lc are never
/// evaluated.
LossComponents generator_loss(const GanModels& models,
                              std::span<const GanBatchPoint> batch_c,
                              std::span<const GanBatchPoint> batch_l,
                              const LossWeights& weights,
                              const PairInfo* pair_info,
                              const NormalizationBounds& bounds,
                              GanMode mode = GanMode::cyclegan,
                              GeneratorGrads* grads = nullptr);

/// BCE(D(real), u~valid band) + BCE(D(fake), u~fake band); labels are
/// resampled per example, deterministic in the seed. Gradients never flow
/// into the generator that produced the fakes.
double discriminator_loss(const MlpParams& d, std::span<const Vec7> real_batch,
                          std::span<const Vec7> fake_batch,
                          const SoftLabelSpec& labels, std::uint64_t seed,
                          MlpGrads* grads = nullptr);

/// Forward-evaluation counters, mainly to prove which models a training mode
/// touches.
struct TrainStats {
  std::uint64_t g_cl_forward = 0;
  std::uint64_t g_lc_forward = 0;
  std::uint64_t d_cl_forward = 0;
  std::uint64_t d_lc_forward = 0;
};

/// Trains the cycle-consistent pair (or the single GAN in vanilla mode):
/// per minibatch one shared Adam step for both generators, then one step per
/// discriminator. Deterministic in (config, datasets).
GanCheckpoint train(const TrainConfig& config, std::span<const Dataset> train_data,
                    std::span<const Dataset> val_data, TrainStats* stats = nullptr);

/// normalize -> G_CL -> reassemble -> denormalize; x and y are copied from
/// the input, so they match in mm exactly.
MeasurementPoint translate_point(const GanCheckpoint& ckpt, const MeasurementPoint& p);

// --- serialization ----------------------------------------------------------

std::string checkpoint_to_json_string(const GanCheckpoint& ckpt);
GanCheckpoint checkpoint_from_json_string(const std::string& s);
void save_checkpoint(const GanCheckpoint& ckpt, const std::filesystem::path& path);
GanCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace emt

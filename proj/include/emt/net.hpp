#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "emt/common.hpp"

namespace emt {

enum class Activation { leaky_relu, sigmoid, linear };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct LayerSpec {
  int width = 1;
  Activation act = Activation::leaky_relu;
  double alpha = 0.01;  // leak, used by leaky_relu only
};

/// Fixed feed-forward topology: affine layers with per-layer activations.
struct MlpLayout {
  int input_width = 1;
  std::vector<LayerSpec> hidden;
  int output_width = 1;
  Activation output_activation = Activation::linear;
  double output_alpha = 0.01;

  void validate() const;
  /// Hidden layers plus the output layer.
  int layer_count() const { return static_cast<int>(hidden.size()) + 1; }
  int layer_out_width(int l) const;
  int layer_in_width(int l) const;
  Activation layer_activation(int l) const;
  double layer_alpha(int l) const;
};

struct LayerValues {
  std::vector<std::vector<double>> w;  // out x in
  std::vector<double> b;               // out
};

struct MlpParams {
  MlpLayout layout;
  std::vector<LayerValues> layers;

  std::size_t param_count() const;
  void validate() const;
};

/// Gradients shaped exactly like the parameters they belong to.
struct MlpGrads {
  std::vector<LayerValues> layers;

  static MlpGrads zeros_like(const MlpParams& p);
  void add_scaled(const MlpGrads& other, double scale);
  void scale(double s);
};

/// Weights uniform in +-sqrt(6/(fan_in+fan_out)), biases zero, deterministic
/// in the seed.
MlpParams mlp_init(const MlpLayout& layout, std::uint64_t seed);

std::vector<double> mlp_forward(const MlpParams& p, std::span<const double> input);

struct ForwardCache {
  std::vector<std::vector<double>> inputs;  // input to each layer
  std::vector<std::vector<double>> pre;     // pre-activation per layer
  std::vector<double> output;               // post-activation of last layer
};

ForwardCache mlp_forward_cached(const MlpParams& p, std::span<const double> input);

struct BackwardResult {
  MlpGrads grads;
  std::vector<double> input_grad;
};

/// Exact reverse-mode gradients; output_grad is dL/d(post-activation output).
BackwardResult mlp_backward(const MlpParams& p, const ForwardCache& cache,
                            std::span<const double> output_grad);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long t = 0;
  std::vector<LayerValues> m;
  std::vector<LayerValues> v;

  static AdamState for_params(const MlpParams& p);
};

/// Bias-corrected Adam update in place; throws NumericError (naming the
/// layer) on non-finite gradients.
void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state,
               double lr);

struct TrainSchedule {
  double base_lr = 0.0005;
  int total_epochs = 200;
  int decay_start_epoch = 100;
  int batch_size = 16;

  void validate() const;
};

/// Constant base_lr before decay_start_epoch, then linear to exactly 0 at
/// total_epochs.
double lr_at(const TrainSchedule& s, int epoch);

/// Binary cross entropy; the prediction is clamped to [1e-7, 1-1e-7].
double bce(double prediction, double label);
/// d(bce)/d(prediction), with the same clamp applied.
double bce_grad(double prediction, double label);

double l1_loss(std::span<const double> a, std::span<const double> b);
double mse_loss(std::span<const double> a, std::span<const double> b);

// --- serialization ---------------------------------------------------------
// Parameters serialize as {layout, layers:[{w:[[...]], b:[...]}]}.

std::string mlp_to_json_string(const MlpParams& p);
MlpParams mlp_from_json_string(const std::string& s);

}  // namespace emt

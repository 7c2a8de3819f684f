#include "emt/net.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "emt/rng.hpp"
#include "serial.hpp"

namespace emt {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::linear: return "linear";
  }
  throw ConfigError("unknown activation");
}

Activation activation_from_string(const std::string& s) {
  if (s == "leaky_relu") return Activation::leaky_relu;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "linear") return Activation::linear;
  throw DataError("unknown activation: '" + s + "'");
}

void MlpLayout::validate() const {
  if (input_width < 1 || output_width < 1) {
    throw ConfigError("layer widths must be >= 1");
  }
  for (const auto& h : hidden) {
    if (h.width < 1) throw ConfigError("layer widths must be >= 1");
    if (h.act == Activation::leaky_relu && !(h.alpha > 0.0)) {
      throw ConfigError("leaky_relu alpha must be > 0");
    }
  }
  if (output_activation == Activation::leaky_relu && !(output_alpha > 0.0)) {
    throw ConfigError("leaky_relu alpha must be > 0");
  }
}

int MlpLayout::layer_out_width(int l) const {
  return l < static_cast<int>(hidden.size())
             ? hidden[static_cast<std::size_t>(l)].width
             : output_width;
}

int MlpLayout::layer_in_width(int l) const {
  return l == 0 ? input_width : hidden[static_cast<std::size_t>(l - 1)].width;
}

Activation MlpLayout::layer_activation(int l) const {
  return l < static_cast<int>(hidden.size())
             ? hidden[static_cast<std::size_t>(l)].act
             : output_activation;
}

double MlpLayout::layer_alpha(int l) const {
  return l < static_cast<int>(hidden.size())
             ? hidden[static_cast<std::size_t>(l)].alpha
             : output_alpha;
}

std::size_t MlpParams::param_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) {
    for (const auto& row : layer.w) n += row.size();
    n += layer.b.size();
  }
  return n;
}

void MlpParams::validate() const {
  layout.validate();
  if (static_cast<int>(layers.size()) != layout.layer_count()) {
    throw ConfigError("parameter/layout layer count mismatch");
  }
  for (int l = 0; l < layout.layer_count(); ++l) {
    const auto& layer = layers[static_cast<std::size_t>(l)];
    auto out_w = static_cast<std::size_t>(layout.layer_out_width(l));
    auto in_w = static_cast<std::size_t>(layout.layer_in_width(l));
    if (layer.w.size() != out_w || layer.b.size() != out_w) {
      throw ConfigError("parameter shape mismatch");
    }
    for (const auto& row : layer.w) {
      if (row.size() != in_w) throw ConfigError("parameter shape mismatch");
      for (double v : row) {
        if (!std::isfinite(v)) throw NumericError("non-finite parameter");
      }
    }
  }
}

MlpGrads MlpGrads::zeros_like(const MlpParams& p) {
  MlpGrads g;
  g.layers.reserve(p.layers.size());
  for (const auto& layer : p.layers) {
    LayerValues z;
    z.w.assign(layer.w.size(), std::vector<double>(layer.w.empty() ? 0 : layer.w[0].size(), 0.0));
    z.b.assign(layer.b.size(), 0.0);
    g.layers.push_back(std::move(z));
  }
  return g;
}

void MlpGrads::add_scaled(const MlpGrads& other, double scale) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (std::size_t r = 0; r < layers[l].w.size(); ++r) {
      for (std::size_t c = 0; c < layers[l].w[r].size(); ++c) {
        layers[l].w[r][c] += scale * other.layers[l].w[r][c];
      }
    }
    for (std::size_t r = 0; r < layers[l].b.size(); ++r) {
      layers[l].b[r] += scale * other.layers[l].b[r];
    }
  }
}

void MlpGrads::scale(double s) {
  for (auto& layer : layers) {
    for (auto& row : layer.w)
      for (auto& v : row) v *= s;
    for (auto& v : layer.b) v *= s;
  }
}

MlpParams mlp_init(const MlpLayout& layout, std::uint64_t seed) {
  layout.validate();
  Rng rng(seed);
  MlpParams p;
  p.layout = layout;
  for (int l = 0; l < layout.layer_count(); ++l) {
    int out_w = layout.layer_out_width(l);
    int in_w = layout.layer_in_width(l);
    double s = std::sqrt(6.0 / static_cast<double>(in_w + out_w));
    LayerValues layer;
    layer.w.resize(static_cast<std::size_t>(out_w));
    for (auto& row : layer.w) {
      row.resize(static_cast<std::size_t>(in_w));
      for (auto& v : row) v = rng.uniform(-s, s);
    }
    layer.b.assign(static_cast<std::size_t>(out_w), 0.0);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

namespace {

double apply_activation(Activation act, double alpha, double z) {
  switch (act) {
    case Activation::leaky_relu: return z > 0.0 ? z : alpha * z;
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
    case Activation::linear: return z;
  }
  return z;
}

double activation_derivative(Activation act, double alpha, double z, double h) {
  switch (act) {
    case Activation::leaky_relu: return z > 0.0 ? 1.0 : alpha;
    case Activation::sigmoid: return h * (1.0 - h);
    case Activation::linear: return 1.0;
  }
  return 1.0;
}

}  // namespace

ForwardCache mlp_forward_cached(const MlpParams& p, std::span<const double> input) {
  if (static_cast<int>(input.size()) != p.layout.input_width) {
    throw ConfigError("input width mismatch");
  }
  ForwardCache cache;
  std::vector<double> h(input.begin(), input.end());
  for (int l = 0; l < p.layout.layer_count(); ++l) {
    const auto& layer = p.layers[static_cast<std::size_t>(l)];
    cache.inputs.push_back(h);
    std::vector<double> z(layer.b);
    for (std::size_t r = 0; r < layer.w.size(); ++r) {
      const auto& row = layer.w[r];
      double acc = z[r];
      for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * h[c];
      z[r] = acc;
    }
    cache.pre.push_back(z);
    Activation act = p.layout.layer_activation(l);
    double alpha = p.layout.layer_alpha(l);
    h.resize(z.size());
    for (std::size_t r = 0; r < z.size(); ++r) {
      h[r] = apply_activation(act, alpha, z[r]);
    }
  }
  cache.output = h;
  return cache;
}

std::vector<double> mlp_forward(const MlpParams& p, std::span<const double> input) {
  return mlp_forward_cached(p, input).output;
}

BackwardResult mlp_backward(const MlpParams& p, const ForwardCache& cache,
                            std::span<const double> output_grad) {
  if (cache.output.size() != output_grad.size()) {
    throw ConfigError("output gradient width mismatch");
  }
  BackwardResult res;
  res.grads.layers.resize(p.layers.size());
  std::vector<double> dh(output_grad.begin(), output_grad.end());
  for (int l = p.layout.layer_count() - 1; l >= 0; --l) {
    auto li = static_cast<std::size_t>(l);
    const auto& layer = p.layers[li];
    const auto& z = cache.pre[li];
    const auto& in = cache.inputs[li];
    Activation act = p.layout.layer_activation(l);
    double alpha = p.layout.layer_alpha(l);

    std::vector<double> dz(z.size());
    for (std::size_t r = 0; r < z.size(); ++r) {
      double h = apply_activation(act, alpha, z[r]);
      dz[r] = dh[r] * activation_derivative(act, alpha, z[r], h);
    }

    LayerValues g;
    g.w.resize(layer.w.size());
    for (std::size_t r = 0; r < layer.w.size(); ++r) {
      g.w[r].resize(in.size());
      for (std::size_t c = 0; c < in.size(); ++c) g.w[r][c] = dz[r] * in[c];
    }
    g.b = dz;
    res.grads.layers[li] = std::move(g);

    std::vector<double> dprev(in.size(), 0.0);
    for (std::size_t r = 0; r < layer.w.size(); ++r) {
      for (std::size_t c = 0; c < in.size(); ++c) {
        dprev[c] += layer.w[r][c] * dz[r];
      }
    }
    dh = std::move(dprev);
  }
  res.input_grad = std::move(dh);
  return res;
}

AdamState AdamState::for_params(const MlpParams& p) {
  AdamState s;
  auto zeros = MlpGrads::zeros_like(p);
  s.m = zeros.layers;
  s.v = zeros.layers;
  return s;
}

void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state,
               double lr) {
  if (lr < 0.0) throw ConfigError("learning rate must be >= 0");
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    for (const auto& row : grads.layers[l].w) {
      for (double g : row) {
        if (!std::isfinite(g)) {
          throw NumericError("non-finite gradient in layer " + std::to_string(l));
        }
      }
    }
    for (double g : grads.layers[l].b) {
      if (!std::isfinite(g)) {
        throw NumericError("non-finite gradient in layer " + std::to_string(l));
      }
    }
  }
  state.t += 1;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  auto update = [&](double& p, double g, double& m, double& v) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g * g;
    double m_hat = m / bc1;
    double v_hat = v / bc2;
    p -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& layer = params.layers[l];
    for (std::size_t r = 0; r < layer.w.size(); ++r) {
      for (std::size_t c = 0; c < layer.w[r].size(); ++c) {
        update(layer.w[r][c], grads.layers[l].w[r][c], state.m[l].w[r][c],
               state.v[l].w[r][c]);
      }
    }
    for (std::size_t r = 0; r < layer.b.size(); ++r) {
      update(layer.b[r], grads.layers[l].b[r], state.m[l].b[r], state.v[l].b[r]);
    }
  }
}

void TrainSchedule::validate() const {
  if (base_lr < 0.0) throw ConfigError("base_lr must be >= 0");
  if (total_epochs < 0) throw ConfigError("total_epochs must be >= 0");
  if (decay_start_epoch < 0 || decay_start_epoch > total_epochs) {
    throw ConfigError("decay_start_epoch must lie within [0, total_epochs]");
  }
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

double lr_at(const TrainSchedule& s, int epoch) {
  s.validate();
  if (epoch < 0 || epoch > s.total_epochs) {
    throw ConfigError("epoch outside schedule range");
  }
  if (epoch < s.decay_start_epoch) return s.base_lr;
  if (s.total_epochs == s.decay_start_epoch) return 0.0;
  double frac = static_cast<double>(s.total_epochs - epoch) /
                static_cast<double>(s.total_epochs - s.decay_start_epoch);
  return s.base_lr * frac;
}

namespace {
constexpr double kBceClamp = 1e-7;
}

double bce(double prediction, double label) {
  double p = std::clamp(prediction, kBceClamp, 1.0 - kBceClamp);
  return -(label * std::log(p) + (1.0 - label) * std::log(1.0 - p));
}

double bce_grad(double prediction, double label) {
  double p = std::clamp(prediction, kBceClamp, 1.0 - kBceClamp);
  return -(label / p - (1.0 - label) / (1.0 - p));
}

double l1_loss(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("l1_loss length mismatch");
  if (a.empty()) throw ConfigError("l1_loss on empty vectors");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

double mse_loss(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("mse_loss length mismatch");
  if (a.empty()) throw ConfigError("mse_loss on empty vectors");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

// --- serialization ---------------------------------------------------------

namespace {

nlohmann::json layout_to_json(const MlpLayout& layout) {
  nlohmann::json j;
  j["input"] = layout.input_width;
  auto hidden = nlohmann::json::array();
  for (const auto& h : layout.hidden) {
    nlohmann::json hj;
    hj["width"] = h.width;
    hj["act"] = to_string(h.act);
    hj["alpha"] = h.alpha;
    hidden.push_back(hj);
  }
  j["hidden"] = hidden;
  j["output"] = layout.output_width;
  j["output_act"] = to_string(layout.output_activation);
  j["output_alpha"] = layout.output_alpha;
  return j;
}

MlpLayout layout_from_json(const nlohmann::json& j) {
  MlpLayout layout;
  layout.input_width = j.at("input").get<int>();
  for (const auto& hj : j.at("hidden")) {
    LayerSpec spec;
    spec.width = hj.at("width").get<int>();
    spec.act = activation_from_string(hj.at("act").get<std::string>());
    spec.alpha = hj.at("alpha").get<double>();
    layout.hidden.push_back(spec);
  }
  layout.output_width = j.at("output").get<int>();
  layout.output_activation =
      activation_from_string(j.at("output_act").get<std::string>());
  layout.output_alpha = j.at("output_alpha").get<double>();
  layout.validate();
  return layout;
}

}  // namespace

nlohmann::json mlp_to_json(const MlpParams& p) {
  nlohmann::json j;
  j["layout"] = layout_to_json(p.layout);
  auto layers = nlohmann::json::array();
  for (const auto& layer : p.layers) {
    nlohmann::json lj;
    lj["w"] = layer.w;
    lj["b"] = layer.b;
    layers.push_back(lj);
  }
  j["layers"] = layers;
  return j;
}

MlpParams mlp_from_json(const nlohmann::json& j) {
  MlpParams p;
  p.layout = layout_from_json(j.at("layout"));
  for (const auto& lj : j.at("layers")) {
    LayerValues layer;
    layer.w = lj.at("w").get<std::vector<std::vector<double>>>();
    layer.b = lj.at("b").get<std::vector<double>>();
    p.layers.push_back(std::move(layer));
  }
  p.validate();
  return p;
}

std::string mlp_to_json_string(const MlpParams& p) { return mlp_to_json(p).dump(); }

MlpParams mlp_from_json_string(const std::string& s) {
  try {
    return mlp_from_json(nlohmann::json::parse(s));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad network JSON: ") + e.what());
  }
}

}  // namespace emt

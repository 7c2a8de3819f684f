#include "emt/cyclegan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "emt/rng.hpp"
#include "serial.hpp"

namespace emt {

namespace {

constexpr std::size_t kGenOut = 5;  // (z, q, phi_x, phi_y, phi_z)
constexpr std::size_t kGenChannelOffset = 2;

double sq(double v) { return v * v; }

}  // namespace

void LossWeights::validate() const {
  if (adv < 0.0 || cycle < 0.0 || comp < 0.0 || quality < 0.0) {
    throw ConfigError("loss weights must be >= 0");
  }
}

void SoftLabelSpec::validate() const {
  if (!(valid_lo <= valid_hi) || !(fake_lo <= fake_hi)) {
    throw ConfigError("soft label ranges must be ordered");
  }
  if (fake_hi >= valid_lo) {
    throw ConfigError("soft label ranges must be disjoint");
  }
}

std::string to_string(GanMode m) {
  return m == GanMode::cyclegan ? "cyclegan" : "vanilla_gan";
}

GanMode gan_mode_from_string(const std::string& s) {
  if (s == "cyclegan") return GanMode::cyclegan;
  if (s == "vanilla_gan") return GanMode::vanilla_gan;
  throw DataError("unknown GAN mode: '" + s + "'");
}

MlpLayout default_generator_layout() {
  MlpLayout l;
  l.input_width = kChannels;
  l.hidden = {{16, Activation::leaky_relu, 0.01},
              {16, Activation::leaky_relu, 0.01},
              {16, Activation::leaky_relu, 0.01},
              {16, Activation::leaky_relu, 0.01}};
  l.output_width = static_cast<int>(kGenOut);
  l.output_activation = Activation::linear;
  return l;
}

MlpLayout default_discriminator_layout() {
  MlpLayout l;
  l.input_width = kChannels;
  l.hidden = {{16, Activation::leaky_relu, 0.2},
              {16, Activation::leaky_relu, 0.2},
              {16, Activation::leaky_relu, 0.2}};
  l.output_width = 1;
  l.output_activation = Activation::sigmoid;
  return l;
}

void TrainConfig::validate() const {
  generator_layout.validate();
  discriminator_layout.validate();
  if (generator_layout.input_width != kChannels ||
      generator_layout.output_width != static_cast<int>(kGenOut)) {
    throw ConfigError("generator must map 7 channels to 5");
  }
  if (discriminator_layout.input_width != kChannels ||
      discriminator_layout.output_width != 1) {
    throw ConfigError("discriminator must map 7 channels to 1");
  }
  weights.validate();
  labels.validate();
  schedule.validate();
}

Vec7 assemble_full_point(const Vec7& input, std::span<const double> generated) {
  if (generated.size() != kGenOut) {
    throw ConfigError("generator output must have 5 channels");
  }
  Vec7 out;
  out[0] = input[0];
  out[1] = input[1];
  for (std::size_t k = 0; k < kGenOut; ++k) out[kGenChannelOffset + k] = generated[k];
  return out;
}

PairInfo pairs_from_batch(std::span<const GanBatchPoint> batch) {
  PairInfo info;
  for (std::size_t a = 0; a < batch.size(); ++a) {
    for (std::size_t b = a + 1; b < batch.size(); ++b) {
      if (batch[a].env != batch[b].env) continue;
      double dx = batch[a].true_pos[0] - batch[b].true_pos[0];
      double dy = batch[a].true_pos[1] - batch[b].true_pos[1];
      double dz = batch[a].true_pos[2] - batch[b].true_pos[2];
      info.pairs.emplace_back(a, b);
      info.true_dist.push_back(std::sqrt(dx * dx + dy * dy + dz * dz));
    }
  }
  return info;
}

namespace {

struct GenEval {
  LossComponents components;
  std::vector<Vec7> fake_cl;  // assembled translated distorted-domain points
  std::vector<Vec7> fake_lc;  // assembled translated laboratory points
};

// Shared implementation behind generator_loss and the training step. The
// discriminators are constants here; their parameter gradients are dropped.
GenEval generator_eval(const GanModels& models,
                       std::span<const GanBatchPoint> batch_c,
                       std::span<const GanBatchPoint> batch_l,
                       const LossWeights& weights, const PairInfo* pair_info,
                       const NormalizationBounds& bounds, GanMode mode,
                       GeneratorGrads* grads, TrainStats* stats) {
  weights.validate();
  bounds.validate();
  if (batch_c.empty()) throw DataError("empty distorted-domain batch");
  bool cyclic = mode == GanMode::cyclegan;
  if (cyclic && batch_l.empty()) throw DataError("empty laboratory batch");
  if (weights.comp > 0.0 && pair_info == nullptr) {
    throw ConfigError("pair info required when the compensation weight is > 0");
  }

  const double n_c = static_cast<double>(batch_c.size());
  const double n_l = static_cast<double>(batch_l.size());
  GenEval eval;

  if (grads != nullptr) {
    grads->g_cl = MlpGrads::zeros_like(models.g_cl);
    grads->g_lc = MlpGrads::zeros_like(models.g_lc);
  }

  // Distorted-domain pass: translation, adversarial score, recovery, and the
  // per-sample output gradients accumulated across all loss paths.
  std::vector<ForwardCache> gcl_caches(batch_c.size());
  std::vector<std::array<double, kGenOut>> dloss_dgen(
      batch_c.size(), std::array<double, kGenOut>{});
  eval.fake_cl.resize(batch_c.size());

  for (std::size_t i = 0; i < batch_c.size(); ++i) {
    gcl_caches[i] = mlp_forward_cached(models.g_cl, batch_c[i].v);
    if (stats) ++stats->g_cl_forward;
    eval.fake_cl[i] = assemble_full_point(batch_c[i].v, gcl_caches[i].output);

    auto d_cache = mlp_forward_cached(models.d_cl, eval.fake_cl[i]);
    if (stats) ++stats->d_cl_forward;
    double p = d_cache.output[0];
    eval.components.adv += bce(p, 1.0) / n_c;
    if (grads) {
      std::array<double, 1> dp{bce_grad(p, 1.0) * weights.adv / n_c};
      auto back = mlp_backward(models.d_cl, d_cache, dp);
      for (std::size_t k = 0; k < kGenOut; ++k) {
        dloss_dgen[i][k] += back.input_grad[kGenChannelOffset + k];
      }
    }

    double qhat = gcl_caches[i].output[1];
    eval.components.quality += sq(qhat) / n_c;
    if (grads) dloss_dgen[i][1] += weights.quality * 2.0 * qhat / n_c;

    if (cyclic) {
      auto r_cache = mlp_forward_cached(models.g_lc, eval.fake_cl[i]);
      if (stats) ++stats->g_lc_forward;
      double recov = 0.0;
      std::array<double, kGenOut> dr{};
      for (std::size_t k = 0; k < kGenOut; ++k) {
        double diff = r_cache.output[k] - batch_c[i].v[kGenChannelOffset + k];
        recov += std::abs(diff) / static_cast<double>(kGenOut);
        dr[k] = (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) /
                static_cast<double>(kGenOut) * weights.cycle / n_c;
      }
      eval.components.cycle += recov / n_c;
      if (grads) {
        auto back = mlp_backward(models.g_lc, r_cache, dr);
        grads->g_lc.add_scaled(back.grads, 1.0);
        for (std::size_t k = 0; k < kGenOut; ++k) {
          dloss_dgen[i][k] += back.input_grad[kGenChannelOffset + k];
        }
      }
    }
  }

  // Pairwise distance supervision in mm, z being the only generated position
  // channel.
  if (pair_info != nullptr && !pair_info->pairs.empty()) {
    double range_x = bounds.max[0] - bounds.min[0];
    double range_y = bounds.max[1] - bounds.min[1];
    double range_z = bounds.max[2] - bounds.min[2];
    const double n_pairs = static_cast<double>(pair_info->pairs.size());
    for (std::size_t pi = 0; pi < pair_info->pairs.size(); ++pi) {
      auto [a, b] = pair_info->pairs[pi];
      if (a >= batch_c.size() || b >= batch_c.size()) {
        throw ConfigError("pair index outside batch");
      }
      double dx = (eval.fake_cl[a][0] - eval.fake_cl[b][0]) * range_x;
      double dy = (eval.fake_cl[a][1] - eval.fake_cl[b][1]) * range_y;
      double dz = (eval.fake_cl[a][2] - eval.fake_cl[b][2]) * range_z;
      double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
      double err = dist - pair_info->true_dist[pi];
      eval.components.comp += sq(err) / n_pairs;
      if (grads && dist > 0.0) {
        double base = weights.comp * 2.0 * err / n_pairs * (dz / dist) * range_z;
        dloss_dgen[a][0] += base;
        dloss_dgen[b][0] -= base;
      }
    }
  }

  // Backprop the accumulated output gradients through G_CL.
  if (grads) {
    for (std::size_t i = 0; i < batch_c.size(); ++i) {
      auto back = mlp_backward(models.g_cl, gcl_caches[i], dloss_dgen[i]);
      grads->g_cl.add_scaled(back.grads, 1.0);
    }
  }

  // Laboratory pass: adversarial score of G_LC plus the L -> C -> L recovery.
  if (cyclic) {
    eval.fake_lc.resize(batch_l.size());
    for (std::size_t j = 0; j < batch_l.size(); ++j) {
      auto glc_cache = mlp_forward_cached(models.g_lc, batch_l[j].v);
      if (stats) ++stats->g_lc_forward;
      eval.fake_lc[j] = assemble_full_point(batch_l[j].v, glc_cache.output);
      std::array<double, kGenOut> dh{};

      auto d_cache = mlp_forward_cached(models.d_lc, eval.fake_lc[j]);
      if (stats) ++stats->d_lc_forward;
      double p = d_cache.output[0];
      eval.components.adv += bce(p, 1.0) / n_l;
      if (grads) {
        std::array<double, 1> dp{bce_grad(p, 1.0) * weights.adv / n_l};
        auto back = mlp_backward(models.d_lc, d_cache, dp);
        for (std::size_t k = 0; k < kGenOut; ++k) {
          dh[k] += back.input_grad[kGenChannelOffset + k];
        }
      }

      auto s_cache = mlp_forward_cached(models.g_cl, eval.fake_lc[j]);
      if (stats) ++stats->g_cl_forward;
      double recov = 0.0;
      std::array<double, kGenOut> ds{};
      for (std::size_t k = 0; k < kGenOut; ++k) {
        double diff = s_cache.output[k] - batch_l[j].v[kGenChannelOffset + k];
        recov += std::abs(diff) / static_cast<double>(kGenOut);
        ds[k] = (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) /
                static_cast<double>(kGenOut) * weights.cycle / n_l;
      }
      eval.components.cycle += recov / n_l;
      if (grads) {
        auto back = mlp_backward(models.g_cl, s_cache, ds);
        grads->g_cl.add_scaled(back.grads, 1.0);
        for (std::size_t k = 0; k < kGenOut; ++k) {
          dh[k] += back.input_grad[kGenChannelOffset + k];
        }
        auto back_glc = mlp_backward(models.g_lc, glc_cache, dh);
        grads->g_lc.add_scaled(back_glc.grads, 1.0);
      }
    }
  }

  eval.components.total =
      weights.adv * eval.components.adv + weights.cycle * eval.components.cycle +
      weights.comp * eval.components.comp + weights.quality * eval.components.quality;
  return eval;
}

}  // namespace

LossComponents generator_loss(const GanModels& models,
                              std::span<const GanBatchPoint> batch_c,
                              std::span<const GanBatchPoint> batch_l,
                              const LossWeights& weights,
                              const PairInfo* pair_info,
                              const NormalizationBounds& bounds, GanMode mode,
                              GeneratorGrads* grads) {
  return generator_eval(models, batch_c, batch_l, weights, pair_info, bounds,
                        mode, grads, nullptr)
      .components;
}

double discriminator_loss(const MlpParams& d, std::span<const Vec7> real_batch,
                          std::span<const Vec7> fake_batch,
                          const SoftLabelSpec& labels, std::uint64_t seed,
                          MlpGrads* grads) {
  labels.validate();
  if (real_batch.empty() || fake_batch.empty()) {
    throw DataError("discriminator batches must be non-empty");
  }
  Rng rng(seed);
  if (grads) *grads = MlpGrads::zeros_like(d);
  double loss = 0.0;
  auto run = [&](std::span<const Vec7> batch, double lo, double hi) {
    const double n = static_cast<double>(batch.size());
    for (const auto& v : batch) {
      double label = rng.uniform(lo, hi);
      auto cache = mlp_forward_cached(d, v);
      double p = cache.output[0];
      loss += bce(p, label) / n;
      if (grads) {
        std::array<double, 1> dp{bce_grad(p, label) / n};
        auto back = mlp_backward(d, cache, dp);
        grads->add_scaled(back.grads, 1.0);
      }
    }
  };
  run(real_batch, labels.valid_lo, labels.valid_hi);
  run(fake_batch, labels.fake_lo, labels.fake_hi);
  return loss;
}

namespace {

struct ValPoint {
  Vec7 v{};
  double true_z = 0.0;
};

// Offset-free z residual: the displacement metric ignores global shifts, so
// the validation score removes the mean offset before the RMSE.
double val_z_metric(const GanModels& models, const NormalizationBounds& bounds,
                    const std::vector<ValPoint>& pool, TrainStats* stats) {
  if (pool.empty()) return 0.0;
  double range_z = bounds.max[2] - bounds.min[2];
  std::vector<double> residual;
  residual.reserve(pool.size());
  double mean = 0.0;
  for (const auto& vp : pool) {
    auto out = mlp_forward(models.g_cl, vp.v);
    if (stats) ++stats->g_cl_forward;
    double z = out[0] * range_z + bounds.min[2];
    residual.push_back(z - vp.true_z);
    mean += (z - vp.true_z) / static_cast<double>(pool.size());
  }
  double acc = 0.0;
  for (double r : residual) acc += sq(r - mean);
  return std::sqrt(acc / static_cast<double>(pool.size()));
}

}  // namespace

GanCheckpoint train(const TrainConfig& config, std::span<const Dataset> train_data,
                    std::span<const Dataset> val_data, TrainStats* stats) {
  config.validate();
  bool cyclic = config.mode == GanMode::cyclegan;

  std::vector<const Dataset*> lab, carm;
  for (const auto& d : train_data) {
    (d.env_id == config.lab_env_id ? lab : carm).push_back(&d);
  }
  if (lab.empty()) throw DataError("no laboratory dataset in training role");
  if (carm.empty()) throw DataError("no distorted-domain dataset in training role");

  auto bounds = NormalizationBounds::from_datasets(train_data);

  auto build_pool = [&](const std::vector<const Dataset*>& sets) {
    std::vector<GanBatchPoint> pool;
    for (std::size_t e = 0; e < sets.size(); ++e) {
      for (const auto& s : sets[e]->samples) {
        GanBatchPoint p;
        p.v = normalize_point(s.point, bounds).v;
        p.env = e;
        p.true_pos = sets[e]->grid.true_position(s.index);
        pool.push_back(p);
      }
    }
    return pool;
  };
  auto c_pool = build_pool(carm);
  auto l_pool = build_pool(lab);

  std::vector<ValPoint> val_pool;
  for (const auto& d : val_data) {
    for (const auto& s : d.samples) {
      val_pool.push_back(
          {normalize_point(s.point, bounds).v, d.grid.true_position(s.index)[2]});
    }
  }

  GanModels models;
  models.g_cl = mlp_init(config.generator_layout, Rng::derive(config.seed, 1));
  models.g_lc = mlp_init(config.generator_layout, Rng::derive(config.seed, 2));
  models.d_cl = mlp_init(config.discriminator_layout, Rng::derive(config.seed, 3));
  models.d_lc = mlp_init(config.discriminator_layout, Rng::derive(config.seed, 4));

  // The generators share one optimizer step (common step counter); each
  // discriminator keeps its own.
  AdamState opt_gcl = AdamState::for_params(models.g_cl);
  AdamState opt_glc = AdamState::for_params(models.g_lc);
  AdamState opt_dcl = AdamState::for_params(models.d_cl);
  AdamState opt_dlc = AdamState::for_params(models.d_lc);

  Rng shuffle_rng(Rng::derive(config.seed, 5));
  std::uint64_t label_seed_base = Rng::derive(config.seed, 6);

  GanCheckpoint ckpt;
  ckpt.mode = config.mode;
  ckpt.seed = config.seed;
  ckpt.bounds = bounds;
  ckpt.weights = config.weights;
  ckpt.labels = config.labels;
  ckpt.schedule = config.schedule;
  ckpt.initial_val_z_rmse = val_z_metric(models, bounds, val_pool, stats);

  const int batch = config.schedule.batch_size;
  std::vector<std::size_t> c_order(c_pool.size()), l_order(l_pool.size());
  for (std::size_t i = 0; i < c_order.size(); ++i) c_order[i] = i;
  for (std::size_t i = 0; i < l_order.size(); ++i) l_order[i] = i;

  for (int epoch = 0; epoch < config.schedule.total_epochs; ++epoch) {
    double lr = lr_at(config.schedule, epoch);
    shuffle_rng.shuffle(c_order);
    shuffle_rng.shuffle(l_order);
    std::size_t l_pos = 0;

    EpochTrace trace;
    trace.epoch = epoch + 1;
    std::size_t steps =
        (c_pool.size() + static_cast<std::size_t>(batch) - 1) /
        static_cast<std::size_t>(batch);

    for (std::size_t step = 0; step < steps; ++step) {
      std::size_t begin = step * static_cast<std::size_t>(batch);
      std::size_t end = std::min(begin + static_cast<std::size_t>(batch), c_pool.size());
      std::vector<GanBatchPoint> batch_c, batch_l;
      for (std::size_t i = begin; i < end; ++i) batch_c.push_back(c_pool[c_order[i]]);
      for (std::size_t i = begin; i < end; ++i) {
        batch_l.push_back(l_pool[l_order[l_pos % l_pool.size()]]);
        ++l_pos;
      }

      PairInfo pairs = pairs_from_batch(batch_c);
      GeneratorGrads ggrads;
      auto eval = generator_eval(models, batch_c, batch_l, config.weights, &pairs,
                                 bounds, config.mode, &ggrads, stats);
      if (!std::isfinite(eval.components.total)) {
        throw NumericError("non-finite generator loss at epoch " +
                           std::to_string(epoch) + ", step " + std::to_string(step));
      }

      adam_step(models.g_cl, ggrads.g_cl, opt_gcl, lr);
      if (cyclic) adam_step(models.g_lc, ggrads.g_lc, opt_glc, lr);

      std::vector<Vec7> real_l, real_c;
      for (const auto& p : batch_l) real_l.push_back(p.v);
      for (const auto& p : batch_c) real_c.push_back(p.v);

      std::uint64_t step_tag =
          static_cast<std::uint64_t>(epoch) * 1000000ULL + step * 2ULL;
      MlpGrads dgrads;
      double dcl_loss =
          discriminator_loss(models.d_cl, real_l, eval.fake_cl, config.labels,
                             Rng::derive(label_seed_base, step_tag), &dgrads);
      if (stats) stats->d_cl_forward += real_l.size() + eval.fake_cl.size();
      if (!std::isfinite(dcl_loss)) {
        throw NumericError("non-finite discriminator loss at epoch " +
                           std::to_string(epoch) + ", step " + std::to_string(step));
      }
      adam_step(models.d_cl, dgrads, opt_dcl, lr);

      double dlc_loss = 0.0;
      if (cyclic) {
        dlc_loss =
            discriminator_loss(models.d_lc, real_c, eval.fake_lc, config.labels,
                               Rng::derive(label_seed_base, step_tag + 1), &dgrads);
        if (stats) stats->d_lc_forward += real_c.size() + eval.fake_lc.size();
        adam_step(models.d_lc, dgrads, opt_dlc, lr);
      }

      double w = 1.0 / static_cast<double>(steps);
      trace.adv += eval.components.adv * w;
      trace.cycle += eval.components.cycle * w;
      trace.comp += eval.components.comp * w;
      trace.quality += eval.components.quality * w;
      trace.total += eval.components.total * w;
      trace.d_cl += dcl_loss * w;
      trace.d_lc += dlc_loss * w;
    }

    trace.val_z_rmse = val_z_metric(models, bounds, val_pool, stats);
    ckpt.trace.push_back(trace);
  }

  ckpt.models = std::move(models);
  return ckpt;
}

MeasurementPoint translate_point(const GanCheckpoint& ckpt, const MeasurementPoint& p) {
  ckpt.bounds.validate();
  auto norm = normalize_point(p, ckpt.bounds);
  auto gen = mlp_forward(ckpt.models.g_cl, norm.v);
  Vec7 assembled = assemble_full_point(norm.v, gen);
  MeasurementPoint out = denormalize_point(assembled, ckpt.bounds).canonicalized();
  // Passthrough channels stay bit-identical in mm; quality stays physical.
  out.x = p.x;
  out.y = p.y;
  out.q = std::max(out.q, 0.0);
  return out;
}

// --- serialization ----------------------------------------------------------

nlohmann::json bounds_to_json(const NormalizationBounds& b) {
  return {{"min", b.min}, {"max", b.max}};
}

NormalizationBounds bounds_from_json(const nlohmann::json& j) {
  NormalizationBounds b;
  auto mn = j.at("min").get<std::vector<double>>();
  auto mx = j.at("max").get<std::vector<double>>();
  if (mn.size() != kChannels || mx.size() != kChannels) {
    throw DataError("bounds need exactly 7 channels");
  }
  std::copy(mn.begin(), mn.end(), b.min.begin());
  std::copy(mx.begin(), mx.end(), b.max.begin());
  b.validate();
  return b;
}

nlohmann::json checkpoint_to_json(const GanCheckpoint& ckpt) {
  nlohmann::json j;
  j["mode"] = to_string(ckpt.mode);
  j["seed"] = ckpt.seed;
  j["loss_weights"] = {{"lambda_adv", ckpt.weights.adv},
                       {"lambda_cycle", ckpt.weights.cycle},
                       {"lambda_comp", ckpt.weights.comp},
                       {"lambda_quality", ckpt.weights.quality}};
  j["soft_labels"] = {{"valid_lo", ckpt.labels.valid_lo},
                      {"valid_hi", ckpt.labels.valid_hi},
                      {"fake_lo", ckpt.labels.fake_lo},
                      {"fake_hi", ckpt.labels.fake_hi},
                      {"l_valid", ckpt.labels.l_valid}};
  j["schedule"] = {{"base_lr", ckpt.schedule.base_lr},
                   {"total_epochs", ckpt.schedule.total_epochs},
                   {"decay_start_epoch", ckpt.schedule.decay_start_epoch},
                   {"batch_size", ckpt.schedule.batch_size}};
  j["bounds"] = bounds_to_json(ckpt.bounds);
  j["models"] = {{"g_cl", mlp_to_json(ckpt.models.g_cl)},
                 {"g_lc", mlp_to_json(ckpt.models.g_lc)},
                 {"d_cl", mlp_to_json(ckpt.models.d_cl)},
                 {"d_lc", mlp_to_json(ckpt.models.d_lc)}};
  j["initial_val_z_rmse"] = ckpt.initial_val_z_rmse;
  auto trace = nlohmann::json::array();
  for (const auto& t : ckpt.trace) {
    trace.push_back({{"epoch", t.epoch},
                     {"adv", t.adv},
                     {"cycle", t.cycle},
                     {"comp", t.comp},
                     {"quality", t.quality},
                     {"total", t.total},
                     {"d_cl", t.d_cl},
                     {"d_lc", t.d_lc},
                     {"val_z_rmse", t.val_z_rmse}});
  }
  j["loss_trace"] = trace;
  return j;
}

GanCheckpoint checkpoint_from_json(const nlohmann::json& j) {
  GanCheckpoint ckpt;
  ckpt.mode = gan_mode_from_string(j.at("mode").get<std::string>());
  ckpt.seed = j.at("seed").get<std::uint64_t>();
  const auto& w = j.at("loss_weights");
  ckpt.weights.adv = w.at("lambda_adv").get<double>();
  ckpt.weights.cycle = w.at("lambda_cycle").get<double>();
  ckpt.weights.comp = w.at("lambda_comp").get<double>();
  ckpt.weights.quality = w.at("lambda_quality").get<double>();
  const auto& lb = j.at("soft_labels");
  ckpt.labels.valid_lo = lb.at("valid_lo").get<double>();
  ckpt.labels.valid_hi = lb.at("valid_hi").get<double>();
  ckpt.labels.fake_lo = lb.at("fake_lo").get<double>();
  ckpt.labels.fake_hi = lb.at("fake_hi").get<double>();
  ckpt.labels.l_valid = lb.at("l_valid").get<double>();
  const auto& s = j.at("schedule");
  ckpt.schedule.base_lr = s.at("base_lr").get<double>();
  ckpt.schedule.total_epochs = s.at("total_epochs").get<int>();
  ckpt.schedule.decay_start_epoch = s.at("decay_start_epoch").get<int>();
  ckpt.schedule.batch_size = s.at("batch_size").get<int>();
  ckpt.bounds = bounds_from_json(j.at("bounds"));
  const auto& m = j.at("models");
  ckpt.models.g_cl = mlp_from_json(m.at("g_cl"));
  ckpt.models.g_lc = mlp_from_json(m.at("g_lc"));
  ckpt.models.d_cl = mlp_from_json(m.at("d_cl"));
  ckpt.models.d_lc = mlp_from_json(m.at("d_lc"));
  ckpt.initial_val_z_rmse = j.at("initial_val_z_rmse").get<double>();
  for (const auto& tj : j.at("loss_trace")) {
    EpochTrace t;
    t.epoch = tj.at("epoch").get<int>();
    t.adv = tj.at("adv").get<double>();
    t.cycle = tj.at("cycle").get<double>();
    t.comp = tj.at("comp").get<double>();
    t.quality = tj.at("quality").get<double>();
    t.total = tj.at("total").get<double>();
    t.d_cl = tj.at("d_cl").get<double>();
    t.d_lc = tj.at("d_lc").get<double>();
    t.val_z_rmse = tj.at("val_z_rmse").get<double>();
    ckpt.trace.push_back(t);
  }
  return ckpt;
}

std::string checkpoint_to_json_string(const GanCheckpoint& ckpt) {
  return checkpoint_to_json(ckpt).dump();
}

GanCheckpoint checkpoint_from_json_string(const std::string& s) {
  try {
    return checkpoint_from_json(nlohmann::json::parse(s));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad checkpoint JSON: ") + e.what());
  }
}

void save_checkpoint(const GanCheckpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << checkpoint_to_json(ckpt).dump(2) << '\n';
}

GanCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  try {
    return checkpoint_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace emt

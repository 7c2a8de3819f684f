#include "emt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "emt/rng.hpp"

namespace emt {

std::string to_string(Stage s) {
  switch (s) {
    case Stage::raw: return "raw";
    case Stage::cyclegan: return "cyclegan";
    case Stage::cyclegan_ft: return "cyclegan_ft";
  }
  throw ConfigError("unknown stage");
}

Stage stage_from_string(const std::string& s) {
  if (s == "raw") return Stage::raw;
  if (s == "cyclegan") return Stage::cyclegan;
  if (s == "cyclegan_ft") return Stage::cyclegan_ft;
  throw DataError("unknown stage: '" + s + "'");
}

namespace {

MeasurementPoint apply_stage(const EnsembleModel* model, const MeasurementPoint& p,
                             Stage stage) {
  switch (stage) {
    case Stage::raw: return p;
    case Stage::cyclegan: return predict_stage(*model, p, false).point;
    case Stage::cyclegan_ft: return predict_stage(*model, p, true).point;
  }
  return p;
}

}  // namespace

std::vector<EvalCell> evaluate(const EnsembleModel* model,
                               std::span<const Dataset> datasets, Stage stage) {
  if (datasets.empty()) throw DataError("no datasets to evaluate");
  if (stage != Stage::raw && model == nullptr) {
    throw ConfigError("stage '" + to_string(stage) + "' needs a model");
  }
  std::vector<EvalCell> cells;
  for (const auto& d : datasets) {
    Dataset compensated = d;
    for (auto& s : compensated.samples) {
      s.point = apply_stage(model, s.point, stage);
    }
    auto summary = displacement_rmse(displacement_errors(compensated));
    EvalCell cell;
    cell.method = to_string(stage);
    cell.env_id = d.env_id;
    cell.rmse = summary.rmse;
    cell.stddev = summary.stddev;
    cells.push_back(cell);
  }
  return cells;
}

ConsistencyResult consistency_metric(const EnsembleModel& model,
                                     std::span<const Dataset> env_datasets) {
  if (env_datasets.size() < 2) {
    throw DataError("consistency needs at least two environments");
  }
  std::set<GridIndex> shared;
  for (const auto& s : env_datasets[0].samples) shared.insert(s.index);
  for (std::size_t e = 1; e < env_datasets.size(); ++e) {
    std::set<GridIndex> present;
    for (const auto& s : env_datasets[e].samples) present.insert(s.index);
    std::set<GridIndex> both;
    std::set_intersection(shared.begin(), shared.end(), present.begin(),
                          present.end(), std::inserter(both, both.begin()));
    shared = std::move(both);
  }
  if (shared.empty()) throw DataError("environments share no grid indices");

  auto spread = [&](auto&& z_of) {
    double acc = 0.0;
    for (const auto& idx : shared) {
      double lo = 0.0, hi = 0.0;
      bool first = true;
      for (const auto& d : env_datasets) {
        for (const auto& s : d.samples) {
          if (!(s.index == idx)) continue;
          double z = z_of(s.point);
          if (first) {
            lo = hi = z;
            first = false;
          } else {
            lo = std::min(lo, z);
            hi = std::max(hi, z);
          }
        }
      }
      acc += hi - lo;
    }
    return acc / static_cast<double>(shared.size());
  };

  ConsistencyResult res;
  res.raw_spread_mm = spread([](const MeasurementPoint& p) { return p.z; });
  res.model_spread_mm = spread(
      [&](const MeasurementPoint& p) { return predict(model, p).point.z; });
  return res;
}

void TrajectorySpec::validate() const {
  if (steps < 2) throw ConfigError("trajectory needs at least 2 steps");
}

double circular_stddev_deg(std::span<const double> angles_deg) {
  if (angles_deg.empty()) throw DataError("empty angle series");
  constexpr double kDeg = 3.14159265358979323846 / 180.0;
  double c = 0.0, s = 0.0;
  for (double a : angles_deg) {
    c += std::cos(a * kDeg);
    s += std::sin(a * kDeg);
  }
  double n = static_cast<double>(angles_deg.size());
  double r = std::sqrt(c * c + s * s) / n;
  r = std::clamp(r, 1e-300, 1.0);
  return std::sqrt(-2.0 * std::log(r)) / kDeg;
}

TrajectoryCheck trajectory_rotation_check(const EnsembleModel& model,
                                          const TrajectorySpec& spec,
                                          const DistortionEnv& env) {
  spec.validate();
  TrajectoryCheck out;
  for (int k = 0; k < spec.steps; ++k) {
    MeasurementPoint pose = spec.start;
    pose.x += k * spec.step_mm[0];
    pose.y += k * spec.step_mm[1];
    pose.z += k * spec.step_mm[2];
    auto measured = distort(env, pose, static_cast<std::uint64_t>(k));
    auto comp = predict(model, measured).point;
    out.raw.phi_x.push_back(measured.phi_x);
    out.raw.phi_y.push_back(measured.phi_y);
    out.raw.phi_z.push_back(measured.phi_z);
    out.compensated.phi_x.push_back(comp.phi_x);
    out.compensated.phi_y.push_back(comp.phi_y);
    out.compensated.phi_z.push_back(comp.phi_z);
  }
  out.raw_circ_std = {circular_stddev_deg(out.raw.phi_x),
                      circular_stddev_deg(out.raw.phi_y),
                      circular_stddev_deg(out.raw.phi_z)};
  out.comp_circ_std = {circular_stddev_deg(out.compensated.phi_x),
                       circular_stddev_deg(out.compensated.phi_y),
                       circular_stddev_deg(out.compensated.phi_z)};
  return out;
}

// --- topology baseline -------------------------------------------------------

MlpLayout default_ann_layout() {
  MlpLayout l;
  l.input_width = kChannels;
  l.hidden = {{32, Activation::leaky_relu, 0.2}, {32, Activation::leaky_relu, 0.2}};
  l.output_width = 3;
  l.output_activation = Activation::linear;
  return l;
}

namespace {

struct AnnPoint {
  Vec7 v{};
  std::array<double, 3> measured{};
  std::array<double, 3> true_pos{};
  std::size_t env = 0;
};

MlpParams ann_train_member(const AnnConfig& config,
                           const std::vector<AnnPoint>& pool,
                           std::uint64_t member_seed) {
  MlpParams net = mlp_init(config.layout, Rng::derive(member_seed, 1));
  AdamState opt = AdamState::for_params(net);
  Rng shuffle_rng(Rng::derive(member_seed, 2));
  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const auto batch = static_cast<std::size_t>(config.schedule.batch_size);
  for (int epoch = 0; epoch < config.schedule.total_epochs; ++epoch) {
    double lr = lr_at(config.schedule, epoch);
    shuffle_rng.shuffle(order);
    std::size_t steps = (pool.size() + batch - 1) / batch;
    for (std::size_t step = 0; step < steps; ++step) {
      std::size_t begin = step * batch;
      std::size_t end = std::min(begin + batch, pool.size());
      std::size_t n = end - begin;

      std::vector<ForwardCache> caches(n);
      std::vector<std::array<double, 3>> pos(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto& pt = pool[order[begin + i]];
        caches[i] = mlp_forward_cached(net, pt.v);
        for (std::size_t c = 0; c < 3; ++c) {
          double offset = caches[i].output[c];
          if (config.confine_xy && c == 2) offset = 0.0;
          pos[i][c] = pt.measured[c] + offset;
        }
      }

      // Pairwise displacement-distance MSE within the batch, restricted to
      // points from the same environment.
      std::vector<std::array<double, 3>> dpos(n, std::array<double, 3>{});
      std::size_t n_pairs = 0;
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
          if (pool[order[begin + a]].env != pool[order[begin + b]].env) continue;
          ++n_pairs;
        }
      }
      if (n_pairs == 0) continue;
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
          const auto& pa = pool[order[begin + a]];
          const auto& pb = pool[order[begin + b]];
          if (pa.env != pb.env) continue;
          double tx = pa.true_pos[0] - pb.true_pos[0];
          double ty = pa.true_pos[1] - pb.true_pos[1];
          double tz = pa.true_pos[2] - pb.true_pos[2];
          double true_dist = std::sqrt(tx * tx + ty * ty + tz * tz);
          double dx = pos[a][0] - pos[b][0];
          double dy = pos[a][1] - pos[b][1];
          double dz = pos[a][2] - pos[b][2];
          double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
          if (dist <= 0.0) continue;
          double base = 2.0 * (dist - true_dist) / static_cast<double>(n_pairs);
          std::array<double, 3> dir{dx / dist, dy / dist, dz / dist};
          for (std::size_t c = 0; c < 3; ++c) {
            dpos[a][c] += base * dir[c];
            dpos[b][c] -= base * dir[c];
          }
        }
      }

      MlpGrads grads = MlpGrads::zeros_like(net);
      for (std::size_t i = 0; i < n; ++i) {
        std::array<double, 3> dout = dpos[i];
        if (config.confine_xy) dout[2] = 0.0;
        auto back = mlp_backward(net, caches[i], dout);
        grads.add_scaled(back.grads, 1.0);
      }
      adam_step(net, grads, opt, lr);
    }
  }
  return net;
}

}  // namespace

AnnModel ann_baseline_train(const AnnConfig& config,
                            std::span<const Dataset> train_data) {
  config.layout.validate();
  config.schedule.validate();
  if (config.member_count < 2) throw ConfigError("baseline needs >= 2 members");
  if (train_data.empty()) throw DataError("no training datasets");
  if (config.layout.input_width != kChannels || config.layout.output_width != 3) {
    throw ConfigError("baseline must map 7 channels to 3 offsets");
  }

  AnnModel model;
  model.config = config;
  model.bounds = NormalizationBounds::from_datasets(train_data);

  std::vector<AnnPoint> pool;
  for (std::size_t e = 0; e < train_data.size(); ++e) {
    for (const auto& s : train_data[e].samples) {
      AnnPoint p;
      p.v = normalize_point(s.point, model.bounds).v;
      p.measured = s.point.position();
      p.true_pos = train_data[e].grid.true_position(s.index);
      p.env = e;
      pool.push_back(p);
    }
  }

  for (int k = 0; k < config.member_count; ++k) {
    model.members.push_back(
        ann_train_member(config, pool, config.base_seed + static_cast<std::uint64_t>(k)));
  }
  return model;
}

CompensatedPoint ann_predict(const AnnModel& model, const MeasurementPoint& p) {
  if (model.members.size() < 2) throw ConfigError("baseline needs >= 2 members");
  auto v = normalize_point(p, model.bounds).v;
  const double n = static_cast<double>(model.members.size());
  std::vector<std::array<double, 3>> outs;
  outs.reserve(model.members.size());
  for (const auto& net : model.members) {
    auto offset = mlp_forward(net, v);
    if (model.config.confine_xy) offset[2] = 0.0;
    outs.push_back({p.x + offset[0], p.y + offset[1], p.z + offset[2]});
  }
  CompensatedPoint out;
  out.point = p;
  std::array<double, 3> mean{};
  for (std::size_t c = 0; c < 3; ++c) {
    for (const auto& o : outs) mean[c] += o[c] / n;
    double var = 0.0;
    for (const auto& o : outs) var += (o[c] - mean[c]) * (o[c] - mean[c]);
    out.sigma_pred[c] = std::sqrt(var / n);
  }
  out.point.x = mean[0];
  out.point.y = mean[1];
  out.point.z = mean[2];
  out.sigma_scalar = scalar_sigma(out.sigma_pred);
  return out;
}

std::vector<EvalCell> ann_baseline_eval(const AnnModel& model,
                                        std::span<const Dataset> datasets) {
  if (datasets.empty()) throw DataError("no datasets to evaluate");
  std::vector<EvalCell> cells;
  std::string method = model.config.confine_xy ? "ann_xy_confined" : "ann";
  for (const auto& d : datasets) {
    Dataset compensated = d;
    for (auto& s : compensated.samples) {
      s.point = ann_predict(model, s.point).point;
    }
    auto summary = displacement_rmse(displacement_errors(compensated));
    cells.push_back({method, d.env_id, summary.rmse, summary.stddev, false, ""});
  }
  return cells;
}

// --- ablation ----------------------------------------------------------------

namespace {

double mean_sigma_over(const std::function<CompensatedPoint(const MeasurementPoint&)>& f,
                       std::span<const Dataset> datasets) {
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& d : datasets) {
    for (const auto& s : d.samples) {
      acc += f(s.point).sigma_scalar;
      ++n;
    }
  }
  return n == 0 ? 0.0 : acc / static_cast<double>(n);
}

std::string ablation_config_hash(const AblationConfig& config) {
  nlohmann::json j;
  j["master_seed"] = config.master_seed;
  j["gan_members"] = config.gan_members;
  j["mode"] = to_string(config.gan_base.mode);
  j["schedule"] = {{"base_lr", config.gan_base.schedule.base_lr},
                   {"total_epochs", config.gan_base.schedule.total_epochs},
                   {"decay_start_epoch", config.gan_base.schedule.decay_start_epoch},
                   {"batch_size", config.gan_base.schedule.batch_size}};
  j["weights"] = {{"adv", config.gan_base.weights.adv},
                  {"cycle", config.gan_base.weights.cycle},
                  {"comp", config.gan_base.weights.comp},
                  {"quality", config.gan_base.weights.quality}};
  j["ann_members"] = config.ann.member_count;
  j["lab_env_id"] = config.lab_env_id;
  return hex64(fnv1a64(j.dump()));
}

}  // namespace

EvalReport ablation_run(const AblationConfig& config,
                        std::span<const Dataset> datasets) {
  std::vector<Dataset> train_sets, val_sets, eval_sets;
  for (const auto& d : datasets) {
    switch (d.role) {
      case Role::train: train_sets.push_back(d); break;
      case Role::validation: val_sets.push_back(d); break;
      case Role::evaluation: eval_sets.push_back(d); break;
    }
  }
  if (eval_sets.empty()) throw DataError("no evaluation datasets");

  EvalReport report;
  report.master_seed = config.master_seed;
  report.config_hash = ablation_config_hash(config);
  for (const auto& d : datasets) {
    report.dataset_ids.push_back(d.env_id + ":" + to_string(d.role));
  }
  std::sort(report.dataset_ids.begin(), report.dataset_ids.end());

  auto record_failure = [&](const std::string& method, const std::string& why) {
    for (const auto& d : eval_sets) {
      report.cells.push_back({method, d.env_id, 0.0, 0.0, true, why});
    }
  };

  // Raw arm: same code path as evaluate(stage=raw).
  try {
    auto cells = evaluate(nullptr, eval_sets, Stage::raw);
    report.cells.insert(report.cells.end(), cells.begin(), cells.end());
  } catch (const std::exception& e) {
    record_failure("raw", e.what());
  }

  // CycleGAN ensemble, shared by the plain and fine-tuned arms.
  std::optional<EnsembleModel> gan;
  try {
    EnsembleTrainConfig etc;
    etc.base = config.gan_base;
    etc.base.mode = GanMode::cyclegan;
    etc.base.lab_env_id = config.lab_env_id;
    etc.member_count = config.gan_members;
    etc.base_seed = config.master_seed;
    etc.jobs = config.jobs;
    gan = train_ensemble(etc, train_sets, val_sets);
    auto cells = evaluate(&*gan, eval_sets, Stage::cyclegan);
    report.cells.insert(report.cells.end(), cells.begin(), cells.end());
    report.sigma_pred["cyclegan"] = mean_sigma_over(
        [&](const MeasurementPoint& p) { return predict_stage(*gan, p, false); },
        eval_sets);
  } catch (const std::exception& e) {
    gan.reset();
    record_failure("cyclegan", e.what());
  }

  if (gan) {
    try {
      gan->finetune =
          fit_finetune(*gan, finetune_reference(train_sets, config.lab_env_id));
      auto cells = evaluate(&*gan, eval_sets, Stage::cyclegan_ft);
      report.cells.insert(report.cells.end(), cells.begin(), cells.end());
      // Member spread is unchanged by the shared affine correction; the
      // regression stage itself carries no ensemble uncertainty.
      report.sigma_pred["cyclegan_ft"] = report.sigma_pred["cyclegan"];
    } catch (const std::exception& e) {
      record_failure("cyclegan_ft", e.what());
    }
  } else {
    record_failure("cyclegan_ft", "cyclegan arm unavailable");
  }

  // Vanilla GAN arm: same seeds, no cycle constraint.
  try {
    EnsembleTrainConfig etc;
    etc.base = config.gan_base;
    etc.base.mode = GanMode::vanilla_gan;
    etc.base.lab_env_id = config.lab_env_id;
    etc.member_count = config.gan_members;
    etc.base_seed = config.master_seed;
    etc.jobs = config.jobs;
    auto vanilla = train_ensemble(etc, train_sets, val_sets);
    auto cells = evaluate(&vanilla, eval_sets, Stage::cyclegan);
    for (auto& c : cells) c.method = "vanilla_gan";
    report.cells.insert(report.cells.end(), cells.begin(), cells.end());
    report.sigma_pred["vanilla_gan"] = mean_sigma_over(
        [&](const MeasurementPoint& p) { return predict_stage(vanilla, p, false); },
        eval_sets);
  } catch (const std::exception& e) {
    record_failure("vanilla_gan", e.what());
  }

  // Topology baseline.
  try {
    AnnConfig ac = config.ann;
    ac.base_seed = config.master_seed;
    auto ann = ann_baseline_train(ac, train_sets);
    auto cells = ann_baseline_eval(ann, eval_sets);
    report.cells.insert(report.cells.end(), cells.begin(), cells.end());
    report.sigma_pred[cells.front().method] = mean_sigma_over(
        [&](const MeasurementPoint& p) { return ann_predict(ann, p); }, eval_sets);
  } catch (const std::exception& e) {
    record_failure("ann", e.what());
  }

  if (gan) {
    try {
      auto res = consistency_metric(*gan, eval_sets);
      report.consistency =
          ConsistencySection{res.raw_spread_mm, res.model_spread_mm};
    } catch (const std::exception&) {
      report.consistency.reset();
    }
  }
  return report;
}

// --- report output -----------------------------------------------------------

namespace {

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["config_hash"] = report.config_hash;
  j["master_seed"] = report.master_seed;
  j["dataset_ids"] = report.dataset_ids;
  auto cells = nlohmann::json::array();
  for (const auto& c : report.cells) {
    cells.push_back({{"method", c.method},
                     {"env", c.env_id},
                     {"rmse", c.rmse},
                     {"stddev", c.stddev},
                     {"skipped", c.skipped},
                     {"note", c.note}});
  }
  j["cells"] = cells;
  j["sigma_pred"] = report.sigma_pred;
  if (report.consistency) {
    j["consistency"] = {{"raw_spread_mm", report.consistency->raw_spread_mm},
                        {"model_spread_mm", report.consistency->model_spread_mm}};
  } else {
    j["consistency"] = nullptr;
  }
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport report;
  report.config_hash = j.at("config_hash").get<std::string>();
  report.master_seed = j.at("master_seed").get<std::uint64_t>();
  report.dataset_ids = j.at("dataset_ids").get<std::vector<std::string>>();
  for (const auto& cj : j.at("cells")) {
    EvalCell c;
    c.method = cj.at("method").get<std::string>();
    c.env_id = cj.at("env").get<std::string>();
    c.rmse = cj.at("rmse").get<double>();
    c.stddev = cj.at("stddev").get<double>();
    c.skipped = cj.at("skipped").get<bool>();
    c.note = cj.at("note").get<std::string>();
    report.cells.push_back(c);
  }
  report.sigma_pred = j.at("sigma_pred").get<std::map<std::string, double>>();
  if (!j.at("consistency").is_null()) {
    ConsistencySection s;
    s.raw_spread_mm = j.at("consistency").at("raw_spread_mm").get<double>();
    s.model_spread_mm = j.at("consistency").at("model_spread_mm").get<double>();
    report.consistency = s;
  }
  return report;
}

std::string fixed3(double v) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(3);
  os << v;
  return os.str();
}

}  // namespace

std::string report_to_json_string(const EvalReport& report) {
  return report_to_json(report).dump();
}

EvalReport report_from_json_string(const std::string& s) {
  try {
    return report_from_json(nlohmann::json::parse(s));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad report JSON: ") + e.what());
  }
}

void save_report_json(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << report_to_json(report).dump(2) << '\n';
}

std::string format_report_table(const EvalReport& report) {
  std::vector<std::array<std::string, 5>> rows;
  rows.push_back({"Method", "Dataset", "RMSE [mm]", "sigma_error [mm]",
                  "sigma_pred [mm]"});
  std::string last_method;
  for (const auto& c : report.cells) {
    std::array<std::string, 5> row;
    row[0] = c.method == last_method ? "" : c.method;
    last_method = c.method;
    row[1] = c.env_id;
    if (c.skipped) {
      row[2] = "skipped";
      row[3] = c.note;
    } else {
      row[2] = fixed3(c.rmse);
      row[3] = fixed3(c.stddev);
    }
    if (!row[0].empty()) {
      auto it = report.sigma_pred.find(c.method);
      if (it != report.sigma_pred.end()) row[4] = fixed3(it->second);
    }
    rows.push_back(row);
  }

  std::array<std::size_t, 5> width{};
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < 5; ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream os;
  for (std::size_t ri = 0; ri < rows.size(); ++ri) {
    for (std::size_t c = 0; c < 5; ++c) {
      os << rows[ri][c] << std::string(width[c] - rows[ri][c].size(), ' ');
      os << (c + 1 < 5 ? "  " : "");
    }
    os << '\n';
    if (ri == 0) {
      std::size_t total = 8;
      for (auto w : width) total += w;
      os << std::string(total, '-') << '\n';
    }
  }
  if (report.consistency) {
    os << '\n'
       << "z-consistency across environments (mean max-min spread):\n"
       << "  raw          " << fixed3(report.consistency->raw_spread_mm) << " mm\n"
       << "  compensated  " << fixed3(report.consistency->model_spread_mm)
       << " mm\n";
  }
  return os.str();
}

void write_scatter_svg(const Dataset& reference, const Dataset& raw,
                       const std::vector<MeasurementPoint>& compensated,
                       const std::filesystem::path& path) {
  if (compensated.size() != raw.samples.size()) {
    throw ConfigError("compensated points must align with the raw samples");
  }
  double xmin = 1e300, xmax = -1e300, zmin = 1e300, zmax = -1e300;
  auto absorb = [&](double x, double z) {
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    zmin = std::min(zmin, z);
    zmax = std::max(zmax, z);
  };
  for (const auto& s : reference.samples) absorb(s.point.x, s.point.z);
  for (const auto& s : raw.samples) absorb(s.point.x, s.point.z);
  for (const auto& p : compensated) absorb(p.x, p.z);
  double xr = std::max(xmax - xmin, 1e-6), zr = std::max(zmax - zmin, 1e-6);

  constexpr double kW = 640.0, kH = 420.0, kMargin = 40.0;
  auto sx = [&](double x) {
    return kMargin + (x - xmin) / xr * (kW - 2 * kMargin);
  };
  auto sz = [&](double z) {
    return kH - kMargin - (z - zmin) / zr * (kH - 2 * kMargin);
  };

  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW
      << "\" height=\"" << kH << "\" viewBox=\"0 0 " << kW << ' ' << kH
      << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  auto dot = [&](double x, double z, const char* color, double r) {
    out << "<circle cx=\"" << format_double(sx(x)) << "\" cy=\""
        << format_double(sz(z)) << "\" r=\"" << r << "\" fill=\"" << color
        << "\" fill-opacity=\"0.8\"/>\n";
  };
  for (const auto& s : reference.samples) dot(s.point.x, s.point.z, "#222222", 4.0);
  for (const auto& s : raw.samples) dot(s.point.x, s.point.z, "#d62728", 2.5);
  for (const auto& p : compensated) dot(p.x, p.z, "#2ca02c", 2.5);
  out << "<text x=\"" << kMargin << "\" y=\"18\" font-family=\"sans-serif\" "
         "font-size=\"12\">"
      << raw.env_id
      << " (x vs z, mm) &#8212; reference: dark, raw: red, compensated: green"
         "</text>\n";
  out << "</svg>\n";
}

void write_trajectory_csv(const TrajectoryCheck& check,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << "step,raw_phi_x,raw_phi_y,raw_phi_z,comp_phi_x,comp_phi_y,comp_phi_z\n";
  for (std::size_t k = 0; k < check.raw.phi_x.size(); ++k) {
    out << k << ',' << format_double(check.raw.phi_x[k]) << ','
        << format_double(check.raw.phi_y[k]) << ','
        << format_double(check.raw.phi_z[k]) << ','
        << format_double(check.compensated.phi_x[k]) << ','
        << format_double(check.compensated.phi_y[k]) << ','
        << format_double(check.compensated.phi_z[k]) << '\n';
  }
}

}  // namespace emt

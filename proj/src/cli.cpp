#include "emt/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "emt/sim.hpp"

namespace emt {

namespace {

std::string fixed3(double v) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(3);
  os << v;
  return os.str();
}

}  // namespace

TrajectorySpec default_trajectory(const GroundTruthGrid& grid) {
  TrajectorySpec spec;
  std::array<double, 3> dir{1.0, 0.7, 0.1};
  double norm = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
  for (auto& v : dir) v *= 8.0 / norm;
  spec.step_mm = dir;
  spec.steps = 13;
  auto center = grid.centroid();
  spec.start.x = center[0] - 6.0 * dir[0];
  spec.start.y = center[1] - 6.0 * dir[1];
  spec.start.z = center[2] - 6.0 * dir[2];
  return spec;
}

int cmd_simulate(const SimulateOptions& options, std::ostream& log) {
  SimulationSpec spec;
  if (options.preset == "table1") {
    spec.grid = default_grid();
    spec.environments = table1_preset(options.seed);
  } else if (options.preset.empty()) {
    if (options.spec_path.empty()) {
      throw ConfigError("either --preset or --spec is required");
    }
    spec = load_simulation_spec(options.spec_path);
  } else {
    throw ConfigError("unknown preset: '" + options.preset + "'");
  }

  std::filesystem::create_directories(options.out_dir);
  save_grid_json(spec.grid, options.out_dir / "grid.json");

  SimulationSpec calibrated;
  calibrated.grid = spec.grid;
  for (const auto& entry : spec.environments) {
    PresetEntry realized = entry;
    if (entry.target_rmse > 0.0) {
      realized.spec = calibrate_severity(entry.spec, spec.grid, entry.target_rmse,
                                         entry.tolerance, entry.seed);
    }
    auto env = make_environment(realized.spec, realized.seed);
    auto dataset = generate_dataset(env, spec.grid, realized.role, realized.seed);
    save_dataset_csv(dataset, options.out_dir / (dataset.env_id + ".csv"));
    auto summary = displacement_rmse(displacement_errors(dataset));
    log << dataset.env_id << " (" << to_string(dataset.role)
        << "): rmse " << fixed3(summary.rmse) << " mm, stddev "
        << fixed3(summary.stddev) << " mm\n";
    calibrated.environments.push_back(realized);
  }
  save_simulation_spec(calibrated, options.out_dir / "envs.json");
  return 0;
}

int cmd_train(const TrainOptions& options, std::ostream& log) {
  auto datasets = load_dataset_dir(options.data_dir);
  std::vector<Dataset> train_sets, val_sets;
  for (const auto& d : datasets) {
    if (d.role == Role::train) train_sets.push_back(d);
    if (d.role == Role::validation) val_sets.push_back(d);
  }

  auto ensemble = train_ensemble(options.config, train_sets, val_sets);
  if (!options.quiet) {
    for (std::size_t k = 0; k < ensemble.members.size(); ++k) {
      const auto& ckpt = ensemble.members[k];
      log << "member " << k << " (seed "
          << options.config.base_seed + k << "): initial val z rmse "
          << fixed3(ckpt.initial_val_z_rmse) << " mm\n";
      for (const auto& t : ckpt.trace) {
        if (t.epoch % 20 != 0 && t.epoch != ckpt.schedule.total_epochs) continue;
        log << "  epoch " << std::setw(3) << t.epoch << "  total "
            << fixed3(t.total) << "  adv " << fixed3(t.adv) << "  cycle "
            << fixed3(t.cycle) << "  comp " << fixed3(t.comp) << "  quality "
            << fixed3(t.quality) << "  d_cl " << fixed3(t.d_cl) << "  d_lc "
            << fixed3(t.d_lc) << "  val_z " << fixed3(t.val_z_rmse) << "\n";
      }
    }
  }

  if (options.finetune) {
    ensemble.finetune = fit_finetune(
        ensemble, finetune_reference(train_sets, options.config.base.lab_env_id));
  }

  save_ensemble(ensemble, options.out_path);
  log << "wrote " << options.out_path.string() << " (" << ensemble.members.size()
      << " members" << (ensemble.finetune ? ", fine-tuned" : "") << ")\n";
  return 0;
}

namespace {

const Dataset* find_lab_train(const std::vector<Dataset>& datasets,
                              const std::string& lab_env_id) {
  for (const auto& d : datasets) {
    if (d.role == Role::train && d.env_id == lab_env_id) return &d;
  }
  return nullptr;
}

}  // namespace

int cmd_evaluate(const EvaluateOptions& options, std::ostream& log) {
  auto datasets = load_dataset_dir(options.data_dir);
  std::vector<Dataset> eval_sets;
  for (const auto& d : datasets) {
    if (d.role == Role::evaluation) eval_sets.push_back(d);
  }
  if (eval_sets.empty()) throw DataError("no evaluation datasets in data dir");

  EvalReport report;
  std::optional<EnsembleModel> ensemble;

  if (options.ablation) {
    AblationConfig config;
    config.gan_base = options.gan_base;
    config.gan_members = options.members;
    config.ann.schedule = options.gan_base.schedule;
    config.ann.member_count = options.members;
    config.master_seed = options.seed;
    config.jobs = options.jobs;
    config.lab_env_id = options.gan_base.lab_env_id;
    report = ablation_run(config, datasets);
  } else {
    if (options.stage != Stage::raw) {
      ensemble = load_ensemble(options.ensemble_path);
    }
    report.cells = evaluate(ensemble ? &*ensemble : nullptr, eval_sets, options.stage);
    report.master_seed = options.seed;
    report.config_hash =
        hex64(fnv1a64("stage:" + to_string(options.stage)));
    for (const auto& d : datasets) {
      report.dataset_ids.push_back(d.env_id + ":" + to_string(d.role));
    }
    std::sort(report.dataset_ids.begin(), report.dataset_ids.end());
    if (ensemble) {
      double acc = 0.0;
      std::size_t n = 0;
      for (const auto& d : eval_sets) {
        for (const auto& s : d.samples) {
          acc += predict_stage(*ensemble, s.point, options.stage == Stage::cyclegan_ft)
                     .sigma_scalar;
          ++n;
        }
      }
      report.sigma_pred[to_string(options.stage)] = n ? acc / static_cast<double>(n) : 0.0;
      if (options.consistency && eval_sets.size() >= 2) {
        auto res = consistency_metric(*ensemble, eval_sets);
        report.consistency = ConsistencySection{res.raw_spread_mm, res.model_spread_mm};
      }
    }
  }

  save_report_json(report, options.out_json);
  auto table = format_report_table(report);
  {
    std::ofstream out(options.out_table);
    if (!out) throw DataError("cannot open for writing: " + options.out_table.string());
    out << table;
  }
  log << table;

  if (!options.trajectory_csv.empty()) {
    if (!ensemble) {
      if (options.ablation || options.stage == Stage::raw) {
        ensemble = load_ensemble(options.ensemble_path);
      }
    }
    auto sim_spec = load_simulation_spec(options.data_dir / "envs.json");
    const PresetEntry* entry = nullptr;
    for (const auto& e : sim_spec.environments) {
      if (options.trajectory_env.empty()
              ? e.role == Role::evaluation
              : e.spec.env_id == options.trajectory_env) {
        entry = &e;
        break;
      }
    }
    if (entry == nullptr) throw DataError("no matching trajectory environment");
    auto env = make_environment(entry->spec, entry->seed);
    auto check =
        trajectory_rotation_check(*ensemble, default_trajectory(sim_spec.grid), env);
    write_trajectory_csv(check, options.trajectory_csv);
    log << "trajectory (" << entry->spec.env_id << "): azimuth circular stddev raw "
        << fixed3(check.raw_circ_std[2]) << " deg, compensated "
        << fixed3(check.comp_circ_std[2]) << " deg\n";
  }

  if (!options.svg_dir.empty()) {
    if (!ensemble && !options.ablation && options.stage != Stage::raw) {
      ensemble = load_ensemble(options.ensemble_path);
    }
    std::filesystem::create_directories(options.svg_dir);
    const Dataset* lab = find_lab_train(datasets, options.gan_base.lab_env_id);
    for (const auto& d : eval_sets) {
      Dataset reference;
      if (lab != nullptr) {
        reference = *lab;
      } else {
        reference = d;
        for (auto& s : reference.samples) {
          auto p = d.grid.true_position(s.index);
          s.point = MeasurementPoint{p[0], p[1], p[2], 0.0, 0.0, 0.0, 0.0};
        }
      }
      std::vector<MeasurementPoint> compensated;
      for (const auto& s : d.samples) {
        compensated.push_back(ensemble ? predict(*ensemble, s.point).point : s.point);
      }
      write_scatter_svg(reference, d, compensated,
                        options.svg_dir / (d.env_id + ".svg"));
    }
  }

  for (const auto& c : report.cells) {
    if (c.skipped) return 2;
  }
  return 0;
}

int cmd_compensate(const std::filesystem::path& ensemble_path, std::istream& in,
                   std::ostream& out, std::ostream& err) {
  auto ensemble = load_ensemble(ensemble_path);
  stream_compensate(in, out, err, ensemble);
  return 0;
}

}  // namespace emt

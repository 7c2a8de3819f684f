#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "emt/cli.hpp"
#include "emt/sim.hpp"

using namespace emt;

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("emtcomp_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A cheap three-environment scenario for command-level tests.
void write_tiny_spec(const fs::path& path) {
  SimulationSpec spec;
  spec.grid = default_grid();
  auto carm = [](const std::string& id, double dist, Role role, std::uint64_t seed) {
    PresetEntry e;
    e.spec.env_id = id;
    e.spec.source_distance_mm = dist;
    e.spec.field_terms = {{FieldTermKind::inverse_cube_dipole, {0.25, 0.18, 0.9}}};
    e.spec.severity_scale = 1.0;
    e.spec.noise_sigma_pos_mm = 1.0;
    e.spec.noise_sigma_ang_deg = 4.0;
    e.role = role;
    e.seed = seed;
    return e;
  };
  PresetEntry lab;
  lab.spec.env_id = "laboratory";
  lab.spec.noise_sigma_pos_mm = 1.0;
  lab.spec.noise_sigma_ang_deg = 4.0;
  lab.role = Role::train;
  lab.seed = 1;
  spec.environments.push_back(lab);
  spec.environments.push_back(carm("carm_train", 80.0, Role::train, 2));
  spec.environments.push_back(carm("carm_eval", 90.0, Role::evaluation, 3));
  save_simulation_spec(spec, path);
}

}  // namespace

TEST_CASE("cmd_simulate") {
  SUBCASE("custom spec writes datasets, grid and realized envs") {
    auto dir = fresh_dir("simulate");
    auto spec_path = dir / "spec.json";
    write_tiny_spec(spec_path);
    SimulateOptions opts;
    opts.spec_path = spec_path;
    opts.out_dir = dir / "data";
    std::ostringstream log;
    CHECK(cmd_simulate(opts, log) == 0);
    CHECK(fs::exists(opts.out_dir / "grid.json"));
    CHECK(fs::exists(opts.out_dir / "laboratory.csv"));
    CHECK(fs::exists(opts.out_dir / "carm_train.csv"));
    CHECK(fs::exists(opts.out_dir / "carm_eval.csv"));
    CHECK(fs::exists(opts.out_dir / "envs.json"));
    CHECK(log.str().find("laboratory") != std::string::npos);
    CHECK(log.str().find("rmse") != std::string::npos);

    auto datasets = load_dataset_dir(opts.out_dir);
    CHECK(datasets.size() == 3);
  }

  SUBCASE("repeated invocations produce identical files") {
    auto dir = fresh_dir("simulate_repeat");
    auto spec_path = dir / "spec.json";
    write_tiny_spec(spec_path);
    SimulateOptions opts;
    opts.spec_path = spec_path;
    std::ostringstream log;
    opts.out_dir = dir / "a";
    cmd_simulate(opts, log);
    opts.out_dir = dir / "b";
    cmd_simulate(opts, log);
    for (const char* name : {"laboratory.csv", "carm_train.csv", "grid.json",
                             "envs.json"}) {
      CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
    }
  }

  SUBCASE("missing inputs are usage errors") {
    SimulateOptions opts;
    opts.out_dir = fresh_dir("simulate_bad");
    std::ostringstream log;
    CHECK_THROWS_AS(cmd_simulate(opts, log), ConfigError);
    opts.preset = "unknown";
    CHECK_THROWS_AS(cmd_simulate(opts, log), ConfigError);
  }
}

TEST_CASE("cmd_train and cmd_evaluate work end to end at toy scale") {
  auto dir = fresh_dir("train_eval");
  auto spec_path = dir / "spec.json";
  write_tiny_spec(spec_path);
  SimulateOptions sim_opts;
  sim_opts.spec_path = spec_path;
  sim_opts.out_dir = dir / "data";
  std::ostringstream log;
  cmd_simulate(sim_opts, log);

  TrainOptions train_opts;
  train_opts.data_dir = sim_opts.out_dir;
  train_opts.out_path = dir / "ensemble.json";
  train_opts.config.member_count = 2;
  train_opts.config.base.schedule.total_epochs = 0;
  train_opts.config.base.schedule.decay_start_epoch = 0;
  train_opts.quiet = true;
  CHECK(cmd_train(train_opts, log) == 0);
  CHECK(fs::exists(train_opts.out_path));

  auto ensemble = load_ensemble(train_opts.out_path);
  CHECK(ensemble.members.size() == 2);
  CHECK(ensemble.finetune.has_value());

  SUBCASE("raw evaluation needs no ensemble file") {
    EvaluateOptions eval_opts;
    eval_opts.data_dir = sim_opts.out_dir;
    eval_opts.stage = Stage::raw;
    eval_opts.out_json = dir / "raw.json";
    eval_opts.out_table = dir / "raw.txt";
    CHECK(cmd_evaluate(eval_opts, log) == 0);
    auto report = report_from_json_string(slurp(dir / "raw.json"));
    REQUIRE(report.cells.size() == 1);
    CHECK(report.cells[0].method == "raw");
  }

  SUBCASE("model evaluation is reproducible byte for byte") {
    EvaluateOptions eval_opts;
    eval_opts.data_dir = sim_opts.out_dir;
    eval_opts.ensemble_path = train_opts.out_path;
    eval_opts.stage = Stage::cyclegan_ft;
    eval_opts.out_json = dir / "eval1.json";
    eval_opts.out_table = dir / "eval1.txt";
    CHECK(cmd_evaluate(eval_opts, log) == 0);
    eval_opts.out_json = dir / "eval2.json";
    eval_opts.out_table = dir / "eval2.txt";
    CHECK(cmd_evaluate(eval_opts, log) == 0);
    CHECK(slurp(dir / "eval1.json") == slurp(dir / "eval2.json"));
    CHECK(slurp(dir / "eval1.txt") == slurp(dir / "eval2.txt"));
  }

  SUBCASE("trajectory and svg outputs are written on request") {
    EvaluateOptions eval_opts;
    eval_opts.data_dir = sim_opts.out_dir;
    eval_opts.ensemble_path = train_opts.out_path;
    eval_opts.stage = Stage::cyclegan;
    eval_opts.out_json = dir / "full.json";
    eval_opts.out_table = dir / "full.txt";
    eval_opts.trajectory_csv = dir / "trajectory.csv";
    eval_opts.svg_dir = dir / "figs";
    CHECK(cmd_evaluate(eval_opts, log) == 0);
    CHECK(fs::exists(dir / "trajectory.csv"));
    CHECK(fs::exists(dir / "figs" / "carm_eval.svg"));
  }

  SUBCASE("vanilla mode is recorded in the checkpoint") {
    TrainOptions vopts = train_opts;
    vopts.out_path = dir / "vanilla.json";
    vopts.config.base.mode = GanMode::vanilla_gan;
    vopts.finetune = false;
    CHECK(cmd_train(vopts, log) == 0);
    auto vensemble = load_ensemble(vopts.out_path);
    CHECK(vensemble.members[0].mode == GanMode::vanilla_gan);
    CHECK_FALSE(vensemble.finetune.has_value());
  }
}

TEST_CASE("cmd_compensate streams through an ensemble file") {
  auto dir = fresh_dir("compensate");
  auto spec_path = dir / "spec.json";
  write_tiny_spec(spec_path);
  SimulateOptions sim_opts;
  sim_opts.spec_path = spec_path;
  sim_opts.out_dir = dir / "data";
  std::ostringstream log;
  cmd_simulate(sim_opts, log);

  TrainOptions train_opts;
  train_opts.data_dir = sim_opts.out_dir;
  train_opts.out_path = dir / "ensemble.json";
  train_opts.config.member_count = 2;
  train_opts.config.base.schedule.total_epochs = 0;
  train_opts.config.base.schedule.decay_start_epoch = 0;
  train_opts.quiet = true;
  cmd_train(train_opts, log);

  std::istringstream in("16,12,9.6,0.5,0,0,0\n");
  std::ostringstream out, err;
  CHECK(cmd_compensate(train_opts.out_path, in, out, err) == 0);
  CHECK(out.str().substr(0, 6) == "16,12,");
  CHECK(err.str().empty());
}

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "emt/cli.hpp"
#include "emt/eval.hpp"
#include "emt/rng.hpp"

using namespace emt;

namespace {

Dataset clean_dataset(const std::string& env, Role role) {
  auto grid = default_grid();
  DistortionEnvSpec spec;
  spec.env_id = env;
  auto e = make_environment(spec, 0);
  return generate_dataset(e, grid, role, 0);
}

Dataset distorted_dataset(const std::string& env, double distance, Role role,
                          std::uint64_t seed, double severity = 1.0) {
  auto grid = default_grid();
  DistortionEnvSpec spec;
  spec.env_id = env;
  spec.source_distance_mm = distance;
  spec.field_terms = {{FieldTermKind::inverse_cube_dipole, {0.25, 0.18, 0.9}}};
  spec.severity_scale = severity;
  spec.noise_sigma_pos_mm = 1.0;
  spec.noise_sigma_ang_deg = 4.0;
  return generate_dataset(make_environment(spec, seed), grid, role, seed);
}

EnsembleModel untrained_ensemble(std::uint64_t seed) {
  std::vector<Dataset> data{clean_dataset("laboratory", Role::train),
                            distorted_dataset("carm", 80.0, Role::train, seed)};
  EnsembleTrainConfig config;
  config.base.schedule.total_epochs = 0;
  config.base.schedule.decay_start_epoch = 0;
  config.member_count = 2;
  config.base_seed = seed;
  return train_ensemble(config, data, {});
}

}  // namespace

TEST_CASE("evaluate") {
  SUBCASE("raw stage on a clean dataset gives zero rmse") {
    std::vector<Dataset> sets{clean_dataset("clean", Role::evaluation)};
    auto cells = evaluate(nullptr, sets, Stage::raw);
    REQUIRE(cells.size() == 1);
    CHECK(cells[0].method == "raw");
    CHECK(cells[0].rmse == doctest::Approx(0.0));
  }

  SUBCASE("raw stage is model independent") {
    std::vector<Dataset> sets{distorted_dataset("carm", 80.0, Role::evaluation, 5)};
    auto without = evaluate(nullptr, sets, Stage::raw);
    auto ensemble = untrained_ensemble(1);
    auto with = evaluate(&ensemble, sets, Stage::raw);
    CHECK(without[0].rmse == with[0].rmse);
    CHECK(without[0].stddev == with[0].stddev);
  }

  SUBCASE("model stages need a model") {
    std::vector<Dataset> sets{distorted_dataset("carm", 80.0, Role::evaluation, 5)};
    CHECK_THROWS_AS(evaluate(nullptr, sets, Stage::cyclegan), ConfigError);
    std::vector<Dataset> empty;
    CHECK_THROWS_AS(evaluate(nullptr, empty, Stage::raw), DataError);
  }
}

TEST_CASE("consistency metric") {
  SUBCASE("identical datasets give zero spread") {
    auto d = distorted_dataset("carm", 80.0, Role::evaluation, 5);
    auto d2 = d;
    d2.env_id = "carm_copy";
    std::vector<Dataset> sets{d, d2};
    auto ensemble = untrained_ensemble(2);
    auto res = consistency_metric(ensemble, sets);
    CHECK(res.raw_spread_mm == doctest::Approx(0.0));
    CHECK(res.model_spread_mm == doctest::Approx(0.0));
  }

  SUBCASE("different severities produce positive raw spread") {
    std::vector<Dataset> sets{distorted_dataset("near", 70.0, Role::evaluation, 5),
                              distorted_dataset("far", 120.0, Role::evaluation, 6)};
    auto ensemble = untrained_ensemble(3);
    auto res = consistency_metric(ensemble, sets);
    CHECK(res.raw_spread_mm > 0.0);
  }

  SUBCASE("needs two environments") {
    std::vector<Dataset> sets{distorted_dataset("only", 80.0, Role::evaluation, 5)};
    auto ensemble = untrained_ensemble(4);
    CHECK_THROWS_AS(consistency_metric(ensemble, sets), DataError);
  }
}

TEST_CASE("circular statistics handle wraparound") {
  std::vector<double> near_wrap{179.0, -179.0, 179.5, -179.5};
  // All four angles sit within 2 degrees of each other across the wrap.
  CHECK(circular_stddev_deg(near_wrap) < 2.0);
  std::vector<double> constant{10.0, 10.0, 10.0};
  CHECK(circular_stddev_deg(constant) == doctest::Approx(0.0));
  std::vector<double> spread{0.0, 90.0, 180.0, -90.0};
  CHECK(circular_stddev_deg(spread) > 90.0);
}

TEST_CASE("trajectory rotation check") {
  auto ensemble = untrained_ensemble(5);
  auto grid = default_grid();

  SUBCASE("zero severity keeps both series near zero") {
    DistortionEnvSpec spec;
    spec.env_id = "clean";
    auto env = make_environment(spec, 0);
    auto check = trajectory_rotation_check(ensemble, default_trajectory(grid), env);
    REQUIRE(check.raw.phi_z.size() == 13);
    REQUIRE(check.compensated.phi_z.size() == 13);
    CHECK(check.raw_circ_std[2] == doctest::Approx(0.0).epsilon(1e-9));
  }

  SUBCASE("13-step series have 13 entries per angle") {
    DistortionEnvSpec spec;
    spec.env_id = "carm";
    spec.source_distance_mm = 70.0;
    spec.field_terms = {{FieldTermKind::inverse_cube_dipole, {0.25, 0.18, 0.9}}};
    spec.severity_scale = 1.0;
    spec.noise_sigma_ang_deg = 4.0;
    auto env = make_environment(spec, 9);
    auto check = trajectory_rotation_check(ensemble, default_trajectory(grid), env);
    CHECK(check.raw.phi_x.size() == 13);
    CHECK(check.raw.phi_y.size() == 13);
    CHECK(check.raw.phi_z.size() == 13);
    CHECK(check.raw_circ_std[2] > 0.0);
  }

  SUBCASE("invalid step count is rejected") {
    TrajectorySpec spec;
    spec.steps = 1;
    DistortionEnvSpec env_spec;
    auto env = make_environment(env_spec, 0);
    CHECK_THROWS_AS(trajectory_rotation_check(ensemble, spec, env), ConfigError);
  }
}

TEST_CASE("ann baseline") {
  std::vector<Dataset> train_sets{clean_dataset("laboratory", Role::train),
                                  distorted_dataset("carm", 80.0, Role::train, 7)};
  std::vector<Dataset> eval_sets{distorted_dataset("carm_eval", 80.0, Role::evaluation, 8)};

  SUBCASE("zero-epoch members stay near the raw measurement") {
    AnnConfig config;
    config.schedule.total_epochs = 0;
    config.schedule.decay_start_epoch = 0;
    config.member_count = 2;
    auto model = ann_baseline_train(config, train_sets);
    auto raw = evaluate(nullptr, eval_sets, Stage::raw);
    auto cells = ann_baseline_eval(model, eval_sets);
    REQUIRE(cells.size() == 1);
    CHECK(cells[0].method == "ann");
    // Untrained offsets are Glorot-scale, well under a millimeter.
    CHECK(std::abs(cells[0].rmse - raw[0].rmse) < 0.5);
  }

  SUBCASE("xy-confined variant leaves z untouched") {
    AnnConfig config;
    config.schedule.total_epochs = 0;
    config.schedule.decay_start_epoch = 0;
    config.member_count = 2;
    config.confine_xy = true;
    auto model = ann_baseline_train(config, train_sets);
    MeasurementPoint p{10.0, 8.0, 9.6, 1.0, 0.0, 0.0, 0.0};
    auto cp = ann_predict(model, p);
    CHECK(cp.point.z == p.z);
    CHECK(cp.sigma_pred[2] == 0.0);
    auto cells = ann_baseline_eval(model, eval_sets);
    CHECK(cells[0].method == "ann_xy_confined");
  }
}

TEST_CASE("ablation report structure") {
  std::vector<Dataset> datasets{
      clean_dataset("laboratory", Role::train),
      distorted_dataset("carm_a", 80.0, Role::train, 11),
      distorted_dataset("carm_val", 100.0, Role::validation, 12),
      distorted_dataset("eval_1", 70.0, Role::evaluation, 13),
      distorted_dataset("eval_2", 90.0, Role::evaluation, 14),
      distorted_dataset("eval_3", 120.0, Role::evaluation, 15)};

  AblationConfig config;
  config.gan_base.schedule.total_epochs = 2;
  config.gan_base.schedule.decay_start_epoch = 1;
  config.gan_members = 2;
  config.ann.schedule = config.gan_base.schedule;
  config.ann.member_count = 2;
  config.master_seed = 1;
  auto report = ablation_run(config, datasets);

  SUBCASE("five methods by three environments") {
    std::map<std::string, int> counts;
    for (const auto& c : report.cells) ++counts[c.method];
    CHECK(counts["raw"] == 3);
    CHECK(counts["vanilla_gan"] == 3);
    CHECK(counts["cyclegan"] == 3);
    CHECK(counts["cyclegan_ft"] == 3);
    CHECK(counts["ann"] == 3);
    for (const auto& c : report.cells) CHECK_FALSE(c.skipped);
  }

  SUBCASE("raw row equals the evaluate output exactly") {
    std::vector<Dataset> eval_sets{datasets[3], datasets[4], datasets[5]};
    auto raw = evaluate(nullptr, eval_sets, Stage::raw);
    for (const auto& r : raw) {
      bool found = false;
      for (const auto& c : report.cells) {
        if (c.method == "raw" && c.env_id == r.env_id) {
          CHECK(c.rmse == r.rmse);
          CHECK(c.stddev == r.stddev);
          found = true;
        }
      }
      CHECK(found);
    }
  }

  SUBCASE("sigma_pred is reported for every learned method") {
    CHECK(report.sigma_pred.count("cyclegan") == 1);
    CHECK(report.sigma_pred.count("cyclegan_ft") == 1);
    CHECK(report.sigma_pred.count("vanilla_gan") == 1);
    CHECK(report.sigma_pred.count("ann") == 1);
    for (const auto& [method, sigma] : report.sigma_pred) CHECK(sigma >= 0.0);
  }

  SUBCASE("consistency section is present") {
    REQUIRE(report.consistency.has_value());
    CHECK(report.consistency->raw_spread_mm > 0.0);
  }

  SUBCASE("report serialization round-trips losslessly") {
    auto text = report_to_json_string(report);
    auto loaded = report_from_json_string(text);
    CHECK(report_to_json_string(loaded) == text);
  }

  SUBCASE("text table lists every method") {
    auto table = format_report_table(report);
    for (const char* name : {"raw", "vanilla_gan", "cyclegan", "cyclegan_ft", "ann"}) {
      CHECK(table.find(name) != std::string::npos);
    }
    CHECK(table.find("sigma_pred") != std::string::npos);
  }
}

TEST_CASE("figure outputs") {
  auto dir = std::filesystem::temp_directory_path() / "emtcomp_eval_test";
  std::filesystem::create_directories(dir);

  SUBCASE("scatter svg") {
    auto reference = clean_dataset("laboratory", Role::train);
    auto raw = distorted_dataset("carm", 80.0, Role::evaluation, 3);
    std::vector<MeasurementPoint> compensated;
    for (const auto& s : raw.samples) compensated.push_back(s.point);
    auto path = dir / "scatter.svg";
    write_scatter_svg(reference, raw, compensated, path);
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str().find("<svg") != std::string::npos);
    CHECK(ss.str().find("circle") != std::string::npos);
  }

  SUBCASE("trajectory csv") {
    auto ensemble = untrained_ensemble(6);
    DistortionEnvSpec spec;
    spec.env_id = "carm";
    spec.source_distance_mm = 70.0;
    spec.field_terms = {{FieldTermKind::inverse_cube_dipole, {0.25, 0.18, 0.9}}};
    spec.severity_scale = 1.0;
    auto env = make_environment(spec, 4);
    auto check =
        trajectory_rotation_check(ensemble, default_trajectory(default_grid()), env);
    auto path = dir / "trajectory.csv";
    write_trajectory_csv(check, path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "step,raw_phi_x,raw_phi_y,raw_phi_z,comp_phi_x,comp_phi_y,comp_phi_z");
    int rows = 0;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) ++rows;
    }
    CHECK(rows == 13);
  }
}

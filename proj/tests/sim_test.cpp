#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "emt/sim.hpp"

using namespace emt;

namespace {

DistortionEnvSpec dipole_only_spec(double distance) {
  DistortionEnvSpec s;
  s.env_id = "dipole";
  s.source_distance_mm = distance;
  s.field_terms = {{FieldTermKind::inverse_cube_dipole, {0.25, 0.18, 0.9}}};
  s.severity_scale = 1.0;
  return s;
}

std::string csv_bytes(const Dataset& d) {
  auto path = std::filesystem::temp_directory_path() / "emtcomp_sim_test.csv";
  save_dataset_csv(d, path);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("spec validation") {
  DistortionEnvSpec s;
  s.severity_scale = -1.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.severity_scale = 0.0;
  s.noise_sigma_pos_mm = -0.1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.noise_sigma_pos_mm = 0.0;
  s.field_terms = {{FieldTermKind::polynomial_deg2, {1.0}}};
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("zero severity and zero noise reproduce the input exactly") {
  DistortionEnvSpec s;
  s.env_id = "null";
  s.severity_scale = 0.0;
  s.field_terms = {{FieldTermKind::inverse_cube_dipole, {1.0, 1.0, 1.0}}};
  auto env = make_environment(s, 5);
  MeasurementPoint pose{10.0, 5.0, 3.0, 0.0, 1.0, -2.0, 3.0};
  auto out = distort(env, pose, 0);
  CHECK(out.x == pose.x);
  CHECK(out.y == pose.y);
  CHECK(out.z == pose.z);
  CHECK(out.q == 0.0);
  CHECK(out.phi_x == pose.phi_x);
}

TEST_CASE("distortion is deterministic") {
  auto spec = dipole_only_spec(80.0);
  spec.noise_sigma_pos_mm = 1.0;
  spec.noise_sigma_ang_deg = 4.0;
  auto env1 = make_environment(spec, 42);
  auto env2 = make_environment(spec, 42);
  MeasurementPoint pose{10.0, 5.0, 3.0, 0.0, 0.0, 0.0, 0.0};
  auto a = distort(env1, pose, 7);
  auto b = distort(env2, pose, 7);
  CHECK(a.channels() == b.channels());
  auto c = distort(env1, pose, 8);
  CHECK(a.channels() != c.channels());
}

TEST_CASE("doubling the source distance shrinks the dipole field by 8") {
  auto near_env = make_environment(dipole_only_spec(80.0), 1);
  auto far_env = make_environment(dipole_only_spec(160.0), 1);
  std::array<double, 3> probe{10.0, 0.0, 0.0};
  auto dn = field_displacement(near_env, probe);
  auto df = field_displacement(far_env, probe);
  double mn = std::sqrt(dn[0] * dn[0] + dn[1] * dn[1] + dn[2] * dn[2]);
  double mf = std::sqrt(df[0] * df[0] + df[1] * df[1] + df[2] * df[2]);
  CHECK(std::abs(mn / mf - 8.0) / 8.0 < 1e-9);
}

TEST_CASE("pure quadratic field matches the hand-evaluated polynomial") {
  DistortionEnvSpec s;
  s.env_id = "poly";
  // Only the z channel carries coefficients: z <- 2*ux^2 + 3*ux*uy.
  std::vector<double> coeffs(18, 0.0);
  coeffs[12] = 2.0;  // z channel, ux^2
  coeffs[15] = 3.0;  // z channel, ux*uy
  s.field_terms = {{FieldTermKind::polynomial_deg2, coeffs}};
  s.severity_scale = 1.0;
  auto env = make_environment(s, 0);

  // Probe (10, 0, 0): ux = (10-16)/100 = -0.06, uy = (0-12)/100 = -0.12.
  // z term: 2*0.0036 + 3*0.0072 = 0.0288, times channel weight 2 = 0.0576.
  auto d = field_displacement(env, {10.0, 0.0, 0.0});
  CHECK(d[0] == doctest::Approx(0.0));
  CHECK(d[1] == doctest::Approx(0.0));
  CHECK(d[2] == doctest::Approx(0.0576).epsilon(1e-12));
}

TEST_CASE("out-of-volume poses are rejected") {
  auto env = make_environment(dipole_only_spec(80.0), 0);
  MeasurementPoint far{1000.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  CHECK_THROWS_AS(distort(env, far, 0), DataError);
}

TEST_CASE("generate_dataset basics") {
  auto grid = default_grid();

  SUBCASE("noiseless zero severity gives zero rmse") {
    DistortionEnvSpec s;
    s.env_id = "clean";
    auto env = make_environment(s, 0);
    auto d = generate_dataset(env, grid, Role::train, 0);
    auto summary = displacement_rmse(displacement_errors(d));
    CHECK(summary.rmse == doctest::Approx(0.0));
  }

  SUBCASE("default grid yields exactly 60 samples") {
    auto env = make_environment(dipole_only_spec(80.0), 3);
    auto d = generate_dataset(env, grid, Role::evaluation, 3);
    CHECK(d.samples.size() == 60);
    CHECK(d.role == Role::evaluation);
  }

  SUBCASE("serialization is byte-identical across runs") {
    auto spec = dipole_only_spec(80.0);
    spec.noise_sigma_pos_mm = 1.0;
    auto env = make_environment(spec, 9);
    auto a = generate_dataset(env, grid, Role::train, 9);
    auto b = generate_dataset(env, grid, Role::train, 9);
    CHECK(csv_bytes(a) == csv_bytes(b));
  }
}

TEST_CASE("field is smooth in position") {
  auto spec = dipole_only_spec(70.0);
  spec.field_terms.push_back(
      {FieldTermKind::polynomial_deg2,
       {1.0, -0.5, 0.8, 1.2, -0.6, 0.4, -0.6, 0.9, 0.5, -0.8, 0.7, 1.0, 1.2, 1.0,
        -0.7, 0.9, 1.1, -0.5}});
  spec.severity_scale = 2.0;
  auto env = make_environment(spec, 0);
  std::array<double, 3> p{12.0, 7.0, 4.0};
  std::array<double, 3> p2{12.0 + 1e-6, 7.0, 4.0 - 1e-6};
  auto a = field_displacement(env, p);
  auto b = field_displacement(env, p2);
  double diff = std::sqrt((a[0] - b[0]) * (a[0] - b[0]) +
                          (a[1] - b[1]) * (a[1] - b[1]) +
                          (a[2] - b[2]) * (a[2] - b[2]));
  CHECK(diff < 1e-3);
}

TEST_CASE("dataset rmse grows monotonically with severity before noise") {
  auto grid = default_grid();
  auto spec = dipole_only_spec(80.0);
  double prev = -1.0;
  for (double severity : {0.0, 0.25, 0.5, 1.0, 2.0, 4.0}) {
    spec.severity_scale = severity;
    auto env = make_environment(spec, 4);
    auto d = generate_dataset(env, grid, Role::train, 4);
    double rmse = displacement_rmse(displacement_errors(d)).rmse;
    CHECK(rmse >= prev);
    prev = rmse;
  }
}

TEST_CASE("rmse decreases with source distance") {
  auto grid = default_grid();
  double prev = 1e9;
  for (double dist : {70.0, 90.0, 120.0}) {
    auto env = make_environment(dipole_only_spec(dist), 6);
    auto d = generate_dataset(env, grid, Role::train, 6);
    double rmse = displacement_rmse(displacement_errors(d)).rmse;
    CHECK(rmse < prev);
    prev = rmse;
  }
}

TEST_CASE("quality correlates with local displacement magnitude") {
  auto grid = default_grid();
  auto spec = dipole_only_spec(70.0);
  spec.noise_sigma_pos_mm = 1.0;
  spec.noise_sigma_ang_deg = 4.0;
  auto calibrated = calibrate_severity(spec, grid, 1.386, 0.05, 11);
  auto env = make_environment(calibrated, 11);
  auto d = generate_dataset(env, grid, Role::evaluation, 11);

  std::vector<double> q, mag;
  for (const auto& s : d.samples) {
    q.push_back(s.point.q);
    auto disp = field_displacement(env, d.grid.true_position(s.index));
    mag.push_back(std::sqrt(disp[0] * disp[0] + disp[1] * disp[1] + disp[2] * disp[2]));
  }
  double mq = 0.0, mm = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    mq += q[i] / static_cast<double>(q.size());
    mm += mag[i] / static_cast<double>(q.size());
  }
  double num = 0.0, dq = 0.0, dm = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    num += (q[i] - mq) * (mag[i] - mm);
    dq += (q[i] - mq) * (q[i] - mq);
    dm += (mag[i] - mm) * (mag[i] - mm);
  }
  double pearson = num / std::sqrt(dq * dm);
  CHECK(pearson > 0.8);
}

TEST_CASE("calibration") {
  auto grid = default_grid();
  auto spec = dipole_only_spec(70.0);
  spec.noise_sigma_pos_mm = 1.0;

  SUBCASE("hits the 7 cm analog target") {
    auto out = calibrate_severity(spec, grid, 1.386, 0.05, 21);
    auto env = make_environment(out, 21);
    auto d = generate_dataset(env, grid, Role::evaluation, 21);
    double rmse = displacement_rmse(displacement_errors(d)).rmse;
    CHECK(rmse > 1.336);
    CHECK(rmse < 1.436);
  }

  SUBCASE("is a fixed point at the current rmse") {
    spec.severity_scale = 1.5;
    auto env = make_environment(spec, 22);
    auto d = generate_dataset(env, grid, Role::train, 22);
    double current = displacement_rmse(displacement_errors(d)).rmse;
    auto out = calibrate_severity(spec, grid, current, 0.01, 22);
    auto env2 = make_environment(out, 22);
    auto d2 = generate_dataset(env2, grid, Role::train, 22);
    double rmse2 = displacement_rmse(displacement_errors(d2)).rmse;
    CHECK(std::abs(rmse2 - current) <= 0.01);
  }

  SUBCASE("rejects targets below the noise floor") {
    CHECK_THROWS_AS(calibrate_severity(spec, grid, 0.0001, 0.001, 23), NumericError);
  }

  SUBCASE("laboratory-style polynomial-only environment reaches 0.367") {
    DistortionEnvSpec lab;
    lab.env_id = "laboratory";
    lab.source_distance_mm = 1000.0;
    lab.field_terms = {{FieldTermKind::polynomial_deg2,
                        {1.0, -0.5, 0.8, 1.2, -0.6, 0.4, -0.6, 0.9, 0.5, -0.8, 0.7,
                         1.0, 1.2, 1.0, -0.7, 0.9, 1.1, -0.5}}};
    lab.noise_sigma_pos_mm = 1.0;
    auto out = calibrate_severity(lab, grid, 0.367, 0.05, 24);
    auto env = make_environment(out, 24);
    auto d = generate_dataset(env, grid, Role::train, 24);
    double rmse = displacement_rmse(displacement_errors(d)).rmse;
    CHECK(rmse > 0.32);
    CHECK(rmse < 0.42);
  }
}

TEST_CASE("table1 preset structure") {
  auto entries = table1_preset(0);
  REQUIRE(entries.size() == 9);
  int train = 0, val = 0, eval = 0;
  for (const auto& e : entries) {
    if (e.role == Role::train) ++train;
    if (e.role == Role::validation) ++val;
    if (e.role == Role::evaluation) ++eval;
    CHECK(e.target_rmse > 0.0);
  }
  CHECK(train == 4);
  CHECK(val == 2);
  CHECK(eval == 3);
  CHECK(entries[0].spec.env_id == "laboratory");
}

TEST_CASE("simulation spec JSON round-trips") {
  SimulationSpec spec;
  spec.grid = default_grid();
  PresetEntry e;
  e.spec = dipole_only_spec(90.0);
  e.spec.noise_sigma_pos_mm = 1.0;
  e.role = Role::validation;
  e.seed = 77;
  e.target_rmse = 1.1;
  e.tolerance = 0.03;
  spec.environments.push_back(e);

  auto path = std::filesystem::temp_directory_path() / "emtcomp_sim_spec.json";
  save_simulation_spec(spec, path);
  auto loaded = load_simulation_spec(path);
  REQUIRE(loaded.environments.size() == 1);
  CHECK(loaded.grid.nx == spec.grid.nx);
  CHECK(loaded.environments[0].spec.env_id == "dipole");
  CHECK(loaded.environments[0].spec.source_distance_mm == 90.0);
  CHECK(loaded.environments[0].seed == 77);
  CHECK(loaded.environments[0].target_rmse == 1.1);
  CHECK(loaded.environments[0].role == Role::validation);
}

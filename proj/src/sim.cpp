#include "emt/sim.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "emt/rng.hpp"

namespace emt {

std::string to_string(FieldTermKind k) {
  switch (k) {
    case FieldTermKind::polynomial_deg2: return "polynomial_deg2";
    case FieldTermKind::polynomial_deg3: return "polynomial_deg3";
    case FieldTermKind::inverse_cube_dipole: return "inverse_cube_dipole";
  }
  throw ConfigError("unknown field term kind");
}

FieldTermKind field_term_kind_from_string(const std::string& s) {
  if (s == "polynomial_deg2") return FieldTermKind::polynomial_deg2;
  if (s == "polynomial_deg3") return FieldTermKind::polynomial_deg3;
  if (s == "inverse_cube_dipole") return FieldTermKind::inverse_cube_dipole;
  throw DataError("unknown field term kind: '" + s + "'");
}

namespace {

constexpr double kPi = 3.14159265358979323846;

std::size_t coeff_count(FieldTermKind k) {
  switch (k) {
    case FieldTermKind::polynomial_deg2: return 18;
    case FieldTermKind::polynomial_deg3: return 30;
    case FieldTermKind::inverse_cube_dipole: return 3;
  }
  return 0;
}

}  // namespace

void DistortionEnvSpec::validate() const {
  if (severity_scale < 0.0) throw ConfigError("severity_scale must be >= 0");
  if (noise_sigma_pos_mm < 0.0 || noise_sigma_ang_deg < 0.0) {
    throw ConfigError("noise sigmas must be >= 0");
  }
  if (!(source_distance_mm > 0.0)) {
    throw ConfigError("source_distance must be > 0");
  }
  if (quality_gain < 0.0) throw ConfigError("quality_gain must be >= 0");
  for (const auto& t : field_terms) {
    if (t.coeffs.size() != coeff_count(t.kind)) {
      throw ConfigError("field term '" + to_string(t.kind) + "' needs " +
                        std::to_string(coeff_count(t.kind)) + " coefficients");
    }
  }
}

bool in_working_volume(const std::array<double, 3>& pos) {
  for (double v : pos) {
    if (!(v >= kVolumeMin && v <= kVolumeMax)) return false;
  }
  return true;
}

DistortionEnv make_environment(const DistortionEnvSpec& spec, std::uint64_t seed) {
  spec.validate();
  DistortionEnv env;
  env.spec = spec;
  env.seed = seed;
  for (const auto& term : spec.field_terms) {
    switch (term.kind) {
      case FieldTermKind::polynomial_deg2:
        for (std::size_t c = 0; c < 3; ++c)
          for (std::size_t m = 0; m < 6; ++m) env.poly2[c][m] += term.coeffs[c * 6 + m];
        break;
      case FieldTermKind::polynomial_deg3:
        for (std::size_t c = 0; c < 3; ++c)
          for (std::size_t m = 0; m < 10; ++m) env.poly3[c][m] += term.coeffs[c * 10 + m];
        break;
      case FieldTermKind::inverse_cube_dipole:
        for (std::size_t c = 0; c < 3; ++c) env.dipole_moment[c] += term.coeffs[c];
        break;
    }
  }
  // Anchor at the reference distance along the gantry direction; the source
  // distance enters only through the amplitude so it scales exactly as d^-3.
  double theta = spec.gantry_angle_deg * kPi / 180.0;
  env.dipole_anchor = {kFieldCenter[0] + kDipoleReferenceDistance * std::sin(theta),
                       kFieldCenter[1],
                       kFieldCenter[2] - kDipoleReferenceDistance * std::cos(theta)};
  double ratio = kDipoleReferenceDistance / spec.source_distance_mm;
  env.dipole_amplitude = ratio * ratio * ratio;
  return env;
}

std::array<double, 3> field_displacement(const DistortionEnv& env,
                                         const std::array<double, 3>& pos) {
  double ux = (pos[0] - kFieldCenter[0]) / kFieldScale;
  double uy = (pos[1] - kFieldCenter[1]) / kFieldScale;
  double uz = (pos[2] - kFieldCenter[2]) / kFieldScale;

  std::array<double, 6> m2{ux * ux, uy * uy, uz * uz, ux * uy, ux * uz, uy * uz};
  std::array<double, 10> m3{ux * ux * ux, uy * uy * uy, uz * uz * uz,
                            ux * ux * uy, ux * ux * uz, uy * uy * ux,
                            uy * uy * uz, uz * uz * ux, uz * uz * uy,
                            ux * uy * uz};

  std::array<double, 3> sum{};
  for (std::size_t c = 0; c < 3; ++c) {
    double acc = 0.0;
    for (std::size_t k = 0; k < 6; ++k) acc += env.poly2[c][k] * m2[k];
    for (std::size_t k = 0; k < 10; ++k) acc += env.poly3[c][k] * m3[k];
    sum[c] = acc;
  }

  std::array<double, 3> r{pos[0] - env.dipole_anchor[0],
                          pos[1] - env.dipole_anchor[1],
                          pos[2] - env.dipole_anchor[2]};
  double rn = std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]);
  if (rn > 0.0) {
    double soft = std::max(rn, kDipoleSoftening) / kDipoleReferenceDistance;
    double inv_cube = 1.0 / (soft * soft * soft);
    std::array<double, 3> rh{r[0] / rn, r[1] / rn, r[2] / rn};
    const auto& dm = env.dipole_moment;
    double mdotr = dm[0] * rh[0] + dm[1] * rh[1] + dm[2] * rh[2];
    for (std::size_t c = 0; c < 3; ++c) {
      sum[c] += env.dipole_amplitude * (3.0 * mdotr * rh[c] - dm[c]) * inv_cube;
    }
  }

  std::array<double, 3> out;
  for (std::size_t c = 0; c < 3; ++c) {
    out[c] = env.spec.severity_scale * kChannelWeights[c] * sum[c];
  }
  return out;
}

MeasurementPoint distort(const DistortionEnv& env, const MeasurementPoint& true_pose,
                         std::uint64_t sample_seed) {
  auto pos = true_pose.position();
  if (!in_working_volume(pos)) {
    throw DataError("pose outside working volume");
  }
  Rng rng(Rng::derive(env.seed, sample_seed));
  auto disp = field_displacement(env, pos);

  double pos_sigma = env.spec.noise_sigma_pos_mm / std::sqrt(kAveragedSamples);
  double ang_sigma = env.spec.noise_sigma_ang_deg / std::sqrt(kAveragedSamples);

  MeasurementPoint out;
  out.x = pos[0] + disp[0] + rng.normal(0.0, pos_sigma);
  out.y = pos[1] + disp[1] + rng.normal(0.0, pos_sigma);
  out.z = pos[2] + disp[2] + rng.normal(0.0, pos_sigma);
  out.phi_x = true_pose.phi_x + kAngularCoupling * disp[0] + rng.normal(0.0, ang_sigma);
  out.phi_y = true_pose.phi_y + kAngularCoupling * disp[1] + rng.normal(0.0, ang_sigma);
  out.phi_z = true_pose.phi_z + kAngularCoupling * disp[2] + rng.normal(0.0, ang_sigma);
  double disp_mag = std::sqrt(disp[0] * disp[0] + disp[1] * disp[1] + disp[2] * disp[2]);
  out.q = env.spec.quality_gain * (disp_mag + std::abs(rng.normal(0.0, pos_sigma)));
  return out.canonicalized();
}

Dataset generate_dataset(const DistortionEnv& env, const GroundTruthGrid& grid,
                         Role role, std::uint64_t seed) {
  grid.validate();
  Dataset d;
  d.env_id = env.spec.env_id;
  d.role = role;
  d.grid = grid;
  std::uint64_t linear = 0;
  for (const auto& idx : grid.all_indices()) {
    auto p = grid.true_position(idx);
    MeasurementPoint true_pose;
    true_pose.x = p[0];
    true_pose.y = p[1];
    true_pose.z = p[2];
    d.samples.push_back({idx, distort(env, true_pose, Rng::derive(seed, linear))});
    ++linear;
  }
  d.validate();
  return d;
}

namespace {

double dataset_rmse(const DistortionEnvSpec& spec, const GroundTruthGrid& grid,
                    std::uint64_t seed, double severity) {
  DistortionEnvSpec s = spec;
  s.severity_scale = severity;
  auto env = make_environment(s, seed);
  auto d = generate_dataset(env, grid, Role::train, seed);
  auto errs = displacement_errors(d, PairingRule::all_pairs);
  return displacement_rmse(errs).rmse;
}

}  // namespace

DistortionEnvSpec calibrate_severity(const DistortionEnvSpec& spec,
                                     const GroundTruthGrid& grid,
                                     double target_rmse, double tolerance,
                                     std::uint64_t seed) {
  spec.validate();
  if (!(target_rmse >= 0.0) || !(tolerance > 0.0)) {
    throw ConfigError("calibration needs target >= 0 and tolerance > 0");
  }
  auto rmse_at = [&](double s) { return dataset_rmse(spec, grid, seed, s); };

  double floor = rmse_at(0.0);
  if (target_rmse < floor - tolerance) {
    throw NumericError("calibration target " + format_double(target_rmse) +
                       " mm is below the noise floor " + format_double(floor) + " mm");
  }

  double lo = 0.0, lo_val = floor;
  double hi = std::max(spec.severity_scale, 1.0), hi_val = rmse_at(hi);
  int expansions = 0;
  while (hi_val < target_rmse && expansions < 40) {
    lo = hi;
    lo_val = hi_val;
    hi *= 2.0;
    hi_val = rmse_at(hi);
    ++expansions;
  }
  if (hi_val < target_rmse) {
    throw NumericError("calibration target unreachable within severity range");
  }

  double best = lo, best_err = std::abs(lo_val - target_rmse);
  if (std::abs(hi_val - target_rmse) < best_err) {
    best = hi;
    best_err = std::abs(hi_val - target_rmse);
  }
  for (int it = 0; it < 60 && best_err > tolerance * 0.25; ++it) {
    double mid = 0.5 * (lo + hi);
    double val = rmse_at(mid);
    if (std::abs(val - target_rmse) < best_err) {
      best = mid;
      best_err = std::abs(val - target_rmse);
    }
    if (val < target_rmse) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  if (best_err > tolerance) {
    throw NumericError("calibration missed target by " + format_double(best_err) + " mm");
  }
  DistortionEnvSpec out = spec;
  out.severity_scale = best;
  return out;
}

// --- presets ---------------------------------------------------------------

GroundTruthGrid default_grid() {
  GroundTruthGrid g;
  g.pitch_xy = 8.0;
  g.z_layers = {0.0, 3.2, 6.4};  // three plate elevations
  g.nx = 5;
  g.ny = 4;
  return g;
}

namespace {

// Shared smooth background; severity calibration sets each environment's
// overall magnitude.
std::vector<FieldTerm> base_poly_terms() {
  return {
      {FieldTermKind::polynomial_deg2,
       {1.0, -0.5, 0.8, 1.2, -0.6, 0.4,     // x channel
        -0.6, 0.9, 0.5, -0.8, 0.7, 1.0,     // y channel
        1.2, 1.0, -0.7, 0.9, 1.1, -0.5}},   // z channel
      {FieldTermKind::polynomial_deg3,
       {0.4, -0.2, 0.3, 0.2, -0.3, 0.5, 0.1, -0.2, 0.4, 0.3,
        -0.3, 0.5, -0.2, 0.4, 0.2, -0.5, 0.3, 0.1, -0.4, 0.2,
        0.5, 0.3, 0.4, -0.3, 0.5, 0.2, -0.4, 0.5, 0.1, -0.2}},
  };
}

FieldTerm base_dipole_term() {
  return {FieldTermKind::inverse_cube_dipole, {0.25, 0.18, 0.9}};
}

DistortionEnvSpec carm_spec(const std::string& id, double distance_mm,
                            double gantry_deg) {
  DistortionEnvSpec s;
  s.env_id = id;
  s.source_distance_mm = distance_mm;
  s.gantry_angle_deg = gantry_deg;
  s.field_terms = base_poly_terms();
  s.field_terms.push_back(base_dipole_term());
  s.severity_scale = 1.0;
  s.noise_sigma_pos_mm = 1.0;
  s.noise_sigma_ang_deg = 4.0;
  s.quality_gain = 1.0;
  return s;
}

}  // namespace

std::vector<PresetEntry> table1_preset(std::uint64_t master_seed) {
  DistortionEnvSpec lab;
  lab.env_id = "laboratory";
  lab.source_distance_mm = 1000.0;
  lab.gantry_angle_deg = 0.0;
  lab.field_terms = base_poly_terms();
  lab.severity_scale = 1.0;
  lab.noise_sigma_pos_mm = 1.0;
  lab.noise_sigma_ang_deg = 4.0;
  lab.quality_gain = 1.0;

  std::vector<PresetEntry> out;
  auto add = [&](DistortionEnvSpec spec, Role role, double target) {
    PresetEntry e;
    e.spec = std::move(spec);
    e.role = role;
    e.target_rmse = target;
    e.tolerance = 0.02;
    e.seed = Rng::derive(master_seed, out.size());
    out.push_back(std::move(e));
  };

  add(lab, Role::train, 0.367);
  add(carm_spec("carm_08cm", 80.0, 0.0), Role::train, 1.292);
  add(carm_spec("carm_11cm", 110.0, 0.0), Role::train, 1.064);
  add(carm_spec("carm_50cm_g60", 500.0, 60.0), Role::train, 0.639);
  add(carm_spec("carm_10cm", 100.0, 0.0), Role::validation, 1.101);
  add(carm_spec("carm_30cm_g30", 300.0, 30.0), Role::validation, 0.743);
  add(carm_spec("carm_07cm", 70.0, 0.0), Role::evaluation, 1.386);
  add(carm_spec("carm_09cm", 90.0, 0.0), Role::evaluation, 1.192);
  add(carm_spec("carm_12cm", 120.0, 0.0), Role::evaluation, 1.025);
  return out;
}

// --- spec file --------------------------------------------------------------

namespace {

nlohmann::json env_spec_to_json(const DistortionEnvSpec& s) {
  nlohmann::json j;
  j["env_id"] = s.env_id;
  j["source_distance_mm"] = s.source_distance_mm;
  j["gantry_angle_deg"] = s.gantry_angle_deg;
  auto terms = nlohmann::json::array();
  for (const auto& t : s.field_terms) {
    terms.push_back({{"kind", to_string(t.kind)}, {"coeffs", t.coeffs}});
  }
  j["field_terms"] = terms;
  j["severity_scale"] = s.severity_scale;
  j["noise_sigma_pos_mm"] = s.noise_sigma_pos_mm;
  j["noise_sigma_ang_deg"] = s.noise_sigma_ang_deg;
  j["quality_gain"] = s.quality_gain;
  return j;
}

DistortionEnvSpec env_spec_from_json(const nlohmann::json& j) {
  DistortionEnvSpec s;
  s.env_id = j.at("env_id").get<std::string>();
  s.source_distance_mm = j.at("source_distance_mm").get<double>();
  s.gantry_angle_deg = j.at("gantry_angle_deg").get<double>();
  for (const auto& tj : j.at("field_terms")) {
    FieldTerm t;
    t.kind = field_term_kind_from_string(tj.at("kind").get<std::string>());
    t.coeffs = tj.at("coeffs").get<std::vector<double>>();
    s.field_terms.push_back(std::move(t));
  }
  s.severity_scale = j.at("severity_scale").get<double>();
  s.noise_sigma_pos_mm = j.at("noise_sigma_pos_mm").get<double>();
  s.noise_sigma_ang_deg = j.at("noise_sigma_ang_deg").get<double>();
  s.quality_gain = j.at("quality_gain").get<double>();
  s.validate();
  return s;
}

}  // namespace

SimulationSpec load_simulation_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  SimulationSpec spec;
  try {
    const auto& gj = j.at("grid");
    spec.grid.pitch_xy = gj.at("pitch_xy").get<double>();
    spec.grid.z_layers = gj.at("z_layers").get<std::vector<double>>();
    spec.grid.nx = gj.at("nx").get<int>();
    spec.grid.ny = gj.at("ny").get<int>();
    spec.grid.validate();
    for (const auto& ej : j.at("environments")) {
      PresetEntry e;
      e.spec = env_spec_from_json(ej.at("spec"));
      e.role = role_from_string(ej.at("role").get<std::string>());
      e.seed = ej.at("seed").get<std::uint64_t>();
      e.target_rmse = ej.value("target_rmse", 0.0);
      e.tolerance = ej.value("tolerance", 0.02);
      spec.environments.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return spec;
}

void save_simulation_spec(const SimulationSpec& spec,
                          const std::filesystem::path& path) {
  nlohmann::json j;
  j["grid"] = {{"pitch_xy", spec.grid.pitch_xy},
               {"z_layers", spec.grid.z_layers},
               {"nx", spec.grid.nx},
               {"ny", spec.grid.ny}};
  auto envs = nlohmann::json::array();
  for (const auto& e : spec.environments) {
    nlohmann::json ej;
    ej["spec"] = env_spec_to_json(e.spec);
    ej["role"] = to_string(e.role);
    ej["seed"] = e.seed;
    if (e.target_rmse > 0.0) {
      ej["target_rmse"] = e.target_rmse;
      ej["tolerance"] = e.tolerance;
    }
    envs.push_back(ej);
  }
  j["environments"] = envs;
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace emt

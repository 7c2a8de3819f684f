#include "emt/ensemble.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "serial.hpp"

namespace emt {

namespace {

bool layouts_equal(const MlpLayout& a, const MlpLayout& b) {
  if (a.input_width != b.input_width || a.output_width != b.output_width ||
      a.output_activation != b.output_activation ||
      a.output_alpha != b.output_alpha || a.hidden.size() != b.hidden.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.hidden.size(); ++i) {
    if (a.hidden[i].width != b.hidden[i].width ||
        a.hidden[i].act != b.hidden[i].act ||
        a.hidden[i].alpha != b.hidden[i].alpha) {
      return false;
    }
  }
  return true;
}

bool bounds_equal(const NormalizationBounds& a, const NormalizationBounds& b) {
  for (std::size_t c = 0; c < kChannels; ++c) {
    if (a.min[c] != b.min[c] || a.max[c] != b.max[c]) return false;
  }
  return true;
}

std::array<double, 5> features_of(const MeasurementPoint& p, double measured_q) {
  return {1.0, p.x, p.y, p.z, measured_q};
}

}  // namespace

void EnsembleModel::validate() const {
  if (members.size() < 2) {
    throw ConfigError("ensemble needs at least 2 members");
  }
  for (const auto& m : members) {
    m.bounds.validate();
    if (!layouts_equal(m.models.g_cl.layout, members[0].models.g_cl.layout)) {
      throw ConfigError("ensemble members must share the generator layout");
    }
    if (!bounds_equal(m.bounds, members[0].bounds)) {
      throw ConfigError("ensemble members must share normalization bounds");
    }
  }
  if (finetune) {
    for (const auto& coeffs : {finetune->x, finetune->y, finetune->z}) {
      for (double v : coeffs) {
        if (!std::isfinite(v)) throw NumericError("non-finite fine-tune coefficient");
      }
    }
  }
}

EnsembleModel train_ensemble(const EnsembleTrainConfig& config,
                             std::span<const Dataset> train_data,
                             std::span<const Dataset> val_data) {
  if (config.member_count < 2) {
    throw ConfigError("ensemble needs at least 2 members");
  }
  config.base.validate();

  EnsembleModel ensemble;
  ensemble.members.resize(static_cast<std::size_t>(config.member_count));

  auto train_member = [&](int k) {
    TrainConfig member_config = config.base;
    member_config.seed = config.base_seed + static_cast<std::uint64_t>(k);
    ensemble.members[static_cast<std::size_t>(k)] =
        train(member_config, train_data, val_data);
  };

  if (config.jobs <= 1) {
    for (int k = 0; k < config.member_count; ++k) train_member(k);
  } else {
    std::vector<std::thread> workers;
    std::size_t next = 0;
    std::mutex mu;
    auto worker = [&] {
      for (;;) {
        std::size_t k;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (next >= ensemble.members.size()) return;
          k = next++;
        }
        train_member(static_cast<int>(k));
      }
    };
    int n = std::min(config.jobs, config.member_count);
    for (int t = 0; t < n; ++t) workers.emplace_back(worker);
    for (auto& w : workers) w.join();
  }

  ensemble.validate();
  return ensemble;
}

CompensatedPoint predict_stage(const EnsembleModel& ensemble,
                               const MeasurementPoint& p, bool apply_ft) {
  ensemble.validate();
  const std::size_t n = ensemble.members.size();
  std::vector<Vec7> outputs;
  outputs.reserve(n);
  for (const auto& m : ensemble.members) {
    outputs.push_back(translate_point(m, p).channels());
  }

  CompensatedPoint out;
  Vec7 mean{};
  // Statistics run over the generated channels only; x and y pass through,
  // so their mean is the input and their spread is exactly zero.
  mean[0] = p.x;
  mean[1] = p.y;
  for (std::size_t c = 2; c < kChannels; ++c) {
    double acc = 0.0;
    for (const auto& o : outputs) acc += o[c];
    mean[c] = acc / static_cast<double>(n);
    double var = 0.0;
    for (const auto& o : outputs) var += (o[c] - mean[c]) * (o[c] - mean[c]);
    out.sigma_pred[c] = std::sqrt(var / static_cast<double>(n));
  }
  out.point = MeasurementPoint::from_channels(mean);
  if (apply_ft && ensemble.finetune) {
    out.point = apply_finetune(*ensemble.finetune, out.point, p.q);
  }
  out.sigma_scalar = scalar_sigma(out.sigma_pred);
  return out;
}

CompensatedPoint predict(const EnsembleModel& ensemble, const MeasurementPoint& p) {
  return predict_stage(ensemble, p, true);
}

double scalar_sigma(const Vec7& sigma_pred) {
  // Documented scalar definition: mean over the (z, x, y) channels.
  return (sigma_pred[2] + sigma_pred[0] + sigma_pred[1]) / 3.0;
}

namespace {

// Solves (A + ridge*I) w = rhs for a small symmetric system via Gaussian
// elimination with partial pivoting.
std::array<double, 5> solve5(std::array<std::array<double, 5>, 5> a,
                             std::array<double, 5> rhs) {
  constexpr double kRidge = 1e-9;
  for (std::size_t i = 0; i < 5; ++i) a[i][i] += kRidge;
  for (std::size_t col = 0; col < 5; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < 5; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    if (std::abs(a[pivot][col]) < 1e-14 || !std::isfinite(a[pivot][col])) {
      throw NumericError("singular fine-tune fit");
    }
    std::swap(a[col], a[pivot]);
    std::swap(rhs[col], rhs[pivot]);
    for (std::size_t r = col + 1; r < 5; ++r) {
      double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < 5; ++c) a[r][c] -= f * a[col][c];
      rhs[r] -= f * rhs[col];
    }
  }
  std::array<double, 5> w{};
  for (int r = 4; r >= 0; --r) {
    auto ri = static_cast<std::size_t>(r);
    double acc = rhs[ri];
    for (std::size_t c = ri + 1; c < 5; ++c) acc -= a[ri][c] * w[c];
    w[ri] = acc / a[ri][ri];
  }
  return w;
}

}  // namespace

FineTuneCoeffs fit_finetune(const EnsembleModel& ensemble,
                            const Dataset& reference) {
  ensemble.validate();
  const std::size_t n = reference.samples.size();
  if (n < 6) {
    throw DataError("fine-tune fit needs at least 6 reference samples");
  }

  std::vector<std::array<double, 5>> phi(n);
  std::vector<std::array<double, 3>> comp(n), truth(n);
  std::array<double, 3> comp_centroid{}, true_centroid{};
  for (std::size_t s = 0; s < n; ++s) {
    auto cp = predict_stage(ensemble, reference.samples[s].point, false);
    phi[s] = features_of(cp.point, reference.samples[s].point.q);
    comp[s] = cp.point.position();
    truth[s] = reference.grid.true_position(reference.samples[s].index);
    for (std::size_t c = 0; c < 3; ++c) {
      comp_centroid[c] += comp[s][c] / static_cast<double>(n);
      true_centroid[c] += truth[s][c] / static_cast<double>(n);
    }
  }

  // Residuals after aligning the compensated centroid to the grid centroid;
  // the displacement metric is translation-invariant, so the fit only learns
  // the non-uniform part of the error.
  std::array<double, 3> shift{true_centroid[0] - comp_centroid[0],
                              true_centroid[1] - comp_centroid[1],
                              true_centroid[2] - comp_centroid[2]};

  std::array<std::array<double, 5>, 5> gram{};
  std::array<std::array<double, 5>, 3> rhs{};
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t j = 0; j < 5; ++j) {
        gram[i][j] += phi[s][i] * phi[s][j] / static_cast<double>(n);
      }
      for (std::size_t c = 0; c < 3; ++c) {
        double residual = truth[s][c] - (comp[s][c] + shift[c]);
        rhs[c][i] += residual * phi[s][i] / static_cast<double>(n);
      }
    }
  }

  FineTuneCoeffs coeffs;
  coeffs.x = solve5(gram, rhs[0]);
  coeffs.y = solve5(gram, rhs[1]);
  coeffs.z = solve5(gram, rhs[2]);
  return coeffs;
}

Dataset finetune_reference(std::span<const Dataset> train_data,
                           const std::string& lab_env_id) {
  Dataset pool;
  pool.env_id = "finetune_reference";
  pool.role = Role::train;
  bool have_grid = false;
  for (const auto& d : train_data) {
    if (d.env_id == lab_env_id) continue;
    if (!have_grid) {
      pool.grid = d.grid;
      have_grid = true;
    }
    pool.samples.insert(pool.samples.end(), d.samples.begin(), d.samples.end());
  }
  if (pool.samples.empty()) {
    throw DataError("no distorted-domain training data for the fine-tune fit");
  }
  return pool;
}

MeasurementPoint apply_finetune(const FineTuneCoeffs& coeffs,
                                const MeasurementPoint& p, double measured_q) {
  auto phi = features_of(p, measured_q);
  auto dot = [&](const std::array<double, 5>& w) {
    double acc = 0.0;
    for (std::size_t i = 0; i < 5; ++i) acc += w[i] * phi[i];
    return acc;
  };
  MeasurementPoint out = p;
  out.x += dot(coeffs.x);
  out.y += dot(coeffs.y);
  out.z += dot(coeffs.z);
  return out;
}

MeasurementPoint apply_finetune(const FineTuneCoeffs& coeffs,
                                const MeasurementPoint& p) {
  return apply_finetune(coeffs, p, p.q);
}

// --- serialization ----------------------------------------------------------

namespace {

nlohmann::json ensemble_to_json(const EnsembleModel& e) {
  nlohmann::json j;
  auto members = nlohmann::json::array();
  for (const auto& m : e.members) members.push_back(checkpoint_to_json(m));
  j["members"] = members;
  if (e.finetune) {
    j["finetune"] = {{"x", e.finetune->x}, {"y", e.finetune->y}, {"z", e.finetune->z}};
  } else {
    j["finetune"] = nullptr;
  }
  j["scalar_sigma_def"] = "mean(z,x,y)";
  return j;
}

EnsembleModel ensemble_from_json(const nlohmann::json& j) {
  EnsembleModel e;
  for (const auto& mj : j.at("members")) {
    e.members.push_back(checkpoint_from_json(mj));
  }
  if (!j.at("finetune").is_null()) {
    FineTuneCoeffs c;
    auto get = [&](const char* key, std::array<double, 5>& out) {
      auto v = j.at("finetune").at(key).get<std::vector<double>>();
      if (v.size() != 5) throw DataError("fine-tune coefficients need 5 entries");
      std::copy(v.begin(), v.end(), out.begin());
    };
    get("x", c.x);
    get("y", c.y);
    get("z", c.z);
    e.finetune = c;
  }
  e.validate();
  return e;
}

}  // namespace

std::string ensemble_to_json_string(const EnsembleModel& e) {
  return ensemble_to_json(e).dump();
}

EnsembleModel ensemble_from_json_string(const std::string& s) {
  try {
    return ensemble_from_json(nlohmann::json::parse(s));
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("bad ensemble JSON: ") + ex.what());
  }
}

void save_ensemble(const EnsembleModel& e, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << ensemble_to_json(e).dump() << '\n';
}

EnsembleModel load_ensemble(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  try {
    return ensemble_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void stream_compensate(std::istream& in, std::ostream& out, std::ostream& err,
                       const EnsembleModel& ensemble) {
  ensemble.validate();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Vec7 v;
    try {
      std::size_t start = 0;
      for (std::size_t c = 0; c < kChannels; ++c) {
        std::size_t comma = line.find(',', start);
        bool last = c + 1 == kChannels;
        if (last != (comma == std::string::npos)) {
          throw DataError("expected 7 comma-separated values");
        }
        std::string_view field(line.data() + start,
                               (last ? line.size() : comma) - start);
        v[c] = parse_double(field);
        start = comma + 1;
      }
      MeasurementPoint p = MeasurementPoint::from_channels(v).canonicalized();
      p.validate();
      // Online mode is pure domain translation: x and y pass through, the
      // fine-tune stage stays an offline evaluation step.
      auto cp = predict_stage(ensemble, p, false);
      Vec7 o = cp.point.channels();
      for (std::size_t c = 0; c < kChannels; ++c) {
        if (c) out << ',';
        out << format_double(o[c]);
      }
      out << ',' << format_double(cp.sigma_pred[2]) << ','
          << format_double(cp.sigma_scalar) << '\n'
          << std::flush;
    } catch (const std::exception& e) {
      err << "line " << lineno << ": " << e.what() << '\n';
    }
  }
}

}  // namespace emt

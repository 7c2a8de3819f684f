#include "emt/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace emt {

double canonical_angle_deg(double a) {
  double w = a - 360.0 * std::floor((a + 180.0) / 360.0);
  if (w >= 180.0) w -= 360.0;  // guards the floor landing exactly on 180
  return w;
}

MeasurementPoint MeasurementPoint::canonicalized() const {
  MeasurementPoint p = *this;
  p.phi_x = canonical_angle_deg(phi_x);
  p.phi_y = canonical_angle_deg(phi_y);
  p.phi_z = canonical_angle_deg(phi_z);
  return p;
}

void MeasurementPoint::validate() const {
  for (double v : channels()) {
    if (!std::isfinite(v)) throw DataError("measurement has non-finite channel");
  }
  if (q < 0.0) throw DataError("quality estimate must be >= 0");
}

void GroundTruthGrid::validate() const {
  if (pitch_xy <= 0.0) throw DataError("grid pitch must be > 0");
  if (nx < 2 || ny < 2) throw DataError("grid extent must be at least 2x2");
  if (z_layers.empty()) throw DataError("grid needs at least one z layer");
  for (std::size_t k = 1; k < z_layers.size(); ++k) {
    if (!(z_layers[k] > z_layers[k - 1])) {
      throw DataError("z layers must be strictly increasing");
    }
  }
}

bool GroundTruthGrid::contains(const GridIndex& g) const {
  return g.i >= 0 && g.i < nx && g.j >= 0 && g.j < ny && g.k >= 0 &&
         g.k < nz();
}

std::array<double, 3> GroundTruthGrid::true_position(const GridIndex& g) const {
  return {g.i * pitch_xy, g.j * pitch_xy, z_layers[static_cast<std::size_t>(g.k)]};
}

double GroundTruthGrid::true_distance(const GridIndex& a,
                                      const GridIndex& b) const {
  auto pa = true_position(a);
  auto pb = true_position(b);
  double dx = pa[0] - pb[0], dy = pa[1] - pb[1], dz = pa[2] - pb[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

std::vector<GridIndex> GroundTruthGrid::all_indices() const {
  std::vector<GridIndex> out;
  out.reserve(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
              z_layers.size());
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      for (int k = 0; k < nz(); ++k) out.push_back({i, j, k});
  return out;
}

std::array<double, 3> GroundTruthGrid::centroid() const {
  std::array<double, 3> c{};
  auto idx = all_indices();
  for (const auto& g : idx) {
    auto p = true_position(g);
    for (int a = 0; a < 3; ++a) c[static_cast<std::size_t>(a)] += p[static_cast<std::size_t>(a)];
  }
  for (auto& v : c) v /= static_cast<double>(idx.size());
  return c;
}

std::string to_string(Role role) {
  switch (role) {
    case Role::train: return "train";
    case Role::validation: return "validation";
    case Role::evaluation: return "evaluation";
  }
  throw ConfigError("unknown role");
}

Role role_from_string(const std::string& s) {
  if (s == "train") return Role::train;
  if (s == "validation") return Role::validation;
  if (s == "evaluation") return Role::evaluation;
  throw DataError("unknown dataset role: '" + s + "'");
}

void Dataset::validate() const {
  grid.validate();
  std::set<GridIndex> seen;
  for (const auto& s : samples) {
    if (!grid.contains(s.index)) throw DataError("sample index outside grid extent");
    if (!seen.insert(s.index).second) throw DataError("duplicate grid index in dataset");
    s.point.validate();
  }
}

void NormalizationBounds::validate() const {
  for (int c = 0; c < kChannels; ++c) {
    auto i = static_cast<std::size_t>(c);
    if (!(max[i] > min[i])) throw DataError("normalization bounds need max > min per channel");
    if (!std::isfinite(min[i]) || !std::isfinite(max[i])) {
      throw DataError("normalization bounds must be finite");
    }
  }
}

NormalizationBounds NormalizationBounds::from_datasets(
    std::span<const Dataset> datasets) {
  bool any = false;
  NormalizationBounds b;
  b.min.fill(0.0);
  b.max.fill(0.0);
  for (const auto& d : datasets) {
    for (const auto& s : d.samples) {
      Vec7 v = s.point.channels();
      if (!any) {
        b.min = v;
        b.max = v;
        any = true;
      } else {
        for (std::size_t c = 0; c < kChannels; ++c) {
          b.min[c] = std::min(b.min[c], v[c]);
          b.max[c] = std::max(b.max[c], v[c]);
        }
      }
    }
  }
  if (!any) throw DataError("cannot derive bounds from empty datasets");
  for (std::size_t c = 0; c < kChannels; ++c) {
    if (b.max[c] - b.min[c] < 1e-9) {
      b.min[c] -= 0.5;
      b.max[c] += 0.5;
    }
  }
  return b;
}

NormalizedPoint normalize_point(const MeasurementPoint& p,
                                const NormalizationBounds& b) {
  b.validate();
  NormalizedPoint out;
  Vec7 v = p.channels();
  for (std::size_t c = 0; c < kChannels; ++c) {
    out.v[c] = (v[c] - b.min[c]) / (b.max[c] - b.min[c]);
    if (out.v[c] < 0.0 || out.v[c] > 1.0) out.out_of_range = true;
  }
  return out;
}

MeasurementPoint denormalize_point(const Vec7& v, const NormalizationBounds& b) {
  b.validate();
  Vec7 out;
  for (std::size_t c = 0; c < kChannels; ++c) {
    out[c] = v[c] * (b.max[c] - b.min[c]) + b.min[c];
  }
  return MeasurementPoint::from_channels(out);
}

namespace {

double euclidean(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

bool axis_adjacent(const GridIndex& a, const GridIndex& b) {
  int di = std::abs(a.i - b.i), dj = std::abs(a.j - b.j), dk = std::abs(a.k - b.k);
  return di + dj + dk == 1;
}

}  // namespace

std::vector<DisplacementError> displacement_errors(const Dataset& d,
                                                   PairingRule pairing) {
  if (d.samples.size() < 2) {
    throw DataError("need at least two samples to compute displacement errors");
  }
  std::vector<DisplacementError> out;
  for (std::size_t a = 0; a < d.samples.size(); ++a) {
    for (std::size_t b = a + 1; b < d.samples.size(); ++b) {
      const auto& sa = d.samples[a];
      const auto& sb = d.samples[b];
      if (pairing == PairingRule::axis_neighbors &&
          !axis_adjacent(sa.index, sb.index)) {
        continue;
      }
      DisplacementError e;
      e.index_a = sa.index;
      e.index_b = sb.index;
      e.measured_dist = euclidean(sa.point.position(), sb.point.position());
      e.true_dist = d.grid.true_distance(sa.index, sb.index);
      e.error = std::abs(e.measured_dist - e.true_dist);
      out.push_back(e);
    }
  }
  return out;
}

ErrorSummary displacement_rmse(std::span<const DisplacementError> errors) {
  if (errors.empty()) throw DataError("no displacement errors to summarize");
  double sum_sq = 0.0, sum = 0.0;
  for (const auto& e : errors) {
    sum_sq += e.error * e.error;
    sum += e.error;
  }
  double n = static_cast<double>(errors.size());
  double rmse = std::sqrt(sum_sq / n);
  double mean = sum / n;
  double var = 0.0;
  for (const auto& e : errors) {
    double d = e.error - mean;
    var += d * d;
  }
  return {rmse, std::sqrt(var / n)};
}

// --- file formats ---------------------------------------------------------

void save_dataset_csv(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << "env,role,i,j,k,x,y,z,q,phi_x,phi_y,phi_z\n";
  for (const auto& s : d.samples) {
    out << d.env_id << ',' << to_string(d.role) << ',' << s.index.i << ','
        << s.index.j << ',' << s.index.k;
    for (double v : s.point.channels()) out << ',' << format_double(v);
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

std::vector<Dataset> load_datasets_csv(const std::filesystem::path& path,
                                       const GroundTruthGrid& grid) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty CSV: " + path.string());
  if (line != "env,role,i,j,k,x,y,z,q,phi_x,phi_y,phi_z") {
    throw DataError(path.string() + ":1: unexpected CSV header");
  }
  std::vector<Dataset> out;
  auto find = [&](const std::string& env, Role role) -> Dataset& {
    for (auto& d : out) {
      if (d.env_id == env && d.role == role) return d;
    }
    out.push_back(Dataset{env, role, grid, {}});
    return out.back();
  };
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto where = [&] { return path.string() + ":" + std::to_string(lineno); };
    auto f = split_csv_line(line);
    if (f.size() != 12) throw DataError(where() + ": expected 12 fields");
    try {
      Dataset& d = find(f[0], role_from_string(f[1]));
      Dataset::Sample s;
      s.index = {static_cast<int>(parse_long(f[2])),
                 static_cast<int>(parse_long(f[3])),
                 static_cast<int>(parse_long(f[4]))};
      Vec7 v;
      for (std::size_t c = 0; c < kChannels; ++c) v[c] = parse_double(f[5 + c]);
      s.point = MeasurementPoint::from_channels(v).canonicalized();
      d.samples.push_back(s);
    } catch (const DataError& e) {
      throw DataError(where() + ": " + e.what());
    }
  }
  for (const auto& d : out) d.validate();
  return out;
}

void save_grid_json(const GroundTruthGrid& grid,
                    const std::filesystem::path& path) {
  nlohmann::json j;
  j["pitch_xy"] = grid.pitch_xy;
  j["z_layers"] = grid.z_layers;
  j["nx"] = grid.nx;
  j["ny"] = grid.ny;
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << j.dump(2) << '\n';
}

GroundTruthGrid load_grid_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  GroundTruthGrid g;
  try {
    g.pitch_xy = j.at("pitch_xy").get<double>();
    g.z_layers = j.at("z_layers").get<std::vector<double>>();
    g.nx = j.at("nx").get<int>();
    g.ny = j.at("ny").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  g.validate();
  return g;
}

std::vector<Dataset> load_dataset_dir(const std::filesystem::path& dir) {
  auto grid = load_grid_json(dir / "grid.json");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Dataset> out;
  for (const auto& f : files) {
    auto loaded = load_datasets_csv(f, grid);
    out.insert(out.end(), loaded.begin(), loaded.end());
  }
  if (out.empty()) throw DataError("no datasets found in " + dir.string());
  return out;
}

}  // namespace emt

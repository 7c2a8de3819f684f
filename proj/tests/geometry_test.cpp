#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "emt/geometry.hpp"
#include "emt/rng.hpp"

using namespace emt;

namespace {

GroundTruthGrid small_grid() {
  GroundTruthGrid g;
  g.pitch_xy = 8.0;
  g.z_layers = {0.0, 9.6};
  g.nx = 3;
  g.ny = 2;
  return g;
}

Dataset perfect_dataset(const GroundTruthGrid& g) {
  Dataset d;
  d.env_id = "test";
  d.role = Role::evaluation;
  d.grid = g;
  for (const auto& idx : g.all_indices()) {
    auto p = g.true_position(idx);
    d.samples.push_back({idx, {p[0], p[1], p[2], 0.0, 0.0, 0.0, 0.0}});
  }
  return d;
}

std::filesystem::path temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "emtcomp_geometry_test";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("angle canonicalization wraps into [-180, 180)") {
  CHECK(canonical_angle_deg(190.0) == doctest::Approx(-170.0));
  CHECK(canonical_angle_deg(-181.0) == doctest::Approx(179.0));
  CHECK(canonical_angle_deg(180.0) == doctest::Approx(-180.0));
  CHECK(canonical_angle_deg(-180.0) == doctest::Approx(-180.0));
  CHECK(canonical_angle_deg(0.0) == 0.0);
  CHECK(canonical_angle_deg(720.5) == doctest::Approx(0.5));
}

TEST_CASE("measurement point validation") {
  MeasurementPoint p{1, 2, 3, -0.5, 0, 0, 0};
  CHECK_THROWS_AS(p.validate(), DataError);
  p.q = 0.0;
  CHECK_NOTHROW(p.validate());
}

TEST_CASE("grid geometry and validation") {
  auto g = small_grid();
  CHECK_NOTHROW(g.validate());
  auto p = g.true_position({2, 1, 1});
  CHECK(p[0] == doctest::Approx(16.0));
  CHECK(p[1] == doctest::Approx(8.0));
  CHECK(p[2] == doctest::Approx(9.6));
  CHECK(g.all_indices().size() == 12);

  GroundTruthGrid bad = g;
  bad.pitch_xy = 0.0;
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = g;
  bad.z_layers = {1.0, 1.0};
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = g;
  bad.nx = 1;
  CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("dataset validation rejects duplicates and out-of-extent indices") {
  auto d = perfect_dataset(small_grid());
  CHECK_NOTHROW(d.validate());
  auto dup = d;
  dup.samples.push_back(dup.samples.front());
  CHECK_THROWS_AS(dup.validate(), DataError);
  auto oob = d;
  oob.samples.push_back({{7, 0, 0}, {}});
  CHECK_THROWS_AS(oob.validate(), DataError);
}

TEST_CASE("normalize_point maps bounds to the unit interval") {
  NormalizationBounds b;
  for (std::size_t c = 0; c < kChannels; ++c) {
    b.min[c] = 0.0;
    b.max[c] = 100.0;
  }
  MeasurementPoint p{50, 0, 0, 0, 0, 0, 0};
  auto n = normalize_point(p, b);
  CHECK(n.v[0] == doctest::Approx(0.5));
  CHECK_FALSE(n.out_of_range);

  // Per-channel minima give the zero vector.
  MeasurementPoint lo{0, 0, 0, 0, 0, 0, 0};
  auto nl = normalize_point(lo, b);
  for (double v : nl.v) CHECK(v == 0.0);

  // Out-of-bounds values extrapolate and set the flag.
  MeasurementPoint hi{120, 0, 0, 0, 0, 0, 0};
  auto nh = normalize_point(hi, b);
  CHECK(nh.v[0] == doctest::Approx(1.2));
  CHECK(nh.out_of_range);

  NormalizationBounds bad = b;
  bad.max[2] = bad.min[2];
  CHECK_THROWS_AS(normalize_point(p, bad), DataError);
}

TEST_CASE("normalize then denormalize is the identity") {
  Rng rng(42);
  NormalizationBounds b;
  for (std::size_t c = 0; c < kChannels; ++c) {
    b.min[c] = rng.uniform(-100.0, 0.0);
    b.max[c] = b.min[c] + rng.uniform(1.0, 200.0);
  }
  for (int trial = 0; trial < 200; ++trial) {
    Vec7 v;
    for (auto& x : v) x = rng.uniform(-150.0, 250.0);
    auto p = MeasurementPoint::from_channels(v);
    auto round = denormalize_point(normalize_point(p, b).v, b).channels();
    for (std::size_t c = 0; c < kChannels; ++c) {
      double scale = std::max(1.0, std::abs(v[c]));
      CHECK(std::abs(round[c] - v[c]) / scale < 1e-9);
    }
  }
}

TEST_CASE("bounds from datasets pad degenerate channels") {
  auto d = perfect_dataset(small_grid());
  auto b = NormalizationBounds::from_datasets({&d, 1});
  CHECK_NOTHROW(b.validate());
  // q and the angles are constant in this dataset; the padded range is 1.
  CHECK(b.max[3] - b.min[3] == doctest::Approx(1.0));
}

TEST_CASE("displacement error for a two-point dataset") {
  auto g = small_grid();
  Dataset d;
  d.env_id = "pair";
  d.role = Role::evaluation;
  d.grid = g;
  d.samples.push_back({{0, 0, 0}, {0, 0, 0, 0, 0, 0, 0}});
  d.samples.push_back({{1, 0, 0}, {10, 0, 0, 0, 0, 0, 0}});
  auto errs = displacement_errors(d);
  REQUIRE(errs.size() == 1);
  CHECK(errs[0].true_dist == doctest::Approx(8.0));
  CHECK(errs[0].measured_dist == doctest::Approx(10.0));
  CHECK(errs[0].error == doctest::Approx(2.0));
}

TEST_CASE("perfect measurements have zero displacement error") {
  auto d = perfect_dataset(small_grid());
  for (const auto& e : displacement_errors(d)) CHECK(e.error == doctest::Approx(0.0));
}

TEST_CASE("three collinear samples match the hand enumeration") {
  // Indices (0,0,0), (1,0,0), (2,0,0) at measured x = 0, 9, 17.
  // Pairs: (0,1): |9-8| = 1; (0,2): |17-16| = 1; (1,2): |8-8| = 0.
  auto g = small_grid();
  Dataset d;
  d.env_id = "line";
  d.role = Role::evaluation;
  d.grid = g;
  d.samples.push_back({{0, 0, 0}, {0, 0, 0, 0, 0, 0, 0}});
  d.samples.push_back({{1, 0, 0}, {9, 0, 0, 0, 0, 0, 0}});
  d.samples.push_back({{2, 0, 0}, {17, 0, 0, 0, 0, 0, 0}});
  auto errs = displacement_errors(d);
  REQUIRE(errs.size() == 3);
  CHECK(errs[0].error == doctest::Approx(1.0));
  CHECK(errs[1].error == doctest::Approx(1.0));
  CHECK(errs[2].error == doctest::Approx(0.0));
}

TEST_CASE("all_pairs yields n(n-1)/2 entries") {
  auto d = perfect_dataset(small_grid());
  auto n = d.samples.size();
  CHECK(displacement_errors(d).size() == n * (n - 1) / 2);
}

TEST_CASE("axis_neighbors keeps only unit-step pairs") {
  auto d = perfect_dataset(small_grid());
  // 3x2x2 grid: x-neighbors 2*2*2=8, y-neighbors 3*1*2=6, z-neighbors 3*2*1=6.
  CHECK(displacement_errors(d, PairingRule::axis_neighbors).size() == 20);
}

TEST_CASE("displacement errors need two samples") {
  auto g = small_grid();
  Dataset d;
  d.env_id = "one";
  d.role = Role::train;
  d.grid = g;
  d.samples.push_back({{0, 0, 0}, {}});
  CHECK_THROWS_AS(displacement_errors(d), DataError);
}

TEST_CASE("displacement errors are invariant under rigid translation") {
  Rng rng(7);
  auto g = small_grid();
  auto d = perfect_dataset(g);
  for (auto& s : d.samples) {
    s.point.x += rng.normal(0.0, 1.0);
    s.point.y += rng.normal(0.0, 1.0);
    s.point.z += rng.normal(0.0, 1.0);
  }
  auto base = displacement_errors(d);
  Dataset shifted = d;
  double tx = 12.3, ty = -4.5, tz = 101.0;
  for (auto& s : shifted.samples) {
    s.point.x += tx;
    s.point.y += ty;
    s.point.z += tz;
  }
  auto moved = displacement_errors(shifted);
  REQUIRE(base.size() == moved.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    CHECK(moved[i].error == doctest::Approx(base[i].error).epsilon(1e-12));
  }
}

TEST_CASE("displacement_rmse summary statistics") {
  auto make = [](std::initializer_list<double> values) {
    std::vector<DisplacementError> errs;
    for (double v : values) errs.push_back({{}, {}, 0, 0, v});
    return errs;
  };
  auto zero = make({0, 0, 0});
  auto s0 = displacement_rmse(zero);
  CHECK(s0.rmse == doctest::Approx(0.0));
  CHECK(s0.stddev == doctest::Approx(0.0));

  auto single = make({2});
  auto s1 = displacement_rmse(single);
  CHECK(s1.rmse == doctest::Approx(2.0));
  CHECK(s1.stddev == doctest::Approx(0.0));

  // [1,2,3]: rmse = sqrt(14/3), population stddev = sqrt(2/3).
  auto three = make({1, 2, 3});
  auto s3 = displacement_rmse(three);
  CHECK(s3.rmse == doctest::Approx(std::sqrt(14.0 / 3.0)).epsilon(1e-12));
  CHECK(s3.stddev == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));

  std::vector<DisplacementError> empty;
  CHECK_THROWS_AS(displacement_rmse(empty), DataError);
}

TEST_CASE("dataset CSV round-trip is exact and byte-stable") {
  Rng rng(99);
  auto g = small_grid();
  auto d = perfect_dataset(g);
  d.env_id = "carm_test";
  for (auto& s : d.samples) {
    s.point.x += rng.normal(0.0, 1.0);
    s.point.q = std::abs(rng.normal(0.0, 1.0));
    s.point.phi_x = rng.uniform(-180.0, 180.0);
  }
  auto dir = temp_dir();
  auto path = dir / "roundtrip.csv";
  save_dataset_csv(d, path);

  auto loaded = load_datasets_csv(path, g);
  REQUIRE(loaded.size() == 1);
  REQUIRE(loaded[0].samples.size() == d.samples.size());
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    auto a = d.samples[i].point.channels();
    auto b = loaded[0].samples[i].point.channels();
    for (std::size_t c = 0; c < kChannels; ++c) CHECK(a[c] == b[c]);
  }

  auto path2 = dir / "roundtrip2.csv";
  save_dataset_csv(loaded[0], path2);
  std::ifstream f1(path), f2(path2);
  std::stringstream s1, s2;
  s1 << f1.rdbuf();
  s2 << f2.rdbuf();
  CHECK(s1.str() == s2.str());
}

TEST_CASE("CSV loader reports the offending line") {
  auto dir = temp_dir();
  auto path = dir / "bad.csv";
  {
    std::ofstream out(path);
    out << "env,role,i,j,k,x,y,z,q,phi_x,phi_y,phi_z\n";
    out << "e,train,0,0,0,1,2,3,0,0,0,0\n";
    out << "e,train,1,0,0,not_a_number,2,3,0,0,0,0\n";
  }
  try {
    load_datasets_csv(path, small_grid());
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
}

TEST_CASE("grid JSON sidecar round-trips") {
  auto dir = temp_dir();
  auto g = small_grid();
  save_grid_json(g, dir / "grid.json");
  auto loaded = load_grid_json(dir / "grid.json");
  CHECK(loaded.pitch_xy == g.pitch_xy);
  CHECK(loaded.z_layers == g.z_layers);
  CHECK(loaded.nx == g.nx);
  CHECK(loaded.ny == g.ny);
}

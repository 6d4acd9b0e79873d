#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "sofd/dataio.hpp"
#include "sofd/rng.hpp"

using namespace sofd;
namespace fs = std::filesystem;

namespace {

// Small CSV fixture: speed, four coefficients, three sensor columns.
CsvSchema tiny_schema() {
  CsvSchema s;
  s.speed_col = "speed";
  s.kkt_col = "kKt";
  s.kh_col = "kH";
  s.kkc_col = "kKc";
  s.kmt_col = "kMt";
  s.sensor_cols = {"s1", "s2", "s3"};
  s.variable_cols = {"s1", "s2", "s3"};
  return s;
}

std::string write_temp(const std::string& name, const std::string& content) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream out(p);
  out << content;
  return p.string();
}

bool in_range(double v, double lo, double hi) { return v >= lo && v <= hi; }

}  // namespace

TEST_CASE("load_raw keeps rows in order") {
  const std::string path = write_temp(
      "sofd_tiny.csv",
      "speed,kKt,kH,kKc,kMt,s1,s2,s3\n"
      "3,0.97,1.05,0.99,0.995,1,2,3\n"
      "6,0.92,1.05,0.99,0.995,4,5,6\n"
      "3,0.97,1.15,0.99,0.995,7,8,9\n");
  const auto records = load_raw(path, tiny_schema());
  REQUIRE(records.size() == 3);
  CHECK(records[0].sensors == std::vector<double>{1, 2, 3});
  CHECK(records[1].sensors == std::vector<double>{4, 5, 6});
  CHECK(records[2].sensors == std::vector<double>{7, 8, 9});
  // Speeds 3 and 6 rank as indices 1 and 2.
  CHECK(records[0].speed_index == 1);
  CHECK(records[1].speed_index == 2);
  CHECK(records[2].speed_index == 1);
}

TEST_CASE("load_raw reports the offending cell") {
  const std::string path = write_temp(
      "sofd_badcell.csv",
      "speed,kKt,kH,kKc,kMt,s1,s2,s3\n"
      "3,0.97,1.05,0.99,0.995,1,2,3\n"
      "3,0.97,oops,0.99,0.995,4,5,6\n");
  CHECK_THROWS_WITH_AS(load_raw(path, tiny_schema()),
                       doctest::Contains("row 1"), std::runtime_error);
  try {
    load_raw(path, tiny_schema());
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("kH") != std::string::npos);
  }
}

TEST_CASE("load_raw rejects ragged rows") {
  const std::string path = write_temp(
      "sofd_ragged.csv",
      "speed,kKt,kH,kKc,kMt,s1,s2,s3\n"
      "3,0.97,1.05,0.99,0.995,1,2,3\n"
      "3,0.97,1.05,0.99,0.995,1,2\n");
  CHECK_THROWS_WITH_AS(load_raw(path, tiny_schema()), doctest::Contains("row 1"),
                       std::runtime_error);
}

TEST_CASE("load_raw rejects a schema naming absent columns") {
  // 24 sensor columns in the file, 25 declared by the schema.
  std::string header = "speed,kKt,kH,kKc,kMt";
  std::string row = "3,0.97,1.05,0.99,0.995";
  CsvSchema schema = tiny_schema();
  schema.sensor_cols.clear();
  schema.variable_cols.clear();
  for (int i = 0; i < 25; ++i) schema.sensor_cols.push_back("v" + std::to_string(i));
  for (int i = 0; i < 24; ++i) {
    header += ",v" + std::to_string(i);
    row += ",1.0";
  }
  const std::string path = write_temp("sofd_24col.csv", header + "\n" + row + "\n");
  CHECK_THROWS_WITH_AS(load_raw(path, schema), doctest::Contains("v24"),
                       std::runtime_error);
  CHECK_THROWS(load_raw("/no/such/file.csv", tiny_schema()));
}

TEST_CASE("condition intervals") {
  CHECK(classify_condition(0.92, 1.05, 0.99, 0.995) == Condition::Fault1);
  CHECK(classify_condition(0.97, 1.05, 0.99, 0.995) == Condition::Normal);
  CHECK(classify_condition(0.80, 1.05, 0.99, 0.995) == Condition::Unassigned);
  CHECK(classify_condition(0.97, 1.15, 0.99, 0.995) == Condition::Fault2);
  CHECK(classify_condition(0.97, 1.05, 0.96, 0.995) == Condition::Fault3);
  CHECK(classify_condition(0.97, 1.05, 0.99, 0.98) == Condition::Fault4);
  // Bracket boundaries: 0.95 belongs to the closed normal interval, not the
  // half-open fault one.
  CHECK(classify_condition(0.95, 1.05, 0.99, 0.995) == Condition::Normal);
  CHECK(classify_condition(0.97, 1.1, 0.99, 0.995) == Condition::Normal);
  CHECK(classify_condition(0.97, 1.05, 0.98, 0.995) == Condition::Normal);
}

TEST_CASE("conditions partition random coefficient draws") {
  Rng rng(99);
  for (int i = 0; i < 2000; ++i) {
    const double kkt = rng.uniform(0.85, 1.05);
    const double kh = rng.uniform(0.95, 1.25);
    const double kkc = rng.uniform(0.9, 1.05);
    const double kmt = rng.uniform(0.95, 1.05);
    int matches = 0;
    matches += in_range(kkt, 0.95, 1.0) && in_range(kh, 1.0, 1.1) &&
               in_range(kkc, 0.98, 1.0) && in_range(kmt, 0.99, 1.0);
    matches += kkt >= 0.9 && kkt < 0.95 && in_range(kh, 1.0, 1.1) &&
               in_range(kkc, 0.98, 1.0) && in_range(kmt, 0.99, 1.0);
    matches += in_range(kkt, 0.95, 1.0) && kh > 1.1 && kh <= 1.2 &&
               in_range(kkc, 0.98, 1.0) && in_range(kmt, 0.99, 1.0);
    matches += in_range(kkt, 0.95, 1.0) && in_range(kh, 1.0, 1.1) && kkc >= 0.95 &&
               kkc < 0.98 && in_range(kmt, 0.99, 1.0);
    matches += in_range(kkt, 0.95, 1.0) && in_range(kh, 1.0, 1.1) &&
               in_range(kkc, 0.98, 1.0) && kmt >= 0.975 && kmt < 0.99;
    CHECK(matches <= 1);
    if (matches == 1) {
      CHECK(classify_condition(kkt, kh, kkc, kmt) != Condition::Unassigned);
    }
  }
}

TEST_CASE("select_variables projects in schema order") {
  const CsvSchema schema = tiny_schema();
  RawRecord r;
  r.sensors = {10.0, 20.0, 30.0};
  const Eigen::VectorXd x = select_variables(r, schema);
  REQUIRE(x.size() == 3);
  CHECK(x[0] == 10.0);
  CHECK(x[2] == 30.0);

  RawRecord r2 = r;
  r2.kkt = 0.5;  // differs outside the selected columns
  CHECK(select_variables(r2, schema) == x);

  CsvSchema missing = schema;
  missing.variable_cols = {"s1", "Fuel flow", "s3"};
  CHECK_THROWS_WITH_AS(select_variables(r, missing), doctest::Contains("Fuel flow"),
                       std::runtime_error);
}

TEST_CASE("canonical variable list has the fixed 17 names") {
  const auto& names = selected_variable_names();
  REQUIRE(names.size() == 17);
  CHECK(names.front() == "GT shaft torque");
  CHECK(names[5] == "Fuel flow");
  CHECK(names.back() == "Average propeller torque");
  CHECK(CsvSchema::defaults().variable_cols == names);
}

namespace {

std::vector<Sample> class_pool(int classes, int per_class, int dim = 2) {
  std::vector<Sample> pool;
  long id = 0;
  for (int c = 1; c <= classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      Sample s;
      s.x = Eigen::VectorXd::Constant(dim, c * 100.0 + i);
      s.y = c;
      s.id = id++;
      pool.push_back(std::move(s));
    }
  }
  return pool;
}

}  // namespace

TEST_CASE("build_split counts match the open-set protocol") {
  const auto pool = class_pool(4, 1800);
  SplitConfig cfg;
  cfg.known_classes = {1, 2, 3};
  cfg.unknown_class = 4;
  cfg.per_class = 1800;
  cfg.train_frac = 0.7;
  cfg.seed = 7;
  const SplitResult split = build_split(pool, cfg);
  CHECK(split.d_l.size() == 3780);  // 3 * 1260
  CHECK(split.d_u.size() == 2160);  // 4 * 540
  CHECK(split.truth.size() == 2160);

  // D_l carries only labels 1..K, D_u is unlabeled.
  for (const auto& s : split.d_l.samples) CHECK((s.y >= 1 && s.y <= 3));
  for (const auto& s : split.d_u.samples) CHECK(s.y == kUnlabeled);

  // Disjoint by identity; unknown-class samples only in D_u.
  std::set<long> train_ids;
  for (const auto& s : split.d_l.samples) train_ids.insert(s.id);
  int unknown_count = 0;
  for (std::size_t i = 0; i < split.d_u.samples.size(); ++i) {
    CHECK(train_ids.count(split.d_u.samples[i].id) == 0);
    if (split.truth[i] == 4) ++unknown_count;
  }
  CHECK(unknown_count == 540);
}

TEST_CASE("build_split is seed-deterministic and validates input") {
  const auto pool = class_pool(3, 50);
  SplitConfig cfg;
  cfg.known_classes = {1, 2};
  cfg.unknown_class = 3;
  cfg.per_class = 50;
  cfg.train_frac = 0.7;
  cfg.seed = 42;
  const SplitResult a = build_split(pool, cfg);
  const SplitResult b = build_split(pool, cfg);
  REQUIRE(a.d_l.size() == b.d_l.size());
  for (std::size_t i = 0; i < a.d_l.size(); ++i) {
    CHECK(a.d_l.samples[i].id == b.d_l.samples[i].id);
  }
  for (std::size_t i = 0; i < a.d_u.size(); ++i) {
    CHECK(a.d_u.samples[i].id == b.d_u.samples[i].id);
    CHECK(a.truth[i] == b.truth[i]);
  }

  SplitConfig bad = cfg;
  bad.train_frac = 1.0;
  CHECK_THROWS(build_split(pool, bad));
  bad = cfg;
  bad.per_class = 51;
  CHECK_THROWS(build_split(pool, bad));
  bad = cfg;
  bad.known_classes = {1, 3};
  CHECK_THROWS(build_split(pool, bad));
}

TEST_CASE("normalizer uses population statistics") {
  Dataset d;
  d.role = DatasetRole::Labeled;
  for (double v : {1.0, 2.0, 3.0}) {
    Sample s;
    s.x = Eigen::VectorXd::Constant(2, v);
    s.x[1] = 5.0;  // constant column
    s.y = 1;
    d.samples.push_back(s);
  }
  const Normalizer n = fit_normalizer(d);
  CHECK(n.mean[0] == doctest::Approx(2.0));
  CHECK(n.stddev[0] == doctest::Approx(std::sqrt(2.0 / 3.0)));
  CHECK(n.stddev[1] == 1.0);  // zero variance passes through

  const Dataset nd = apply_normalizer(n, d);
  CHECK(nd.samples[0].x[0] == doctest::Approx(-1.224744871391589).epsilon(1e-9));
  CHECK(nd.samples[1].x[0] == doctest::Approx(0.0));
  CHECK(nd.samples[2].x[0] == doctest::Approx(1.224744871391589).epsilon(1e-9));
  CHECK(nd.samples[0].x[1] == doctest::Approx(0.0));

  // Re-fitting on the normalized data gives mean 0, std 1.
  const Normalizer n2 = fit_normalizer(nd);
  CHECK(std::fabs(n2.mean[0]) < 1e-9);
  CHECK(n2.stddev[0] == doctest::Approx(1.0).epsilon(1e-9));

  CHECK_THROWS(fit_normalizer(Dataset{}));
}

TEST_CASE("normalizer statistics stay frozen on test data") {
  Rng rng(3);
  Dataset train, test;
  for (int i = 0; i < 200; ++i) {
    Sample s;
    s.x = Eigen::VectorXd::Constant(1, rng.normal());
    (i % 2 ? train : test).samples.push_back(s);
  }
  for (auto& s : test.samples) s.x[0] += 3.0;  // shifted test distribution
  const Normalizer n = fit_normalizer(train);
  const Dataset nt = apply_normalizer(n, test);
  double mean = 0.0;
  for (const auto& s : nt.samples) mean += s.x[0];
  mean /= static_cast<double>(nt.size());
  CHECK(std::fabs(mean) > 1.0);  // nowhere near zero
}

TEST_CASE("synthetic generator") {
  SyntheticSpec spec;
  spec.means = axis_means(4, 6, 6.0);
  spec.cov_scale = 1.0;
  spec.per_class = 100;
  spec.seed = 11;
  const auto samples = generate_synthetic(spec);
  REQUIRE(samples.size() == 400);
  std::map<int, int> counts;
  for (const auto& s : samples) ++counts[s.y];
  for (int c = 1; c <= 4; ++c) CHECK(counts[c] == 100);

  // Bit-identical under the same seed.
  const auto again = generate_synthetic(spec);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(samples[i].x == again[i].x);
  }

  SyntheticSpec degenerate = spec;
  degenerate.cov_scale = 0.0;
  for (const auto& s : generate_synthetic(degenerate)) {
    CHECK(s.x == spec.means[static_cast<std::size_t>(s.y - 1)]);
  }

  SyntheticSpec bad = spec;
  bad.means[1] = bad.means[0];
  CHECK_THROWS(generate_synthetic(bad));
}

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sofd/types.hpp"

namespace sofd {

struct RawRecord {
  int speed_index = 0;  // 1-based rank of the row's speed value
  double kkt = 0.0;     // propeller thrust decay
  double kh = 0.0;      // hull decay
  double kkc = 0.0;     // compressor decay
  double kmt = 0.0;     // turbine decay
  std::vector<double> sensors;  // schema sensor columns, schema order
  long row = -1;                // 0-based data row in the source file
};

enum class Condition { Normal = 0, Fault1, Fault2, Fault3, Fault4, Unassigned };

const char* condition_name(Condition c);
std::optional<Condition> condition_from_name(const std::string& name);

/// Assigns the operating condition from the four decay coefficients.
/// Records matching no interval set come back Unassigned.
Condition classify_condition(double kkt, double kh, double kkc, double kmt);

// Column-name map for the ingest CSV. Public copies of the benchmark differ
// in header conventions, so every column is resolved by name.
struct CsvSchema {
  std::string speed_col = "speed";
  std::string kkt_col = "kKt";
  std::string kh_col = "kH";
  std::string kkc_col = "kKc";
  std::string kmt_col = "kMt";
  std::vector<std::string> sensor_cols;    // all measured variables, file order
  std::vector<std::string> variable_cols;  // the 17 selected names, fixed order

  static CsvSchema defaults();
};

/// The canonical ordering of the 17 selected process variables.
const std::vector<std::string>& selected_variable_names();

std::vector<RawRecord> load_raw(const std::string& path, const CsvSchema& schema);

std::vector<std::pair<RawRecord, Condition>> label_conditions(
    const std::vector<RawRecord>& records);

/// Projects a record onto the 17 selected variables, schema variable order.
Eigen::VectorXd select_variables(const RawRecord& record, const CsvSchema& schema);

struct SplitConfig {
  std::vector<int> known_classes;  // original class keys, defines labels 1..K
  int unknown_class = 0;           // original class key mapped to K+1
  int per_class = 1800;
  double train_frac = 0.7;
  std::uint64_t seed = 1;
};

struct SplitResult {
  Dataset d_l;              // labeled 1..K
  Dataset d_u;              // unlabeled (y = 0)
  std::vector<int> truth;   // per d_u sample: 1..K for knowns, K+1 for unknowns
};

/// Open-set split: train_frac of each known class forms D_l; the remaining
/// known samples plus the test fraction of the unknown class form D_u.
/// Ground truth is kept apart from D_u so later stages cannot see it.
SplitResult build_split(const std::vector<Sample>& pool, const SplitConfig& cfg);

struct Normalizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;  // zero-variance columns carry 1
};

Normalizer fit_normalizer(const Dataset& d_l);
Dataset apply_normalizer(const Normalizer& norm, const Dataset& data);

struct SyntheticSpec {
  std::vector<Eigen::VectorXd> means;  // one per class, pairwise distinct
  double cov_scale = 1.0;              // isotropic stddev
  int per_class = 400;
  std::uint64_t seed = 1;
};

/// Isotropic Gaussian blobs, labels 1..means.size(), seed-deterministic.
std::vector<Sample> generate_synthetic(const SyntheticSpec& spec);

/// Axis-aligned means with pairwise distance separation*sqrt(2).
std::vector<Eigen::VectorXd> axis_means(int classes, int dim, double separation);

}  // namespace sofd

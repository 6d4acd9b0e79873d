#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "sofd/dataio.hpp"

namespace sofd {

struct DatasetConfig {
  bool synthetic = false;
  std::string path;
  std::string schema;  // optional schema JSON path
  int speed = 1;
  std::vector<int> known_classes;  // class keys (condition enum or synthetic id)
  std::vector<std::string> known_names;
  int unknown_class = 0;
  std::string unknown_name;
  int per_class = 1800;
  double train_frac = 0.7;
  std::uint64_t seed = 0;  // split/generation seed; 0 derives from the master
};

struct SyntheticSection {
  int classes = 4;
  int dim = 17;
  double separation = 6.0;
  double cov_scale = 1.0;
  int per_class = 400;
  std::vector<std::vector<double>> means;  // optional explicit means
};

struct GraphSection {
  double sigma2 = 10.0;
  double epsilon = 0.5;
  bool use_weights = true;
};

struct ModelSection {
  int cheb_order = 2;
  std::vector<int> conv_channels = {32, 32, 32};
  std::vector<int> fc_hidden;  // explicit override of the per-speed table
  std::vector<int> fc_hidden_low_speed = {64, 16};   // speeds 1..2
  std::vector<int> fc_hidden_high_speed = {64, 8};   // speeds 3..9
};

struct TrainSection {
  double lr = 1e-5;
  int batch = 64;
  int epochs = 100;
};

struct RejectionSection {
  double alpha = 0.01;
  double lambda_reg = 1e-6;
  std::string fused_layers = "all";  // "all", "last", or "i,j,..."
  std::vector<double> priors;        // per known class; empty = uniform
  bool literal_boundary = false;
  bool literal_fdist = false;
};

struct ConsistencySection {
  int neighbors = 6;
};

struct RunConfig {
  DatasetConfig dataset;
  SyntheticSection synthetic;
  GraphSection graph;
  ModelSection model;
  TrainSection train_m0;
  TrainSection train_m1;
  RejectionSection rejection;
  ConsistencySection consistency;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  std::string variant;  // "", "no_fusion", "no_consistency", "raw_feature_space"

  std::vector<int> fc_hidden_for_speed() const;
};

/// Parses a config JSON object; unknown keys are rejected so typos fail fast.
RunConfig parse_config(const nlohmann::ordered_json& j);

nlohmann::ordered_json config_to_json(const RunConfig& cfg);

nlohmann::ordered_json load_config_file(const std::string& path);

/// Applies a dotted-path override ("rejection.alpha=0.05") onto raw JSON.
/// Values parse as JSON when possible, otherwise as strings.
void apply_override(nlohmann::ordered_json& j, const std::string& assignment);

/// FNV-1a over the canonical serialization.
std::string config_hash(const RunConfig& cfg);

CsvSchema load_schema_file(const std::string& path);

/// Default config documentation for --help: key, default, description rows.
std::string describe_config_keys();

}  // namespace sofd

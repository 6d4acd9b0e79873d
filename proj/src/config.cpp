#include "sofd/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace sofd {

namespace {

using json = nlohmann::ordered_json;

void check_keys(const json& j, const std::string& section,
                const std::set<std::string>& allowed) {
  if (!j.is_object()) throw std::runtime_error("config section '" + section + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) {
      throw std::runtime_error("unknown config key '" +
                               (section.empty() ? key : section + "." + key) + "'");
    }
  }
}

std::vector<int> parse_int_list(const json& j, const std::string& what) {
  std::vector<int> out;
  if (!j.is_array()) throw std::runtime_error(what + " must be an array of integers");
  for (const auto& v : j) out.push_back(v.get<int>());
  return out;
}

// Class keys are condition names for CSV data and integer ids for synthetic.
std::pair<int, std::string> parse_class_key(const json& v) {
  if (v.is_number_integer()) {
    const int k = v.get<int>();
    return {k, std::to_string(k)};
  }
  if (v.is_string()) {
    const std::string name = v.get<std::string>();
    const auto cond = condition_from_name(name);
    if (!cond || *cond == Condition::Unassigned) {
      throw std::runtime_error("unknown condition name '" + name + "'");
    }
    return {static_cast<int>(*cond), std::string(condition_name(*cond))};
  }
  throw std::runtime_error("class keys must be condition names or integers");
}

}  // namespace

std::vector<int> RunConfig::fc_hidden_for_speed() const {
  if (!model.fc_hidden.empty()) return model.fc_hidden;
  return dataset.speed <= 2 ? model.fc_hidden_low_speed : model.fc_hidden_high_speed;
}

RunConfig parse_config(const json& j) {
  check_keys(j, "", {"dataset", "synthetic", "graph", "model", "train_m0", "train_m1",
                     "rejection", "consistency", "seed", "output_dir", "variant"});
  RunConfig cfg;

  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    check_keys(d, "dataset",
               {"synthetic", "path", "schema", "speed", "known_classes", "unknown_class",
                "per_class", "train_frac", "seed"});
    cfg.dataset.synthetic = d.value("synthetic", cfg.dataset.synthetic);
    cfg.dataset.path = d.value("path", cfg.dataset.path);
    cfg.dataset.schema = d.value("schema", cfg.dataset.schema);
    cfg.dataset.speed = d.value("speed", cfg.dataset.speed);
    if (d.contains("known_classes")) {
      for (const auto& v : d["known_classes"]) {
        auto [key, name] = parse_class_key(v);
        cfg.dataset.known_classes.push_back(key);
        cfg.dataset.known_names.push_back(name);
      }
    }
    if (d.contains("unknown_class")) {
      auto [key, name] = parse_class_key(d["unknown_class"]);
      cfg.dataset.unknown_class = key;
      cfg.dataset.unknown_name = name;
    }
    cfg.dataset.per_class = d.value("per_class", cfg.dataset.per_class);
    cfg.dataset.train_frac = d.value("train_frac", cfg.dataset.train_frac);
    cfg.dataset.seed = d.value("seed", cfg.dataset.seed);
  }
  if (j.contains("synthetic")) {
    const auto& s = j["synthetic"];
    check_keys(s, "synthetic", {"classes", "dim", "separation", "cov_scale", "per_class", "means"});
    cfg.synthetic.classes = s.value("classes", cfg.synthetic.classes);
    cfg.synthetic.dim = s.value("dim", cfg.synthetic.dim);
    cfg.synthetic.separation = s.value("separation", cfg.synthetic.separation);
    cfg.synthetic.cov_scale = s.value("cov_scale", cfg.synthetic.cov_scale);
    cfg.synthetic.per_class = s.value("per_class", cfg.synthetic.per_class);
    if (s.contains("means")) {
      for (const auto& m : s["means"]) {
        cfg.synthetic.means.push_back(m.get<std::vector<double>>());
      }
    }
  }

  if (cfg.dataset.known_classes.empty()) {
    if (cfg.dataset.synthetic) {
      for (int c = 1; c < cfg.synthetic.classes; ++c) {
        cfg.dataset.known_classes.push_back(c);
        cfg.dataset.known_names.push_back(std::to_string(c));
      }
      cfg.dataset.unknown_class = cfg.synthetic.classes;
      cfg.dataset.unknown_name = std::to_string(cfg.synthetic.classes);
    } else {
      // Normal-condition samples stay out of the default open-set split.
      for (Condition c : {Condition::Fault1, Condition::Fault2, Condition::Fault3}) {
        cfg.dataset.known_classes.push_back(static_cast<int>(c));
        cfg.dataset.known_names.push_back(condition_name(c));
      }
      cfg.dataset.unknown_class = static_cast<int>(Condition::Fault4);
      cfg.dataset.unknown_name = condition_name(Condition::Fault4);
    }
  }

  if (j.contains("graph")) {
    const auto& g = j["graph"];
    check_keys(g, "graph", {"sigma2", "epsilon", "use_weights"});
    cfg.graph.sigma2 = g.value("sigma2", cfg.graph.sigma2);
    cfg.graph.epsilon = g.value("epsilon", cfg.graph.epsilon);
    cfg.graph.use_weights = g.value("use_weights", cfg.graph.use_weights);
  }

  if (j.contains("model")) {
    const auto& m = j["model"];
    check_keys(m, "model", {"cheb_order", "conv_channels", "fc_hidden",
                            "fc_hidden_low_speed", "fc_hidden_high_speed"});
    cfg.model.cheb_order = m.value("cheb_order", cfg.model.cheb_order);
    if (m.contains("conv_channels")) cfg.model.conv_channels = parse_int_list(m["conv_channels"], "model.conv_channels");
    if (m.contains("fc_hidden")) cfg.model.fc_hidden = parse_int_list(m["fc_hidden"], "model.fc_hidden");
    if (m.contains("fc_hidden_low_speed")) cfg.model.fc_hidden_low_speed = parse_int_list(m["fc_hidden_low_speed"], "model.fc_hidden_low_speed");
    if (m.contains("fc_hidden_high_speed")) cfg.model.fc_hidden_high_speed = parse_int_list(m["fc_hidden_high_speed"], "model.fc_hidden_high_speed");
  }

  auto parse_train = [](const json& t, const std::string& section, TrainSection& out) {
    check_keys(t, section, {"lr", "batch", "epochs"});
    out.lr = t.value("lr", out.lr);
    out.batch = t.value("batch", out.batch);
    out.epochs = t.value("epochs", out.epochs);
  };
  if (j.contains("train_m0")) parse_train(j["train_m0"], "train_m0", cfg.train_m0);
  if (j.contains("train_m1")) parse_train(j["train_m1"], "train_m1", cfg.train_m1);

  if (j.contains("rejection")) {
    const auto& r = j["rejection"];
    check_keys(r, "rejection",
               {"alpha", "lambda_reg", "fused_layers", "priors", "literal_boundary",
                "literal_fdist"});
    cfg.rejection.alpha = r.value("alpha", cfg.rejection.alpha);
    cfg.rejection.lambda_reg = r.value("lambda_reg", cfg.rejection.lambda_reg);
    if (r.contains("fused_layers")) {
      if (r["fused_layers"].is_string()) {
        cfg.rejection.fused_layers = r["fused_layers"].get<std::string>();
      } else {
        std::string joined;
        for (const auto& v : r["fused_layers"]) {
          if (!joined.empty()) joined += ",";
          joined += std::to_string(v.get<int>());
        }
        cfg.rejection.fused_layers = joined;
      }
    }
    if (r.contains("priors")) cfg.rejection.priors = r["priors"].get<std::vector<double>>();
    cfg.rejection.literal_boundary = r.value("literal_boundary", cfg.rejection.literal_boundary);
    cfg.rejection.literal_fdist = r.value("literal_fdist", cfg.rejection.literal_fdist);
  }

  if (j.contains("consistency")) {
    const auto& c = j["consistency"];
    check_keys(c, "consistency", {"neighbors"});
    cfg.consistency.neighbors = c.value("neighbors", cfg.consistency.neighbors);
  }

  cfg.seed = j.value("seed", cfg.seed);
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  cfg.variant = j.value("variant", cfg.variant);
  if (!cfg.variant.empty() && cfg.variant != "no_fusion" && cfg.variant != "no_consistency" &&
      cfg.variant != "raw_feature_space") {
    throw std::runtime_error("unknown variant '" + cfg.variant + "'");
  }

  if (!(cfg.rejection.alpha > 0.0 && cfg.rejection.alpha < 1.0)) {
    throw std::runtime_error("rejection.alpha must lie in (0,1)");
  }
  if (cfg.consistency.neighbors < 1) {
    throw std::runtime_error("consistency.neighbors must be >= 1");
  }
  return cfg;
}

nlohmann::ordered_json config_to_json(const RunConfig& cfg) {
  json j;
  json d;
  d["synthetic"] = cfg.dataset.synthetic;
  d["path"] = cfg.dataset.path;
  d["schema"] = cfg.dataset.schema;
  d["speed"] = cfg.dataset.speed;
  if (cfg.dataset.synthetic) {
    d["known_classes"] = cfg.dataset.known_classes;
    d["unknown_class"] = cfg.dataset.unknown_class;
  } else {
    d["known_classes"] = cfg.dataset.known_names;
    d["unknown_class"] = cfg.dataset.unknown_name;
  }
  d["per_class"] = cfg.dataset.per_class;
  d["train_frac"] = cfg.dataset.train_frac;
  d["seed"] = cfg.dataset.seed;
  j["dataset"] = d;

  json s;
  s["classes"] = cfg.synthetic.classes;
  s["dim"] = cfg.synthetic.dim;
  s["separation"] = cfg.synthetic.separation;
  s["cov_scale"] = cfg.synthetic.cov_scale;
  s["per_class"] = cfg.synthetic.per_class;
  s["means"] = cfg.synthetic.means;
  j["synthetic"] = s;

  json g;
  g["sigma2"] = cfg.graph.sigma2;
  g["epsilon"] = cfg.graph.epsilon;
  g["use_weights"] = cfg.graph.use_weights;
  j["graph"] = g;

  json m;
  m["cheb_order"] = cfg.model.cheb_order;
  m["conv_channels"] = cfg.model.conv_channels;
  m["fc_hidden"] = cfg.model.fc_hidden;
  m["fc_hidden_low_speed"] = cfg.model.fc_hidden_low_speed;
  m["fc_hidden_high_speed"] = cfg.model.fc_hidden_high_speed;
  j["model"] = m;

  auto train_json = [](const TrainSection& t) {
    json out;
    out["lr"] = t.lr;
    out["batch"] = t.batch;
    out["epochs"] = t.epochs;
    return out;
  };
  j["train_m0"] = train_json(cfg.train_m0);
  j["train_m1"] = train_json(cfg.train_m1);

  json r;
  r["alpha"] = cfg.rejection.alpha;
  r["lambda_reg"] = cfg.rejection.lambda_reg;
  r["fused_layers"] = cfg.rejection.fused_layers;
  r["priors"] = cfg.rejection.priors;
  r["literal_boundary"] = cfg.rejection.literal_boundary;
  r["literal_fdist"] = cfg.rejection.literal_fdist;
  j["rejection"] = r;

  json c;
  c["neighbors"] = cfg.consistency.neighbors;
  j["consistency"] = c;

  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  j["variant"] = cfg.variant;
  return j;
}

nlohmann::ordered_json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("config parse error in " + path + ": " + e.what());
  }
  return j;
}

void apply_override(nlohmann::ordered_json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw std::runtime_error("override must look like section.key=value: " + assignment);
  }
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  json parsed;
  try {
    parsed = json::parse(value);
  } catch (...) {
    parsed = value;  // plain string
  }

  json* cursor = &j;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw std::runtime_error("empty override path");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    cursor = &(*cursor)[parts[i]];
  }
  (*cursor)[parts.back()] = parsed;
}

std::string config_hash(const RunConfig& cfg) {
  // The hash identifies the experiment; where its artifacts land does not
  // change what was run.
  nlohmann::ordered_json j = config_to_json(cfg);
  j["output_dir"] = "";
  const std::string dump = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

CsvSchema load_schema_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open schema file: " + path);
  json j;
  in >> j;
  check_keys(j, "schema", {"speed", "kKt", "kH", "kKc", "kMt", "sensors", "variables"});
  CsvSchema s = CsvSchema::defaults();
  s.speed_col = j.value("speed", s.speed_col);
  s.kkt_col = j.value("kKt", s.kkt_col);
  s.kh_col = j.value("kH", s.kh_col);
  s.kkc_col = j.value("kKc", s.kkc_col);
  s.kmt_col = j.value("kMt", s.kmt_col);
  if (j.contains("sensors")) s.sensor_cols = j["sensors"].get<std::vector<std::string>>();
  if (j.contains("variables")) s.variable_cols = j["variables"].get<std::vector<std::string>>();
  if (s.variable_cols.size() != selected_variable_names().size()) {
    throw std::runtime_error("schema must map exactly " +
                             std::to_string(selected_variable_names().size()) +
                             " selected variables");
  }
  return s;
}

std::string describe_config_keys() {
  return
      "Config keys (JSON, dotted paths usable with --set):\n"
      "  dataset.synthetic       bool    use the synthetic generator (default false)\n"
      "  dataset.path            string  raw benchmark CSV (fallback: $SOFD_DATA_DIR)\n"
      "  dataset.schema          string  optional column-map JSON\n"
      "  dataset.speed           int     speed index 1..9 (default 1)\n"
      "  dataset.known_classes   list    default [fault1,fault2,fault3]\n"
      "  dataset.unknown_class   key     default fault4\n"
      "  dataset.per_class       int     samples drawn per class (default 1800)\n"
      "  dataset.train_frac      float   training fraction (default 0.7)\n"
      "  dataset.seed            int     split seed; 0 derives from the master seed\n"
      "  synthetic.classes       int     class count (default 4)\n"
      "  synthetic.dim           int     feature dimension (default 17)\n"
      "  synthetic.separation    float   axis mean offset (default 6)\n"
      "  synthetic.cov_scale     float   isotropic stddev (default 1)\n"
      "  synthetic.per_class     int     samples per class (default 400)\n"
      "  synthetic.means         list    optional explicit class means\n"
      "  graph.sigma2            float   Gaussian kernel bandwidth (default 10)\n"
      "  graph.epsilon           float   sparsity threshold (default 0.5)\n"
      "  graph.use_weights       bool    weighted Laplacian (default true)\n"
      "  model.cheb_order        int     Chebyshev order (default 2)\n"
      "  model.conv_channels     list    conv widths (default [32,32,32])\n"
      "  model.fc_hidden         list    explicit fc hidden widths (overrides table)\n"
      "  model.fc_hidden_low_speed  list fc widths for speeds 1-2 (default [64,16])\n"
      "  model.fc_hidden_high_speed list fc widths for speeds 3-9 (default [64,8])\n"
      "  train_m0.lr/batch/epochs        defaults 1e-5 / 64 / 100\n"
      "  train_m1.lr/batch/epochs        defaults 1e-5 / 64 / 100\n"
      "  rejection.alpha         float   F-quantile significance (default 0.01)\n"
      "  rejection.lambda_reg    float   covariance ridge (default 1e-6)\n"
      "  rejection.fused_layers  str     'all', 'last', or 'i,j,...' (default all)\n"
      "  rejection.priors        list    per-class priors (default uniform)\n"
      "  rejection.literal_boundary bool printed boundary sign (default false)\n"
      "  rejection.literal_fdist bool    printed F dfs (default false)\n"
      "  consistency.neighbors   int     C nearest neighbors (default 6)\n"
      "  seed                    int     master seed (default 1)\n"
      "  output_dir              string  run artifact directory (default out)\n"
      "  variant                 string  '', no_fusion, no_consistency, raw_feature_space\n";
}

}  // namespace sofd

#include "sofd/dataio.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "sofd/rng.hpp"

namespace sofd {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

double parse_cell(const std::string& cell, long row, const std::string& column) {
  const std::string t = trim(cell);
  if (!t.empty()) {
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end == t.c_str() + t.size()) return v;
  }
  throw std::runtime_error("non-numeric cell at row " + std::to_string(row) +
                           ", column '" + column + "': '" + cell + "'");
}

bool in_cc(double v, double lo, double hi) { return v >= lo && v <= hi; }
bool in_co(double v, double lo, double hi) { return v >= lo && v < hi; }
bool in_oc(double v, double lo, double hi) { return v > lo && v <= hi; }

}  // namespace

const char* condition_name(Condition c) {
  switch (c) {
    case Condition::Normal: return "normal";
    case Condition::Fault1: return "fault1";
    case Condition::Fault2: return "fault2";
    case Condition::Fault3: return "fault3";
    case Condition::Fault4: return "fault4";
    case Condition::Unassigned: return "unassigned";
  }
  return "unassigned";
}

std::optional<Condition> condition_from_name(const std::string& name) {
  std::string n;
  for (char ch : name) {
    if (!std::isspace(static_cast<unsigned char>(ch)) && ch != '_') {
      n.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (n == "normal") return Condition::Normal;
  if (n == "fault1" || n == "f1") return Condition::Fault1;
  if (n == "fault2" || n == "f2") return Condition::Fault2;
  if (n == "fault3" || n == "f3") return Condition::Fault3;
  if (n == "fault4" || n == "f4") return Condition::Fault4;
  if (n == "unassigned") return Condition::Unassigned;
  return std::nullopt;
}

Condition classify_condition(double kkt, double kh, double kkc, double kmt) {
  const bool kkt_nom = in_cc(kkt, 0.95, 1.0);
  const bool kh_nom = in_cc(kh, 1.0, 1.1);
  const bool kkc_nom = in_cc(kkc, 0.98, 1.0);
  const bool kmt_nom = in_cc(kmt, 0.99, 1.0);

  // Checked in table order; the first matching condition wins so the single
  // shared closed endpoint (kMt = 0.99) resolves deterministically.
  if (kkt_nom && kh_nom && kkc_nom && kmt_nom) return Condition::Normal;
  if (in_co(kkt, 0.9, 0.95) && kh_nom && kkc_nom && kmt_nom) return Condition::Fault1;
  if (kkt_nom && in_oc(kh, 1.1, 1.2) && kkc_nom && kmt_nom) return Condition::Fault2;
  if (kkt_nom && kh_nom && in_co(kkc, 0.95, 0.98) && kmt_nom) return Condition::Fault3;
  if (kkt_nom && kh_nom && kkc_nom && in_cc(kmt, 0.975, 0.99)) return Condition::Fault4;
  return Condition::Unassigned;
}

const std::vector<std::string>& selected_variable_names() {
  static const std::vector<std::string> names = {
      "GT shaft torque",
      "GT speed",
      "Shaft torque stbd",
      "HP turbine exit temperature",
      "Generator of gas speed",
      "Fuel flow",
      "ABB TIC control signal",
      "GT compressor outlet air pressure",
      "CGT compressor outlet air temperature",
      "External pressure",
      "HP turbine exit pressure",
      "TCS TIC control signal",
      "Average controllable pitch propeller thrust",
      "Average shaft rpm",
      "Average thrust coefficient",
      "Average propeller rps",
      "Average propeller torque",
  };
  return names;
}

CsvSchema CsvSchema::defaults() {
  CsvSchema s;
  s.sensor_cols = selected_variable_names();
  s.variable_cols = selected_variable_names();
  return s;
}

std::vector<RawRecord> load_raw(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty dataset file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_csv_line(line);

  std::unordered_map<std::string, int> col_index;
  for (std::size_t i = 0; i < header.size(); ++i) col_index[header[i]] = static_cast<int>(i);

  auto resolve = [&](const std::string& name) {
    auto it = col_index.find(name);
    if (it == col_index.end()) {
      throw std::runtime_error("schema mismatch: column '" + name +
                               "' not found in " + path);
    }
    return it->second;
  };

  const int speed_idx = resolve(schema.speed_col);
  const int kkt_idx = resolve(schema.kkt_col);
  const int kh_idx = resolve(schema.kh_col);
  const int kkc_idx = resolve(schema.kkc_col);
  const int kmt_idx = resolve(schema.kmt_col);
  std::vector<int> sensor_idx;
  sensor_idx.reserve(schema.sensor_cols.size());
  for (const auto& name : schema.sensor_cols) sensor_idx.push_back(resolve(name));

  std::vector<RawRecord> records;
  std::vector<double> speeds;
  long row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error("malformed row " + std::to_string(row) + ": expected " +
                               std::to_string(header.size()) + " cells, got " +
                               std::to_string(cells.size()));
    }
    RawRecord rec;
    rec.row = row;
    rec.kkt = parse_cell(cells[kkt_idx], row, schema.kkt_col);
    rec.kh = parse_cell(cells[kh_idx], row, schema.kh_col);
    rec.kkc = parse_cell(cells[kkc_idx], row, schema.kkc_col);
    rec.kmt = parse_cell(cells[kmt_idx], row, schema.kmt_col);
    rec.sensors.reserve(sensor_idx.size());
    for (std::size_t s = 0; s < sensor_idx.size(); ++s) {
      rec.sensors.push_back(parse_cell(cells[sensor_idx[s]], row, schema.sensor_cols[s]));
    }
    speeds.push_back(parse_cell(cells[speed_idx], row, schema.speed_col));
    records.push_back(std::move(rec));
    ++row;
  }

  // Speed values (lever positions, knots, or plain indices) map to a 1-based
  // rank over the distinct values present in the file.
  std::vector<double> distinct(speeds);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() > 9) {
    throw std::runtime_error("speed column has " + std::to_string(distinct.size()) +
                             " distinct values; expected at most 9");
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto it = std::lower_bound(distinct.begin(), distinct.end(), speeds[i]);
    records[i].speed_index = static_cast<int>(it - distinct.begin()) + 1;
  }
  return records;
}

std::vector<std::pair<RawRecord, Condition>> label_conditions(
    const std::vector<RawRecord>& records) {
  std::vector<std::pair<RawRecord, Condition>> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.emplace_back(r, classify_condition(r.kkt, r.kh, r.kkc, r.kmt));
  }
  return out;
}

Eigen::VectorXd select_variables(const RawRecord& record, const CsvSchema& schema) {
  Eigen::VectorXd out(static_cast<long>(schema.variable_cols.size()));
  for (std::size_t i = 0; i < schema.variable_cols.size(); ++i) {
    const auto& name = schema.variable_cols[i];
    const auto it = std::find(schema.sensor_cols.begin(), schema.sensor_cols.end(), name);
    if (it == schema.sensor_cols.end()) {
      throw std::runtime_error("variable '" + name + "' is not mapped by the schema");
    }
    const auto idx = static_cast<std::size_t>(it - schema.sensor_cols.begin());
    if (idx >= record.sensors.size()) {
      throw std::runtime_error("variable '" + name + "' is outside the record");
    }
    out[static_cast<long>(i)] = record.sensors[idx];
  }
  return out;
}

SplitResult build_split(const std::vector<Sample>& pool, const SplitConfig& cfg) {
  if (!(cfg.train_frac > 0.0 && cfg.train_frac < 1.0)) {
    throw std::invalid_argument("train_frac must lie strictly between 0 and 1");
  }
  if (cfg.per_class <= 0) throw std::invalid_argument("per_class must be positive");
  if (cfg.known_classes.empty()) throw std::invalid_argument("no known classes given");
  for (int k : cfg.known_classes) {
    if (k == cfg.unknown_class) {
      throw std::invalid_argument("unknown class listed among known classes");
    }
  }
  std::set<int> dedup(cfg.known_classes.begin(), cfg.known_classes.end());
  if (dedup.size() != cfg.known_classes.size()) {
    throw std::invalid_argument("duplicate class key in known classes");
  }

  const int K = static_cast<int>(cfg.known_classes.size());
  std::unordered_map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < pool.size(); ++i) by_class[pool[i].y].push_back(i);

  const int train_count = static_cast<int>(cfg.train_frac * cfg.per_class);

  SplitResult out;
  out.d_l.role = DatasetRole::Labeled;
  out.d_l.known_classes = K;
  out.d_u.role = DatasetRole::Unlabeled;
  out.d_u.known_classes = K;

  std::vector<int> u_truth;
  auto take_class = [&](int class_key, int mapped_label, std::uint64_t stream) {
    auto it = by_class.find(class_key);
    const std::size_t have = (it == by_class.end()) ? 0 : it->second.size();
    if (have < static_cast<std::size_t>(cfg.per_class)) {
      throw std::runtime_error("class " + std::to_string(class_key) + " has " +
                               std::to_string(have) + " samples, need " +
                               std::to_string(cfg.per_class));
    }
    std::vector<std::size_t> idx = it->second;
    Rng rng(mix_seed(cfg.seed, stream));
    rng.shuffle(idx);
    idx.resize(static_cast<std::size_t>(cfg.per_class));
    return std::pair<std::vector<std::size_t>, int>(std::move(idx), mapped_label);
  };

  std::uint64_t stream = 0;
  for (int k = 0; k < K; ++k) {
    auto [idx, label] = take_class(cfg.known_classes[static_cast<std::size_t>(k)], k + 1, stream++);
    for (int i = 0; i < cfg.per_class; ++i) {
      Sample s = pool[idx[static_cast<std::size_t>(i)]];
      if (i < train_count) {
        s.y = label;
        out.d_l.samples.push_back(std::move(s));
      } else {
        s.y = kUnlabeled;
        out.d_u.samples.push_back(std::move(s));
        u_truth.push_back(label);
      }
    }
  }
  {
    auto [idx, label] = take_class(cfg.unknown_class, K + 1, stream++);
    // Only the test fraction of the unknown class enters the split; its
    // train fraction is discarded so per-class test counts stay equal.
    for (int i = train_count; i < cfg.per_class; ++i) {
      Sample s = pool[idx[static_cast<std::size_t>(i)]];
      s.y = kUnlabeled;
      out.d_u.samples.push_back(std::move(s));
      u_truth.push_back(label);
    }
  }

  // Deterministic shuffle of the test set so class blocks are interleaved.
  std::vector<std::size_t> order(out.d_u.samples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(cfg.seed, 0x7e57));
  rng.shuffle(order);
  Dataset shuffled;
  shuffled.role = DatasetRole::Unlabeled;
  shuffled.known_classes = K;
  out.truth.resize(order.size());
  shuffled.samples.reserve(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    shuffled.samples.push_back(std::move(out.d_u.samples[order[i]]));
    out.truth[i] = u_truth[order[i]];
  }
  out.d_u = std::move(shuffled);
  return out;
}

Normalizer fit_normalizer(const Dataset& d_l) {
  if (d_l.empty()) throw std::invalid_argument("fit_normalizer: empty dataset");
  const Eigen::MatrixXd X = d_l.matrix();
  Normalizer n;
  n.mean = X.colwise().mean().transpose();
  const Eigen::MatrixXd centered = X.rowwise() - n.mean.transpose();
  // Population standard deviation; zero-variance columns pass through.
  Eigen::VectorXd var = centered.array().square().colwise().mean().transpose();
  n.stddev = var.array().sqrt();
  for (long j = 0; j < n.stddev.size(); ++j) {
    if (n.stddev[j] <= 0.0) n.stddev[j] = 1.0;
  }
  return n;
}

Dataset apply_normalizer(const Normalizer& norm, const Dataset& data) {
  Dataset out = data;
  for (auto& s : out.samples) {
    s.x = (s.x - norm.mean).cwiseQuotient(norm.stddev);
  }
  return out;
}

std::vector<Sample> generate_synthetic(const SyntheticSpec& spec) {
  if (spec.means.size() < 2) throw std::invalid_argument("synthetic spec needs >= 2 classes");
  if (!(spec.cov_scale >= 0.0)) throw std::invalid_argument("covariance scale must be >= 0");
  if (spec.per_class <= 0) throw std::invalid_argument("per_class must be positive");
  const long dim = spec.means.front().size();
  for (std::size_t i = 0; i < spec.means.size(); ++i) {
    if (spec.means[i].size() != dim) throw std::invalid_argument("mean dimensions differ");
    for (std::size_t j = i + 1; j < spec.means.size(); ++j) {
      if (spec.means[i] == spec.means[j]) {
        throw std::invalid_argument("class means must be pairwise distinct");
      }
    }
  }

  Rng rng(mix_seed(spec.seed, 0x5f0));
  std::vector<Sample> out;
  out.reserve(spec.means.size() * static_cast<std::size_t>(spec.per_class));
  long id = 0;
  for (std::size_t c = 0; c < spec.means.size(); ++c) {
    for (int i = 0; i < spec.per_class; ++i) {
      Sample s;
      s.x = spec.means[c];
      for (long d = 0; d < dim; ++d) s.x[d] += spec.cov_scale * rng.normal();
      s.y = static_cast<int>(c) + 1;
      s.id = id++;
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<Eigen::VectorXd> axis_means(int classes, int dim, double separation) {
  if (classes > dim) throw std::invalid_argument("axis_means requires dim >= classes");
  std::vector<Eigen::VectorXd> means;
  means.reserve(static_cast<std::size_t>(classes));
  for (int c = 0; c < classes; ++c) {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(dim);
    m[c] = separation;
    means.push_back(std::move(m));
  }
  return means;
}

}  // namespace sofd

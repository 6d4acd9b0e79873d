#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sofd/config.hpp"
#include "sofd/dataio.hpp"
#include "sofd/eval.hpp"
#include "sofd/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;     // input or config errors
constexpr int kExitPipeline = 3;  // pipeline stage failures

sofd::RunConfig resolve_config(const std::string& config_path,
                               const std::vector<std::string>& overrides) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  if (!config_path.empty()) j = sofd::load_config_file(config_path);
  for (const auto& o : overrides) sofd::apply_override(j, o);
  return sofd::parse_config(j);
}

std::vector<int> read_label_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open label file: " + path);
  std::vector<int> labels;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    const std::string cell = comma == std::string::npos ? line : line.substr(comma + 1);
    try {
      labels.push_back(std::stoi(cell));
    } catch (...) {
      if (first) {  // header row
        first = false;
        continue;
      }
      throw std::runtime_error("non-numeric label '" + cell + "' in " + path);
    }
    first = false;
  }
  return labels;
}

int cmd_ingest(const std::string& data_path, const std::string& config_path,
               const std::vector<std::string>& overrides, const std::string& out_dir) {
  const sofd::RunConfig cfg = resolve_config(config_path, overrides);
  sofd::CsvSchema schema = sofd::CsvSchema::defaults();
  if (!cfg.dataset.schema.empty()) schema = sofd::load_schema_file(cfg.dataset.schema);

  std::string path = data_path.empty() ? cfg.dataset.path : data_path;
  if (path.empty()) {
    if (const char* env = std::getenv("SOFD_DATA_DIR")) path = std::string(env) + "/data.csv";
  }
  if (path.empty()) throw std::runtime_error("no dataset path given (--data, config, or SOFD_DATA_DIR)");

  const auto labeled = sofd::label_conditions(sofd::load_raw(path, schema));
  if (labeled.empty()) throw std::runtime_error("dataset contains no data rows");

  fs::create_directories(out_dir);
  std::map<int, std::ofstream> files;
  std::map<int, std::map<std::string, long>> counts;
  for (const auto& [rec, cond] : labeled) {
    auto it = files.find(rec.speed_index);
    if (it == files.end()) {
      auto p = fs::path(out_dir) / ("speed_" + std::to_string(rec.speed_index) + ".csv");
      it = files.emplace(rec.speed_index, std::ofstream(p)).first;
      it->second << "condition,speed";
      for (const auto& name : schema.variable_cols) it->second << "," << name;
      it->second << "\n";
    }
    const Eigen::VectorXd x = sofd::select_variables(rec, schema);
    it->second << sofd::condition_name(cond) << "," << rec.speed_index;
    for (long i = 0; i < x.size(); ++i) it->second << "," << x[i];
    it->second << "\n";
    ++counts[rec.speed_index][sofd::condition_name(cond)];
  }

  for (const auto& [speed, by_cond] : counts) {
    std::cout << "speed " << speed << ":";
    for (const auto& [cond, n] : by_cond) std::cout << " " << cond << "=" << n;
    std::cout << "\n";
  }
  std::cout << "wrote " << files.size() << " per-speed files to " << out_dir << "\n";
  return kExitOk;
}

int cmd_synth(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& out_path) {
  const sofd::RunConfig cfg = resolve_config(config_path, overrides);
  sofd::SyntheticSpec spec;
  spec.per_class = cfg.synthetic.per_class;
  spec.cov_scale = cfg.synthetic.cov_scale;
  spec.seed = cfg.seed;
  if (!cfg.synthetic.means.empty()) {
    for (const auto& m : cfg.synthetic.means) {
      spec.means.push_back(Eigen::Map<const Eigen::VectorXd>(m.data(), static_cast<long>(m.size())));
    }
  } else {
    spec.means = sofd::axis_means(cfg.synthetic.classes, cfg.synthetic.dim, cfg.synthetic.separation);
  }
  const auto samples = sofd::generate_synthetic(spec);

  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  out << "class";
  for (long i = 0; i < samples.front().x.size(); ++i) out << ",x" << i;
  out << "\n";
  for (const auto& s : samples) {
    out << s.y;
    for (long i = 0; i < s.x.size(); ++i) out << "," << s.x[i];
    out << "\n";
  }
  std::cout << out_path << "\n";
  return kExitOk;
}

int cmd_run(const std::string& config_path, std::vector<std::string> overrides,
            const std::string& variant) {
  sofd::RunConfig cfg = resolve_config(config_path, overrides);
  const sofd::RunArtifacts art =
      variant.empty() ? sofd::run(cfg) : sofd::run_ablation(cfg, variant);
  std::cout << art.report_path << "\n";
  return kExitOk;
}

int cmd_evaluate(const std::string& pred_path, const std::string& truth_path,
                 const std::string& out_path) {
  const std::vector<int> pred = read_label_file(pred_path);
  const std::vector<int> truth = read_label_file(truth_path);
  if (pred.size() != truth.size()) {
    throw std::runtime_error("prediction and truth files differ in length (" +
                             std::to_string(pred.size()) + " vs " +
                             std::to_string(truth.size()) + ")");
  }
  if (pred.empty()) throw std::runtime_error("label files are empty");
  int classes = 0;
  for (int v : pred) classes = std::max(classes, v);
  for (int v : truth) classes = std::max(classes, v);

  const Eigen::MatrixXi confusion = sofd::confusion_matrix(truth, pred, classes);
  sofd::DiagnosisReport report = sofd::report_from_confusion(confusion, classes - 1);
  std::cout << "u_recall " << report.u_recall << "\n";
  std::cout << "acc " << report.acc << "\n";
  std::cout << "macro_f1 " << report.macro_f1 << "\n";
  for (const auto& f : report.flags) std::cerr << "flag: " << f << "\n";
  if (!out_path.empty()) sofd::write_report(report, out_path);
  return kExitOk;
}

int cmd_report(const std::string& report_path, const std::string& long_csv) {
  const sofd::DiagnosisReport report = sofd::read_report(report_path);
  std::cout << "seed " << report.seed << "\n";
  std::cout << "config_hash " << report.config_hash << "\n";
  std::cout << "u_recall " << report.u_recall << "\n";
  std::cout << "acc " << report.acc << "\n";
  std::cout << "macro_f1 " << report.macro_f1 << "\n";
  std::cout << "d_p " << report.d_p_size << " d_s " << report.d_s_size << "\n";
  for (const auto& f : report.flags) std::cout << "flag: " << f << "\n";
  if (!long_csv.empty()) sofd::write_metrics_long_csv(report, long_csv);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sofd: open-set fault diagnosis pipeline for sensor graphs"};
  app.require_subcommand(1);
  app.footer(sofd::describe_config_keys());

  std::string config_path, data_path, out_dir = "ingested", out_path;
  std::string pred_path, truth_path, report_path, long_csv, variant;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> speed;

  auto* ingest = app.add_subcommand("ingest", "label, select, and partition the raw CSV by speed");
  ingest->add_option("--data", data_path, "raw benchmark CSV");
  ingest->add_option("--config", config_path, "config JSON");
  ingest->add_option("--out", out_dir, "output directory")->capture_default_str();
  ingest->add_option("--set", overrides, "dotted config override key=value");

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset CSV");
  synth->add_option("--config", config_path, "config JSON");
  synth->add_option("--out", out_path, "output CSV path")->required();
  synth->add_option("--set", overrides, "dotted config override key=value");

  auto* runc = app.add_subcommand("run", "run the full pipeline");
  runc->add_option("--config", config_path, "config JSON");
  runc->add_option("--seed", seed, "override the master seed");
  runc->add_option("--speed", speed, "override the dataset speed index");
  runc->add_option("--out", out_path, "override the output directory");
  runc->add_option("--set", overrides, "dotted config override key=value");

  auto* ablate = app.add_subcommand("ablate", "run one ablation variant");
  ablate->add_option("--config", config_path, "config JSON");
  ablate->add_option("--variant", variant, "no_fusion | no_consistency | raw_feature_space")
      ->required();
  ablate->add_option("--seed", seed, "override the master seed");
  ablate->add_option("--speed", speed, "override the dataset speed index");
  ablate->add_option("--out", out_path, "override the output directory");
  ablate->add_option("--set", overrides, "dotted config override key=value");

  auto* eval = app.add_subcommand("evaluate", "score a prediction file against ground truth");
  eval->add_option("--pred", pred_path, "predictions (id,label or one label per line)")->required();
  eval->add_option("--truth", truth_path, "ground truth, aligned with --pred")->required();
  eval->add_option("--out", out_path, "also write a report JSON here");

  auto* rep = app.add_subcommand("report", "print a report JSON as metric lines");
  rep->add_option("--report", report_path, "report.json path")->required();
  rep->add_option("--long-csv", long_csv, "also write long-format metrics CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitInput;
  }

  if (seed) overrides.push_back("seed=" + std::to_string(*seed));
  if (speed) overrides.push_back("dataset.speed=" + std::to_string(*speed));
  if (!out_path.empty() && (runc->parsed() || ablate->parsed())) {
    overrides.push_back("output_dir=" + out_path);
  }

  try {
    if (ingest->parsed()) return cmd_ingest(data_path, config_path, overrides, out_dir);
    if (synth->parsed()) return cmd_synth(config_path, overrides, out_path);
    if (runc->parsed()) return cmd_run(config_path, overrides, "");
    if (ablate->parsed()) return cmd_run(config_path, overrides, variant);
    if (eval->parsed()) return cmd_evaluate(pred_path, truth_path, out_path);
    if (rep->parsed()) return cmd_report(report_path, long_csv);
  } catch (const sofd::PipelineError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPipeline;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}

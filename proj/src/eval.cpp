#include "sofd/eval.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace sofd {

Eigen::MatrixXi confusion_matrix(const std::vector<int>& y_true,
                                 const std::vector<int>& y_pred, int class_count) {
  if (y_true.size() != y_pred.size()) {
    throw std::invalid_argument("confusion_matrix: label vectors differ in length");
  }
  if (class_count < 1) throw std::invalid_argument("confusion_matrix: no classes");
  Eigen::MatrixXi c = Eigen::MatrixXi::Zero(class_count, class_count);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i];
    const int p = y_pred[i];
    if (t < 1 || t > class_count || p < 1 || p > class_count) {
      throw std::out_of_range("confusion_matrix: label outside 1.." +
                              std::to_string(class_count) + " at row " +
                              std::to_string(i));
    }
    c(t - 1, p - 1) += 1;
  }
  return c;
}

double u_recall(const Eigen::MatrixXi& confusion) {
  const long u = confusion.rows() - 1;
  const long total = confusion.row(u).sum();
  if (total == 0) return 0.0;
  return static_cast<double>(confusion(u, u)) / static_cast<double>(total);
}

double known_acc(const Eigen::MatrixXi& confusion) {
  const long k = confusion.rows() - 1;
  long correct = 0;
  long total = 0;
  for (long i = 0; i < k; ++i) {
    correct += confusion(i, i);
    total += confusion.row(i).sum();
  }
  if (total == 0) return 0.0;
  return static_cast<double>(correct) / static_cast<double>(total);
}

double macro_f1(const Eigen::MatrixXi& confusion) {
  const long classes = confusion.rows();
  double sum = 0.0;
  for (long k = 0; k < classes; ++k) {
    const long tp = confusion(k, k);
    const long row = confusion.row(k).sum();
    const long col = confusion.col(k).sum();
    const double recall = row > 0 ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
    const double precision = col > 0 ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
    const double f1 =
        (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    sum += f1;
  }
  return sum / static_cast<double>(classes);
}

DiagnosisReport report_from_confusion(const Eigen::MatrixXi& confusion, int known_classes) {
  DiagnosisReport r;
  r.confusion = confusion;
  r.known_classes = known_classes;
  r.u_recall = u_recall(confusion);
  r.acc = known_acc(confusion);
  r.macro_f1 = macro_f1(confusion);
  r.d_u_size = confusion.sum();
  const long u = confusion.rows() - 1;
  if (confusion.row(u).sum() == 0) r.flags.push_back("no_unknown_samples_in_truth");
  if (confusion.topRows(u).sum() == 0) r.flags.push_back("no_known_samples_in_truth");
  return r;
}

namespace {

nlohmann::ordered_json report_to_json(const DiagnosisReport& r) {
  nlohmann::ordered_json j;
  j["schema"] = "sofd-report-v1";
  j["seed"] = r.seed;
  j["config_hash"] = r.config_hash;
  j["speed"] = r.speed;
  j["variant"] = r.variant;
  j["known_classes"] = r.known_classes;
  nlohmann::ordered_json metrics;
  metrics["u_recall"] = r.u_recall;
  metrics["acc"] = r.acc;
  metrics["macro_f1"] = r.macro_f1;
  j["metrics"] = metrics;
  std::vector<std::vector<int>> conf;
  for (long i = 0; i < r.confusion.rows(); ++i) {
    std::vector<int> row;
    for (long jj = 0; jj < r.confusion.cols(); ++jj) row.push_back(r.confusion(i, jj));
    conf.push_back(std::move(row));
  }
  j["confusion"] = conf;
  nlohmann::ordered_json subset;
  subset["d_u"] = r.d_u_size;
  subset["d_p"] = r.d_p_size;
  subset["d_s"] = r.d_s_size;
  j["subset"] = subset;
  j["flags"] = r.flags;
  return j;
}

}  // namespace

void write_report(const DiagnosisReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  out << report_to_json(report).dump(2) << "\n";
  if (!out) throw std::runtime_error("failed writing report: " + path);

  if (!report.timings.empty()) {
    std::ofstream t(path + ".timings.csv");
    if (!t) throw std::runtime_error("cannot write timings next to " + path);
    t << "stage,seconds\n";
    for (const auto& [stage, secs] : report.timings) t << stage << "," << secs << "\n";
  }
}

DiagnosisReport read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report: " + path);
  nlohmann::json j;
  in >> j;
  DiagnosisReport r;
  r.seed = j.at("seed").get<std::uint64_t>();
  r.config_hash = j.at("config_hash").get<std::string>();
  r.speed = j.at("speed").get<int>();
  r.variant = j.value("variant", "");
  r.known_classes = j.at("known_classes").get<int>();
  r.u_recall = j.at("metrics").at("u_recall").get<double>();
  r.acc = j.at("metrics").at("acc").get<double>();
  r.macro_f1 = j.at("metrics").at("macro_f1").get<double>();
  const auto conf = j.at("confusion");
  const long n = static_cast<long>(conf.size());
  r.confusion = Eigen::MatrixXi::Zero(n, n);
  for (long i = 0; i < n; ++i) {
    for (long jj = 0; jj < n; ++jj) {
      r.confusion(i, jj) = conf.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(jj)).get<int>();
    }
  }
  r.d_u_size = j.at("subset").at("d_u").get<long>();
  r.d_p_size = j.at("subset").at("d_p").get<long>();
  r.d_s_size = j.at("subset").at("d_s").get<long>();
  for (const auto& f : j.at("flags")) r.flags.push_back(f.get<std::string>());
  return r;
}

void write_confusion_csv(const Eigen::MatrixXi& confusion, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write confusion csv: " + path);
  for (long i = 0; i < confusion.rows(); ++i) {
    for (long j = 0; j < confusion.cols(); ++j) {
      out << confusion(i, j) << (j + 1 == confusion.cols() ? "\n" : ",");
    }
  }
}

void write_metrics_long_csv(const DiagnosisReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write metrics csv: " + path);
  out << "metric,speed,value\n";
  out << "u_recall," << report.speed << "," << report.u_recall << "\n";
  out << "acc," << report.speed << "," << report.acc << "\n";
  out << "macro_f1," << report.speed << "," << report.macro_f1 << "\n";
}

}  // namespace sofd

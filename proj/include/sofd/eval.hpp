#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace sofd {

/// (i,j) = count of true class i predicted as class j; labels are 1-based
/// and must fall in 1..class_count.
Eigen::MatrixXi confusion_matrix(const std::vector<int>& y_true,
                                 const std::vector<int>& y_pred, int class_count);

/// Recall of the last (unknown) class; 0 when its row is empty.
double u_recall(const Eigen::MatrixXi& confusion);

/// Accuracy over true-known rows only; predicting K+1 for a known sample
/// counts as an error. 0 when no known rows exist.
double known_acc(const Eigen::MatrixXi& confusion);

/// Unweighted mean F1 over all classes including the unknown one; a class
/// with undefined precision or recall contributes 0.
double macro_f1(const Eigen::MatrixXi& confusion);

struct DiagnosisReport {
  double u_recall = 0.0;
  double acc = 0.0;
  double macro_f1 = 0.0;
  Eigen::MatrixXi confusion;  // (K+1) x (K+1)
  int known_classes = 0;      // K
  long d_u_size = 0;
  long d_p_size = 0;
  long d_s_size = 0;
  std::string config_hash;
  std::uint64_t seed = 0;
  int speed = 0;
  std::string variant;                     // "" for the full pipeline
  std::vector<std::string> flags;          // degenerate-condition markers
  std::map<std::string, double> timings;   // seconds per stage; sidecar only
};

DiagnosisReport report_from_confusion(const Eigen::MatrixXi& confusion, int known_classes);

/// Fixed-key-order JSON. Two writes of the same report are byte-identical;
/// stage timings go to a sidecar next to the report so rewriting a run with
/// the same config and seed reproduces the report file exactly.
void write_report(const DiagnosisReport& report, const std::string& path);
DiagnosisReport read_report(const std::string& path);

void write_confusion_csv(const Eigen::MatrixXi& confusion, const std::string& path);

/// Long-format (metric, speed, value) rows for external plotting.
void write_metrics_long_csv(const DiagnosisReport& report, const std::string& path);

}  // namespace sofd

#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

namespace sofd {

// Label conventions: 1..K are the known classes of the current split, K+1 is
// the unknown/pseudo class, 0 marks an unlabeled sample.
constexpr int kUnlabeled = 0;

struct Sample {
  Eigen::VectorXd x;
  int y = kUnlabeled;
  int speed_index = 0;
  long id = -1;  // stable identity across subsets
};

enum class DatasetRole { Labeled, Unlabeled, Pseudo, Reliable };

struct Dataset {
  std::vector<Sample> samples;
  DatasetRole role = DatasetRole::Labeled;
  int known_classes = 0;  // K

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  int dim() const { return samples.empty() ? 0 : static_cast<int>(samples.front().x.size()); }

  Eigen::MatrixXd matrix() const {
    Eigen::MatrixXd out(static_cast<long>(samples.size()), dim());
    for (long i = 0; i < out.rows(); ++i) out.row(i) = samples[i].x.transpose();
    return out;
  }

  std::vector<int> labels() const {
    std::vector<int> out(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) out[i] = samples[i].y;
    return out;
  }

  std::map<int, int> class_counts() const {
    std::map<int, int> counts;
    for (const auto& s : samples) ++counts[s.y];
    return counts;
  }
};

}  // namespace sofd

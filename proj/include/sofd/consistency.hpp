#pragma once

#include <Eigen/Dense>
#include <vector>

namespace sofd {

struct ConsistencyConfig {
  int neighbors = 6;  // C
};

/// Exact C-nearest-neighbor search over the pool rows by Euclidean distance.
/// The query is a pool member and is excluded from its own neighbor list;
/// distance ties resolve toward the lower pool index.
std::vector<int> knn(const Eigen::MatrixXd& pool, int query_row, int neighbors);

/// Keeps the pseudo-labeled samples whose neighborhoods agree: a candidate
/// survives iff strictly more than C/2 of its C nearest pool neighbors are
/// themselves pseudo-labeled. Returns indices into the pool (a subset of
/// pseudo_set). agreement_out, when given, receives n_p per candidate.
std::vector<int> consistent_filter(const std::vector<int>& pseudo_set,
                                   const Eigen::MatrixXd& pool_features,
                                   const ConsistencyConfig& cfg,
                                   std::vector<int>* agreement_out = nullptr);

}  // namespace sofd

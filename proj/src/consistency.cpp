#include "sofd/consistency.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace sofd {

std::vector<int> knn(const Eigen::MatrixXd& pool, int query_row, int neighbors) {
  const long n = pool.rows();
  if (neighbors < 1) throw std::invalid_argument("knn: neighbor count must be >= 1");
  if (n < neighbors + 1) {
    throw std::invalid_argument("knn: pool of " + std::to_string(n) +
                                " cannot supply " + std::to_string(neighbors) +
                                " neighbors");
  }
  if (query_row < 0 || query_row >= n) throw std::out_of_range("knn: query outside pool");

  std::vector<std::pair<double, int>> dist;
  dist.reserve(static_cast<std::size_t>(n - 1));
  for (long i = 0; i < n; ++i) {
    if (i == query_row) continue;
    dist.emplace_back((pool.row(i) - pool.row(query_row)).squaredNorm(),
                      static_cast<int>(i));
  }
  // (distance, index) order makes ties at rank C deterministic.
  std::partial_sort(dist.begin(), dist.begin() + neighbors, dist.end());
  std::vector<int> out(static_cast<std::size_t>(neighbors));
  for (int i = 0; i < neighbors; ++i) out[static_cast<std::size_t>(i)] = dist[static_cast<std::size_t>(i)].second;
  return out;
}

std::vector<int> consistent_filter(const std::vector<int>& pseudo_set,
                                   const Eigen::MatrixXd& pool_features,
                                   const ConsistencyConfig& cfg,
                                   std::vector<int>* agreement_out) {
  if (agreement_out) agreement_out->clear();
  if (pseudo_set.empty()) return {};
  const std::unordered_set<int> pseudo(pseudo_set.begin(), pseudo_set.end());

  std::vector<int> reliable;
  for (int idx : pseudo_set) {
    const std::vector<int> nbrs = knn(pool_features, idx, cfg.neighbors);
    int n_p = 0;
    for (int nb : nbrs) n_p += pseudo.count(nb) ? 1 : 0;
    if (agreement_out) agreement_out->push_back(n_p);
    // Strict majority of the C neighbors must carry the pseudo label.
    if (2 * n_p > cfg.neighbors) reliable.push_back(idx);
  }
  return reliable;
}

}  // namespace sofd

#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace sofd {

// Weighted sensor graph built from training columns. W is symmetric with a
// zero diagonal; every surviving weight lies in [epsilon, 1].
struct SensorGraph {
  int m = 0;
  Eigen::MatrixXd W;
  Eigen::MatrixXi A;          // a_ij = 1 iff w_ij > 0
  Eigen::MatrixXd distances;  // cached d_ij
  double sigma2 = 10.0;
  double epsilon = 0.5;
};

struct LaplacianBundle {
  Eigen::MatrixXd L;
  double lambda_max = 0.0;
  Eigen::MatrixXd L_tilde;
};

/// Column-wise Euclidean distances of an n x m training matrix.
Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& train);

/// Gaussian kernel weights, threshold inclusive: values >= epsilon survive.
SensorGraph gaussian_weights(const Eigen::MatrixXd& distances, double sigma2,
                             double epsilon);

/// L = I - D^{-1/2} S D^{-1/2} with S = W (use_weights) or the boolean A.
/// Zero-degree nodes contribute identity rows.
Eigen::MatrixXd normalized_laplacian(const SensorGraph& graph, bool use_weights);

/// Largest eigenvalue by shifted power iteration from a fixed start vector.
/// Throws after the iteration cap instead of falling back silently.
double max_eigenvalue(const Eigen::MatrixXd& L);

Eigen::MatrixXd rescale_laplacian(const Eigen::MatrixXd& L, double lambda_max);

LaplacianBundle build_laplacian(const SensorGraph& graph, bool use_weights);

/// Chebyshev polynomial T_k(L_tilde), materialized on demand (tests, oracles).
Eigen::MatrixXd cheb_matrix(const Eigen::MatrixXd& l_tilde, int k);

/// Truncated Chebyshev filter sum_k T_k(L_tilde) X Theta_k. The polynomial
/// order is theta.size(); T_k X is formed by the three-term recurrence on
/// signals, never on matrices.
Eigen::MatrixXd cheb_conv(const Eigen::MatrixXd& l_tilde, const Eigen::MatrixXd& x,
                          const std::vector<Eigen::MatrixXd>& theta);

/// Edge-list export: "m <count>" line then "i j w" per surviving edge.
void save_edge_list(const SensorGraph& graph, const std::string& path);

}  // namespace sofd

#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "sofd/nnet.hpp"

namespace sofd {

struct RejectionConfig {
  double alpha = 0.01;       // upper-tail significance of the F quantile
  double lambda_reg = 1e-6;  // covariance ridge, scaled by trace/d
  std::vector<int> fused_layers;   // fc-layer indices; empty = all
  std::vector<double> priors;      // per-class P(F_k); empty = uniform
  // The printed forms of the boundary rule and of the F degrees of freedom
  // are kept available for comparison; defaults use the algebraically
  // consistent variants (see README).
  bool literal_boundary = false;  // boundary +L/2 + tau instead of -L/2 + tau
  bool literal_fdist = false;     // F(n, n-d) instead of F(d, n-d)
};

struct FusedFeature {
  Eigen::VectorXd z;
  std::vector<int> widths;  // layer widths in concatenation order
};

struct FusedBatch {
  Eigen::MatrixXd z;        // batch x d
  std::vector<int> widths;
};

/// Concatenates the selected fc-layer outputs along the feature dimension,
/// network depth order. Empty selection is an error.
FusedBatch fuse(const ForwardTrace& trace, const std::vector<int>& selection);

struct ClassGaussian {
  int class_id = 0;
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd sigma_inverse;
  double log_det = 0.0;
  double prior = 0.0;
  int n = 0;
  double tau = 0.0;            // ln(P |Sigma|^{-1/2})
  double control_limit = 0.0;  // L for the quadratic statistic
};

/// Upper-alpha control limit d(n^2-1)/(n(n-d)) * F_alpha(d, n-d).
/// Requires n > d. literal_dfs switches to the printed F(n, n-d) form.
double control_limit(int d, int n, double alpha, bool literal_dfs = false);

/// Per-class Gaussians over the fused space: mean, ridge-regularized
/// covariance (Cholesky inverse + log-determinant), uniform priors, and the
/// statistical control limit. Labels are 1-based; every class needs at least
/// two samples and n > d.
std::vector<ClassGaussian> fit_class_gaussians(const Eigen::MatrixXd& features,
                                               const std::vector<int>& labels,
                                               int class_count,
                                               const RejectionConfig& cfg);

/// Quadratic discriminant value g = -1/2 (z-mu)' Sigma^{-1} (z-mu)
/// + ln P - 1/2 ln|Sigma|.
double discriminant_g(const Eigen::VectorXd& z, const ClassGaussian& cls);

struct DiscriminantResult {
  Eigen::VectorXd g;        // per-class discriminant values
  int winner = 0;           // 0-based index of argmax g
  double score = 0.0;       // softmax share of the winner
  double threshold = 0.0;   // zeta at the winner's statistical boundary
  bool excluded = false;    // score < threshold
};

/// Argmax classification with the winner's softmax share, computed in
/// log-sum-exp form. Ties resolve toward the lowest class index.
DiscriminantResult classify(const Eigen::VectorXd& z,
                            const std::vector<ClassGaussian>& classes);

/// Statistical threshold zeta = 1 / sum_j exp(g_j - g_boundary) where
/// g_boundary = -L/2 + tau of the winner (+L/2 with literal_boundary).
double rejection_threshold(const Eigen::VectorXd& g, const ClassGaussian& winner,
                           bool literal_boundary = false);

/// classify() plus threshold and exclusion flag.
DiscriminantResult score_sample(const Eigen::VectorXd& z,
                                const std::vector<ClassGaussian>& classes,
                                const RejectionConfig& cfg);

/// Indices of the excluded test samples (candidate pseudo-label set).
std::vector<int> build_pseudo_set(const Eigen::MatrixXd& test_features,
                                  const std::vector<ClassGaussian>& classes,
                                  const RejectionConfig& cfg);

}  // namespace sofd

#include "sofd/openset.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sofd/fdist.hpp"

namespace sofd {

FusedBatch fuse(const ForwardTrace& trace, const std::vector<int>& selection) {
  if (selection.empty()) throw std::invalid_argument("fuse: empty layer selection");
  long d = 0;
  for (int l : selection) {
    if (l < 0 || l >= static_cast<int>(trace.fc_act.size())) {
      throw std::out_of_range("fuse: layer index " + std::to_string(l) +
                              " outside the trace");
    }
    d += trace.fc_act[static_cast<std::size_t>(l)].cols();
  }
  FusedBatch out;
  const long b = trace.fc_act.front().rows();
  out.z.resize(b, d);
  long off = 0;
  for (int l : selection) {
    const auto& layer = trace.fc_act[static_cast<std::size_t>(l)];
    out.z.middleCols(off, layer.cols()) = layer;
    out.widths.push_back(static_cast<int>(layer.cols()));
    off += layer.cols();
  }
  return out;
}

double control_limit(int d, int n, double alpha, bool literal_dfs) {
  if (d < 1) throw std::invalid_argument("control_limit: d must be >= 1");
  if (n <= d) {
    throw std::invalid_argument("control_limit: requires n > d, got n=" +
                                std::to_string(n) + ", d=" + std::to_string(d));
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("control_limit: alpha must be in (0,1)");
  }
  const double nd = static_cast<double>(n);
  const double dd = static_cast<double>(d);
  const double mult = dd * (nd * nd - 1.0) / (nd * (nd - dd));
  const double q = literal_dfs ? f_upper_quantile(nd, nd - dd, alpha)
                               : f_upper_quantile(dd, nd - dd, alpha);
  return mult * q;
}

std::vector<ClassGaussian> fit_class_gaussians(const Eigen::MatrixXd& features,
                                               const std::vector<int>& labels,
                                               int class_count,
                                               const RejectionConfig& cfg) {
  if (static_cast<long>(labels.size()) != features.rows()) {
    throw std::invalid_argument("fit_class_gaussians: label count mismatch");
  }
  if (class_count < 1) throw std::invalid_argument("fit_class_gaussians: no classes");
  if (cfg.lambda_reg < 0.0) throw std::invalid_argument("lambda_reg must be >= 0");

  std::vector<double> priors(static_cast<std::size_t>(class_count),
                             1.0 / static_cast<double>(class_count));
  if (!cfg.priors.empty()) {
    if (static_cast<int>(cfg.priors.size()) != class_count) {
      throw std::invalid_argument("priors list must have one entry per known class");
    }
    double sum = 0.0;
    for (double p : cfg.priors) {
      if (!(p > 0.0)) throw std::invalid_argument("priors must be positive");
      sum += p;
    }
    for (int k = 0; k < class_count; ++k) priors[static_cast<std::size_t>(k)] = cfg.priors[static_cast<std::size_t>(k)] / sum;
  }

  const long d = features.cols();
  std::vector<ClassGaussian> out;
  out.reserve(static_cast<std::size_t>(class_count));
  for (int k = 1; k <= class_count; ++k) {
    std::vector<long> rows;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == k) rows.push_back(static_cast<long>(i));
    }
    const long n_k = static_cast<long>(rows.size());
    if (n_k < 2) {
      throw std::runtime_error("class " + std::to_string(k) +
                               " has fewer than 2 samples");
    }
    ClassGaussian cls;
    cls.class_id = k;
    cls.n = static_cast<int>(n_k);
    cls.prior = priors[static_cast<std::size_t>(k - 1)];

    Eigen::MatrixXd x(n_k, d);
    for (long i = 0; i < n_k; ++i) x.row(i) = features.row(rows[static_cast<std::size_t>(i)]);
    cls.mu = x.colwise().mean().transpose();
    const Eigen::MatrixXd centered = x.rowwise() - cls.mu.transpose();
    cls.sigma = centered.transpose() * centered / static_cast<double>(n_k - 1);
    cls.sigma = 0.5 * (cls.sigma + cls.sigma.transpose()).eval();
    const double ridge = cfg.lambda_reg * cls.sigma.trace() / static_cast<double>(d);
    cls.sigma += ridge * Eigen::MatrixXd::Identity(d, d);

    Eigen::LLT<Eigen::MatrixXd> llt(cls.sigma);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("covariance of class " + std::to_string(k) +
                               " is singular after regularization");
    }
    cls.sigma_inverse = llt.solve(Eigen::MatrixXd::Identity(d, d));
    cls.log_det = 0.0;
    const Eigen::MatrixXd l_factor = llt.matrixL();
    for (long i = 0; i < d; ++i) cls.log_det += 2.0 * std::log(l_factor(i, i));
    if (!std::isfinite(cls.log_det)) {
      throw std::runtime_error("covariance of class " + std::to_string(k) +
                               " has a non-finite log-determinant");
    }
    cls.tau = std::log(cls.prior) - 0.5 * cls.log_det;
    // The statistical boundary needs n > d; the Gaussian itself does not.
    cls.control_limit =
        cls.n > d
            ? control_limit(static_cast<int>(d), cls.n, cfg.alpha, cfg.literal_fdist)
            : std::numeric_limits<double>::quiet_NaN();
    out.push_back(std::move(cls));
  }
  return out;
}

double discriminant_g(const Eigen::VectorXd& z, const ClassGaussian& cls) {
  if (z.size() != cls.mu.size()) {
    throw std::invalid_argument("discriminant_g: dimension mismatch");
  }
  const Eigen::VectorXd diff = z - cls.mu;
  const double quad = diff.dot(cls.sigma_inverse * diff);
  return -0.5 * quad + std::log(cls.prior) - 0.5 * cls.log_det;
}

DiscriminantResult classify(const Eigen::VectorXd& z,
                            const std::vector<ClassGaussian>& classes) {
  if (classes.empty()) throw std::invalid_argument("classify: no classes fitted");
  DiscriminantResult r;
  r.g.resize(static_cast<long>(classes.size()));
  for (std::size_t k = 0; k < classes.size(); ++k) {
    r.g[static_cast<long>(k)] = discriminant_g(z, classes[k]);
  }
  r.winner = 0;
  for (long k = 1; k < r.g.size(); ++k) {
    if (r.g[k] > r.g[r.winner]) r.winner = static_cast<int>(k);
  }
  // s = 1 / sum_j exp(g_j - g_winner); the winner shift keeps every exponent
  // non-positive.
  double denom = 0.0;
  for (long k = 0; k < r.g.size(); ++k) denom += std::exp(r.g[k] - r.g[r.winner]);
  r.score = 1.0 / denom;
  return r;
}

double rejection_threshold(const Eigen::VectorXd& g, const ClassGaussian& winner,
                           bool literal_boundary) {
  if (!std::isfinite(winner.control_limit)) {
    throw std::runtime_error("class " + std::to_string(winner.class_id) +
                             " has no control limit (needs more samples than "
                             "fused dimensions)");
  }
  const double g_boundary = (literal_boundary ? 0.5 : -0.5) * winner.control_limit +
                            winner.tau;
  // zeta = 1 / sum_j exp(g_j - g_boundary), evaluated against the max of g so
  // the shared softmax factor cancels exactly in the s < zeta comparison.
  long winner_idx = 0;
  for (long k = 1; k < g.size(); ++k) {
    if (g[k] > g[winner_idx]) winner_idx = k;
  }
  double denom = 0.0;
  for (long k = 0; k < g.size(); ++k) denom += std::exp(g[k] - g[winner_idx]);
  return std::exp(g_boundary - g[winner_idx]) / denom;
}

DiscriminantResult score_sample(const Eigen::VectorXd& z,
                                const std::vector<ClassGaussian>& classes,
                                const RejectionConfig& cfg) {
  DiscriminantResult r = classify(z, classes);
  r.threshold = rejection_threshold(r.g, classes[static_cast<std::size_t>(r.winner)],
                                    cfg.literal_boundary);
  r.excluded = r.score < r.threshold;
  return r;
}

std::vector<int> build_pseudo_set(const Eigen::MatrixXd& test_features,
                                  const std::vector<ClassGaussian>& classes,
                                  const RejectionConfig& cfg) {
  std::vector<int> pseudo;
  for (long i = 0; i < test_features.rows(); ++i) {
    const DiscriminantResult r =
        score_sample(test_features.row(i).transpose(), classes, cfg);
    if (r.excluded) pseudo.push_back(static_cast<int>(i));
  }
  return pseudo;
}

}  // namespace sofd

#include "sofd/graph.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "sofd/rng.hpp"

namespace sofd {

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& train) {
  if (train.rows() < 2) {
    throw std::invalid_argument("pairwise_distances: need at least 2 rows");
  }
  const long m = train.cols();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m, m);
  for (long i = 0; i < m; ++i) {
    for (long j = i + 1; j < m; ++j) {
      const double dist = (train.col(i) - train.col(j)).norm();
      d(i, j) = dist;
      d(j, i) = dist;
    }
  }
  return d;
}

SensorGraph gaussian_weights(const Eigen::MatrixXd& distances, double sigma2,
                             double epsilon) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw std::invalid_argument("epsilon must lie in [0,1]");
  }
  SensorGraph g;
  g.m = static_cast<int>(distances.rows());
  g.sigma2 = sigma2;
  g.epsilon = epsilon;
  g.distances = distances;
  g.W = Eigen::MatrixXd::Zero(g.m, g.m);
  g.A = Eigen::MatrixXi::Zero(g.m, g.m);
  for (int i = 0; i < g.m; ++i) {
    for (int j = 0; j < g.m; ++j) {
      if (i == j) continue;
      const double w = std::exp(-distances(i, j) * distances(i, j) / sigma2);
      if (w >= epsilon) {
        g.W(i, j) = w;
        g.A(i, j) = 1;
      }
    }
  }
  return g;
}

Eigen::MatrixXd normalized_laplacian(const SensorGraph& graph, bool use_weights) {
  const int m = graph.m;
  Eigen::MatrixXd s(m, m);
  if (use_weights) {
    s = graph.W;
  } else {
    s = graph.A.cast<double>();
  }
  Eigen::VectorXd inv_sqrt_deg(m);
  for (int i = 0; i < m; ++i) {
    const double deg = s.row(i).sum();
    inv_sqrt_deg[i] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;  // isolated node
  }
  Eigen::MatrixXd l = Eigen::MatrixXd::Identity(m, m);
  l -= inv_sqrt_deg.asDiagonal() * s * inv_sqrt_deg.asDiagonal();
  // Exact symmetry despite rounding in the triple product.
  l = 0.5 * (l + l.transpose()).eval();
  return l;
}

double max_eigenvalue(const Eigen::MatrixXd& L) {
  if (L.rows() != L.cols()) throw std::invalid_argument("max_eigenvalue: matrix not square");
  const long m = L.rows();
  if (m == 1) return L(0, 0);

  // Gershgorin shift keeps the iteration on the top of the spectrum even if
  // L has negative eigenvalues larger in magnitude.
  double shift = 0.0;
  for (long i = 0; i < m; ++i) shift = std::max(shift, L.row(i).cwiseAbs().sum());
  const Eigen::MatrixXd shifted = L + shift * Eigen::MatrixXd::Identity(m, m);

  // Fixed pseudo-random start vector; a structured start such as all-ones can
  // be exactly orthogonal to the top eigenvector.
  Rng rng(0x5eedULL);
  Eigen::VectorXd v(m);
  for (long i = 0; i < m; ++i) v[i] = rng.uniform(0.5, 1.5);
  v.normalize();

  double lambda = 0.0;
  for (int it = 0; it < 10000; ++it) {
    Eigen::VectorXd w = shifted * v;
    const double norm = w.norm();
    if (norm == 0.0) return -shift;  // shifted operator annihilates v
    w /= norm;
    const double next = w.dot(shifted * w);
    const double step = std::fabs(next - lambda);
    v = std::move(w);
    lambda = next;
    if (it > 0 && step <= 1e-10) return lambda - shift;
  }
  throw std::runtime_error("max_eigenvalue: power iteration did not converge");
}

Eigen::MatrixXd rescale_laplacian(const Eigen::MatrixXd& L, double lambda_max) {
  if (!(lambda_max > 0.0)) {
    throw std::invalid_argument("rescale_laplacian: lambda_max must be positive");
  }
  return (2.0 / lambda_max) * L - Eigen::MatrixXd::Identity(L.rows(), L.cols());
}

LaplacianBundle build_laplacian(const SensorGraph& graph, bool use_weights) {
  LaplacianBundle b;
  b.L = normalized_laplacian(graph, use_weights);
  b.lambda_max = max_eigenvalue(b.L);
  b.L_tilde = rescale_laplacian(b.L, b.lambda_max);
  return b;
}

Eigen::MatrixXd cheb_matrix(const Eigen::MatrixXd& l_tilde, int k) {
  if (k < 0) throw std::invalid_argument("cheb_matrix: negative order");
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(l_tilde.rows(), l_tilde.cols());
  if (k == 0) return identity;
  if (k == 1) return l_tilde;
  Eigen::MatrixXd t_prev = identity;
  Eigen::MatrixXd t_cur = l_tilde;
  for (int i = 2; i <= k; ++i) {
    Eigen::MatrixXd t_next = 2.0 * l_tilde * t_cur - t_prev;
    t_prev = std::move(t_cur);
    t_cur = std::move(t_next);
  }
  return t_cur;
}

Eigen::MatrixXd cheb_conv(const Eigen::MatrixXd& l_tilde, const Eigen::MatrixXd& x,
                          const std::vector<Eigen::MatrixXd>& theta) {
  if (theta.empty()) throw std::invalid_argument("cheb_conv: order must be >= 1");
  if (l_tilde.rows() != x.rows()) throw std::invalid_argument("cheb_conv: node count mismatch");
  for (const auto& t : theta) {
    if (t.rows() != x.cols() || t.cols() != theta.front().cols()) {
      throw std::invalid_argument("cheb_conv: filter shape mismatch");
    }
  }
  Eigen::MatrixXd out = x * theta[0];  // T_0 = I
  if (theta.size() == 1) return out;
  Eigen::MatrixXd t_prev = x;
  Eigen::MatrixXd t_cur = l_tilde * x;  // T_1 = L_tilde
  out += t_cur * theta[1];
  for (std::size_t k = 2; k < theta.size(); ++k) {
    Eigen::MatrixXd t_next = 2.0 * (l_tilde * t_cur) - t_prev;
    out += t_next * theta[k];
    t_prev = std::move(t_cur);
    t_cur = std::move(t_next);
  }
  return out;
}

void save_edge_list(const SensorGraph& graph, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write edge list: " + path);
  out << "m " << graph.m << "\n";
  char buf[64];
  for (int i = 0; i < graph.m; ++i) {
    for (int j = i + 1; j < graph.m; ++j) {
      if (graph.W(i, j) > 0.0) {
        std::snprintf(buf, sizeof(buf), "%.17g", graph.W(i, j));
        out << i << " " << j << " " << buf << "\n";
      }
    }
  }
}

}  // namespace sofd

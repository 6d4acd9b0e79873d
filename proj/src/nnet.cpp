#include "sofd/nnet.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "sofd/rng.hpp"

namespace sofd {

namespace {

Eigen::MatrixXd glorot_uniform(long rows, long cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Eigen::MatrixXd w(rows, cols);
  for (long i = 0; i < rows; ++i) {
    for (long j = 0; j < cols; ++j) w(i, j) = rng.uniform(-bound, bound);
  }
  return w;
}

inline Eigen::MatrixXd relu(const Eigen::MatrixXd& z) { return z.cwiseMax(0.0); }

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (long i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    Eigen::ArrayXd e = (logits.row(i).array() - mx).exp();
    p.row(i) = (e / e.sum()).matrix();
  }
  return p;
}

void check_labels(const std::vector<int>& labels, long rows, int out_dim) {
  if (static_cast<long>(labels.size()) != rows) {
    throw std::invalid_argument("label count does not match batch size");
  }
  for (int y : labels) {
    if (y < 1 || y > out_dim) {
      throw std::out_of_range("label " + std::to_string(y) + " outside 1.." +
                              std::to_string(out_dim));
    }
  }
}

}  // namespace

GcnModel init_model(std::shared_ptr<const LaplacianBundle> lap, int nodes,
                    int cheb_order, const std::vector<int>& conv_channels,
                    const std::vector<int>& fc_hidden, int out_dim,
                    std::uint64_t seed) {
  if (cheb_order < 1) throw std::invalid_argument("cheb_order must be >= 1");
  if (out_dim < 1) throw std::invalid_argument("output width must be >= 1");
  if (lap && lap->L.rows() != nodes) {
    throw std::invalid_argument("laplacian size does not match node count");
  }
  GcnModel m;
  m.lap = std::move(lap);
  m.nodes = nodes;
  m.cheb_order = cheb_order;
  m.conv_widths.push_back(1);
  for (int c : conv_channels) m.conv_widths.push_back(c);

  Rng rng(mix_seed(seed, 0x10d3));
  for (std::size_t l = 0; l + 1 < m.conv_widths.size(); ++l) {
    std::vector<Eigen::MatrixXd> layer;
    for (int k = 0; k < cheb_order; ++k) {
      layer.push_back(glorot_uniform(m.conv_widths[l], m.conv_widths[l + 1], rng));
    }
    m.theta.push_back(std::move(layer));
  }

  m.fc_widths.push_back(m.flat_dim());
  for (int h : fc_hidden) m.fc_widths.push_back(h);
  m.fc_widths.push_back(out_dim);
  for (std::size_t l = 0; l + 1 < m.fc_widths.size(); ++l) {
    m.fc_w.push_back(glorot_uniform(m.fc_widths[l + 1], m.fc_widths[l], rng));
    m.fc_b.push_back(Eigen::VectorXd::Zero(m.fc_widths[l + 1]));
  }

  if (m.lap) {
    for (int k = 0; k < cheb_order; ++k) m.t_k.push_back(cheb_matrix(m.lap->L_tilde, k));
  }
  return m;
}

ForwardTrace forward(const GcnModel& model, const Eigen::MatrixXd& batch) {
  if (batch.cols() != model.nodes) {
    throw std::invalid_argument("sample dimension does not match graph node count");
  }
  const long b = batch.rows();
  const int conv_layers = static_cast<int>(model.theta.size());
  const int c_last = model.conv_widths.back();

  ForwardTrace tr;
  tr.conv_pre.resize(static_cast<std::size_t>(b));
  tr.conv_act.resize(static_cast<std::size_t>(b));
  tr.flat.resize(b, model.flat_dim());

  for (long s = 0; s < b; ++s) {
    Eigen::MatrixXd act = batch.row(s).transpose();  // m x 1 graph signal
    auto& pres = tr.conv_pre[static_cast<std::size_t>(s)];
    auto& acts = tr.conv_act[static_cast<std::size_t>(s)];
    for (int l = 0; l < conv_layers; ++l) {
      Eigen::MatrixXd pre = act * model.theta[l][0];  // T_0 = I
      for (int k = 1; k < model.cheb_order; ++k) {
        pre += model.t_k[k] * act * model.theta[l][k];
      }
      pres.push_back(pre);
      act = relu(pre);
      acts.push_back(act);
    }
    // Flatten node-major: entry (node i, channel j) lands at i*c + j.
    for (int i = 0; i < model.nodes; ++i) {
      for (int j = 0; j < c_last; ++j) {
        tr.flat(s, i * c_last + j) = conv_layers == 0 ? batch(s, i) : act(i, j);
      }
    }
  }

  Eigen::MatrixXd cur = tr.flat;
  const int fc_layers = static_cast<int>(model.fc_w.size());
  for (int l = 0; l < fc_layers; ++l) {
    Eigen::MatrixXd pre =
        (cur * model.fc_w[l].transpose()).rowwise() + model.fc_b[l].transpose();
    tr.fc_pre.push_back(pre);
    if (l + 1 < fc_layers) {
      cur = relu(pre);
      tr.fc_act.push_back(cur);
    } else {
      tr.fc_act.push_back(pre);  // logits stay linear
      cur = pre;
    }
  }
  tr.probs = softmax_rows(tr.fc_pre.back());
  return tr;
}

double ce_loss(const Eigen::MatrixXd& probs, const std::vector<int>& labels) {
  check_labels(labels, probs.rows(), static_cast<int>(probs.cols()));
  double total = 0.0;
  for (long i = 0; i < probs.rows(); ++i) {
    double p = probs(i, labels[static_cast<std::size_t>(i)] - 1);
    p = std::min(std::max(p, 1e-12), 1.0);
    total -= std::log(p);
  }
  return total / static_cast<double>(probs.rows());
}

GcnGrads GcnGrads::zeros_like(const GcnModel& model) {
  GcnGrads g;
  for (const auto& layer : model.theta) {
    std::vector<Eigen::MatrixXd> zl;
    for (const auto& t : layer) zl.push_back(Eigen::MatrixXd::Zero(t.rows(), t.cols()));
    g.theta.push_back(std::move(zl));
  }
  for (const auto& w : model.fc_w) g.fc_w.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  for (const auto& b : model.fc_b) g.fc_b.push_back(Eigen::VectorXd::Zero(b.size()));
  return g;
}

GcnGrads backward(const GcnModel& model, const ForwardTrace& trace,
                  const Eigen::MatrixXd& batch, const std::vector<int>& labels) {
  const long b = batch.rows();
  check_labels(labels, b, model.out_dim());
  GcnGrads g = GcnGrads::zeros_like(model);

  // Softmax + CE: d loss / d logits = (p - onehot) / N.
  Eigen::MatrixXd delta = trace.probs;
  for (long i = 0; i < b; ++i) delta(i, labels[static_cast<std::size_t>(i)] - 1) -= 1.0;
  delta /= static_cast<double>(b);

  const int fc_layers = static_cast<int>(model.fc_w.size());
  for (int l = fc_layers - 1; l >= 0; --l) {
    const Eigen::MatrixXd& input = (l == 0) ? trace.flat : trace.fc_act[static_cast<std::size_t>(l - 1)];
    g.fc_w[static_cast<std::size_t>(l)] = delta.transpose() * input;
    g.fc_b[static_cast<std::size_t>(l)] = delta.colwise().sum().transpose();
    if (l > 0) {
      Eigen::MatrixXd d_act = delta * model.fc_w[static_cast<std::size_t>(l)];
      const Eigen::MatrixXd& pre = trace.fc_pre[static_cast<std::size_t>(l - 1)];
      delta = d_act.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
    } else {
      delta = delta * model.fc_w[0];  // gradient w.r.t. the flat features
    }
  }

  const int conv_layers = static_cast<int>(model.theta.size());
  if (conv_layers == 0) return g;
  const int c_last = model.conv_widths.back();

  for (long s = 0; s < b; ++s) {
    Eigen::MatrixXd d_act(model.nodes, c_last);
    for (int i = 0; i < model.nodes; ++i) {
      for (int j = 0; j < c_last; ++j) d_act(i, j) = delta(s, i * c_last + j);
    }
    const auto& pres = trace.conv_pre[static_cast<std::size_t>(s)];
    const auto& acts = trace.conv_act[static_cast<std::size_t>(s)];
    for (int l = conv_layers - 1; l >= 0; --l) {
      const Eigen::MatrixXd d_pre =
          d_act.cwiseProduct((pres[static_cast<std::size_t>(l)].array() > 0.0).cast<double>().matrix());
      const Eigen::MatrixXd input =
          (l == 0) ? Eigen::MatrixXd(batch.row(s).transpose()) : acts[static_cast<std::size_t>(l - 1)];
      Eigen::MatrixXd d_input = Eigen::MatrixXd::Zero(input.rows(), input.cols());
      for (int k = 0; k < model.cheb_order; ++k) {
        const Eigen::MatrixXd tx = model.t_k[k] * input;
        g.theta[static_cast<std::size_t>(l)][static_cast<std::size_t>(k)] += tx.transpose() * d_pre;
        // T_k is symmetric: a polynomial of the symmetric L_tilde.
        d_input += model.t_k[k] * (d_pre * model.theta[static_cast<std::size_t>(l)][static_cast<std::size_t>(k)].transpose());
      }
      d_act = std::move(d_input);
    }
  }
  return g;
}

std::vector<ParamRef> param_refs(GcnModel& model) {
  std::vector<ParamRef> refs;
  for (auto& layer : model.theta) {
    for (auto& t : layer) refs.push_back({t.data(), t.size()});
  }
  for (auto& w : model.fc_w) refs.push_back({w.data(), w.size()});
  for (auto& b : model.fc_b) refs.push_back({b.data(), b.size()});
  return refs;
}

std::vector<ParamRef> grad_refs(GcnGrads& grads) {
  std::vector<ParamRef> refs;
  for (auto& layer : grads.theta) {
    for (auto& t : layer) refs.push_back({t.data(), t.size()});
  }
  for (auto& w : grads.fc_w) refs.push_back({w.data(), w.size()});
  for (auto& b : grads.fc_b) refs.push_back({b.data(), b.size()});
  return refs;
}

AdamState AdamState::zeros_like(GcnModel& model) {
  AdamState st;
  for (const auto& ref : param_refs(model)) {
    st.m.push_back(Eigen::ArrayXd::Zero(ref.size));
    st.v.push_back(Eigen::ArrayXd::Zero(ref.size));
  }
  return st;
}

void adam_step(GcnModel& model, GcnGrads& grads, AdamState& state,
               const TrainConfig& cfg) {
  const auto params = param_refs(model);
  const auto gs = grad_refs(grads);
  if (params.size() != state.m.size() || params.size() != gs.size()) {
    throw std::invalid_argument("adam_step: state does not match model");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (params[p].size != gs[p].size) throw std::invalid_argument("adam_step: shape mismatch");
    Eigen::Map<Eigen::ArrayXd> w(params[p].data, params[p].size);
    Eigen::Map<const Eigen::ArrayXd> grad(gs[p].data, gs[p].size);
    state.m[p] = cfg.beta1 * state.m[p] + (1.0 - cfg.beta1) * grad;
    state.v[p] = cfg.beta2 * state.v[p] + (1.0 - cfg.beta2) * grad.square();
    w -= cfg.lr * (state.m[p] / bc1) / ((state.v[p] / bc2).sqrt() + cfg.eps_adam);
  }
}

std::vector<double> train(GcnModel& model, const Eigen::MatrixXd& x,
                          const std::vector<int>& y, const TrainConfig& cfg) {
  if (x.rows() == 0) throw std::invalid_argument("train: empty dataset");
  check_labels(y, x.rows(), model.out_dim());
  if (cfg.batch < 1 || cfg.epochs < 1 || !(cfg.lr > 0.0)) {
    throw std::invalid_argument("train: invalid config");
  }

  AdamState state = AdamState::zeros_like(model);
  Rng shuffle_rng(mix_seed(cfg.seed, 0x7a11));
  const long n = x.rows();
  std::vector<long> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  std::vector<double> history;
  history.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (long start = 0; start < n; start += cfg.batch) {
      const long bsize = std::min<long>(cfg.batch, n - start);
      Eigen::MatrixXd xb(bsize, x.cols());
      std::vector<int> yb(static_cast<std::size_t>(bsize));
      for (long i = 0; i < bsize; ++i) {
        xb.row(i) = x.row(order[static_cast<std::size_t>(start + i)]);
        yb[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(order[static_cast<std::size_t>(start + i)])];
      }
      ForwardTrace tr = forward(model, xb);
      epoch_loss += ce_loss(tr.probs, yb) * static_cast<double>(bsize);
      GcnGrads g = backward(model, tr, xb, yb);
      adam_step(model, g, state, cfg);
    }
    history.push_back(epoch_loss / static_cast<double>(n));
  }
  return history;
}

std::pair<std::vector<int>, Eigen::MatrixXd> predict(const GcnModel& model,
                                                     const Eigen::MatrixXd& x) {
  ForwardTrace tr = forward(model, x);
  std::vector<int> labels(static_cast<std::size_t>(x.rows()));
  for (long i = 0; i < x.rows(); ++i) {
    int best = 0;
    for (int j = 1; j < tr.probs.cols(); ++j) {
      if (tr.probs(i, j) > tr.probs(i, best)) best = j;  // ties keep lowest index
    }
    labels[static_cast<std::size_t>(i)] = best + 1;
  }
  return {std::move(labels), std::move(tr.probs)};
}

namespace {

void write_tensor(std::ofstream& out, const std::string& name, const double* data,
                  long rows, long cols) {
  out << "tensor " << name << " " << rows << " " << cols << "\n";
  char buf[64];
  for (long i = 0; i < rows * cols; ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", data[i]);
    out << buf << (i + 1 == rows * cols ? "\n" : " ");
  }
}

}  // namespace

void save_model(const GcnModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model: " + path);
  out << "sofd-gcn 1\n";
  out << "nodes " << model.nodes << "\n";
  out << "cheb_order " << model.cheb_order << "\n";
  out << "conv_widths";
  for (int w : model.conv_widths) out << " " << w;
  out << "\nfc_widths";
  for (int w : model.fc_widths) out << " " << w;
  out << "\n";
  for (std::size_t l = 0; l < model.theta.size(); ++l) {
    for (std::size_t k = 0; k < model.theta[l].size(); ++k) {
      const auto& t = model.theta[l][k];
      write_tensor(out, "conv" + std::to_string(l) + ".k" + std::to_string(k),
                   t.data(), t.rows(), t.cols());
    }
  }
  for (std::size_t l = 0; l < model.fc_w.size(); ++l) {
    write_tensor(out, "fc" + std::to_string(l) + ".w", model.fc_w[l].data(),
                 model.fc_w[l].rows(), model.fc_w[l].cols());
    write_tensor(out, "fc" + std::to_string(l) + ".b", model.fc_b[l].data(),
                 model.fc_b[l].size(), 1);
  }
}

GcnModel load_model(const std::string& path,
                    std::shared_ptr<const LaplacianBundle> lap) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model: " + path);
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "sofd-gcn" || version != 1) {
    throw std::runtime_error("unrecognized model format in " + path);
  }
  GcnModel m;
  std::string key;
  in >> key >> m.nodes;
  in >> key >> m.cheb_order;
  in >> key;
  std::string line;
  std::getline(in, line);
  {
    std::stringstream ss(line);
    int w;
    while (ss >> w) m.conv_widths.push_back(w);
  }
  in >> key;
  std::getline(in, line);
  {
    std::stringstream ss(line);
    int w;
    while (ss >> w) m.fc_widths.push_back(w);
  }
  if (lap && lap->L.rows() != m.nodes) {
    throw std::runtime_error("laplacian size does not match checkpoint");
  }
  m.lap = std::move(lap);

  auto read_tensor = [&](long rows, long cols) {
    std::string tag, name;
    long r = 0, c = 0;
    in >> tag >> name >> r >> c;
    if (tag != "tensor" || r != rows || c != cols) {
      throw std::runtime_error("model tensor mismatch in " + path);
    }
    Eigen::MatrixXd t(rows, cols);
    for (long i = 0; i < rows * cols; ++i) in >> t.data()[i];
    if (!in) throw std::runtime_error("truncated model file: " + path);
    return t;
  };

  for (std::size_t l = 0; l + 1 < m.conv_widths.size(); ++l) {
    std::vector<Eigen::MatrixXd> layer;
    for (int k = 0; k < m.cheb_order; ++k) {
      layer.push_back(read_tensor(m.conv_widths[l], m.conv_widths[l + 1]));
    }
    m.theta.push_back(std::move(layer));
  }
  for (std::size_t l = 0; l + 1 < m.fc_widths.size(); ++l) {
    m.fc_w.push_back(read_tensor(m.fc_widths[l + 1], m.fc_widths[l]));
    Eigen::MatrixXd b = read_tensor(m.fc_widths[l + 1], 1);
    m.fc_b.push_back(b.col(0));
  }
  if (m.lap) {
    for (int k = 0; k < m.cheb_order; ++k) m.t_k.push_back(cheb_matrix(m.lap->L_tilde, k));
  }
  return m;
}

void save_loss_history(const std::vector<double>& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write loss history: " + path);
  out << "epoch,mean_loss\n";
  char buf[64];
  for (std::size_t i = 0; i < history.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", history[i]);
    out << (i + 1) << "," << buf << "\n";
  }
}

}  // namespace sofd

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "sofd/graph.hpp"

namespace sofd {

struct TrainConfig {
  double lr = 1e-5;
  int batch = 64;
  int epochs = 100;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  std::uint64_t seed = 1;
};

// Chebyshev conv stack followed by a fully connected classifier. Node
// features of the last conv layer are flattened into the first fc input.
// Double precision throughout; all initialization is seed-deterministic.
struct GcnModel {
  std::shared_ptr<const LaplacianBundle> lap;
  int nodes = 0;
  int cheb_order = 2;
  std::vector<int> conv_widths;  // channel chain incl input, e.g. {1,32,32,32}
  std::vector<int> fc_widths;    // width chain incl flat input and output
  std::vector<std::vector<Eigen::MatrixXd>> theta;  // [layer][k]: c_in x c_out
  std::vector<Eigen::MatrixXd> fc_w;                // out x in
  std::vector<Eigen::VectorXd> fc_b;
  std::vector<Eigen::MatrixXd> t_k;  // T_k(L_tilde), cached for the stack

  int flat_dim() const { return nodes * conv_widths.back(); }
  int out_dim() const { return fc_widths.back(); }
};

/// Fresh model; fc_hidden lists the hidden widths, out_dim the class count.
GcnModel init_model(std::shared_ptr<const LaplacianBundle> lap, int nodes,
                    int cheb_order, const std::vector<int>& conv_channels,
                    const std::vector<int>& fc_hidden, int out_dim,
                    std::uint64_t seed);

struct ForwardTrace {
  std::vector<std::vector<Eigen::MatrixXd>> conv_pre;  // [sample][layer] m x c
  std::vector<std::vector<Eigen::MatrixXd>> conv_act;
  Eigen::MatrixXd flat;                // batch x flat_dim
  std::vector<Eigen::MatrixXd> fc_pre;  // batch x width per fc layer
  std::vector<Eigen::MatrixXd> fc_act;  // post-activation; last entry = logits
  Eigen::MatrixXd probs;                // batch x out, rows sum to 1

  const Eigen::MatrixXd& logits() const { return fc_pre.back(); }
};

ForwardTrace forward(const GcnModel& model, const Eigen::MatrixXd& batch);

/// Mean cross-entropy over the batch; probabilities clamped to [1e-12, 1].
/// Labels are 1-based.
double ce_loss(const Eigen::MatrixXd& probs, const std::vector<int>& labels);

struct GcnGrads {
  std::vector<std::vector<Eigen::MatrixXd>> theta;
  std::vector<Eigen::MatrixXd> fc_w;
  std::vector<Eigen::VectorXd> fc_b;

  static GcnGrads zeros_like(const GcnModel& model);
};

GcnGrads backward(const GcnModel& model, const ForwardTrace& trace,
                  const Eigen::MatrixXd& batch, const std::vector<int>& labels);

// Flat, deterministic traversal of every trainable scalar.
struct ParamRef {
  double* data;
  long size;
};
std::vector<ParamRef> param_refs(GcnModel& model);
std::vector<ParamRef> grad_refs(GcnGrads& grads);

struct AdamState {
  std::vector<Eigen::ArrayXd> m;
  std::vector<Eigen::ArrayXd> v;
  long step = 0;

  static AdamState zeros_like(GcnModel& model);
};

void adam_step(GcnModel& model, GcnGrads& grads, AdamState& state,
               const TrainConfig& cfg);

/// Mini-batch training with per-epoch deterministic shuffling. Returns the
/// per-epoch mean sample loss.
std::vector<double> train(GcnModel& model, const Eigen::MatrixXd& x,
                          const std::vector<int>& y, const TrainConfig& cfg);

/// Argmax prediction, ties resolved toward the lowest class index.
std::pair<std::vector<int>, Eigen::MatrixXd> predict(const GcnModel& model,
                                                     const Eigen::MatrixXd& x);

void save_model(const GcnModel& model, const std::string& path);
GcnModel load_model(const std::string& path,
                    std::shared_ptr<const LaplacianBundle> lap);

void save_loss_history(const std::vector<double>& history, const std::string& path);

}  // namespace sofd

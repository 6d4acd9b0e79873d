#include <doctest.h>

#include <cmath>
#include <numeric>

#include "sofd/nnet.hpp"
#include "sofd/rng.hpp"

using namespace sofd;

namespace {

std::shared_ptr<const LaplacianBundle> toy_laplacian(int m, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      const double dist = rng.uniform(0.0, 3.0);
      d(i, j) = dist;
      d(j, i) = dist;
    }
  }
  const SensorGraph g = gaussian_weights(d, 10.0, 0.3);
  return std::make_shared<LaplacianBundle>(build_laplacian(g, true));
}

Eigen::MatrixXd random_batch(long rows, long cols, Rng& rng) {
  Eigen::MatrixXd x(rows, cols);
  for (long i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  return x;
}

// Zero-initialized biases put dead samples exactly on the ReLU kink where a
// finite difference is not a derivative; gradients are checked at a generic
// point instead.
void randomize_biases(GcnModel& model, Rng& rng) {
  for (auto& b : model.fc_b) {
    for (long i = 0; i < b.size(); ++i) b[i] = rng.uniform(-0.5, 0.5);
  }
}

// Worst relative gradient error over every parameter, with a small-magnitude
// floor in the denominator so finite-difference noise on near-zero gradients
// does not dominate.
double max_gradcheck_error(GcnModel& model, const Eigen::MatrixXd& batch,
                           const std::vector<int>& labels) {
  const ForwardTrace tr = forward(model, batch);
  GcnGrads analytic = backward(model, tr, batch, labels);
  const auto params = param_refs(model);
  const auto grads = grad_refs(analytic);

  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (long i = 0; i < params[p].size; ++i) {
      double& w = params[p].data[i];
      const double saved = w;
      w = saved + h;
      const double up = ce_loss(forward(model, batch).probs, labels);
      w = saved - h;
      const double down = ce_loss(forward(model, batch).probs, labels);
      w = saved;
      const double fd = (up - down) / (2.0 * h);
      const double an = grads[p].data[i];
      const double rel = std::fabs(an - fd) / std::max({std::fabs(an), std::fabs(fd), 1e-3});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("forward shapes and zero-input softmax") {
  auto lap = toy_laplacian(4, 5);
  GcnModel model = init_model(lap, 4, 2, {3, 3}, {5}, 3, 1);
  // Zero input + zero biases -> uniform softmax.
  const Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(2, 4);
  const ForwardTrace tr = forward(model, zeros);
  CHECK(tr.probs.rows() == 2);
  CHECK(tr.probs.cols() == 3);
  for (long i = 0; i < 2; ++i) {
    for (long j = 0; j < 3; ++j) CHECK(tr.probs(i, j) == doctest::Approx(1.0 / 3.0));
  }
  CHECK(tr.fc_act.size() == 2);       // hidden + logits
  CHECK(tr.fc_act[0].cols() == 5);
  CHECK(tr.flat.cols() == 4 * 3);

  Eigen::MatrixXd wrong(2, 5);
  CHECK_THROWS(forward(model, wrong));
}

TEST_CASE("softmax rows sum to one") {
  auto lap = toy_laplacian(5, 7);
  GcnModel model = init_model(lap, 5, 2, {4, 4}, {6}, 4, 3);
  Rng rng(9);
  const Eigen::MatrixXd batch = random_batch(16, 5, rng);
  const ForwardTrace tr = forward(model, batch);
  for (long i = 0; i < tr.probs.rows(); ++i) {
    CHECK(tr.probs.row(i).sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(tr.probs.row(i).minCoeff() >= 0.0);
  }
}

TEST_CASE("single-sample forward equals the batched row") {
  auto lap = toy_laplacian(6, 11);
  GcnModel model = init_model(lap, 6, 3, {4, 4}, {8, 4}, 3, 5);
  Rng rng(13);
  const Eigen::MatrixXd batch = random_batch(7, 6, rng);
  const ForwardTrace full = forward(model, batch);
  for (long s = 0; s < batch.rows(); ++s) {
    const ForwardTrace one = forward(model, batch.row(s));
    CHECK((one.probs.row(0) - full.probs.row(s)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((one.logits().row(0) - full.logits().row(s)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("cross-entropy closed forms") {
  Eigen::MatrixXd uniform(1, 3);
  uniform << 1.0 / 3, 1.0 / 3, 1.0 / 3;
  CHECK(ce_loss(uniform, {1}) == doctest::Approx(std::log(3.0)).epsilon(1e-12));

  Eigen::MatrixXd perfect(1, 3);
  perfect << 0, 1, 0;
  CHECK(ce_loss(perfect, {2}) == doctest::Approx(0.0).epsilon(1e-12));

  // Mean of two single-sample losses.
  Eigen::MatrixXd two(2, 2);
  two << 0.7, 0.3, 0.2, 0.8;
  const double a = -std::log(0.7), b = -std::log(0.8);
  CHECK(ce_loss(two, {1, 2}) == doctest::Approx((a + b) / 2.0).epsilon(1e-12));

  CHECK_THROWS(ce_loss(two, {1, 3}));
  CHECK_THROWS(ce_loss(two, {0, 1}));
}

TEST_CASE("softmax-CE gradient closed form on a linear model") {
  // No conv layers, no hidden fc: logits = W x + b.
  auto lap = std::shared_ptr<const LaplacianBundle>();
  GcnModel model = init_model(lap, 4, 2, {}, {}, 3, 7);
  Rng rng(15);
  const Eigen::MatrixXd batch = random_batch(1, 4, rng);
  const std::vector<int> labels = {2};
  const ForwardTrace tr = forward(model, batch);
  const GcnGrads g = backward(model, tr, batch, labels);
  // d loss / d b = p - onehot for a single sample.
  Eigen::VectorXd expected = tr.probs.row(0).transpose();
  expected[1] -= 1.0;
  CHECK((g.fc_b[0] - expected).cwiseAbs().maxCoeff() < 1e-12);
  // d loss / d W = (p - onehot) x^T.
  const Eigen::MatrixXd expected_w = expected * batch.row(0);
  CHECK((g.fc_w[0] - expected_w).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("analytic gradients match central finite differences") {
  // 3-node toy graphs, both fc depth patterns, orders 2 and 3.
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto lap = toy_laplacian(3, seed * 31 + 1);
    const int order = (seed % 2 == 0) ? 2 : 3;
    GcnModel model = (seed % 2 == 0)
                         ? init_model(lap, 3, order, {4, 3}, {5}, 3, seed)
                         : init_model(lap, 3, order, {4}, {6, 4}, 2, seed);
    Rng rng(seed * 7 + 3);
    randomize_biases(model, rng);
    const Eigen::MatrixXd batch = random_batch(4, 3, rng);
    std::vector<int> labels(4);
    for (auto& y : labels) y = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(model.out_dim())));
    CHECK(max_gradcheck_error(model, batch, labels) < 1e-4);
  }
}

TEST_CASE("gradients vanish on a saturated correct prediction") {
  auto lap = toy_laplacian(3, 77);
  GcnModel model = init_model(lap, 3, 2, {2}, {4}, 2, 9);
  // Drive the true logit far above the other: loss hits the clamp floor.
  model.fc_b[1][0] = 80.0;
  Eigen::MatrixXd batch = Eigen::MatrixXd::Zero(1, 3);
  const ForwardTrace tr = forward(model, batch);
  CHECK(ce_loss(tr.probs, {1}) <= 1e-12);
  GcnGrads g = backward(model, tr, batch, {1});
  double norm = 0.0;
  for (const auto& ref : grad_refs(g)) {
    for (long i = 0; i < ref.size; ++i) norm += ref.data[i] * ref.data[i];
  }
  CHECK(std::sqrt(norm) < 1e-8);
}

TEST_CASE("adam first step moves by roughly the learning rate") {
  auto lap = std::shared_ptr<const LaplacianBundle>();
  GcnModel model = init_model(lap, 2, 2, {}, {}, 2, 3);
  TrainConfig cfg;
  cfg.lr = 0.05;
  AdamState st = AdamState::zeros_like(model);
  GcnGrads g = GcnGrads::zeros_like(model);
  g.fc_w[0](0, 0) = 0.3;  // one active gradient
  const double before = model.fc_w[0](0, 0);
  adam_step(model, g, st, cfg);
  const double delta = model.fc_w[0](0, 0) - before;
  CHECK(delta < 0.0);
  CHECK(std::fabs(delta) >= 0.99 * cfg.lr);
  CHECK(std::fabs(delta) <= cfg.lr);
  CHECK(st.step == 1);

  // Zero gradient advances the counter; untouched entries stay put.
  GcnGrads zero = GcnGrads::zeros_like(model);
  const Eigen::MatrixXd snapshot = model.fc_w[0];
  adam_step(model, zero, st, cfg);
  CHECK(st.step == 2);
  CHECK(model.fc_w[0](1, 0) == snapshot(1, 0));
  CHECK(model.fc_w[0](0, 1) == snapshot(0, 1));
}

TEST_CASE("adam is deterministic across identical runs") {
  Eigen::MatrixXd results[2];
  for (int rep = 0; rep < 2; ++rep) {
    auto lap = toy_laplacian(3, 5);
    GcnModel model = init_model(lap, 3, 2, {3}, {4}, 2, 21);
    TrainConfig cfg;
    cfg.lr = 1e-2;
    cfg.seed = 33;
    AdamState st = AdamState::zeros_like(model);
    Rng rng(1);
    const Eigen::MatrixXd batch = random_batch(6, 3, rng);
    std::vector<int> labels = {1, 2, 1, 2, 1, 2};
    for (int i = 0; i < 10; ++i) {
      const ForwardTrace tr = forward(model, batch);
      GcnGrads g = backward(model, tr, batch, labels);
      adam_step(model, g, st, cfg);
    }
    results[rep] = model.fc_w[0];
  }
  CHECK(results[0] == results[1]);  // bit-identical
}

TEST_CASE("training separates a linearly separable toy problem") {
  auto lap = toy_laplacian(4, 3);
  GcnModel model = init_model(lap, 4, 2, {4}, {8}, 2, 17);
  Rng rng(29);
  const int n = 40;
  Eigen::MatrixXd x(n, 4);
  std::vector<int> y(n);
  for (int i = 0; i < n; ++i) {
    const int cls = i % 2;
    for (int j = 0; j < 4; ++j) {
      x(i, j) = 0.3 * rng.normal() + (cls == 0 ? 2.0 : -2.0);
    }
    y[static_cast<std::size_t>(i)] = cls + 1;
  }
  TrainConfig cfg;
  cfg.lr = 1e-2;  // toy scale, not the dataset default
  cfg.batch = 8;
  cfg.epochs = 100;
  cfg.seed = 2;
  const std::vector<double> history = train(model, x, y, cfg);
  CHECK(history.size() == 100);
  CHECK(history.back() < history.front());
  const auto [labels, probs] = predict(model, x);
  int correct = 0;
  for (int i = 0; i < n; ++i) correct += labels[static_cast<std::size_t>(i)] == y[static_cast<std::size_t>(i)];
  CHECK(correct == n);

  CHECK_THROWS(train(model, Eigen::MatrixXd(), {}, cfg));
}

TEST_CASE("training losses are seed-reproducible") {
  auto make = [] {
    auto lap = toy_laplacian(3, 19);
    return init_model(lap, 3, 2, {3}, {5}, 2, 4);
  };
  Rng rng(59);
  const Eigen::MatrixXd x = random_batch(30, 3, rng);
  std::vector<int> y(30);
  for (auto& v : y) v = 1 + static_cast<int>(rng.below(2));
  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.batch = 7;
  cfg.epochs = 5;
  cfg.seed = 101;
  GcnModel m1 = make(), m2 = make();
  const auto h1 = train(m1, x, y, cfg);
  const auto h2 = train(m2, x, y, cfg);
  CHECK(h1 == h2);
}

TEST_CASE("full-batch epoch loss ignores sample order") {
  auto lap = toy_laplacian(3, 23);
  Rng rng(61);
  const Eigen::MatrixXd x = random_batch(24, 3, rng);
  std::vector<int> y(24);
  for (auto& v : y) v = 1 + static_cast<int>(rng.below(2));

  // Same data in permuted storage order.
  std::vector<int> perm(24);
  std::iota(perm.begin(), perm.end(), 0);
  Rng prng(3);
  prng.shuffle(perm);
  Eigen::MatrixXd xp(24, 3);
  std::vector<int> yp(24);
  for (int i = 0; i < 24; ++i) {
    xp.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
    yp[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
  }

  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.batch = 24;  // full batch
  cfg.epochs = 3;
  cfg.seed = 5;
  GcnModel ma = init_model(lap, 3, 2, {3}, {5}, 2, 6);
  GcnModel mb = init_model(lap, 3, 2, {3}, {5}, 2, 6);
  const auto ha = train(ma, x, y, cfg);
  const auto hb = train(mb, xp, yp, cfg);
  for (std::size_t e = 0; e < ha.size(); ++e) {
    CHECK(ha[e] == doctest::Approx(hb[e]).epsilon(1e-9));
  }
}

TEST_CASE("predict follows argmax with lowest-index ties") {
  auto lap = std::shared_ptr<const LaplacianBundle>();
  GcnModel model = init_model(lap, 2, 2, {}, {}, 3, 1);
  for (auto& w : model.fc_w) w.setZero();
  model.fc_b[0] << 0.2, 0.5, 0.3;
  auto [labels1, p1] = predict(model, Eigen::MatrixXd::Zero(1, 2));
  CHECK(labels1[0] == 2);

  model.fc_b[0] << 0.5, 0.5, 0.1;  // exact tie between classes 1 and 2
  auto [labels2, p2] = predict(model, Eigen::MatrixXd::Zero(1, 2));
  CHECK(labels2[0] == 1);

  auto [again, p3] = predict(model, Eigen::MatrixXd::Zero(1, 2));
  CHECK(again == labels2);
}

TEST_CASE("unknown-aware model mirrors the base architecture") {
  auto lap = toy_laplacian(5, 67);
  GcnModel m0 = init_model(lap, 5, 2, {8, 8}, {16, 8}, 3, 40);
  GcnModel m1 = init_model(lap, 5, 2, {8, 8}, {16, 8}, 4, 41);
  CHECK(m0.conv_widths == m1.conv_widths);
  REQUIRE(m0.fc_widths.size() == m1.fc_widths.size());
  for (std::size_t i = 0; i + 1 < m0.fc_widths.size(); ++i) {
    CHECK(m0.fc_widths[i] == m1.fc_widths[i]);
  }
  CHECK(m1.fc_widths.back() == m0.fc_widths.back() + 1);
}

TEST_CASE("model checkpoints round-trip exactly") {
  auto lap = toy_laplacian(4, 71);
  GcnModel model = init_model(lap, 4, 2, {3, 2}, {6}, 3, 55);
  const std::string path = "model_roundtrip_test.txt";
  save_model(model, path);
  GcnModel loaded = load_model(path, lap);
  CHECK(loaded.conv_widths == model.conv_widths);
  CHECK(loaded.fc_widths == model.fc_widths);
  Rng rng(5);
  const Eigen::MatrixXd batch = random_batch(3, 4, rng);
  const ForwardTrace a = forward(model, batch);
  const ForwardTrace b = forward(loaded, batch);
  CHECK(a.probs == b.probs);  // bit-identical parameters
}

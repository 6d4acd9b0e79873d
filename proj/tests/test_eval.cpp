#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "sofd/eval.hpp"
#include "sofd/rng.hpp"

using namespace sofd;

TEST_CASE("confusion matrix entries and conservation") {
  const auto c = confusion_matrix({1, 2, 3, 3}, {1, 2, 3, 1}, 3);
  CHECK(c(0, 0) == 1);
  CHECK(c(1, 1) == 1);
  CHECK(c(2, 2) == 1);
  CHECK(c(2, 0) == 1);
  CHECK(c.sum() == 4);

  const auto diag = confusion_matrix({1, 2, 1}, {1, 2, 1}, 2);
  CHECK(diag(0, 1) == 0);
  CHECK(diag(1, 0) == 0);

  const auto wrong = confusion_matrix({1, 1}, {2, 2}, 2);
  CHECK(wrong(0, 0) == 0);
  CHECK(wrong(0, 1) == 2);

  CHECK_THROWS(confusion_matrix({1}, {1, 2}, 2));
  CHECK_THROWS(confusion_matrix({1, 4}, {1, 1}, 3));
  CHECK_THROWS(confusion_matrix({1, 0}, {1, 1}, 3));
}

TEST_CASE("u_recall") {
  // 27 of 30 unknowns detected.
  Eigen::MatrixXi c = Eigen::MatrixXi::Zero(3, 3);
  c(2, 2) = 27;
  c(2, 0) = 3;
  CHECK(u_recall(c) == doctest::Approx(0.9));

  // No unknown samples at all: defined as 0.
  Eigen::MatrixXi empty_row = Eigen::MatrixXi::Zero(3, 3);
  empty_row(0, 0) = 5;
  CHECK(u_recall(empty_row) == 0.0);
}

TEST_CASE("known accuracy counts unknown assignments as errors") {
  Eigen::MatrixXi c = Eigen::MatrixXi::Zero(3, 3);
  c(0, 0) = 8;
  c(0, 2) = 2;  // known sent to unknown
  c(1, 1) = 10;
  CHECK(known_acc(c) == doctest::Approx(18.0 / 20.0));

  Eigen::MatrixXi all_unknown = Eigen::MatrixXi::Zero(3, 3);
  all_unknown(0, 2) = 5;
  all_unknown(1, 2) = 5;
  CHECK(known_acc(all_unknown) == 0.0);

  Eigen::MatrixXi perfect = Eigen::MatrixXi::Zero(3, 3);
  perfect(0, 0) = 4;
  perfect(1, 1) = 6;
  CHECK(known_acc(perfect) == 1.0);
}

TEST_CASE("macro F1 hand-computed case") {
  // y_true=[1,1,2,2], y_pred=[1,2,2,2]: F1 = 2/3 and 0.8, macro 0.7333.
  const auto c = confusion_matrix({1, 1, 2, 2}, {1, 2, 2, 2}, 2);
  CHECK(macro_f1(c) == doctest::Approx(0.73333333333).epsilon(1e-9));

  const auto perfect = confusion_matrix({1, 2, 3}, {1, 2, 3}, 3);
  CHECK(macro_f1(perfect) == 1.0);

  // A class absent from both truth and prediction contributes 0.
  Eigen::MatrixXi with_empty = Eigen::MatrixXi::Zero(3, 3);
  with_empty(0, 0) = 5;
  with_empty(1, 1) = 5;
  CHECK(macro_f1(with_empty) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("metrics stay in [0,1] and ignore sample order") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 40;
    std::vector<int> t(n), p(n);
    for (int i = 0; i < n; ++i) {
      t[static_cast<std::size_t>(i)] = 1 + static_cast<int>(rng.below(4));
      p[static_cast<std::size_t>(i)] = 1 + static_cast<int>(rng.below(4));
    }
    const auto c = confusion_matrix(t, p, 4);
    for (double v : {u_recall(c), known_acc(c), macro_f1(c)}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    // Permute both vectors consistently.
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    rng.shuffle(perm);
    std::vector<int> t2(n), p2(n);
    for (int i = 0; i < n; ++i) {
      t2[static_cast<std::size_t>(i)] = t[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
      p2[static_cast<std::size_t>(i)] = p[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
    }
    CHECK(confusion_matrix(t2, p2, 4) == c);
  }
}

TEST_CASE("macro F1 is 1 exactly for diagonal confusions with occupied rows") {
  Eigen::MatrixXi diag = Eigen::MatrixXi::Zero(3, 3);
  diag(0, 0) = 1;
  diag(1, 1) = 2;
  diag(2, 2) = 3;
  CHECK(macro_f1(diag) == 1.0);
  diag(0, 1) = 1;  // any off-diagonal breaks it
  CHECK(macro_f1(diag) < 1.0);
}

TEST_CASE("report round trip is byte identical") {
  DiagnosisReport r;
  r.confusion = confusion_matrix({1, 2, 3}, {1, 2, 3}, 3);
  r.known_classes = 2;
  r.u_recall = 1.0;
  r.acc = 1.0;
  r.macro_f1 = 1.0;
  r.d_u_size = 3;
  r.d_p_size = 1;
  r.d_s_size = 1;
  r.config_hash = "deadbeefdeadbeef";
  r.seed = 42;
  r.speed = 2;
  r.flags = {"example_flag"};

  const std::string p1 = "report_test_1.json";
  const std::string p2 = "report_test_2.json";
  write_report(r, p1);
  write_report(r, p2);
  std::ifstream f1(p1), f2(p2);
  const std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  CHECK(!s1.empty());

  const DiagnosisReport back = read_report(p1);
  CHECK(back.u_recall == r.u_recall);
  CHECK(back.acc == r.acc);
  CHECK(back.macro_f1 == r.macro_f1);
  CHECK(back.confusion == r.confusion);
  CHECK(back.config_hash == r.config_hash);
  CHECK(back.seed == r.seed);
  CHECK(back.flags == r.flags);

  // Re-serializing the parsed report reproduces the bytes.
  const std::string p3 = "report_test_3.json";
  write_report(back, p3);
  std::ifstream f3(p3);
  const std::string s3((std::istreambuf_iterator<char>(f3)), std::istreambuf_iterator<char>());
  CHECK(s3 == s1);

  CHECK_THROWS(write_report(r, "/nonexistent_dir/report.json"));
}

TEST_CASE("confusion csv export") {
  const auto c = confusion_matrix({1, 2}, {1, 2}, 2);
  write_confusion_csv(c, "confusion_test.csv");
  std::ifstream in("confusion_test.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "1,0");
  std::getline(in, line);
  CHECK(line == "0,1");
}

#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "slant/classifier.hpp"
#include "slant/error.hpp"
#include "test_util.hpp"

using namespace slant;
using namespace slant::classifier;

namespace {

CountMatrix sparse(const Eigen::MatrixXd& d) {
  CountMatrix m = d.sparseView();
  m.makeCompressed();
  return m;
}

struct Problem {
  Eigen::MatrixXd x;
  std::vector<int> y;
};

Problem random_problem(std::mt19937_64& rng, Eigen::Index n, Eigen::Index k) {
  Problem p;
  p.x = oracle::gaussian(n, k, rng);
  const Eigen::VectorXd beta = oracle::gaussian(k, 1, rng);
  std::uniform_real_distribution<double> u;
  for (Eigen::Index i = 0; i < n; ++i) p.y.push_back(u(rng) < 1 / (1 + std::exp(-p.x.row(i).dot(beta))) ? 1 : 0);
  p.y[0] = 1;
  p.y[1] = 0;
  return p;
}

}  // namespace

TEST_CASE("loss examples") {
  LogisticModel m;
  m.psi = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd x(4, 2);
  x << 1, 0, 0, 1, 2, 1, 1, 3;
  auto lg = loss_and_gradient(m, sparse(x), std::vector<int>{1, 0, 1, 0});
  CHECK(lg.loss == doctest::Approx(std::log(2.0)));

  LogisticModel one;
  one.psi = Eigen::VectorXd::Constant(1, std::log(3.0));
  one.fit_intercept = false;
  Eigen::MatrixXd x1(1, 1);
  x1 << 1;
  CHECK(loss_and_gradient(one, sparse(x1), std::vector<int>{1}).loss == doctest::Approx(-std::log(0.75)));

  Eigen::MatrixXd bad(1, 1);
  bad << std::nan("");
  CHECK_THROWS_AS(loss_and_gradient(one, sparse(bad), std::vector<int>{1}), Error);
}

TEST_CASE("gradient matches central finite differences") {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 100; ++rep) {
    const auto p = random_problem(rng, 20, 10);
    LogisticModel m;
    m.psi = oracle::gaussian(10, 1, rng) * 0.5;
    m.intercept = 0.3;
    m.lambda = 0.05;
    m.penalty = rep % 2 ? Penalty::L2Norm : Penalty::SquaredL2;
    const auto lg = loss_and_gradient(m, sparse(p.x), p.y);
    const bool sq = m.penalty == Penalty::SquaredL2;
    CHECK(lg.loss == doctest::Approx(oracle::logistic_loss(m.psi, m.intercept, p.x, p.y, m.lambda, sq)).epsilon(1e-12));
    const double h = 1e-6;
    for (Eigen::Index j = 0; j < 10; ++j) {
      Eigen::VectorXd a = m.psi, b = m.psi;
      a[j] += h;
      b[j] -= h;
      const double fd = (oracle::logistic_loss(a, m.intercept, p.x, p.y, m.lambda, sq) -
                         oracle::logistic_loss(b, m.intercept, p.x, p.y, m.lambda, sq)) / (2 * h);
      CHECK(std::abs(fd - lg.grad_psi[j]) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
    const double fdb = (oracle::logistic_loss(m.psi, m.intercept + h, p.x, p.y, m.lambda, sq) -
                        oracle::logistic_loss(m.psi, m.intercept - h, p.x, p.y, m.lambda, sq)) / (2 * h);
    CHECK(std::abs(fdb - lg.grad_intercept) <= 1e-6 * std::max(1.0, std::abs(fdb)));
  }
}

TEST_CASE("train on separable data stays finite") {
  Eigen::MatrixXd x(4, 1);
  x << -2, -1, 1, 2;
  TrainOptions o;
  o.lambda = 0.1;
  auto m = train(sparse(x), std::vector<int>{0, 0, 1, 1}, o);
  CHECK(m.converged);
  CHECK(std::isfinite(m.psi[0]));
  CHECK(m.psi[0] > 0);
  CHECK(m.final_loss <= m.initial_loss);
}

TEST_CASE("ridge path is monotone and shrinks to zero") {
  std::mt19937_64 rng(10);
  for (int rep = 0; rep < 10; ++rep) {
    const auto p = random_problem(rng, 50, 20);
    double prev = std::numeric_limits<double>::infinity();
    for (int e = -4; e <= 5; ++e) {
      TrainOptions o;
      o.lambda = std::pow(10.0, e);
      auto m = train(sparse(p.x), p.y, o);
      CHECK(m.converged);
      CHECK(m.psi.norm() <= prev + 1e-8);
      prev = m.psi.norm();
    }
    TrainOptions big;
    big.lambda = 1e6;
    auto m = train(sparse(p.x), p.y, big);
    CHECK(m.psi.norm() < 1e-3);
    const double base = std::accumulate(p.y.begin(), p.y.end(), 0.0) / static_cast<double>(p.y.size());
    CHECK(sigmoid(m.intercept) == doctest::Approx(base).epsilon(1e-3));
  }
}

TEST_CASE("label flip antisymmetry without intercept") {
  std::mt19937_64 rng(12);
  const auto p = random_problem(rng, 40, 6);
  std::vector<int> flipped;
  for (int v : p.y) flipped.push_back(1 - v);
  TrainOptions o;
  o.lambda = 0.01;
  o.fit_intercept = false;
  auto a = train(sparse(p.x), p.y, o), b = train(sparse(p.x), flipped, o);
  CHECK((a.psi + b.psi).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("cross_validate grid rules") {
  std::mt19937_64 rng(13);
  const auto p = random_problem(rng, 60, 5);
  TrainOptions base;
  auto one = cross_validate(sparse(p.x), p.y, {2.0}, 5, 1, base);
  CHECK(one.best_lambda == 2.0);
  // Both values shrink psi to ~0, so accuracies tie: smaller lambda wins.
  auto tie = cross_validate(sparse(p.x), p.y, {2e6, 1e6}, 5, 1, base);
  CHECK(tie.mean_accuracy[0] == tie.mean_accuracy[1]);
  CHECK(tie.best_lambda == 1e6);
  CHECK(tie.lambdas == std::vector<double>{1e6, 2e6});
  std::vector<int> lopsided(60, 0);
  lopsided[0] = 1;
  CHECK_THROWS_AS(cross_validate(sparse(p.x), lopsided, {1.0}, 5, 1, base), Error);
  auto a = cross_validate(sparse(p.x), p.y, {0.01, 0.1}, 5, 7, base);
  auto b = cross_validate(sparse(p.x), p.y, {0.01, 0.1}, 5, 7, base);
  CHECK(a.fold_accuracy == b.fold_accuracy);
}

TEST_CASE("predict_proba") {
  features::FeatureSelector sel = features::select_top_k({"a", "b"}, std::vector<double>{2, 1}, 2);
  sel.set_scale({1, 1});
  LogisticModel m;
  m.psi = Eigen::VectorXd::Zero(2);
  m.selector_id = sel.id();
  const auto x = features::vectorize(features::TermSequence{"a", "b", "b"}, sel);
  CHECK(predict_proba(m, x) == 0.5);
  m.psi << std::log(3.0), 0;
  CHECK(predict_proba(m, features::vectorize(features::TermSequence{"a"}, sel)) == doctest::Approx(0.75));
  m.psi << 0.3, -1.2;
  m.intercept = 0.4;
  const double p = predict_proba(m, x);
  LogisticModel neg = m;
  neg.psi = -m.psi;
  neg.intercept = -m.intercept;
  CHECK(predict_proba(neg, x) == doctest::Approx(1 - p));
  m.psi << 500, 0;
  CHECK(predict_proba(m, x) < 1.0);
  features::FeatureVector foreign = x;
  foreign.selector_id ^= 1;
  CHECK_THROWS_AS(predict_proba(m, foreign), Error);
}

TEST_CASE("evaluate") {
  std::vector<double> half(10, 0.5);
  std::vector<int> y{1, 0, 1, 0, 1, 0, 1, 0, 1, 0};
  auto r = evaluate(half, y);
  CHECK(r.accuracy == 0.5);
  std::size_t occupied = 0;
  for (const auto& b : r.calibration) {
    if (b.empty) continue;
    ++occupied;
    CHECK(b.rate == 0.5);
    CHECK(b.lower == doctest::Approx(0.5));
  }
  CHECK(occupied == 1);
  CHECK(r.confusion[0][0] == 5);
  CHECK(r.confusion[1][0] == 5);

  auto perfect = evaluate(std::vector<double>{0.9, 0.1, 0.99, 0.2}, std::vector<int>{1, 0, 1, 0});
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.confusion[0][1] == 0);
  CHECK(perfect.confusion[1][0] == 0);
  std::size_t total = 0;
  for (const auto& row : perfect.confusion)
    for (auto c : row) total += c;
  CHECK(total == 4);
  for (std::size_t i = 0; i < kCalibrationBins; ++i) {
    CHECK(perfect.calibration[i].lower == doctest::Approx(0.05 * static_cast<double>(i)));
    CHECK(perfect.calibration[i].upper == doctest::Approx(0.05 * static_cast<double>(i + 1)));
  }
  auto edge = evaluate(std::vector<double>{1.0}, std::vector<int>{1});
  CHECK(edge.calibration[kCalibrationBins - 1].count == 1);
}

TEST_CASE("model persistence round trip") {
  slant_test::TempDir tmp("classifier");
  features::FeatureSelector sel = features::select_top_k({"a b", "c d"}, std::vector<double>{2, 1}, 2);
  sel.set_scale({1, 0.5});
  LogisticModel m;
  m.psi = Eigen::Vector2d(0.1234567890123, -2.5);
  m.intercept = 0.01;
  m.lambda = 2;
  m.train_size = 10;
  m.selector_id = sel.id();
  save_model(m, sel, tmp / "model.tsv");
  auto r = load_model(tmp / "model.tsv", sel);
  CHECK(r.psi == m.psi);
  CHECK(r.intercept == m.intercept);
  CHECK(r.lambda == 2);
  auto other = sel;
  other.set_scale({1, 1});
  CHECK_THROWS_AS(load_model(tmp / "model.tsv", other), Error);
  auto ranked = rank_features(m, sel);
  CHECK(ranked.front().first == "a b");
  CHECK(ranked.back().first == "c d");
}

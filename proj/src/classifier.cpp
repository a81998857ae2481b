#include "slant/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "slant/csv.hpp"
#include "slant/error.hpp"
#include "slant/hashing.hpp"

namespace slant::classifier {

namespace {

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void check_inputs(const CountMatrix& X, std::span<const int> y, Eigen::Index k) {
  if (static_cast<std::size_t>(X.rows()) != y.size())
    throw Error(fmt::format("{} feature rows but {} labels", X.rows(), y.size()));
  if (X.cols() != k) throw Error(fmt::format("{} feature columns but {} coefficients", X.cols(), k));
  for (Eigen::Index r = 0; r < X.outerSize(); ++r)
    for (CountMatrix::InnerIterator it(X, r); it; ++it)
      if (!std::isfinite(it.value())) throw Error(fmt::format("non-finite feature value at row {}", r));
  for (int v : y)
    if (v != 0 && v != 1) throw Error("labels must be 0 or 1");
}

double penalty_value(const LogisticModel& m) {
  const double sq = m.psi.squaredNorm();
  return m.penalty == Penalty::SquaredL2 ? m.lambda * sq : m.lambda * std::sqrt(sq);
}

struct Evaluation {
  double loss = 0;
  Eigen::VectorXd z;
};

Evaluation data_loss(const LogisticModel& m, const CountMatrix& X, std::span<const int> y) {
  Evaluation e;
  e.z = X * m.psi;
  e.z.array() += m.intercept;
  double sum = 0;
  for (Eigen::Index i = 0; i < e.z.size(); ++i) sum += softplus(e.z[i]) - y[static_cast<std::size_t>(i)] * e.z[i];
  e.loss = sum / static_cast<double>(y.size());
  return e;
}

LossGradient gradient_at(const LogisticModel& m, const CountMatrix& X, std::span<const int> y,
                         const Evaluation& e) {
  const auto n = static_cast<double>(y.size());
  Eigen::VectorXd resid(e.z.size());
  for (Eigen::Index i = 0; i < e.z.size(); ++i) resid[i] = sigmoid(e.z[i]) - y[static_cast<std::size_t>(i)];
  LossGradient g;
  g.loss = e.loss + penalty_value(m);
  g.grad_psi = (X.transpose() * resid) / n;
  if (m.penalty == Penalty::SquaredL2) {
    g.grad_psi += 2.0 * m.lambda * m.psi;
  } else {
    const double norm = m.psi.norm();
    if (norm > 0) g.grad_psi += m.lambda * m.psi / norm;
  }
  g.grad_intercept = m.fit_intercept ? resid.sum() / n : 0.0;
  return g;
}

}  // namespace

double LossGradient::norm() const {
  return std::sqrt(grad_psi.squaredNorm() + grad_intercept * grad_intercept);
}

double sigmoid(double z) {
  double p = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2;
  return std::clamp(p, lo, hi);
}

LossGradient loss_and_gradient(const LogisticModel& model, const CountMatrix& X, std::span<const int> y) {
  check_inputs(X, y, model.psi.size());
  return gradient_at(model, X, y, data_loss(model, X, y));
}

LogisticModel train(const CountMatrix& X, std::span<const int> y, const TrainOptions& options) {
  if (options.lambda < 0) throw Error("lambda must be nonnegative");
  const Eigen::Index k = X.cols();
  check_inputs(X, y, k);
  if (std::find(y.begin(), y.end(), 1) == y.end() || std::find(y.begin(), y.end(), 0) == y.end())
    throw Error("train: both classes must be present");

  LogisticModel m;
  m.psi = Eigen::VectorXd::Zero(k);
  m.fit_intercept = options.fit_intercept;
  m.lambda = options.lambda;
  m.penalty = options.penalty;
  m.train_size = y.size();

  const auto n = static_cast<double>(y.size());
  const Eigen::Index dim = k + (m.fit_intercept ? 1 : 0);
  Evaluation e = data_loss(m, X, y);
  m.initial_loss = e.loss + penalty_value(m);

  for (m.iterations = 0; m.iterations < options.max_iter; ++m.iterations) {
    LossGradient g = gradient_at(m, X, y, e);
    const double psi_norm = m.psi.norm();
    // With the unsquared norm, psi = 0 is optimal iff the data gradient lies in the lambda-ball.
    if (m.penalty == Penalty::L2Norm && psi_norm == 0) {
      if (g.grad_psi.norm() <= m.lambda) g.grad_psi.setZero();
      else g.grad_psi -= m.lambda * g.grad_psi.normalized();
    }
    if (g.norm() <= options.tol) {
      m.converged = true;
      break;
    }

    Eigen::VectorXd w(e.z.size());
    for (Eigen::Index i = 0; i < e.z.size(); ++i) {
      const double p = sigmoid(e.z[i]);
      w[i] = p * (1 - p) / n;
    }
    Eigen::MatrixXd H(dim, dim);
    {
      CountMatrix Xw = X;
      for (Eigen::Index r = 0; r < Xw.outerSize(); ++r) {
        const double s = std::sqrt(w[r]);
        for (CountMatrix::InnerIterator it(Xw, r); it; ++it) it.valueRef() *= s;
      }
      Eigen::SparseMatrix<double> xtx = Xw.transpose() * Xw;
      H.topLeftCorner(k, k) = Eigen::MatrixXd(xtx);
    }
    if (m.penalty == Penalty::SquaredL2) {
      H.topLeftCorner(k, k).diagonal().array() += 2.0 * m.lambda;
    } else if (psi_norm > 0) {
      const Eigen::VectorXd u = m.psi / psi_norm;
      H.topLeftCorner(k, k) += (m.lambda / psi_norm) * (Eigen::MatrixXd::Identity(k, k) - u * u.transpose());
    }
    Eigen::VectorXd grad(dim);
    grad.head(k) = g.grad_psi;
    if (m.fit_intercept) {
      const Eigen::VectorXd xw = X.transpose() * w;
      H.block(0, k, k, 1) = xw;
      H.block(k, 0, 1, k) = xw.transpose();
      H(k, k) = w.sum();
      grad[k] = g.grad_intercept;
    }

    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    Eigen::VectorXd step;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) step = -ldlt.solve(grad);
    bool newton = true;
    if (step.size() != dim || !step.allFinite() || step.dot(grad) >= 0) step = -grad, newton = false;

    const double f0 = e.loss + penalty_value(m);
    const double slope = step.dot(grad);
    // Predicted decrease below the rounding noise of the summed loss: Armijo
    // cannot tell, so trust the Newton step and let the gradient test decide.
    const bool unresolved = newton && -slope < 1e-12 * std::max(1.0, std::abs(f0));
    double t = 1.0;
    bool accepted = false;
    LogisticModel trial = m;
    Evaluation et;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      trial.psi = m.psi + t * step.head(k);
      trial.intercept = m.fit_intercept ? m.intercept + t * step[k] : 0.0;
      et = data_loss(trial, X, y);
      const double f1 = et.loss + penalty_value(trial);
      if (unresolved || f1 < f0 + 1e-4 * t * slope || (f1 == f0 && t == 1.0)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // no representable decrease; report as unconverged unless tol already met
    m.psi = trial.psi;
    m.intercept = trial.intercept;
    e = std::move(et);
  }
  m.final_loss = e.loss + penalty_value(m);
  if (!m.converged)
    spdlog::debug("logistic fit stopped after {} iterations without reaching tol {}", m.iterations, options.tol);
  return m;
}

LogisticModel train(const FeatureMatrix& X, std::span<const int> y, const TrainOptions& options) {
  auto m = train(X.X, y, options);
  m.selector_id = X.selector_id;
  return m;
}

CvResult cross_validate(const CountMatrix& X, std::span<const int> y, std::vector<double> lambda_grid,
                        int folds, std::uint64_t seed, const TrainOptions& base) {
  if (folds < 2) throw Error("cross_validate: need at least 2 folds");
  if (lambda_grid.empty()) throw Error("cross_validate: empty lambda grid");
  std::sort(lambda_grid.begin(), lambda_grid.end());
  lambda_grid.erase(std::unique(lambda_grid.begin(), lambda_grid.end()), lambda_grid.end());

  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < y.size(); ++i) (y[i] == 1 ? pos : neg).push_back(i);
  if (pos.size() < static_cast<std::size_t>(folds) || neg.size() < static_cast<std::size_t>(folds))
    throw Error(fmt::format("cross_validate: each of {} folds needs both classes ({} FNC, {} other)", folds,
                            pos.size(), neg.size()));
  std::mt19937_64 rng(seed);
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);
  std::vector<int> fold_of(y.size());
  for (std::size_t i = 0; i < pos.size(); ++i) fold_of[pos[i]] = static_cast<int>(i % folds);
  for (std::size_t i = 0; i < neg.size(); ++i) fold_of[neg[i]] = static_cast<int>(i % folds);

  auto subset = [&](const std::vector<std::size_t>& rows) {
    CountMatrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (CountMatrix::InnerIterator it(X, static_cast<Eigen::Index>(rows[r])); it; ++it)
        trip.emplace_back(static_cast<int>(r), static_cast<int>(it.col()), it.value());
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
  };

  struct Split {
    CountMatrix Xtr, Xte;
    std::vector<int> ytr, yte;
  };
  std::vector<Split> splits(static_cast<std::size_t>(folds));
  for (int f = 0; f < folds; ++f) {
    std::vector<std::size_t> tr, te;
    for (std::size_t i = 0; i < y.size(); ++i) (fold_of[i] == f ? te : tr).push_back(i);
    auto& s = splits[static_cast<std::size_t>(f)];
    s.Xtr = subset(tr);
    s.Xte = subset(te);
    for (auto i : tr) s.ytr.push_back(y[i]);
    for (auto i : te) s.yte.push_back(y[i]);
  }

  CvResult res;
  res.lambdas = lambda_grid;
  double best = -1;
  for (double lambda : lambda_grid) {
    TrainOptions opt = base;
    opt.lambda = lambda;
    std::vector<double> acc;
    for (const auto& s : splits) {
      auto m = train(s.Xtr, s.ytr, opt);
      const Eigen::VectorXd p = predict_proba(m, s.Xte);
      acc.push_back(evaluate(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())), s.yte).accuracy);
    }
    const double mean = std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
    res.mean_accuracy.push_back(mean);
    res.fold_accuracy.push_back(std::move(acc));
    if (mean > best) {
      best = mean;
      res.best_lambda = lambda;
    }
  }
  return res;
}

double predict_proba(const LogisticModel& model, const FeatureVector& x) {
  if (x.selector_id != model.selector_id)
    throw Error(fmt::format("feature vector built with selector {} but model expects {}", to_hex64(x.selector_id),
                            to_hex64(model.selector_id)));
  double z = model.intercept;
  for (const auto& [i, v] : x.entries) z += model.psi[i] * v;
  return sigmoid(z);
}

Eigen::VectorXd predict_proba(const LogisticModel& model, const CountMatrix& X) {
  if (X.cols() != model.psi.size()) throw Error("predict_proba: feature dimension mismatch");
  Eigen::VectorXd z = X * model.psi;
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = sigmoid(z[i] + model.intercept);
  return z;
}

Eigen::VectorXd predict_proba(const LogisticModel& model, const FeatureMatrix& X) {
  if (X.selector_id != model.selector_id)
    throw Error(fmt::format("feature matrix built with selector {} but model expects {}", to_hex64(X.selector_id),
                            to_hex64(model.selector_id)));
  return predict_proba(model, X.X);
}

EvalReport evaluate(std::span<const double> probabilities, std::span<const int> y) {
  if (probabilities.size() != y.size()) throw Error("evaluate: size mismatch");
  if (y.empty()) throw Error("evaluate: empty test set");
  EvalReport rep;
  std::array<double, kCalibrationBins> psum{}, ysum{};
  std::size_t correct = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double p = probabilities[i];
    const int pred = p > 0.5 ? 1 : 0;
    ++rep.confusion[static_cast<std::size_t>(y[i])][static_cast<std::size_t>(pred)];
    if (pred == y[i]) ++correct;
    auto b = static_cast<std::size_t>(std::floor(p * static_cast<double>(kCalibrationBins)));
    b = std::min(b, kCalibrationBins - 1);
    psum[b] += p;
    ysum[b] += y[i];
    ++rep.calibration[b].count;
  }
  rep.accuracy = static_cast<double>(correct) / static_cast<double>(y.size());
  for (std::size_t b = 0; b < kCalibrationBins; ++b) {
    auto& bin = rep.calibration[b];
    bin.lower = static_cast<double>(b) / kCalibrationBins;
    bin.upper = static_cast<double>(b + 1) / kCalibrationBins;
    bin.empty = bin.count == 0;
    if (!bin.empty) {
      bin.mean_prediction = psum[b] / static_cast<double>(bin.count);
      bin.rate = ysum[b] / static_cast<double>(bin.count);
    }
  }
  return rep;
}

EvalReport evaluate(const LogisticModel& model, const FeatureMatrix& X, std::span<const int> y) {
  Eigen::VectorXd p = predict_proba(model, X);
  return evaluate(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())), y);
}

std::vector<std::pair<std::string, double>> rank_features(const LogisticModel& model,
                                                           const features::FeatureSelector& selector) {
  if (static_cast<std::size_t>(model.psi.size()) != selector.k()) throw Error("rank_features: size mismatch");
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < selector.k(); ++i) out.emplace_back(selector.selected[i], model.psi[static_cast<Eigen::Index>(i)]);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

void save_model(const LogisticModel& model, const features::FeatureSelector& selector,
                const std::filesystem::path& path) {
  if (static_cast<std::size_t>(model.psi.size()) != selector.k()) throw Error("save_model: size mismatch");
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "#format\tslant-logit-v1\n";
  out << fmt::format("#k\t{}\n#lambda\t{}\n#penalty\t{}\n#fit_intercept\t{}\n#intercept\t{}\n", selector.k(),
                     model.lambda, model.penalty == Penalty::SquaredL2 ? "squared" : "norm",
                     model.fit_intercept ? 1 : 0, model.intercept);
  out << fmt::format("#selector_id\t{}\n#train_size\t{}\n#converged\t{}\n#iterations\t{}\n",
                     to_hex64(model.selector_id), model.train_size, model.converged ? 1 : 0, model.iterations);
  for (std::size_t i = 0; i < selector.k(); ++i)
    out << fmt::format("{}\t{}\n", selector.selected[i], model.psi[static_cast<Eigen::Index>(i)]);
}

LogisticModel load_model(const std::filesystem::path& path, const features::FeatureSelector& selector) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read model " + path.string());
  LogisticModel m;
  std::vector<double> psi;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw Error("malformed model line: " + line);
    std::string key = line.substr(0, tab), val = line.substr(tab + 1);
    if (key.front() == '#') {
      if (key == "#format" && val != "slant-logit-v1") throw Error("unsupported model format " + val);
      if (key == "#lambda") m.lambda = parse_double(val, "lambda");
      if (key == "#penalty") m.penalty = val == "norm" ? Penalty::L2Norm : Penalty::SquaredL2;
      if (key == "#fit_intercept") m.fit_intercept = val == "1";
      if (key == "#intercept") m.intercept = parse_double(val, "intercept");
      if (key == "#selector_id") m.selector_id = from_hex64(val);
      if (key == "#train_size") m.train_size = std::stoull(val);
      if (key == "#converged") m.converged = val == "1";
      if (key == "#iterations") m.iterations = std::stoi(val);
      continue;
    }
    if (row >= selector.k() || selector.selected[row] != key)
      throw Error(fmt::format("model term '{}' at row {} does not match the selector", key, row));
    psi.push_back(parse_double(val, "psi"));
    ++row;
  }
  if (row != selector.k()) throw Error("model has fewer terms than the selector");
  if (m.selector_id != selector.id()) throw Error("model selector id does not match the selector file");
  m.psi = Eigen::Map<Eigen::VectorXd>(psi.data(), static_cast<Eigen::Index>(psi.size()));
  return m;
}

}  // namespace slant::classifier

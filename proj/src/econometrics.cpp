#include "slant/econometrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include "slant/error.hpp"

namespace slant::econometrics {

double relative_measure(double fnc, double cnn, double msnbc) { return fnc - 0.5 * (cnn + msnbc); }

Eigen::VectorXd standardize(const Eigen::VectorXd& column, const Eigen::VectorXd* weights) {
  const auto n = column.size();
  if (n < 2) throw Error("standardize: need at least two values");
  double sd = 0;
  if (weights) {
    if (weights->size() != n) throw Error("standardize: weight length mismatch");
    const double sw = weights->sum();
    const double mean = weights->dot(column) / sw;
    const double var = (weights->array() * (column.array() - mean).square()).sum() / sw;
    sd = std::sqrt(var * static_cast<double>(n) / static_cast<double>(n - 1));
  } else {
    const double mean = column.mean();
    sd = std::sqrt((column.array() - mean).square().sum() / static_cast<double>(n - 1));
  }
  if (!(sd > 0) || !std::isfinite(sd)) throw Error("standardize: column has zero variance");
  return column / sd;
}

Eigen::MatrixXd within(const Eigen::MatrixXd& m, std::span<const int> groups, int n_groups, const Eigen::VectorXd& w) {
  if (static_cast<Eigen::Index>(groups.size()) != m.rows()) throw Error("within: group vector length mismatch");
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n_groups, m.cols());
  Eigen::VectorXd wsum = Eigen::VectorXd::Zero(n_groups);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const int g = groups[static_cast<std::size_t>(i)];
    sums.row(g) += w[i] * m.row(i);
    wsum[g] += w[i];
  }
  Eigen::MatrixXd out = m;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const int g = groups[static_cast<std::size_t>(i)];
    if (wsum[g] > 0) out.row(i) -= sums.row(g) / wsum[g];
  }
  return out;
}

namespace {

Eigen::MatrixXd hstack(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, Eigen::Index rows) {
  Eigen::MatrixXd out(rows, a.cols() + b.cols());
  if (a.cols() > 0) out.leftCols(a.cols()) = a;
  if (b.cols() > 0) out.rightCols(b.cols()) = b;
  return out;
}

// Throws naming the columns that are linear combinations of earlier ones.
void check_rank(const Eigen::MatrixXd& x, const Eigen::VectorXd& sw, const std::vector<std::string>& names,
                const char* what) {
  if (x.cols() == 0) return;
  // Columns scaled to unit norm so the rank threshold is unit-free.
  Eigen::MatrixXd a = sw.asDiagonal() * x;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    const double nrm = a.col(j).norm();
    if (nrm > 0) a.col(j) /= nrm;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() == a.cols()) return;
  std::vector<std::string> bad;
  // Greedy column-by-column rank check keeps the earliest columns.
  Eigen::MatrixXd basis(a.rows(), 0);
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    Eigen::VectorXd col = a.col(j);
    if (basis.cols() > 0) {
      Eigen::VectorXd coef = basis.colPivHouseholderQr().solve(col);
      col -= basis * coef;
    }
    if (col.norm() <= 1e-8) {
      bad.push_back(names[static_cast<std::size_t>(j)]);
    } else {
      basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
      basis.col(basis.cols() - 1) = a.col(j);
    }
  }
  if (bad.empty()) throw Error(fmt::format("{} is numerically rank deficient after absorbing fixed effects", what));
  throw Error(fmt::format("{} is rank deficient after absorbing fixed effects; collinear: {}", what,
                          fmt::join(bad, ", ")));
}

void validate(const Design& d) {
  const auto n = d.y.size();
  if (n == 0) throw Error("empty estimation sample");
  if (d.endog.rows() != n || d.exog.rows() != n || d.w.size() != n ||
      static_cast<Eigen::Index>(d.groups.size()) != n)
    throw Error("design blocks have inconsistent row counts");
  if ((d.w.array() < 0).any()) throw Error("negative regression weight");
  for (const auto& c : d.clusters)
    if (static_cast<Eigen::Index>(c.size()) != n) throw Error("cluster ids missing for some rows");
}

std::vector<std::string> slope_names(const Design& d) {
  std::vector<std::string> names = d.endog_names;
  names.insert(names.end(), d.exog_names.begin(), d.exog_names.end());
  names.resize(static_cast<std::size_t>(d.endog.cols() + d.exog.cols()));
  for (std::size_t j = 0; j < names.size(); ++j)
    if (names[j].empty()) names[j] = fmt::format("x{}", j);
  return names;
}

void finish(FitResult& fit, const Design& d, const Eigen::MatrixXd& score_regressors, const Eigen::MatrixXd& bread) {
  const auto n = d.y.size();
  fit.n = static_cast<std::size_t>(n);
  const std::size_t k = static_cast<std::size_t>(fit.beta.size()) + static_cast<std::size_t>(d.n_groups);
  std::vector<std::vector<int>> clusters = d.clusters;
  if (clusters.empty()) {
    std::vector<int> ids(static_cast<std::size_t>(n));
    std::iota(ids.begin(), ids.end(), 0);
    clusters.push_back(std::move(ids));
  }
  for (const auto& c : clusters) fit.n_clusters.push_back(static_cast<std::size_t>(*std::max_element(c.begin(), c.end()) + 1));
  if (fit.beta.size() > 0) {
    fit.cov_raw = cluster_cov(score_regressors, bread, fit.residuals, d.w, clusters, k);
    fit.cov = fit.cov_raw;
    fit.clipped = clip_psd(fit.cov);
    if (fit.clipped) spdlog::info("covariance had negative eigenvalues; clipped at zero");
    fit.theta = fit.beta[0];
    fit.se = std::sqrt(fit.cov(0, 0));
  } else {
    fit.theta = fit.se = std::numeric_limits<double>::quiet_NaN();
  }
  // Absorbed intercepts: weighted group means of y - X beta.
  Eigen::VectorXd level = d.y;
  if (fit.beta.size() > 0) level -= hstack(d.endog, d.exog, n) * fit.beta;
  std::vector<double> s(static_cast<std::size_t>(d.n_groups), 0.0), sw(s.size(), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    s[static_cast<std::size_t>(d.groups[static_cast<std::size_t>(i)])] += d.w[i] * level[i];
    sw[static_cast<std::size_t>(d.groups[static_cast<std::size_t>(i)])] += d.w[i];
  }
  for (std::size_t g = 0; g < s.size(); ++g) {
    const std::string key = g < d.group_labels.size() ? d.group_labels[g] : std::to_string(g);
    fit.fixed_effects[key] = sw[g] > 0 ? s[g] / sw[g] : 0.0;
  }
  fit.fitted = d.y - fit.residuals;
}

}  // namespace

FitResult wls(const Design& d) {
  validate(d);
  const auto n = d.y.size();
  FitResult fit;
  fit.names = slope_names(d);
  const Eigen::MatrixXd x = within(hstack(d.endog, d.exog, n), d.groups, d.n_groups, d.w);
  const Eigen::VectorXd y = within(d.y, d.groups, d.n_groups, d.w);
  const Eigen::VectorXd sw = d.w.cwiseSqrt();
  check_rank(x, sw, fit.names, "design matrix");
  Eigen::MatrixXd bread(0, 0);
  if (x.cols() > 0) {
    const Eigen::MatrixXd a = sw.asDiagonal() * x;
    fit.beta = a.colPivHouseholderQr().solve(sw.cwiseProduct(y));
    bread = (a.transpose() * a).ldlt().solve(Eigen::MatrixXd::Identity(x.cols(), x.cols()));
    fit.residuals = y - x * fit.beta;
  } else {
    fit.beta.resize(0);
    fit.residuals = y;
  }
  finish(fit, d, x, bread);
  return fit;
}

Eigen::VectorXd residualize(const Design& d, const Eigen::VectorXd& v) {
  Design r = d;
  r.y = v;
  r.endog.resize(v.size(), 0);
  r.endog_names.clear();
  r.instruments.resize(v.size(), 0);
  return wls(r).residuals;
}

FitResult tsls(const Design& d) {
  validate(d);
  const auto n = d.y.size();
  if (d.instruments.rows() != n) throw Error("instrument block has the wrong row count");
  if (d.instruments.cols() < d.endog.cols())
    throw Error(fmt::format("need at least {} instrument(s), got {}", d.endog.cols(), d.instruments.cols()));
  if (d.endog.cols() == 0) throw Error("2SLS needs an endogenous regressor");
  FitResult fit;
  fit.names = slope_names(d);
  const Eigen::MatrixXd r = within(hstack(d.endog, d.exog, n), d.groups, d.n_groups, d.w);
  const Eigen::MatrixXd q = within(hstack(d.instruments, d.exog, n), d.groups, d.n_groups, d.w);
  const Eigen::VectorXd y = within(d.y, d.groups, d.n_groups, d.w);
  const Eigen::VectorXd sw = d.w.cwiseSqrt();
  check_rank(r, sw, fit.names, "regressor matrix");
  std::vector<std::string> qnames = d.instrument_names;
  qnames.resize(static_cast<std::size_t>(d.instruments.cols()));
  qnames.insert(qnames.end(), fit.names.begin() + d.endog.cols(), fit.names.end());
  check_rank(q, sw, qnames, "instrument matrix");

  // Fitted regressors from the weighted projection on the instrument space.
  const Eigen::MatrixXd qw = sw.asDiagonal() * q;
  const Eigen::MatrixXd rw = sw.asDiagonal() * r;
  const Eigen::MatrixXd r_hat = q * qw.colPivHouseholderQr().solve(rw);
  const Eigen::MatrixXd r_hat_w = sw.asDiagonal() * r_hat;
  const Eigen::MatrixXd m = r_hat_w.transpose() * rw;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  if (!lu.isInvertible() || lu.rcond() < 1e-12)
    throw Error("instruments do not identify the endogenous regressors (projected design is singular)");
  fit.beta = lu.solve(r_hat_w.transpose() * sw.cwiseProduct(y));
  fit.residuals = y - r * fit.beta;
  const Eigen::MatrixXd bread = (r_hat_w.transpose() * r_hat_w).ldlt().solve(Eigen::MatrixXd::Identity(r.cols(), r.cols()));
  finish(fit, d, r_hat, bread);

  // First stage for the first endogenous regressor.
  Design fs;
  fs.y = d.endog.col(0);
  fs.endog = d.instruments;
  fs.exog = d.exog;
  fs.w = d.w;
  fs.groups = d.groups;
  fs.n_groups = d.n_groups;
  fs.endog_names = d.instrument_names;
  fs.exog_names = d.exog_names;
  fs.clusters = d.clusters;
  FitResult first = wls(fs);
  const auto l = d.instruments.cols();
  FirstStage st;
  st.delta = first.beta.head(l);
  st.cov = first.cov.topLeftCorner(l, l);
  first.first_stage = st;
  st.f = first_stage_f(first);
  fit.first_stage = st;
  fit.weak = st.f < 10;
  return fit;
}

double first_stage_f(const FitResult& fit) {
  if (!fit.first_stage) throw Error("no first stage attached to this fit");
  const auto& fs = *fit.first_stage;
  const auto l = fs.delta.size();
  if (l == 0) throw Error("first stage has no excluded instruments");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(fs.cov);
  if (!lu.isInvertible()) return std::numeric_limits<double>::infinity();
  return fs.delta.dot(lu.solve(fs.delta)) / static_cast<double>(l);
}

}  // namespace slant::econometrics

#include <algorithm>
#include <map>
#include <utility>

#include <fmt/format.h>

#include "slant/econometrics.hpp"
#include "slant/error.hpp"

namespace slant::econometrics {

namespace {

Eigen::MatrixXd one_way(const Eigen::MatrixXd& r, const Eigen::MatrixXd& bread, const Eigen::VectorXd& u,
                        const Eigen::VectorXd& w, std::span<const int> ids, std::size_t k) {
  const auto n = r.rows();
  const int g = ids.empty() ? 0 : *std::max_element(ids.begin(), ids.end()) + 1;
  if (g < 2) throw Error("cluster dimension has a single cluster");
  if (static_cast<std::size_t>(n) <= k) throw Error(fmt::format("{} rows cannot support {} parameters", n, k));
  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(g, r.cols());
  for (Eigen::Index i = 0; i < n; ++i) scores.row(ids[static_cast<std::size_t>(i)]) += (w[i] * u[i]) * r.row(i);
  const Eigen::MatrixXd meat = scores.transpose() * scores;
  const double gd = g, nd = static_cast<double>(n), kd = static_cast<double>(k);
  const double factor = gd / (gd - 1) * (nd - 1) / (nd - kd);
  return factor * bread * meat * bread;
}

}  // namespace

std::vector<int> encode(std::span<const std::string> labels) {
  std::map<std::string, int> ids;
  for (const auto& l : labels) ids.emplace(l, 0);
  int next = 0;
  for (auto& [l, id] : ids) id = next++;
  std::vector<int> out;
  out.reserve(labels.size());
  for (const auto& l : labels) out.push_back(ids.at(l));
  return out;
}

std::vector<int> intersect(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw Error("cluster dimensions differ in length");
  std::map<std::pair<int, int>, int> ids;
  for (std::size_t i = 0; i < a.size(); ++i) ids.emplace(std::pair{a[i], b[i]}, 0);
  int next = 0;
  for (auto& [key, id] : ids) id = next++;
  std::vector<int> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = ids.at({a[i], b[i]});
  return out;
}

Eigen::MatrixXd cluster_cov(const Eigen::MatrixXd& regressors, const Eigen::MatrixXd& bread,
                            const Eigen::VectorXd& residuals, const Eigen::VectorXd& w,
                            std::span<const std::vector<int>> clusters, std::size_t k) {
  const auto n = regressors.rows();
  if (residuals.size() != n || w.size() != n) throw Error("cluster_cov: length mismatch");
  if (clusters.empty() || clusters.size() > 2) throw Error("cluster_cov: need one or two cluster dimensions");
  for (const auto& c : clusters)
    if (static_cast<Eigen::Index>(c.size()) != n) throw Error("cluster_cov: cluster ids missing for some rows");
  if (clusters.size() == 1) return one_way(regressors, bread, residuals, w, clusters[0], k);
  const auto both = intersect(clusters[0], clusters[1]);
  const Eigen::MatrixXd va = one_way(regressors, bread, residuals, w, clusters[0], k);
  const Eigen::MatrixXd vb = one_way(regressors, bread, residuals, w, clusters[1], k);
  const Eigen::MatrixXd vab = one_way(regressors, bread, residuals, w, both, k);
  return va + vb - vab;
}

bool clip_psd(Eigen::MatrixXd& cov) {
  cov = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  Eigen::VectorXd ev = es.eigenvalues();
  if ((ev.array() >= 0).all()) return false;
  ev = ev.cwiseMax(0.0);
  cov = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return true;
}

}  // namespace slant::econometrics
